#include "nasality/tcn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "nasality/compute.hpp"
#include "nasality/error.hpp"

namespace nasality {
namespace {

// Activations are kept channel-major: rows = channels, cols = batch * time.
template <typename Real>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, Real(0)) {}
  Real* row(std::size_t r) { return data.data() + r * cols; }
  const Real* row(std::size_t r) const { return data.data() + r * cols; }
};

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Real>
struct Conv {
  std::string name;
  std::size_t in = 0, out = 0, kernel = 1, dilation = 1;
  std::vector<Real> weight, bias, weight_grad, bias_grad;  // weight [out][in][kernel]
  Mat<Real> cached_input;                                  // X or im2col(X)

  Conv() = default;
  Conv(std::string n, std::size_t i, std::size_t o, std::size_t k, std::size_t d)
      : name(std::move(n)), in(i), out(o), kernel(k), dilation(d),
        weight(o * i * k), bias(o), weight_grad(o * i * k), bias_grad(o) {}

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
    for (Real& w : weight) w = static_cast<Real>((2.0 * uniform01(rng) - 1.0) * bound);
    for (Real& b : bias) b = static_cast<Real>((2.0 * uniform01(rng) - 1.0) * bound);
  }

  std::ptrdiff_t tap_offset(std::size_t k) const {
    return (static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>((kernel - 1) / 2)) *
           static_cast<std::ptrdiff_t>(dilation);
  }

  Mat<Real> im2col(const Mat<Real>& x, std::size_t batch, std::size_t time) const {
    Mat<Real> col(in * kernel, x.cols);
    for (std::size_t i = 0; i < in; ++i) {
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t off = tap_offset(k);
        Real* dst = col.row(i * kernel + k);
        for (std::size_t b = 0; b < batch; ++b) {
          const Real* src = x.row(i) + b * time;
          Real* d = dst + b * time;
          const auto t_lo = static_cast<std::ptrdiff_t>(std::max<std::ptrdiff_t>(0, -off));
          const auto t_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(time),
                                                     static_cast<std::ptrdiff_t>(time) - off);
          if (t_hi > t_lo)
            std::memcpy(d + t_lo, src + t_lo + off, sizeof(Real) * static_cast<std::size_t>(t_hi - t_lo));
        }
      }
    }
    return col;
  }

  Mat<Real> forward(const Mat<Real>& x, std::size_t batch, std::size_t time, bool cache) {
    Mat<Real> y(out, x.cols);
    if (kernel == 1) {
      compute::gemm<Real>(false, false, out, x.cols, in, Real(1), weight.data(), in, x.data.data(),
                          x.cols, Real(0), y.data.data(), y.cols);
      if (cache) cached_input = x;
    } else {
      Mat<Real> col = im2col(x, batch, time);
      compute::gemm<Real>(false, false, out, col.cols, in * kernel, Real(1), weight.data(),
                          in * kernel, col.data.data(), col.cols, Real(0), y.data.data(), y.cols);
      if (cache) cached_input = std::move(col);
    }
    for (std::size_t o = 0; o < out; ++o) {
      Real* r = y.row(o);
      const Real b = bias[o];
      for (std::size_t c = 0; c < y.cols; ++c) r[c] += b;
    }
    return y;
  }

  // Fills weight/bias gradients; returns dX unless the input gradient is
  // not needed.
  Mat<Real> backward(const Mat<Real>& dy, std::size_t batch, std::size_t time, bool need_dx) {
    const Mat<Real>& xin = cached_input;
    const std::size_t ik = in * kernel;
    compute::gemm<Real>(false, true, out, ik, dy.cols, Real(1), dy.data.data(), dy.cols,
                        xin.data.data(), xin.cols, Real(0), weight_grad.data(), ik);
    for (std::size_t o = 0; o < out; ++o) {
      const Real* r = dy.row(o);
      double s = 0.0;
      for (std::size_t c = 0; c < dy.cols; ++c) s += r[c];
      bias_grad[o] = static_cast<Real>(s);
    }
    if (!need_dx) return {};

    if (kernel == 1) {
      Mat<Real> dx(in, dy.cols);
      compute::gemm<Real>(true, false, in, dy.cols, out, Real(1), weight.data(), in,
                          dy.data.data(), dy.cols, Real(0), dx.data.data(), dx.cols);
      return dx;
    }
    Mat<Real> dcol(ik, dy.cols);
    compute::gemm<Real>(true, false, ik, dy.cols, out, Real(1), weight.data(), ik, dy.data.data(),
                        dy.cols, Real(0), dcol.data.data(), dcol.cols);
    Mat<Real> dx(in, dy.cols);
    for (std::size_t i = 0; i < in; ++i) {
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t off = tap_offset(k);
        const Real* src = dcol.row(i * kernel + k);
        for (std::size_t b = 0; b < batch; ++b) {
          Real* d = dx.row(i) + b * time;
          const Real* s = src + b * time;
          const auto t_lo = std::max<std::ptrdiff_t>(0, -off);
          const auto t_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(time),
                                                     static_cast<std::ptrdiff_t>(time) - off);
          for (std::ptrdiff_t t = t_lo; t < t_hi; ++t) d[t + off] += s[t];
        }
      }
    }
    return dx;
  }
};

template <typename Real>
Mat<Real> to_mat(const Tensor3<Real>& x) {
  Mat<Real> m(x.channels, x.batch * x.time);
  for (std::size_t b = 0; b < x.batch; ++b)
    for (std::size_t c = 0; c < x.channels; ++c)
      std::memcpy(m.row(c) + b * x.time, x.data.data() + (b * x.channels + c) * x.time,
                  sizeof(Real) * x.time);
  return m;
}

template <typename Real>
Tensor3<Real> to_tensor(const Mat<Real>& m, std::size_t batch, std::size_t time) {
  Tensor3<Real> x(batch, m.rows, time);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < m.rows; ++c)
      std::memcpy(x.data.data() + (b * m.rows + c) * time, m.row(c) + b * time,
                  sizeof(Real) * time);
  return x;
}

template <typename Real>
Conv<Real> standalone_conv(std::size_t in, std::span<const Real> weight, std::size_t kernel,
                           std::size_t dilation) {
  if (kernel == 0 || kernel % 2 == 0 || dilation == 0)
    throw InvalidInput("conv1d: kernel must be odd and dilation positive");
  if (in == 0 || weight.size() % (in * kernel) != 0)
    throw InvalidInput("conv1d: weight size does not match in_channels * kernel");
  Conv<Real> conv("conv", in, weight.size() / (in * kernel), kernel, dilation);
  std::copy(weight.begin(), weight.end(), conv.weight.begin());
  return conv;
}

template <typename Real>
struct BatchNorm {
  std::string name;
  std::size_t channels = 0;
  std::vector<Real> gain, bias, gain_grad, bias_grad, running_mean, running_var;
  Mat<Real> xhat;
  std::vector<Real> inv_std;

  BatchNorm() = default;
  BatchNorm(std::string n, std::size_t c)
      : name(std::move(n)), channels(c), gain(c, Real(1)), bias(c, Real(0)), gain_grad(c),
        bias_grad(c), running_mean(c, Real(0)), running_var(c, Real(1)) {}

  void forward_inplace(Mat<Real>& x, bool train, double momentum) {
    const std::size_t n = x.cols;
    if (!train) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double scale = static_cast<double>(gain[c]) /
                             std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps);
        const double shift = static_cast<double>(bias[c]) - scale * running_mean[c];
        Real* r = x.row(c);
        const auto sc = static_cast<Real>(scale);
        const auto sh = static_cast<Real>(shift);
        for (std::size_t i = 0; i < n; ++i) r[i] = sc * r[i] + sh;
      }
      return;
    }
    xhat = Mat<Real>(channels, n);
    inv_std.assign(channels, Real(0));
    for (std::size_t c = 0; c < channels; ++c) {
      Real* r = x.row(c);
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += r[i];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = r[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(n);
      const double istd = 1.0 / std::sqrt(var + kBatchNormEps);
      inv_std[c] = static_cast<Real>(istd);
      Real* h = xhat.row(c);
      const Real g = gain[c];
      const Real b = bias[c];
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = static_cast<Real>((r[i] - mean) * istd);
        r[i] = g * h[i] + b;
      }
      const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
      running_mean[c] = static_cast<Real>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<Real>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    }
  }

  void backward_inplace(Mat<Real>& dy) {
    const std::size_t n = dy.cols;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < channels; ++c) {
      Real* d = dy.row(c);
      const Real* h = xhat.row(c);
      double sum_dy = 0.0, sum_dy_h = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_dy += d[i];
        sum_dy_h += static_cast<double>(d[i]) * h[i];
      }
      gain_grad[c] = static_cast<Real>(sum_dy_h);
      bias_grad[c] = static_cast<Real>(sum_dy);
      const double k = static_cast<double>(gain[c]) * inv_std[c];
      const double mean_dy = sum_dy * inv_n;
      const double mean_dy_h = sum_dy_h * inv_n;
      for (std::size_t i = 0; i < n; ++i)
        d[i] = static_cast<Real>(k * (d[i] - mean_dy - h[i] * mean_dy_h));
    }
  }
};

// Conv -> BN -> ReLU unit.
template <typename Real>
struct Block {
  Conv<Real> conv;
  BatchNorm<Real> norm;
  Mat<Real> activation;  // post-ReLU output, cached for backward
};

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

template <typename Real>
struct Tcn<Real>::Impl {
  ModelConfig cfg;
  std::vector<Block<Real>> blocks;
  Conv<Real> head;
  Mat<Real> head_output;  // tanh output
  std::size_t cached_batch = 0;
  std::size_t cached_time = 0;
  bool cache_valid = false;
  std::uint64_t relu_sig = 0;
  double bn_momentum = kBatchNormMomentum;

  explicit Impl(const ModelConfig& c) : cfg(c) {
    cfg.validate();
    auto add = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                   std::size_t d) {
      Block<Real> b;
      b.conv = Conv<Real>(name, in, out, k, d);
      b.norm = BatchNorm<Real>(name + "_bn", out);
      blocks.push_back(std::move(b));
    };
    add("c1", cfg.in_channels, cfg.pre_filters, 1, 1);
    add("c2", cfg.pre_filters, cfg.pre_filters, 1, 1);
    std::size_t width = cfg.pre_filters;
    for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
      add("d" + std::to_string(i + 1), width, cfg.dilated_filters, cfg.kernel_dilated,
          cfg.dilations[i]);
      width = cfg.dilated_filters;
    }
    add("c3", width, cfg.dilated_filters, 1, 1);
    add("c4", cfg.dilated_filters, cfg.dilated_filters, cfg.kernel_dilated, 1);
    head = Conv<Real>("c5", cfg.dilated_filters, cfg.n_targets, 1, 1);

    std::mt19937_64 rng(cfg.seed);
    for (auto& b : blocks) b.conv.init(rng);
    head.init(rng);
  }
};

template <typename Real>
Tcn<Real>::Tcn(const ModelConfig& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
template <typename Real>
Tcn<Real>::Tcn(const Tcn& o) : impl_(std::make_unique<Impl>(*o.impl_)) {}
template <typename Real>
Tcn<Real>& Tcn<Real>::operator=(const Tcn& o) {
  if (this != &o) impl_ = std::make_unique<Impl>(*o.impl_);
  return *this;
}
template <typename Real>
Tcn<Real>::Tcn(Tcn&&) noexcept = default;
template <typename Real>
Tcn<Real>& Tcn<Real>::operator=(Tcn&&) noexcept = default;
template <typename Real>
Tcn<Real>::~Tcn() = default;

template <typename Real>
const ModelConfig& Tcn<Real>::config() const noexcept {
  return impl_->cfg;
}

template <typename Real>
Tensor3<Real> Tcn<Real>::forward(const Tensor3<Real>& x, Mode mode) {
  Impl& m = *impl_;
  const ModelConfig& cfg = m.cfg;
  if (x.channels != cfg.in_channels)
    throw InvalidInput("forward: expected " + std::to_string(cfg.in_channels) + " input channels");
  if (x.batch == 0 || x.time == 0) throw InvalidInput("forward: empty input");
  if ((x.time * cfg.upsample_factor) % cfg.pool_window != 0)
    throw InvalidInput("forward: time length incompatible with upsample/pool stage");
  if (x.data.size() != x.batch * x.channels * x.time)
    throw InvalidInput("forward: tensor storage does not match its shape");
  const bool train = mode == Mode::train;
  if (train && x.batch < 2) throw InvalidInput("forward: train mode needs a batch of at least 2");

  const std::size_t batch = x.batch;
  const std::size_t time = x.time;
  m.cache_valid = false;

  Mat<Real> h(x.channels, batch * time);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < x.channels; ++c)
      std::memcpy(h.row(c) + b * time, x.data.data() + (b * x.channels + c) * time,
                  sizeof(Real) * time);

  std::uint64_t sig = 0xcbf29ce484222325ULL;
  for (auto& blk : m.blocks) {
    Mat<Real> y = blk.conv.forward(h, batch, time, train);
    blk.norm.forward_inplace(y, train, m.bn_momentum);
    std::uint64_t on = 0, pos = 0;
    for (Real& v : y.data) {
      if (v > Real(0)) {
        on += 1;
        pos += static_cast<std::uint64_t>(&v - y.data.data());
      } else {
        v = Real(0);
      }
    }
    sig = fnv1a(fnv1a(sig, on), pos);
    if (train) blk.activation = y;
    h = std::move(y);
  }
  m.relu_sig = sig;

  // Nearest-neighbour upsample.
  const std::size_t up = cfg.upsample_factor;
  const std::size_t t_up = time * up;
  Mat<Real> u(h.rows, batch * t_up);
  for (std::size_t c = 0; c < h.rows; ++c) {
    const Real* src = h.row(c);
    Real* dst = u.row(c);
    for (std::size_t i = 0; i < batch * time; ++i)
      for (std::size_t j = 0; j < up; ++j) dst[i * up + j] = src[i];
  }

  Mat<Real> z = m.head.forward(u, batch, t_up, train);

  // Average pool (window = stride) then tanh.
  const std::size_t pw = cfg.pool_window;
  const std::size_t t_out = t_up / pw;
  Mat<Real> p(z.rows, batch * t_out);
  const Real inv_pw = Real(1) / static_cast<Real>(pw);
  for (std::size_t c = 0; c < z.rows; ++c) {
    const Real* src = z.row(c);
    Real* dst = p.row(c);
    for (std::size_t i = 0; i < batch * t_out; ++i) {
      Real s = 0;
      for (std::size_t j = 0; j < pw; ++j) s += src[i * pw + j];
      dst[i] = std::tanh(s * inv_pw);
    }
  }

  Tensor3<Real> out(batch, p.rows, t_out);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < p.rows; ++c)
      std::memcpy(out.data.data() + (b * p.rows + c) * t_out, p.row(c) + b * t_out,
                  sizeof(Real) * t_out);

  if (train) {
    m.head_output = std::move(p);
    m.cached_batch = batch;
    m.cached_time = time;
    m.cache_valid = true;
  }
  return out;
}

template <typename Real>
void Tcn<Real>::refresh_batchnorm(std::span<const Tensor3<Real>> batches) {
  Impl& m = *impl_;
  std::size_t seen = 0;
  try {
    for (const auto& x : batches) {
      seen += x.batch;
      m.bn_momentum = static_cast<double>(x.batch) / static_cast<double>(seen);
      forward(x, Mode::train);
    }
  } catch (...) {
    m.bn_momentum = kBatchNormMomentum;
    m.cache_valid = false;
    throw;
  }
  m.bn_momentum = kBatchNormMomentum;
  m.cache_valid = false;
}

template <typename Real>
void Tcn<Real>::backward(const Tensor3<Real>& upstream) {
  Impl& m = *impl_;
  if (!m.cache_valid)
    throw InvalidInput("backward: no activation cache from a train-mode forward");
  const ModelConfig& cfg = m.cfg;
  const std::size_t batch = m.cached_batch;
  const std::size_t time = m.cached_time;
  const std::size_t up = cfg.upsample_factor;
  const std::size_t pw = cfg.pool_window;
  const std::size_t t_up = time * up;
  const std::size_t t_out = t_up / pw;
  if (upstream.batch != batch || upstream.channels != cfg.n_targets || upstream.time != t_out)
    throw InvalidInput("backward: upstream gradient shape does not match the last forward");
  m.cache_valid = false;

  // tanh and pooling.
  Mat<Real> dz(cfg.n_targets, batch * t_up);
  const Real inv_pw = Real(1) / static_cast<Real>(pw);
  for (std::size_t c = 0; c < cfg.n_targets; ++c) {
    const Real* y = m.head_output.row(c);
    Real* dst = dz.row(c);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < t_out; ++t) {
        const std::size_t i = b * t_out + t;
        const Real g = upstream.at(b, c, t) * (Real(1) - y[i] * y[i]) * inv_pw;
        for (std::size_t j = 0; j < pw; ++j) dst[i * pw + j] = g;
      }
    }
  }

  Mat<Real> du = m.head.backward(dz, batch, t_up, true);

  // Upsample backward: sum each repeated group.
  Mat<Real> dh(du.rows, batch * time);
  for (std::size_t c = 0; c < du.rows; ++c) {
    const Real* src = du.row(c);
    Real* dst = dh.row(c);
    for (std::size_t i = 0; i < batch * time; ++i) {
      Real s = 0;
      for (std::size_t j = 0; j < up; ++j) s += src[i * up + j];
      dst[i] = s;
    }
  }

  for (std::size_t bi = m.blocks.size(); bi-- > 0;) {
    auto& blk = m.blocks[bi];
    const Real* a = blk.activation.data.data();
    for (std::size_t i = 0; i < dh.data.size(); ++i)
      if (!(a[i] > Real(0))) dh.data[i] = Real(0);
    blk.norm.backward_inplace(dh);
    dh = blk.conv.backward(dh, batch, time, bi > 0);
  }
}

template <typename Real>
void Tcn<Real>::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), Real(0));
}

template <typename Real>
std::vector<ParamView<Real>> Tcn<Real>::parameters() {
  std::vector<ParamView<Real>> out;
  auto conv_params = [&](Conv<Real>& c) {
    out.push_back({c.name + ".weight", {c.out, c.in, c.kernel}, c.weight, c.weight_grad});
    out.push_back({c.name + ".bias", {c.out}, c.bias, c.bias_grad});
  };
  for (auto& b : impl_->blocks) {
    conv_params(b.conv);
    out.push_back({b.norm.name + ".gain", {b.norm.channels}, b.norm.gain, b.norm.gain_grad});
    out.push_back({b.norm.name + ".bias", {b.norm.channels}, b.norm.bias, b.norm.bias_grad});
  }
  conv_params(impl_->head);
  return out;
}

template <typename Real>
std::vector<BufferView<Real>> Tcn<Real>::buffers() {
  std::vector<BufferView<Real>> out;
  for (auto& b : impl_->blocks) {
    out.push_back({b.norm.name + ".running_mean", {b.norm.channels}, b.norm.running_mean});
    out.push_back({b.norm.name + ".running_var", {b.norm.channels}, b.norm.running_var});
  }
  return out;
}

template <typename Real>
std::size_t Tcn<Real>::param_count() const {
  std::size_t n = 0;
  for (const auto& b : impl_->blocks)
    n += b.conv.weight.size() + b.conv.bias.size() + 2 * b.norm.channels;
  n += impl_->head.weight.size() + impl_->head.bias.size();
  return n;
}

template <typename Real>
std::uint64_t Tcn<Real>::relu_signature() const {
  return impl_->relu_sig;
}

template <typename Real>
LossResult<Real> mse_loss(const Tensor3<Real>& pred, const Tensor3<Real>& target,
                          std::span<const std::size_t> valid_frames) {
  if (!pred.same_shape(target)) throw InvalidInput("mse_loss: prediction/target shape mismatch");
  if (valid_frames.size() != pred.batch)
    throw InvalidInput("mse_loss: one valid-frame count per batch item required");
  std::size_t count = 0;
  for (std::size_t v : valid_frames) count += std::min(v, pred.time);
  count *= pred.channels;
  if (count == 0) throw InvalidInput("mse_loss: empty mask");

  LossResult<Real> res{0.0, Tensor3<Real>(pred.batch, pred.channels, pred.time)};
  const double inv_n = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t b = 0; b < pred.batch; ++b) {
    const std::size_t valid = std::min(valid_frames[b], pred.time);
    for (std::size_t c = 0; c < pred.channels; ++c) {
      for (std::size_t t = 0; t < valid; ++t) {
        const double d = static_cast<double>(pred.at(b, c, t)) - target.at(b, c, t);
        sum += d * d;
        res.grad.at(b, c, t) = static_cast<Real>(2.0 * d * inv_n);
      }
    }
  }
  res.loss = sum * inv_n;
  return res;
}

template <typename Real>
Tensor3<Real> conv1d_forward(const Tensor3<Real>& x, std::span<const Real> weight,
                             std::span<const Real> bias, std::size_t kernel, std::size_t dilation) {
  Conv<Real> conv = standalone_conv<Real>(x.channels, weight, kernel, dilation);
  if (bias.size() != conv.out) throw InvalidInput("conv1d: bias size does not match out_channels");
  std::copy(bias.begin(), bias.end(), conv.bias.begin());
  return to_tensor(conv.forward(to_mat(x), x.batch, x.time, false), x.batch, x.time);
}

template <typename Real>
Conv1dGrads<Real> conv1d_backward(const Tensor3<Real>& x, std::span<const Real> weight,
                                  const Tensor3<Real>& dy, std::size_t kernel, std::size_t dilation) {
  Conv<Real> conv = standalone_conv<Real>(x.channels, weight, kernel, dilation);
  if (dy.batch != x.batch || dy.time != x.time || dy.channels != conv.out)
    throw InvalidInput("conv1d: output gradient shape mismatch");
  conv.forward(to_mat(x), x.batch, x.time, true);
  Mat<Real> dx = conv.backward(to_mat(dy), x.batch, x.time, true);
  return Conv1dGrads<Real>{conv.weight_grad, conv.bias_grad, to_tensor(dx, x.batch, x.time)};
}

template <typename Real>
Tensor3<Real> batchnorm_train_forward(const Tensor3<Real>& x, std::span<const Real> gain,
                                      std::span<const Real> bias) {
  if (gain.size() != x.channels || bias.size() != x.channels)
    throw InvalidInput("batchnorm: gain/bias size does not match channels");
  if (x.batch * x.time < 2) throw InvalidInput("batchnorm: need at least two values per channel");
  BatchNorm<Real> bn("bn", x.channels);
  std::copy(gain.begin(), gain.end(), bn.gain.begin());
  std::copy(bias.begin(), bias.end(), bn.bias.begin());
  Mat<Real> m = to_mat(x);
  bn.forward_inplace(m, true, kBatchNormMomentum);
  return to_tensor(m, x.batch, x.time);
}

template class Tcn<float>;
template class Tcn<double>;
template LossResult<float> mse_loss(const Tensor3<float>&, const Tensor3<float>&,
                                    std::span<const std::size_t>);
template LossResult<double> mse_loss(const Tensor3<double>&, const Tensor3<double>&,
                                     std::span<const std::size_t>);
template Tensor3<float> conv1d_forward(const Tensor3<float>&, std::span<const float>,
                                       std::span<const float>, std::size_t, std::size_t);
template Tensor3<double> conv1d_forward(const Tensor3<double>&, std::span<const double>,
                                        std::span<const double>, std::size_t, std::size_t);
template Conv1dGrads<float> conv1d_backward(const Tensor3<float>&, std::span<const float>,
                                            const Tensor3<float>&, std::size_t, std::size_t);
template Conv1dGrads<double> conv1d_backward(const Tensor3<double>&, std::span<const double>,
                                             const Tensor3<double>&, std::size_t, std::size_t);

template Tensor3<float> batchnorm_train_forward(const Tensor3<float>&, std::span<const float>,
                                                std::span<const float>);
template Tensor3<double> batchnorm_train_forward(const Tensor3<double>&, std::span<const double>,
                                                 std::span<const double>);

}  // namespace nasality
