#include "nasality/signal_core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include "nasality/error.hpp"

namespace nasality {
namespace {

void require_signal(const Signal& x, const char* op) {
  if (x.empty()) throw InvalidInput(std::string(op) + ": empty signal");
  if (!(x.rate_hz > 0.0) || !std::isfinite(x.rate_hz))
    throw InvalidInput(std::string(op) + ": sample rate must be positive");
  for (double v : x.samples) {
    if (!std::isfinite(v))
      throw InvalidInput(std::string(op) + ": non-finite sample");
  }
}

Signal like(const Signal& x, std::vector<double> samples) {
  return Signal{std::move(samples), x.rate_hz, x.t0_s};
}

// FFTW's planner is not re-entrant; plan creation and destruction are
// serialized, execution is not.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

class FftwPlan {
 public:
  explicit FftwPlan(fftw_plan p) : plan_(p) {
    if (plan_ == nullptr) throw Error("fftw: planner failed");
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  ~FftwPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

// Least-squares line through x[0], x[step], ... (count points): value at the
// first point and slope per step.
std::pair<double, double> edge_line(const double* x, std::ptrdiff_t step, std::size_t count) {
  if (count < 2) return {x[0], 0.0};
  const double n = static_cast<double>(count);
  const double km = (n - 1.0) / 2.0;
  double xm = 0.0;
  for (std::size_t k = 0; k < count; ++k) xm += x[static_cast<std::ptrdiff_t>(k) * step];
  xm /= n;
  double skx = 0.0, skk = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double dk = static_cast<double>(k) - km;
    skx += dk * (x[static_cast<std::ptrdiff_t>(k) * step] - xm);
    skk += dk * dk;
  }
  const double slope = skx / skk;
  return {xm - slope * km, slope};
}

}  // namespace

Signal highpass_baseline(const Signal& x, double cutoff_hz) {
  require_signal(x, "highpass_baseline");
  if (x.size() < 2) throw InvalidInput("highpass_baseline: need at least 2 samples");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= x.rate_hz / 2.0)
    throw InvalidInput("highpass_baseline: cutoff must lie in (0, Nyquist)");

  const std::size_t n = x.size();
  const double a = std::exp(-2.0 * std::numbers::pi * cutoff_hz / x.rate_hz);
  const double tau_samples = 1.0 / (1.0 - a);
  const std::size_t pad =
      std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(3.0 * tau_samples)));
  const std::size_t fit = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(tau_samples)));

  // Odd reflection about a line fitted to each edge rather than the edge
  // sample itself: linear drift still continues exactly, but audio ending
  // mid-cycle does not inject a DC step into the pad.
  const auto& s = x.samples;
  const double left = edge_line(s.data(), 1, fit).first;
  const double right = edge_line(s.data() + (n - 1), -1, fit).first;
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t j = 0; j < pad; ++j) ext[j] = 2.0 * left - s[pad - j];
  std::copy(s.begin(), s.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t k = 0; k < pad; ++k) ext[pad + n + k] = 2.0 * right - s[n - 2 - k];

  // Each pass starts on its steady-state track of the local line (a one-pole
  // low-pass trails a ramp by a / (1 - a) samples), so ramps pass through
  // without a start-up transient.
  const double lag = a / (1.0 - a);
  auto start_state = [&](const double* first, std::ptrdiff_t step) {
    const auto [value, slope] = edge_line(first, step, fit);
    return value - slope * (lag + 1.0);
  };
  double y = start_state(ext.data(), 1);
  for (double& v : ext) {
    y = a * y + (1.0 - a) * v;
    v = y;
  }
  y = start_state(ext.data() + (ext.size() - 1), -1);
  for (auto it = ext.rbegin(); it != ext.rend(); ++it) {
    y = a * y + (1.0 - a) * *it;
    *it = y;
  }

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] - ext[pad + i];
  return like(x, std::move(out));
}

Signal moving_average(const Signal& x, WindowSpec w) {
  require_signal(x, "moving_average");
  if (w.length_samples == 0) throw InvalidInput("moving_average: window must be >= 1");
  if (w.length_samples > x.size())
    throw InvalidInput("moving_average: window longer than signal");

  const std::size_t n = x.size();
  const std::size_t left = (w.length_samples - 1) / 2;
  const std::size_t right = w.length_samples / 2;

  // Extended-precision prefix sums keep long windows accurate.
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x.samples[i];

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= left ? i - left : 0;
    const std::size_t hi = std::min(n - 1, i + right);
    const auto count = static_cast<long double>(hi - lo + 1);
    out[i] = static_cast<double>((prefix[hi + 1] - prefix[lo]) / count);
  }
  return like(x, std::move(out));
}

Signal rms_envelope(const Signal& x, WindowSpec w) {
  require_signal(x, "rms_envelope");
  Signal sq = like(x, x.samples);
  for (double& v : sq.samples) v *= v;
  Signal out = moving_average(sq, w);
  for (double& v : out.samples) v = std::sqrt(std::max(v, 0.0));
  return out;
}

Signal hilbert_envelope(const Signal& x) {
  require_signal(x, "hilbert_envelope");
  if (x.size() < 8) throw InvalidInput("hilbert_envelope: need at least 8 samples");

  const std::size_t n = x.size();
  const std::size_t n_half = n / 2 + 1;
  auto in = fftw_buffer<double>(n);
  auto spec = fftw_buffer<fftw_complex>(n);
  auto analytic = fftw_buffer<fftw_complex>(n);

  std::unique_ptr<FftwPlan> forward;
  std::unique_ptr<FftwPlan> inverse;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = std::make_unique<FftwPlan>(fftw_plan_dft_r2c_1d(
        static_cast<int>(n), in.get(), spec.get(), FFTW_ESTIMATE));
    inverse = std::make_unique<FftwPlan>(fftw_plan_dft_1d(
        static_cast<int>(n), spec.get(), analytic.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
  }

  std::copy(x.samples.begin(), x.samples.end(), in.get());
  forward->execute();

  // Keep DC (and Nyquist for even n), double positive bins, zero the rest.
  const std::size_t last_doubled = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
  for (std::size_t k = 1; k <= last_doubled; ++k) {
    spec[k][0] *= 2.0;
    spec[k][1] *= 2.0;
  }
  for (std::size_t k = n_half; k < n; ++k) {
    spec[k][0] = 0.0;
    spec[k][1] = 0.0;
  }
  inverse->execute();

  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::hypot(analytic[i][0], analytic[i][1]) * scale;
  return like(x, std::move(out));
}

Signal resample_to(const Signal& x, double target_rate_hz) {
  require_signal(x, "resample_to");
  if (!(target_rate_hz > 0.0)) throw InvalidInput("resample_to: target rate must be positive");
  if (target_rate_hz > x.rate_hz)
    throw InvalidInput("resample_to: upsampling is not supported; use linear_interpolate");
  const double ratio = x.rate_hz / target_rate_hz;
  const double factor_r = std::round(ratio);
  if (std::abs(ratio - factor_r) > 1e-9 * ratio)
    throw InvalidInput("resample_to: source rate is not an integer multiple of the target");
  const auto factor = static_cast<std::size_t>(factor_r);
  const std::size_t n_out = x.size() / factor;
  if (n_out == 0) throw InvalidInput("resample_to: signal shorter than one block");

  std::vector<double> out(n_out);
  for (std::size_t b = 0; b < n_out; ++b) {
    double sum = 0.0;
    const double* block = x.samples.data() + b * factor;
    for (std::size_t j = 0; j < factor; ++j) sum += block[j];
    out[b] = sum / factor_r;
  }
  const double t0 = x.t0_s + (factor_r - 1.0) / (2.0 * x.rate_hz);
  return Signal{std::move(out), target_rate_hz, t0};
}

std::vector<double> linear_interpolate(const Signal& x, std::span<const double> target_times_s) {
  require_signal(x, "linear_interpolate");
  const std::size_t n = x.size();
  const double last = static_cast<double>(n - 1);
  constexpr double kSnap = 1e-9;

  std::vector<double> out;
  out.reserve(target_times_s.size());
  double prev = -std::numeric_limits<double>::infinity();
  for (double t : target_times_s) {
    if (!(t >= prev)) throw InvalidInput("linear_interpolate: query times must be sorted");
    prev = t;
    double pos = (t - x.t0_s) * x.rate_hz;
    if (pos < -kSnap || pos > last + kSnap)
      throw InvalidInput("linear_interpolate: query time outside signal support");
    const double nearest = std::nearbyint(pos);
    if (std::abs(pos - nearest) <= kSnap) {
      out.push_back(x.samples[static_cast<std::size_t>(std::clamp(nearest, 0.0, last))]);
      continue;
    }
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= n - 1) i = n - 2;
    const double frac = pos - static_cast<double>(i);
    const double a = x.samples[i];
    const double b = x.samples[i + 1];
    out.push_back(a + frac * (b - a));
  }
  return out;
}

Signal resample_linear(const Signal& x, double target_rate_hz) {
  require_signal(x, "resample_linear");
  if (!(target_rate_hz > 0.0)) throw InvalidInput("resample_linear: target rate must be positive");
  const double span_out = static_cast<double>(x.size() - 1) * target_rate_hz / x.rate_hz;
  const auto n_out = static_cast<std::size_t>(std::floor(span_out + 1e-9)) + 1;
  std::vector<double> times(n_out);
  for (std::size_t j = 0; j < n_out; ++j)
    times[j] = x.t0_s + static_cast<double>(j) / target_rate_hz;
  return Signal{linear_interpolate(x, times), target_rate_hz, x.t0_s};
}

Signal normalize_affine(const Signal& x, double src_min, double src_max) {
  if (!(src_max > src_min)) throw InvalidInput("normalize_affine: degenerate source range");
  const double span = src_max - src_min;
  Signal out = x;
  for (double& v : out.samples) v = 2.0 * (v - src_min) / span - 1.0;
  return out;
}

Signal denormalize_affine(const Signal& x, double src_min, double src_max) {
  if (!(src_max > src_min)) throw InvalidInput("denormalize_affine: degenerate source range");
  const double span = src_max - src_min;
  Signal out = x;
  for (double& v : out.samples) v = (v + 1.0) * span / 2.0 + src_min;
  return out;
}

}  // namespace nasality
