#pragma once

// Dilated temporal convolution network with an analytic backward pass.
//
// Stack (all convolutions stride 1, "same" zero padding):
//   C1 1x1 -> BN -> ReLU -> C2 1x1 -> BN -> ReLU
//   -> d_i (k=3, dilation 1, 4, 16) -> BN -> ReLU
//   -> C3 1x1 -> BN -> ReLU -> C4 k=3 -> BN -> ReLU
//   -> nearest upsample x4 -> C5 1x1 -> average pool 5/5 -> tanh
//
// Shape law: (B, in_channels, T) -> (B, n_targets, T * 4 / 5); with the
// default 250 AudSpec frames this lands on 200 target frames at 100 Hz.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nasality {

enum class Precision { f32, f64 };
enum class Mode { train, eval };

struct ModelConfig {
  std::size_t in_channels = 128;
  std::size_t pre_filters = 128;
  std::size_t dilated_filters = 256;
  std::vector<std::size_t> dilations{1, 4, 16};
  std::size_t kernel_dilated = 3;
  std::size_t upsample_factor = 4;
  std::size_t pool_window = 5;
  std::size_t n_targets = 5;
  Precision precision = Precision::f32;
  std::uint64_t seed = 7;
  std::size_t input_frames = 250;

  // input_frames * upsample_factor / pool_window.
  std::size_t output_frames() const noexcept {
    return input_frames * upsample_factor / pool_window;
  }
  // Throws ConfigError on an inconsistent configuration.
  void validate() const;

  // Canonical structured text (sorted-key JSON); round-trips exactly.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEps = 1e-5;

// Dense (batch, channels, time) tensor, row-major.
template <typename Real>
struct Tensor3 {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t time = 0;
  std::vector<Real> data;

  Tensor3() = default;
  Tensor3(std::size_t b, std::size_t c, std::size_t t, Real fill = Real(0))
      : batch(b), channels(c), time(t), data(b * c * t, fill) {}

  Real& at(std::size_t b, std::size_t c, std::size_t t) {
    return data[(b * channels + c) * time + t];
  }
  const Real& at(std::size_t b, std::size_t c, std::size_t t) const {
    return data[(b * channels + c) * time + t];
  }
  bool same_shape(const Tensor3& o) const noexcept {
    return batch == o.batch && channels == o.channels && time == o.time;
  }
};

// Trainable parameter array with its gradient.
template <typename Real>
struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<Real> value;
  std::span<Real> grad;
};

// Non-trainable state (batch-norm running statistics).
template <typename Real>
struct BufferView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<Real> value;
};

template <typename Real>
class Tcn {
 public:
  // Builds the stack and draws weights and biases from U(-1/sqrt(fan_in),
  // 1/sqrt(fan_in)) using cfg.seed. BN gains start at 1, biases at 0.
  explicit Tcn(const ModelConfig& cfg);
  Tcn(const Tcn&);
  Tcn& operator=(const Tcn&);
  Tcn(Tcn&&) noexcept;
  Tcn& operator=(Tcn&&) noexcept;
  ~Tcn();

  const ModelConfig& config() const noexcept;

  // Train mode normalizes with batch statistics, updates running stats and
  // caches activations for backward(). Eval mode is a pure function.
  Tensor3<Real> forward(const Tensor3<Real>& x, Mode mode);

  // Overwrites every parameter gradient with d(loss)/d(param) given
  // d(loss)/d(output). Consumes the activation cache of the last
  // train-mode forward.
  void backward(const Tensor3<Real>& upstream_grad);

  void zero_grad();

  // Sets the BN running statistics to the size-weighted average of the
  // train-mode batch statistics over `batches`, leaving parameters alone
  // and dropping the activation cache.
  void refresh_batchnorm(std::span<const Tensor3<Real>> batches);

  std::vector<ParamView<Real>> parameters();
  std::vector<BufferView<Real>> buffers();

  // Trainable scalars: conv weights and biases, BN gains and biases.
  std::size_t param_count() const;

  // Fingerprint of the ReLU on/off pattern of the last forward pass.
  std::uint64_t relu_signature() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Tcn<float>;
extern template class Tcn<double>;

template <typename Real>
Tcn<Real> build_model(const ModelConfig& cfg) {
  return Tcn<Real>(cfg);
}

template <typename Real>
std::size_t param_count(const Tcn<Real>& model) {
  return model.param_count();
}

// A single "same"-padded dilated convolution layer, exposed so the layer
// kernel can be checked in isolation. weight is [out][in][kernel].
template <typename Real>
struct Conv1dGrads {
  std::vector<Real> weight;
  std::vector<Real> bias;
  Tensor3<Real> input;
};

template <typename Real>
Tensor3<Real> conv1d_forward(const Tensor3<Real>& x, std::span<const Real> weight,
                             std::span<const Real> bias, std::size_t kernel, std::size_t dilation);

template <typename Real>
Conv1dGrads<Real> conv1d_backward(const Tensor3<Real>& x, std::span<const Real> weight,
                                  const Tensor3<Real>& dy, std::size_t kernel, std::size_t dilation);

// Train-mode batch normalization of x with batch statistics over
// (batch, time) per channel.
template <typename Real>
Tensor3<Real> batchnorm_train_forward(const Tensor3<Real>& x, std::span<const Real> gain,
                                      std::span<const Real> bias);

template <typename Real>
struct LossResult {
  double loss = 0.0;
  Tensor3<Real> grad;
};

// Mean squared error over (batch, targets, frames t < valid_frames[b]);
// gradient 2 (pred - target) / N on those entries and 0 on padding.
template <typename Real>
LossResult<Real> mse_loss(const Tensor3<Real>& pred, const Tensor3<Real>& target,
                          std::span<const std::size_t> valid_frames);

// Checkpoint: "VTCK", u32 version, config text, then named blobs
// (parameters followed by buffers) as length-prefixed little-endian f32.
template <typename Real>
void save_checkpoint(const std::string& path, Tcn<Real>& model);

template <typename Real>
Tcn<Real> load_checkpoint(const std::string& path);

// Reads only the configuration block of a checkpoint.
ModelConfig read_checkpoint_config(const std::string& path);

}  // namespace nasality
