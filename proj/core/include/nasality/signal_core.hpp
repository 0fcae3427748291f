#pragma once

// Deterministic 1-D DSP primitives shared by the parameter-extraction
// pipelines. All arithmetic is 64-bit; every function is pure.

#include <cstddef>
#include <span>
#include <vector>

namespace nasality {

// Uniformly sampled waveform. Sample i sits at time t0_s + i / rate_hz.
struct Signal {
  std::vector<double> samples;
  double rate_hz = 0.0;
  double t0_s = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double time_at(std::size_t i) const noexcept {
    return t0_s + static_cast<double>(i) / rate_hz;
  }
  double end_time() const noexcept {
    return samples.empty() ? t0_s : time_at(samples.size() - 1);
  }
};

// Centered window; even lengths put the extra sample on the right.
struct WindowSpec {
  std::size_t length_samples = 1;
};

// Zero-phase baseline removal: a first-order low-pass (a = exp(-2*pi*fc/fs))
// run forward then backward estimates the baseline, which is subtracted.
// Ends are extended by odd reflection so linear trends carry no edge transient.
Signal highpass_baseline(const Signal& x, double cutoff_hz);

// Centered moving average, window truncated at the edges.
Signal moving_average(const Signal& x, WindowSpec w);

// sqrt(moving_average(x^2)).
Signal rms_envelope(const Signal& x, WindowSpec w);

// |x + i*H(x)| via the frequency-domain analytic signal.
Signal hilbert_envelope(const Signal& x);

// Integer-factor downsampling by non-overlapping block means. The output
// start time moves to the center of the first block.
Signal resample_to(const Signal& x, double target_rate_hz);

// Piecewise-linear interpolation at sorted query times inside the support
// of x. Exact at the original sample times.
std::vector<double> linear_interpolate(const Signal& x,
                                       std::span<const double> target_times_s);

// Linear interpolation onto a uniform grid at target_rate_hz starting at
// x.t0_s and covering the support of x.
Signal resample_linear(const Signal& x, double target_rate_hz);

// 2*(x - lo)/(hi - lo) - 1.
Signal normalize_affine(const Signal& x, double src_min, double src_max);

// Inverse of normalize_affine for the same range.
Signal denormalize_affine(const Signal& x, double src_min, double src_max);

}  // namespace nasality
