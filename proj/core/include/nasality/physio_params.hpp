#pragma once

// Ground-truth physiological traces: nasalance from the oral/nasal
// microphone pair, voicing from the EGG envelope, an autocorrelation
// periodicity/pitch surrogate, and the HSV intensity validation.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nasality/signal_core.hpp"

namespace nasality {

enum class TraceKind {
  nasalance,
  voicing,
  periodicity,
  aperiodicity,
  pitch,
  hsv_intensity,
  generic,
};

std::string_view to_string(TraceKind kind) noexcept;
TraceKind parse_trace_kind(std::string_view name);

// Parameter time series. Network targets live at 100 Hz in [-1, 1].
struct Trace {
  std::vector<double> values;
  double rate_hz = 100.0;
  double t0_s = 0.0;
  TraceKind kind = TraceKind::generic;

  std::size_t size() const noexcept { return values.size(); }
  Signal as_signal() const { return Signal{values, rate_hz, t0_s}; }
  static Trace from_signal(Signal s, TraceKind kind) {
    return Trace{std::move(s.samples), s.rate_hz, s.t0_s, kind};
  }
};

struct NasalanceConfig {
  double hp_cutoff_hz = 0.1;
  std::size_t rms_window_samples = 1000;  // ~20 ms at 51.2 kHz
  double target_rate_hz = 100.0;
  std::size_t smooth_window_samples = 10;

  // Throws ConfigError when a field is non-positive.
  void validate() const;
};

struct Diagnostics {
  // Source-rate samples where RMS_nasal + RMS_oral fell under the guard.
  std::size_t dead_samples = 0;
  // Degenerate input handled by a fallback rule (e.g. all-zero EGG).
  bool degenerate = false;
};

struct Extraction {
  Trace trace;
  Diagnostics diagnostics;
};

inline constexpr double kNasalanceGuard = 1e-12;

// Raw ratio RMS_nasal / (RMS_nasal + RMS_oral) after downsampling and
// smoothing; values in [0, 1].
Extraction compute_nasalance_raw(const Signal& oral, const Signal& nasal,
                                 const NasalanceConfig& cfg = {});

// compute_nasalance_raw mapped from [0, 1] onto [-1, 1].
Extraction compute_nasalance(const Signal& oral, const Signal& nasal,
                             const NasalanceConfig& cfg = {});

// EGG envelope voicing parameter. Normalization maps [0, max envelope] of
// the utterance onto [-1, 1]; an all-zero EGG yields -1 everywhere.
Extraction compute_voicing(const Signal& egg, const NasalanceConfig& cfg = {});

// Autocorrelation stand-in for an aperiodicity/periodicity/pitch detector.
struct AppTraces {
  Trace periodicity;
  Trace aperiodicity;
  Trace pitch;
  std::vector<double> raw_periodicity;  // max normalized autocorrelation in [0, 1]
  std::vector<double> pitch_hz;         // 0 where unvoiced
};

inline constexpr double kAppSampleRate = 16000.0;
inline constexpr double kPitchMinHz = 60.0;
inline constexpr double kPitchMaxHz = 400.0;
inline constexpr double kVoicedPeriodicity = 0.3;

// 25 ms frames hopped at 1/frame_rate_hz over 16 kHz audio.
AppTraces app_surrogate(const Signal& audio, double frame_rate_hz = 100.0);

struct CorrelationReport {
  double r = 0.0;
  double p_proxy = 1.0;  // two-sided p from the t transform of r
  std::size_t n = 0;
};

// Interpolates the nasalance trace onto the HSV time grid over the common
// support and correlates. A closed port is bright, so r is expected < 0.
CorrelationReport validate_against_hsv(const Trace& nasalance, const Trace& hsv);

// Two-sided p-value for a Pearson r over n pairs via t = r*sqrt((n-2)/(1-r^2)).
double correlation_p_value(double r, std::size_t n);

}  // namespace nasality
