#include "nasality/physio_params.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nasality/error.hpp"
#include "nasality/evaluation.hpp"

namespace nasality {
namespace {

constexpr std::array<std::pair<TraceKind, std::string_view>, 7> kTraceKindNames{{
    {TraceKind::nasalance, "nasalance"},
    {TraceKind::voicing, "voicing"},
    {TraceKind::periodicity, "periodicity"},
    {TraceKind::aperiodicity, "aperiodicity"},
    {TraceKind::pitch, "pitch"},
    {TraceKind::hsv_intensity, "hsv_intensity"},
    {TraceKind::generic, "generic"},
}};

void require_pair(const Signal& oral, const Signal& nasal) {
  if (oral.empty() || nasal.empty()) throw InvalidInput("compute_nasalance: empty microphone signal");
  if (oral.size() != nasal.size())
    throw InvalidInput("compute_nasalance: oral and nasal lengths differ");
  if (oral.rate_hz != nasal.rate_hz)
    throw InvalidInput("compute_nasalance: oral and nasal sample rates differ");
}

Trace post_process(const Signal& source_rate, const NasalanceConfig& cfg, TraceKind kind) {
  Signal down = resample_to(source_rate, cfg.target_rate_hz);
  Signal smooth = moving_average(down, WindowSpec{cfg.smooth_window_samples});
  return Trace::from_signal(std::move(smooth), kind);
}

}  // namespace

std::string_view to_string(TraceKind kind) noexcept {
  for (const auto& [k, name] : kTraceKindNames) {
    if (k == kind) return name;
  }
  return "generic";
}

TraceKind parse_trace_kind(std::string_view name) {
  for (const auto& [k, n] : kTraceKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown trace kind '" + std::string(name) + "'");
}

void NasalanceConfig::validate() const {
  if (!(hp_cutoff_hz > 0.0)) throw ConfigError("nasalance.hp_cutoff_hz must be positive");
  if (rms_window_samples == 0) throw ConfigError("nasalance.rms_window_samples must be positive");
  if (!(target_rate_hz > 0.0)) throw ConfigError("nasalance.target_rate_hz must be positive");
  if (smooth_window_samples == 0)
    throw ConfigError("nasalance.smooth_window_samples must be positive");
}

Extraction compute_nasalance_raw(const Signal& oral, const Signal& nasal,
                                 const NasalanceConfig& cfg) {
  cfg.validate();
  require_pair(oral, nasal);

  const WindowSpec rms_window{cfg.rms_window_samples};
  const Signal rms_oral = rms_envelope(highpass_baseline(oral, cfg.hp_cutoff_hz), rms_window);
  const Signal rms_nasal = rms_envelope(highpass_baseline(nasal, cfg.hp_cutoff_hz), rms_window);

  Signal ratio{std::vector<double>(oral.size()), oral.rate_hz, oral.t0_s};
  Diagnostics diag;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    const double n = rms_nasal.samples[i];
    const double denom = n + rms_oral.samples[i];
    if (denom < kNasalanceGuard) {
      ratio.samples[i] = 0.0;
      ++diag.dead_samples;
    } else {
      ratio.samples[i] = n / denom;
    }
  }
  return Extraction{post_process(ratio, cfg, TraceKind::nasalance), diag};
}

Extraction compute_nasalance(const Signal& oral, const Signal& nasal, const NasalanceConfig& cfg) {
  Extraction raw = compute_nasalance_raw(oral, nasal, cfg);
  Signal norm = normalize_affine(raw.trace.as_signal(), 0.0, 1.0);
  for (double& v : norm.samples) v = std::clamp(v, -1.0, 1.0);
  return Extraction{Trace::from_signal(std::move(norm), TraceKind::nasalance), raw.diagnostics};
}

Extraction compute_voicing(const Signal& egg, const NasalanceConfig& cfg) {
  cfg.validate();
  if (egg.size() < 8) throw InvalidInput("compute_voicing: EGG needs at least 8 samples");

  const Signal env = hilbert_envelope(highpass_baseline(egg, cfg.hp_cutoff_hz));
  Trace trace = post_process(env, cfg, TraceKind::voicing);

  const double peak = *std::max_element(trace.values.begin(), trace.values.end());
  Diagnostics diag;
  if (!(peak > 0.0)) {
    std::fill(trace.values.begin(), trace.values.end(), -1.0);
    diag.degenerate = true;
    return Extraction{std::move(trace), diag};
  }
  for (double& v : trace.values) v = std::clamp(2.0 * v / peak - 1.0, -1.0, 1.0);
  return Extraction{std::move(trace), diag};
}

AppTraces app_surrogate(const Signal& audio, double frame_rate_hz) {
  if (audio.rate_hz != kAppSampleRate) throw InvalidInput("app_surrogate: audio must be 16 kHz");
  if (!(frame_rate_hz > 0.0)) throw InvalidInput("app_surrogate: frame rate must be positive");
  const double hop_r = audio.rate_hz / frame_rate_hz;
  if (std::abs(hop_r - std::round(hop_r)) > 1e-9)
    throw InvalidInput("app_surrogate: hop is not an integer sample count");

  const auto hop = static_cast<std::size_t>(std::round(hop_r));
  const auto frame_len = static_cast<std::size_t>(std::round(0.025 * audio.rate_hz));
  if (audio.size() < frame_len) throw InvalidInput("app_surrogate: audio shorter than one frame");

  const auto min_lag = static_cast<std::size_t>(std::ceil(audio.rate_hz / kPitchMaxHz));
  const auto max_lag = static_cast<std::size_t>(std::floor(audio.rate_hz / kPitchMinHz));
  const std::size_t n_frames = audio.size() / hop;
  const double t0 = audio.t0_s + (static_cast<double>(hop) - 1.0) / (2.0 * audio.rate_hz);

  AppTraces out;
  out.raw_periodicity.resize(n_frames);
  out.pitch_hz.assign(n_frames, 0.0);
  std::vector<double> periodicity(n_frames), aperiodicity(n_frames), pitch(n_frames);

  std::vector<double> frame(frame_len);
  std::vector<double> sq_prefix(frame_len + 1);
  std::vector<double> r(max_lag + 2, 0.0);
  const auto& x = audio.samples;
  const auto n = static_cast<std::ptrdiff_t>(x.size());

  for (std::size_t k = 0; k < n_frames; ++k) {
    // Frame centered on the middle of hop block k.
    const auto center = static_cast<std::ptrdiff_t>(k * hop + hop / 2);
    const std::ptrdiff_t start = center - static_cast<std::ptrdiff_t>(frame_len / 2);
    double energy = 0.0;
    for (std::size_t j = 0; j < frame_len; ++j) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(j);
      frame[j] = (idx >= 0 && idx < n) ? x[static_cast<std::size_t>(idx)] : 0.0;
      sq_prefix[j + 1] = sq_prefix[j] + frame[j] * frame[j];
      energy += frame[j] * frame[j];
    }

    double best = 0.0;
    std::fill(r.begin(), r.end(), 0.0);
    if (energy > 1e-10) {
      for (std::size_t lag = min_lag; lag <= max_lag && lag < frame_len; ++lag) {
        double num = 0.0;
        for (std::size_t j = 0; j + lag < frame_len; ++j) num += frame[j] * frame[j + lag];
        const double e_head = sq_prefix[frame_len - lag];
        const double e_tail = sq_prefix[frame_len] - sq_prefix[lag];
        const double den = std::sqrt(e_head * e_tail);
        r[lag] = den > 1e-12 ? num / den : 0.0;
        best = std::max(best, r[lag]);
      }
    }
    best = std::clamp(best, 0.0, 1.0);
    out.raw_periodicity[k] = best;
    periodicity[k] = 2.0 * best - 1.0;
    aperiodicity[k] = 2.0 * (1.0 - best) - 1.0;

    pitch[k] = -1.0;
    if (best >= kVoicedPeriodicity) {
      // The shortest lag at a local maximum near the global maximum avoids
      // picking a multiple of the period.
      const std::size_t last_lag = std::min(max_lag, frame_len - 1);
      for (std::size_t lag = min_lag; lag <= last_lag; ++lag) {
        const bool left_ok = lag == min_lag || r[lag] >= r[lag - 1];
        const bool right_ok = lag == last_lag || r[lag] >= r[lag + 1];
        if (!(left_ok && right_ok && r[lag] >= 0.9 * best)) continue;
        double offset = 0.0;
        if (lag > min_lag && lag < last_lag) {
          const double curv = r[lag - 1] - 2.0 * r[lag] + r[lag + 1];
          if (curv < 0.0) offset = 0.5 * (r[lag - 1] - r[lag + 1]) / curv;
        }
        const double f = std::clamp(audio.rate_hz / (static_cast<double>(lag) + offset),
                                    kPitchMinHz, kPitchMaxHz);
        out.pitch_hz[k] = f;
        pitch[k] = 2.0 * (f - kPitchMinHz) / (kPitchMaxHz - kPitchMinHz) - 1.0;
        break;
      }
    }
  }

  out.periodicity = Trace{std::move(periodicity), frame_rate_hz, t0, TraceKind::periodicity};
  out.aperiodicity = Trace{std::move(aperiodicity), frame_rate_hz, t0, TraceKind::aperiodicity};
  out.pitch = Trace{std::move(pitch), frame_rate_hz, t0, TraceKind::pitch};
  return out;
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) return 1.0;
  const double r2 = r * r;
  if (r2 >= 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(dof / (1.0 - r2));
  boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
}

CorrelationReport validate_against_hsv(const Trace& nasalance, const Trace& hsv) {
  if (nasalance.size() < 2 || hsv.size() < 2)
    throw InvalidInput("validate_against_hsv: traces need at least two samples");
  const Signal nas = nasalance.as_signal();
  const Signal bright = hsv.as_signal();
  const double lo = std::max(nas.t0_s, bright.t0_s);
  const double hi = std::min(nas.end_time(), bright.end_time());
  if (hi - lo < 1.0) throw InvalidInput("validate_against_hsv: overlap shorter than 1 s");

  std::vector<double> times;
  std::vector<double> hsv_values;
  const double slack = 1e-9 / bright.rate_hz;
  for (std::size_t i = 0; i < bright.size(); ++i) {
    const double t = bright.time_at(i);
    if (t < lo - slack || t > hi + slack) continue;
    times.push_back(std::clamp(t, nas.t0_s, nas.end_time()));
    hsv_values.push_back(bright.samples[i]);
  }
  const std::vector<double> nas_values = linear_interpolate(nas, times);

  CorrelationReport report;
  report.n = times.size();
  report.r = ppmc(nas_values, hsv_values);
  report.p_proxy = correlation_p_value(report.r, report.n);
  return report;
}

}  // namespace nasality
