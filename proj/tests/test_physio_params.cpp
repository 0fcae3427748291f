#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nasality/error.hpp"
#include "nasality/physio_params.hpp"
#include "support.hpp"

using namespace nasality;

namespace {

constexpr double kRate = 51200.0;

Signal scaled(Signal s, double c) {
  for (auto& v : s.samples) v *= c;
  return s;
}

// Speech-like pair: a harmonic tone with a slow amplitude contour.
Signal voice(double f0, double seconds, double depth, double phase) {
  Signal s = test::sine(1.0, f0, kRate, seconds);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / kRate;
    s.samples[i] = (1.0 + depth * std::sin(2 * test::kPi * 1.3 * t + phase)) *
                   (s.samples[i] + 0.4 * std::sin(2 * test::kPi * 3 * f0 * t));
  }
  return s;
}

}  // namespace

TEST_CASE("nasalance ratio unit behaviours") {
  const Signal s = voice(120.0, 1.0, 0.3, 0.0);
  const Signal zero{std::vector<double>(s.size(), 0.0), kRate, 0.0};

  const Extraction z = compute_nasalance_raw(s, zero);
  for (double v : z.trace.values) CHECK(v == 0.0);
  for (double v : compute_nasalance(s, zero).trace.values) CHECK(v == -1.0);

  for (double v : compute_nasalance_raw(s, s).trace.values) CHECK(v == 0.5);
  for (double v : compute_nasalance(s, s).trace.values) CHECK(v == 0.0);

  for (double v : compute_nasalance_raw(zero, s).trace.values) CHECK(v == 1.0);
}

TEST_CASE("amplitude ratio 3:1 gives raw 0.75") {
  const Signal oral = test::sine(1.0, 200.0, kRate, 2.0);
  const Signal nasal = test::sine(3.0, 200.0, kRate, 2.0);
  const Trace raw = compute_nasalance_raw(oral, nasal).trace;
  const Trace norm = compute_nasalance(oral, nasal).trace;
  for (std::size_t i = 20; i + 20 < raw.size(); ++i) {
    CHECK(raw.values[i] == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(norm.values[i] == doctest::Approx(0.5).epsilon(2e-3));
  }

  // Step-by-step oracle built from the primitives in pipeline order.
  const Signal ro = rms_envelope(highpass_baseline(oral, 0.1), {1000});
  const Signal rn = rms_envelope(highpass_baseline(nasal, 0.1), {1000});
  Signal ratio = ro;
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio.samples[i] = rn.samples[i] / (rn.samples[i] + ro.samples[i]);
  const Signal want = normalize_affine(moving_average(resample_to(ratio, 100.0), {10}), 0.0, 1.0);
  CHECK(test::max_abs_diff(norm.values, want.samples) < 1e-12);
  CHECK(norm.rate_hz == 100.0);
  CHECK(norm.kind == TraceKind::nasalance);
}

TEST_CASE("dead frames are counted and read as zero") {
  Signal silent{std::vector<double>(51200, 0.0), kRate, 0.0};
  const Extraction e = compute_nasalance_raw(silent, silent);
  CHECK(e.diagnostics.dead_samples == 51200);
  for (double v : e.trace.values) CHECK(v == 0.0);
}

TEST_CASE("gain invariance and channel-swap antisymmetry") {
  const Signal oral = voice(110.0, 1.5, 0.5, 0.0);
  const Signal nasal = scaled(voice(110.0, 1.5, 0.7, 1.7), 0.6);
  const Trace base = compute_nasalance(oral, nasal).trace;
  for (double c : {0.1, 7.3}) {
    const Trace g = compute_nasalance(scaled(oral, c), scaled(nasal, c)).trace;
    CHECK(test::max_abs_diff(g.values, base.values) < 1e-9);
  }
  const Trace swapped = compute_nasalance(nasal, oral).trace;
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(swapped.values[i] + base.values[i]) < 1e-9);
}

TEST_CASE("nasalance rejects mismatched inputs") {
  const Signal a = test::sine(1.0, 100.0, kRate, 0.5);
  const Signal b = test::sine(1.0, 100.0, kRate, 0.6);
  CHECK_THROWS_AS(compute_nasalance(a, b), InvalidInput);
  Signal c = a;
  c.rate_hz = 48000.0;
  CHECK_THROWS_AS(compute_nasalance(a, c), InvalidInput);
  NasalanceConfig bad;
  bad.rms_window_samples = 0;
  CHECK_THROWS_AS(compute_nasalance(a, a, bad), ConfigError);
}

TEST_CASE("voicing trace") {
  Signal zero{std::vector<double>(51200, 0.0), kRate, 0.0};
  const Extraction z = compute_voicing(zero);
  CHECK(z.diagnostics.degenerate);
  for (double v : z.trace.values) CHECK(v == -1.0);

  const Trace steady = compute_voicing(test::sine(0.5, 120.0, kRate, 2.0)).trace;
  for (std::size_t i = 20; i + 20 < steady.size(); ++i) CHECK(steady.values[i] > 0.98);

  // Voiced first second, silent second.
  Signal gated = test::sine(0.5, 120.0, kRate, 2.0);
  std::fill(gated.samples.begin() + 51200, gated.samples.end(), 0.0);
  const Trace g = compute_voicing(gated).trace;
  std::size_t first_low = 0, last_high = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g.t0_s + static_cast<double>(i) / 100.0;
    if (t > 0.1 && t < 0.9) CHECK(g.values[i] > 0.9);
    if (t > 1.1 && t < 1.9) CHECK(g.values[i] < -0.9);
    if (g.values[i] > 0.9) last_high = i;
    if (g.values[i] < -0.9 && first_low == 0) first_low = i;
  }
  CHECK(first_low > last_high);
  // The 10-frame smoother spreads a step over 10 frames.
  CHECK(first_low - last_high <= 10);
  for (std::size_t i = last_high; i < first_low; ++i) CHECK(g.values[i + 1] <= g.values[i]);
  for (double v : g.values) CHECK((v >= -1.0 && v <= 1.0));
}

TEST_CASE("periodicity surrogate") {
  Signal noise{test::gaussian(32000, 17, 0.3), 16000.0, 0.0};
  const AppTraces n = app_surrogate(noise);
  double mean = 0.0;
  std::size_t unvoiced = 0;
  for (std::size_t i = 0; i < n.raw_periodicity.size(); ++i) {
    mean += n.raw_periodicity[i];
    if (n.pitch.values[i] == -1.0) ++unvoiced;
  }
  mean /= static_cast<double>(n.raw_periodicity.size());
  CHECK(mean < 0.5);
  CHECK(static_cast<double>(unvoiced) >= 0.9 * static_cast<double>(n.pitch.size()));

  const AppTraces tone = app_surrogate(test::sine(0.5, 200.0, 16000.0, 1.0));
  for (std::size_t i = 3; i + 3 < tone.pitch_hz.size(); ++i) {
    CHECK(tone.raw_periodicity[i] > 0.95);
    CHECK(tone.pitch_hz[i] == doctest::Approx(200.0).epsilon(0.025));
    CHECK(tone.pitch.values[i] == doctest::Approx(2.0 * (200.0 - 60.0) / 340.0 - 1.0).epsilon(0.03));
    CHECK(tone.aperiodicity.values[i] == doctest::Approx(-tone.periodicity.values[i]).epsilon(1e-12));
  }

  const AppTraces quiet = app_surrogate(Signal{std::vector<double>(16000, 0.0), 16000.0, 0.0});
  for (std::size_t i = 0; i < quiet.pitch.size(); ++i) {
    CHECK(quiet.periodicity.values[i] == -1.0);
    CHECK(quiet.pitch.values[i] == -1.0);
  }
  CHECK_THROWS_AS(app_surrogate(Signal{std::vector<double>(100, 0.0), 16000.0, 0.0}), InvalidInput);
  CHECK_THROWS_AS(app_surrogate(Signal{std::vector<double>(1000, 0.0), 8000.0, 0.0}), InvalidInput);
}

TEST_CASE("HSV validation") {
  Trace nas{test::gaussian(300, 8, 0.4), 100.0, 0.005, TraceKind::nasalance};
  const std::size_t n_hsv = 2990;
  Trace hsv{std::vector<double>(n_hsv), 1000.0, 0.0, TraceKind::hsv_intensity};
  std::vector<double> times;
  for (std::size_t i = 0; i < n_hsv; ++i) times.push_back(std::clamp(i / 1000.0, nas.t0_s, nas.as_signal().end_time()));
  const auto on_grid = linear_interpolate(nas.as_signal(), times);
  for (std::size_t i = 0; i < n_hsv; ++i) hsv.values[i] = 2.0 - on_grid[i];

  const CorrelationReport anti = validate_against_hsv(nas, hsv);
  CHECK(anti.r == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(anti.n > 2900);
  CHECK(anti.p_proxy < 1e-3);

  for (std::size_t i = 0; i < n_hsv; ++i) hsv.values[i] = on_grid[i];
  CHECK(validate_against_hsv(nas, hsv).r == doctest::Approx(1.0).epsilon(1e-9));

  Trace noise{test::gaussian(20000, 99), 1000.0, 0.0, TraceKind::hsv_intensity};
  Trace slow{test::gaussian(2000, 98), 100.0, 0.0, TraceKind::nasalance};
  const CorrelationReport null = validate_against_hsv(slow, noise);
  CHECK(null.n >= 10000);
  CHECK(std::abs(null.r) < 0.1);

  Trace flat{std::vector<double>(n_hsv, 0.8), 1000.0, 0.0, TraceKind::hsv_intensity};
  CHECK_THROWS_AS(validate_against_hsv(nas, flat), InvalidInput);
  Trace late{std::vector<double>(500, 0.1), 1000.0, 2.8, TraceKind::hsv_intensity};
  CHECK_THROWS_AS(validate_against_hsv(nas, late), InvalidInput);
}

TEST_CASE("p-value proxy follows the t distribution") {
  CHECK(correlation_p_value(0.0, 50) == doctest::Approx(1.0));
  // r = 0.5, n = 10: t = 1.633 on 8 degrees of freedom, two-sided p = 0.1411.
  CHECK(correlation_p_value(0.5, 10) == doctest::Approx(0.1411).epsilon(2e-3));
  CHECK(correlation_p_value(-0.5, 10) == doctest::Approx(correlation_p_value(0.5, 10)));
}

TEST_CASE("trace kind names round-trip") {
  for (TraceKind k : {TraceKind::nasalance, TraceKind::voicing, TraceKind::periodicity,
                      TraceKind::aperiodicity, TraceKind::pitch, TraceKind::hsv_intensity, TraceKind::generic})
    CHECK(parse_trace_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_trace_kind("velum"), ConfigError);
}
