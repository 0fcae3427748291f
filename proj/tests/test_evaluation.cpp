#include <doctest.h>

#include <cmath>
#include <random>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"
#include "nasality/evaluation.hpp"
#include "nasality/synth_corpus.hpp"
#include "support.hpp"

using namespace nasality;

namespace {

// Direct covariance / (sigma sigma) formula with two-pass means.
double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(cov / std::sqrt(va * vb));
}

Trace pulses(const std::vector<double>& centers, double width, double seconds, double rate = 100.0) {
  Trace t;
  t.rate_hz = rate;
  t.values.assign(static_cast<std::size_t>(seconds * rate), 0.0);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    const double time = static_cast<double>(i) / rate;
    for (double c : centers)
      if (std::abs(time - c) < width / 2) t.values[i] += 0.5 * (1.0 + std::cos(2.0 * test::kPi * (time - c) / width));
  }
  return t;
}

std::vector<GestureEvent> of_kind(const std::vector<GestureEvent>& ev, EventKind k) {
  std::vector<GestureEvent> out;
  for (const auto& e : ev)
    if (e.kind == k) out.push_back(e);
  return out;
}

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    const auto dir = test::scratch("corpus");
    const auto corpus = build_corpus(3, 3, 5, dir);
    return build_dataset(corpus);
  }();
  return ds;
}

std::vector<std::string> ids_of(const Dataset& ds) {
  std::vector<std::string> ids;
  for (const auto& u : ds.utterances) ids.push_back(u.id);
  return ids;
}

}  // namespace

TEST_CASE("ppmc trivial cases") {
  const std::vector<double> a{1.0, 2.0, 4.0, 3.0};
  std::vector<double> neg;
  for (double v : a) neg.push_back(-v);
  CHECK(ppmc(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ppmc(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> flat(4, 2.0);
  CHECK_THROWS_AS(ppmc(a, flat), InvalidInput);
  // Constant whose floating-point mean is not exactly 0.8.
  std::vector<double> ramp(2990), flat_inexact(2990, 0.8);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  CHECK_THROWS_AS(ppmc(ramp, flat_inexact), InvalidInput);
  CHECK_THROWS_AS(ppmc(std::vector<double>{1.0}, std::vector<double>{2.0}), InvalidInput);
  CHECK_THROWS_AS(ppmc(a, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST_CASE("ppmc matches the covariance formula, is symmetric and affine invariant") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> scale(-5.0, 5.0);
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto a = test::gaussian(1000, 2 * i + 1);
    auto b = test::gaussian(1000, 2 * i + 2);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += 0.3 * a[k] + 10.0;
    const double r = ppmc(a, b);
    CHECK(std::abs(r - pearson_oracle(a, b)) <= 1e-12);
    CHECK(std::abs(r - ppmc(b, a)) <= 1e-12);
    double c = scale(rng);
    if (std::abs(c) < 1e-3) c = 1.0;
    const double d = scale(rng) * 100.0;
    std::vector<double> ac;
    for (double v : a) ac.push_back(c * v + d);
    CHECK(std::abs(ppmc(ac, b) - (c > 0 ? r : -r)) <= 1e-12);
  }
}

TEST_CASE("single raised-cosine pulse") {
  const auto ev = detect_landmarks(pulses({1.0}, 0.4, 2.0));
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].kind == EventKind::onset);
  CHECK(ev[1].kind == EventKind::peak);
  CHECK(ev[2].kind == EventKind::offset);
  CHECK(ev[0].time_s < 1.0);
  CHECK(ev[2].time_s > 1.0);
  CHECK(std::abs(ev[1].time_s - 1.0) <= 0.02);
  // The 5-frame smoothed pulse is still symmetric about its center.
  CHECK(std::abs((1.0 - ev[0].time_s) - (ev[2].time_s - 1.0)) <= 0.02);
  // Velocity of 0.5(1+cos(2 pi x / w)) falls to 20% of its peak near
  // |x| = w/2 - asin(0.2) w / (2 pi) from the center, on both sides.
  const double expect = 0.2 - std::asin(0.2) * 0.4 / (2.0 * test::kPi);
  CHECK(1.0 - ev[0].time_s == doctest::Approx(expect).epsilon(0.1));
}

TEST_CASE("flat, short and multi-gesture traces") {
  Trace flat;
  flat.values.assign(100, 0.3);
  CHECK(detect_landmarks(flat).empty());
  Trace tiny;
  tiny.values.assign(5, 0.0);
  CHECK_THROWS_AS(detect_landmarks(tiny), InvalidInput);

  const auto ev = detect_landmarks(pulses({0.8, 2.5}, 0.4, 3.5));
  const auto peaks = of_kind(ev, EventKind::peak);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].time_s < peaks[1].time_s);
  CHECK(std::abs(peaks[0].time_s - 0.8) <= 0.02);
  CHECK(std::abs(peaks[1].time_s - 2.5) <= 0.02);
  for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i - 1].time_s <= ev[i].time_s);
  for (std::size_t g = 0; g < 2; ++g) {
    std::vector<double> t;
    for (const auto& e : ev)
      if (e.gesture == g) t.push_back(e.time_s);
    REQUIRE(t.size() == 3);
    CHECK(t[0] <= t[1]);
    CHECK(t[1] <= t[2]);
  }
}

TEST_CASE("landmarks are invariant to affine rescaling") {
  // Asymmetric, noisy gesture pair.
  Trace t = pulses({0.9, 2.2}, 0.5, 3.2);
  const auto noise = test::gaussian(t.values.size(), 3, 0.01);
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] += noise[i] + 0.1 * std::sin(static_cast<double>(i) * 0.01);
  const auto base = detect_landmarks(t);
  Trace scaled = t;
  for (auto& v : scaled.values) v = 3.7 * v - 12.0;
  const auto ev = detect_landmarks(scaled);
  REQUIRE(ev.size() == base.size());
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(ev[i].kind == base[i].kind);
    CHECK(std::abs(ev[i].time_s - base[i].time_s) <= 0.01);
  }
}

TEST_CASE("relative timing") {
  const auto a = detect_landmarks(pulses({0.8, 2.5}, 0.4, 3.5));
  const auto same = relative_timing(a, a);
  CHECK(same.size() == 6);
  for (const auto& l : same) CHECK(l.lag_s == 0.0);

  auto b = a;
  for (auto& e : b) e.time_s += 0.1;
  const auto shifted = relative_timing(a, b);
  REQUIRE(shifted.size() == 6);
  for (const auto& l : shifted) {
    CHECK(l.lag_s == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(l.a_gesture == l.b_gesture);
  }

  auto far = a;
  for (auto& e : far) e.time_s += 5.0;
  CHECK(relative_timing(a, far).empty());

  const auto d = gesture_durations(a);
  REQUIRE(d.size() == 2);
  CHECK(d[0] > 0.0);
  CHECK(std::abs(d[0] - d[1]) <= 0.02);
  CHECK(landmarks_csv(a).starts_with("gesture_index,kind,time_s\n0,onset,"));
  CHECK(lags_csv(shifted).starts_with("a_gesture,b_gesture,kind,lag_s\n0,0,onset,-0.1"));
}

TEST_CASE("oracle predictor scores 1 everywhere") {
  const Dataset& ds = small_dataset();
  const auto ids = ids_of(ds);
  const auto rep = evaluate(ds, ids, oracle_predictor(5), 5, "oracle");
  REQUIRE(rep.row.scores.size() == 5);
  for (const auto& s : rep.row.scores) {
    CHECK(s.n + rep.skipped >= ids.size());
    if (s.n > 0) CHECK(s.mean == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(rep.row.scores[0].n == ids.size());
  CHECK(rep.row.average() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate(ds, {}, oracle_predictor(5), 5, "x"), InvalidInput);
  CHECK_THROWS_AS(evaluate(ds, ids, oracle_predictor(1), 5, "x"), InvalidInput);
}

TEST_CASE("untrained models stay far from the truth") {
  const Dataset& ds = small_dataset();
  const auto ids = ids_of(ds);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig mc;
    mc.n_targets = 1;
    mc.seed = seed;
    const auto rep = evaluate(ds, ids, model_predictor(Tcn<float>(mc)), 1, "null");
    worst = std::max(worst, std::abs(rep.row.scores[0].mean));
  }
  INFO("worst |mean PPMC| " << worst);
  CHECK(worst < 0.6);
}

TEST_CASE("padded frames never reach the score") {
  Dataset ds = small_dataset();
  // Find an utterance whose last segment is partial.
  PreparedUtterance* u = nullptr;
  for (auto& cand : ds.utterances)
    if (cand.segments.back().valid_frames < kSegmentFrames) u = &cand;
  REQUIRE(u != nullptr);
  ModelConfig mc;
  mc.n_targets = 5;
  const auto predict = model_predictor(Tcn<float>(mc));
  const auto before = evaluate(ds, {u->id}, predict, 5, "m");
  auto& seg = u->segments.back();
  for (std::size_t k = 0; k < kAllTargets; ++k)
    for (std::size_t t = seg.valid_frames; t < kSegmentFrames; ++t) seg.targets[k * kSegmentFrames + t] = 0.9f;
  const auto after = evaluate(ds, {u->id}, predict, 5, "m");
  CHECK(before.per_utterance == after.per_utterance);
}

TEST_CASE("report rendering") {
  ScoreRow sf{"SI-SF", {{TraceKind::nasalance, 0.7341, 0.02, 8},
                        {TraceKind::voicing, 0.9, 0.01, 8},
                        {TraceKind::periodicity, 0.8, 0.0, 8},
                        {TraceKind::aperiodicity, 0.8, 0.0, 8},
                        {TraceKind::pitch, 0.5, 0.1, 8}}};
  ScoreRow nosf{"SI-noSF", {{TraceKind::nasalance, 0.6967, 0.02, 8}}};
  CHECK(sf.average() == doctest::Approx((0.7341 + 0.9 + 0.8 + 0.8 + 0.5) / 5));
  CHECK(nosf.average() == doctest::Approx(0.6967));
  const auto table = render_table({sf, nosf});
  CHECK(table.find("Model") == 0);
  for (const char* col : {"Nasalance", "Voicing", "Perio.", "Aperio.", "Pitch", "Average"})
    CHECK(table.find(col) != std::string::npos);
  CHECK(table.find("0.7341(0.0200)") != std::string::npos);
  CHECK(table.find("0.6967(0.0200)") != std::string::npos);
  const auto last = table.substr(table.find("SI-noSF"));
  CHECK(std::count(last.begin(), last.end(), '-') == 5);  // tag hyphen + four missing cells

  const auto csv = render_csv({nosf});
  CHECK(csv == "model,target,mean,std,n\nSI-noSF,nasalance,0.696700,0.020000,8\nSI-noSF,average,0.696700,,\n");
  const auto json = render_json({sf});
  CHECK(json.find("\"model\": \"SI-SF\"") != std::string::npos);
  CHECK(json.find("\"pitch\"") != std::string::npos);
  CHECK(model_tag(5) == "SI-SF");
  CHECK(model_tag(1) == "SI-noSF");
}
