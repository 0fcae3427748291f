#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <set>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"
#include "nasality/training.hpp"
#include "support.hpp"

using namespace nasality;

namespace {

CorpusManifest fake_corpus(const std::vector<std::size_t>& utts, std::size_t n_male) {
  CorpusManifest m;
  for (std::size_t s = 0; s < utts.size(); ++s) {
    SpeakerRecord r;
    r.id = "spk" + std::to_string(s);
    r.sex = s < n_male ? "M" : "F";
    m.speakers.push_back(r);
    for (std::size_t u = 0; u < utts[s]; ++u) {
      UtteranceRecord ur;
      ur.id = r.id + "_u" + std::to_string(u);
      ur.speaker_id = r.id;
      ur.oral = ur.id + "_oral.wav";
      ur.nasal = ur.id + "_nasal.wav";
      ur.egg = ur.id + "_egg.wav";
      m.utterances.push_back(ur);
    }
  }
  return m;
}

// Segment whose nasalance target is a smooth function of one input band, so
// a network can learn it.
PreparedSegment fake_segment(std::uint64_t seed, std::size_t valid = kSegmentFrames) {
  PreparedSegment s;
  s.valid_frames = valid;
  s.input.resize(kAudSpecChannels * kAudSpecFrames);
  s.targets.assign(kAllTargets * kSegmentFrames, 0.0f);
  const auto noise = test::gaussian(s.input.size(), seed, 0.1);
  const double f = 0.5 + static_cast<double>(seed % 5) * 0.3;
  for (std::size_t c = 0; c < kAudSpecChannels; ++c)
    for (std::size_t t = 0; t < kAudSpecFrames; ++t) {
      const double drive = std::sin(2.0 * test::kPi * f * static_cast<double>(t) / 125.0);
      s.input[c * kAudSpecFrames + t] = static_cast<float>((c < 16 ? drive : 0.0) + noise[c * kAudSpecFrames + t]);
    }
  for (std::size_t k = 0; k < kAllTargets; ++k)
    for (std::size_t t = 0; t < valid; ++t) {
      const double tt = static_cast<double>(t) * 1.25;
      s.targets[k * kSegmentFrames + t] =
          static_cast<float>(0.8 * std::sin(2.0 * test::kPi * f * tt / 125.0 + 0.3 * static_cast<double>(k)));
    }
  return s;
}

std::vector<const PreparedSegment*> ptrs(const std::vector<PreparedSegment>& v) {
  std::vector<const PreparedSegment*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

}  // namespace

TEST_CASE("splits hold their invariants across seeds") {
  const std::vector<std::vector<std::size_t>> layouts{
      std::vector<std::size_t>(8, 12), std::vector<std::size_t>(8, 7), {12, 11, 13, 12, 10, 12, 9, 14}};
  for (const auto& layout : layouts) {
    const auto corpus = fake_corpus(layout, 3);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = make_splits(corpus, 6, seed);
      const auto v = split_violations(corpus, s);
      INFO("seed " << seed << " first violation " << (v.empty() ? "" : v.front()));
      CHECK(v.empty());
      // One female and one male are held out.
      std::set<std::string> held;
      for (const auto& id : s.val) held.insert(id.substr(0, id.find('_')));
      CHECK(held.size() == 2);
      std::set<std::string> sexes;
      for (const auto& h : held) sexes.insert(corpus.speaker(h).sex);
      CHECK(sexes.size() == 2);
      CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    }
  }
}

TEST_CASE("split determinism and odd counts") {
  const auto corpus = fake_corpus(std::vector<std::size_t>(8, 7), 3);
  CHECK(make_splits(corpus, 6, 5) == make_splits(corpus, 6, 5));
  bool seen_val_larger = false, seen_test_larger = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = make_splits(corpus, 6, seed);
    std::map<std::string, int> diff;
    for (const auto& id : s.val) ++diff[id.substr(0, id.find('_'))];
    for (const auto& id : s.test) --diff[id.substr(0, id.find('_'))];
    for (const auto& [spk, d] : diff) {
      CHECK(std::abs(d) == 1);
      seen_val_larger = seen_val_larger || d == 1;
      seen_test_larger = seen_test_larger || d == -1;
    }
  }
  CHECK(seen_val_larger);
  CHECK(seen_test_larger);
}

TEST_CASE("split errors and violation detection") {
  const auto corpus = fake_corpus(std::vector<std::size_t>(4, 10), 1);
  CHECK_THROWS_AS(make_splits(corpus, 4, 1), InvalidInput);
  CHECK_THROWS_AS(make_splits(corpus, 0, 1), InvalidInput);
  // 1 of 4 speakers held out gives 75% train: allowed.
  CHECK(split_violations(corpus, make_splits(corpus, 3, 1)).empty());
  // 2 of 4 held out gives 50%: no valid assignment exists.
  CHECK_THROWS_AS(make_splits(corpus, 2, 1), InvalidInput);

  const auto big = fake_corpus(std::vector<std::size_t>(8, 12), 3);
  auto s = make_splits(big, 6, 3);
  auto leaked = s;
  leaked.val.push_back(s.train.back());
  leaked.train.pop_back();
  CHECK_FALSE(split_violations(big, leaked).empty());
  auto unbalanced = s;
  unbalanced.test.push_back(unbalanced.val.back());
  unbalanced.val.pop_back();
  unbalanced.test.push_back(unbalanced.val.back());
  unbalanced.val.pop_back();
  CHECK_FALSE(split_violations(big, unbalanced).empty());
}

TEST_CASE("first Adam step closed form") {
  TrainConfig cfg;
  std::vector<double> p{1.0, -2.0, 0.5};
  std::vector<double> g{1.0, -3.0, 0.0};
  AdamMoments mom;
  adam_update<double>(p, g, mom, 1, 0.1, cfg);
  // m_hat = g and v_hat = g^2, so the step is lr * sign(g) up to eps.
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 1.0 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(p[2] == 0.5);
  CHECK(mom.m[0] == doctest::Approx(0.1));
  CHECK(mom.v[1] == doctest::Approx(0.001 * 9.0));
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  TrainConfig cfg;
  std::vector<double> p{0.25, -4.0};
  const auto before = p;
  std::vector<double> g{0.0, 0.0};
  AdamMoments mom;
  for (std::size_t t = 1; t <= 5; ++t) adam_update<double>(p, g, mom, t, 0.1, cfg);
  CHECK(p == before);
}

TEST_CASE("Adam converges on a quadratic bowl") {
  TrainConfig cfg;
  std::vector<double> p{1.0};
  AdamMoments mom;
  for (std::size_t t = 1; t <= 200; ++t) {
    std::vector<double> g{2.0 * p[0]};
    adam_update<double>(p, g, mom, t, 0.1, cfg);
  }
  CHECK(std::abs(p[0]) < 1e-2);
}

TEST_CASE("adam_step refuses non-finite gradients") {
  ModelConfig mc;
  mc.in_channels = 4;
  mc.pre_filters = 4;
  mc.dilated_filters = 4;
  mc.input_frames = 10;
  mc.precision = Precision::f64;
  Tcn<double> model(mc);
  auto params = model.parameters();
  std::vector<std::vector<double>> before;
  for (const auto& p : params) {
    std::fill(p.grad.begin(), p.grad.end(), 0.5);
    before.emplace_back(p.value.begin(), p.value.end());
  }
  params.back().grad[0] = std::nan("");
  AdamState state;
  TrainConfig cfg;
  CHECK_THROWS_AS(adam_step(params, state, 1e-3, cfg), DivergenceError);
  CHECK(state.step == 0);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(std::equal(params[i].value.begin(), params[i].value.end(), before[i].begin()));

  params.back().grad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(params, state, 1e-3, cfg), DivergenceError);
  params.back().grad[0] = 0.5;
  adam_step(params, state, 1e-3, cfg);
  CHECK(state.step == 1);
  CHECK(params[0].value[0] != before[0][0]);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  for (std::size_t e = 0; e < 100; ++e)
    CHECK(std::abs(lr_at_epoch(cfg, e) - 1e-3 * std::pow(0.9, static_cast<double>(e))) <= 1e-12);
  cfg.lr_gamma = 1.0;
  CHECK(lr_at_epoch(cfg, 57) == cfg.lr);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.lr_gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.lr_gamma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.n_trials = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_target_set("all") == TargetSet::with_source_features);
  CHECK(parse_target_set("nasalance") == TargetSet::nasalance_only);
  CHECK_THROWS_AS(parse_target_set("pitch"), ConfigError);
  CHECK(n_targets_for(TargetSet::nasalance_only) == 1);
  CHECK(n_targets_for(TargetSet::with_source_features) == 5);
}

TEST_CASE("short training run: determinism, schedule and best epoch") {
  std::vector<PreparedSegment> segs;
  for (std::uint64_t i = 0; i < 5; ++i) segs.push_back(fake_segment(i, i == 4 ? 120 : kSegmentFrames));
  std::vector<PreparedSegment> val{fake_segment(10), fake_segment(11)};

  TrainConfig cfg;
  cfg.batch_size = 2;  // 5 segments -> batches of 2 and 3 (the lone one is merged)
  cfg.max_epochs = 4;
  cfg.lr_gamma = 1.0;
  ModelConfig mc;
  mc.n_targets = 1;

  std::vector<EpochRecord> seen;
  const auto a = train_segments(cfg, mc, ptrs(segs), ptrs(val), [&](const EpochRecord& r) { seen.push_back(r); });
  const auto b = train_segments(cfg, mc, ptrs(segs), ptrs(val));
  CHECK(history_csv(a.history) == history_csv(b.history));
  REQUIRE(a.history.epochs.size() == 4);
  CHECK(seen.size() == 4);
  for (const auto& e : a.history.epochs) CHECK(e.lr == cfg.lr);

  std::size_t argmin = 0;
  for (std::size_t i = 1; i < a.history.epochs.size(); ++i)
    if (a.history.epochs[i].val_loss < a.history.epochs[argmin].val_loss) argmin = i;
  CHECK(a.history.best_epoch == argmin);
  CHECK(a.history.best_val_loss == a.history.epochs[argmin].val_loss);
  CHECK(a.history.epochs.back().train_loss < a.history.epochs.front().train_loss);

  // The returned model is the best epoch's: its validation loss reproduces.
  Tcn<float> best = a.model;
  Tensor3<float> x(2, kAudSpecChannels, kAudSpecFrames);
  Tensor3<float> y(2, 1, kSegmentFrames);
  for (std::size_t i = 0; i < 2; ++i) {
    std::copy(val[i].input.begin(), val[i].input.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * val[i].input.size()));
    std::copy(val[i].targets.begin(), val[i].targets.begin() + kSegmentFrames,
              y.data.begin() + static_cast<std::ptrdiff_t>(i * kSegmentFrames));
  }
  const std::vector<std::size_t> valid{kSegmentFrames, kSegmentFrames};
  const double loss = mse_loss(best.forward(x, Mode::eval), y, valid).loss;
  CHECK(loss == doctest::Approx(a.history.best_val_loss).epsilon(1e-6));

  auto other = cfg;
  other.seed = 8;
  CHECK(history_csv(train_segments(other, mc, ptrs(segs), ptrs(val)).history) != history_csv(a.history));
}

TEST_CASE("early stopping stops after the patience window") {
  std::vector<PreparedSegment> segs{fake_segment(1), fake_segment(2)};
  // Validation targets unrelated to the inputs: improvement stalls quickly.
  std::vector<PreparedSegment> val{fake_segment(3), fake_segment(4)};
  for (auto& s : val) std::reverse(s.targets.begin(), s.targets.begin() + kSegmentFrames);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 40;
  cfg.early_stop_patience = 2;
  cfg.lr = 1e-2;
  ModelConfig mc;
  mc.n_targets = 1;
  const auto r = train_segments(cfg, mc, ptrs(segs), ptrs(val));
  const auto& h = r.history;
  for (const auto& e : h.epochs) CHECK(e.val_loss >= h.best_val_loss);
  if (h.stopped_early) {
    CHECK(h.epochs.size() == h.best_epoch + 1 + cfg.early_stop_patience);
  } else {
    CHECK(h.epochs.size() == cfg.max_epochs);
  }
  CHECK(h.stopped_early);
}

TEST_CASE("training argument errors") {
  std::vector<PreparedSegment> one{fake_segment(1)};
  std::vector<PreparedSegment> two{fake_segment(1), fake_segment(2)};
  TrainConfig cfg;
  ModelConfig mc;
  CHECK_THROWS_AS(train_segments(cfg, mc, ptrs(one), ptrs(two)), InvalidInput);
  CHECK_THROWS_AS(train_segments(cfg, mc, ptrs(two), {}), InvalidInput);
  mc.input_frames = 100;
  CHECK_THROWS_AS(train_segments(cfg, mc, ptrs(two), ptrs(two)), ConfigError);
}

TEST_CASE("history CSV layout") {
  TrainHistory h;
  h.epochs.push_back({0, 0.5, 0.25, 1e-3});
  h.epochs.push_back({1, 0.125, 0.0625, 9e-4});
  const auto csv = history_csv(h);
  CHECK(csv.starts_with("epoch,train_loss,val_loss,lr\n0,0.5,0.25,0.001"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
