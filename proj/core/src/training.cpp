#include "nasality/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"

namespace nasality {
namespace {

// Fisher-Yates with a fixed index draw so orderings match across standard
// library implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

bool train_fraction_ok(std::size_t train, std::size_t total) {
  const auto a = static_cast<long long>(100 * train);
  const auto b = static_cast<long long>(70 * total);
  return std::llabs(a - b) <= static_cast<long long>(5 * total);
}

}  // namespace

std::string_view to_string(TargetSet t) noexcept {
  return t == TargetSet::nasalance_only ? "nasalance" : "all";
}

TargetSet parse_target_set(std::string_view name) {
  if (name == "nasalance") return TargetSet::nasalance_only;
  if (name == "all") return TargetSet::with_source_features;
  throw ConfigError("targets must be 'nasalance' or 'all'");
}

std::size_t n_targets_for(TargetSet t) noexcept {
  return t == TargetSet::nasalance_only ? 1 : kAllTargets;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("train.lr_gamma must lie in (0, 1]");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (early_stop_patience == 0) throw ConfigError("train.early_stop_patience must be positive");
  if (n_trials == 0) throw ConfigError("train.n_trials must be positive");
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr * std::pow(cfg.lr_gamma, static_cast<double>(epoch));
}

SplitManifest make_splits(const CorpusManifest& corpus, std::size_t n_train_speakers,
                          std::uint64_t seed) {
  corpus.validate();
  const std::size_t n_spk = corpus.speakers.size();
  if (n_train_speakers == 0) throw InvalidInput("make_splits: need at least one training speaker");
  if (n_spk < n_train_speakers + 1)
    throw InvalidInput("make_splits: need at least n_train_speakers + 1 speakers");

  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& u : corpus.utterances) by_speaker[u.speaker_id].push_back(u.id);
  const std::size_t total = corpus.utterances.size();
  const std::size_t n_held = n_spk - n_train_speakers;

  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::size_t> order(n_spk);
    std::iota(order.begin(), order.end(), 0);
    seeded_shuffle(order, rng);

    // Held-out set: the first female and first male in shuffled order when
    // both sexes are available, then the shuffled remainder.
    std::vector<std::size_t> held;
    if (n_held >= 2) {
      for (const char* sex : {"F", "M"}) {
        const auto it = std::find_if(order.begin(), order.end(),
                                     [&](std::size_t i) { return corpus.speakers[i].sex == sex; });
        if (it != order.end()) held.push_back(*it);
      }
    }
    for (std::size_t i : order)
      if (held.size() < n_held && std::find(held.begin(), held.end(), i) == held.end()) held.push_back(i);

    std::size_t held_utts = 0;
    bool empty_speaker = false;
    for (std::size_t i : held) {
      const auto it = by_speaker.find(corpus.speakers[i].id);
      const std::size_t n = it == by_speaker.end() ? 0 : it->second.size();
      held_utts += n;
      empty_speaker = empty_speaker || n < 2;
    }
    if (empty_speaker || !train_fraction_ok(total - held_utts, total)) continue;

    SplitManifest s;
    s.seed = seed;
    std::set<std::string> held_ids;
    for (std::size_t i : held) {
      held_ids.insert(corpus.speakers[i].id);
      std::vector<std::string> utts = by_speaker[corpus.speakers[i].id];
      seeded_shuffle(utts, rng);
      std::size_t n_val = utts.size() / 2;
      if (utts.size() % 2 == 1 && rng() % 2 == 0) ++n_val;
      s.val.insert(s.val.end(), utts.begin(), utts.begin() + static_cast<std::ptrdiff_t>(n_val));
      s.test.insert(s.test.end(), utts.begin() + static_cast<std::ptrdiff_t>(n_val), utts.end());
    }
    for (const auto& u : corpus.utterances)
      if (!held_ids.contains(u.speaker_id)) s.train.push_back(u.id);
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
  }
  throw InvalidInput("make_splits: no speaker assignment keeps the training share near 70%");
}

std::vector<std::string> split_violations(const CorpusManifest& corpus, const SplitManifest& split) {
  std::vector<std::string> out;
  std::map<std::string, std::string> speaker_of;
  for (const auto& u : corpus.utterances) speaker_of[u.id] = u.speaker_id;

  std::map<std::string, int> seen;
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (const auto& id : *part) {
      if (!speaker_of.contains(id)) out.push_back("unknown utterance " + id);
      if (++seen[id] > 1) out.push_back("utterance assigned twice: " + id);
    }
  for (const auto& u : corpus.utterances)
    if (!seen.contains(u.id)) out.push_back("unassigned utterance " + u.id);
  if (split.train.empty() || split.val.empty() || split.test.empty()) out.push_back("empty partition");

  std::set<std::string> train_spk, val_spk, test_spk;
  std::map<std::string, std::pair<std::size_t, std::size_t>> held_counts;
  for (const auto& id : split.train) train_spk.insert(speaker_of[id]);
  for (const auto& id : split.val) {
    val_spk.insert(speaker_of[id]);
    ++held_counts[speaker_of[id]].first;
  }
  for (const auto& id : split.test) {
    test_spk.insert(speaker_of[id]);
    ++held_counts[speaker_of[id]].second;
  }
  for (const auto& s : train_spk)
    if (val_spk.contains(s) || test_spk.contains(s)) out.push_back("speaker in train and held-out: " + s);
  if (val_spk != test_spk) out.push_back("val and test hold different speakers");
  for (const auto& [spk, c] : held_counts) {
    const auto d = c.first > c.second ? c.first - c.second : c.second - c.first;
    if (d > 1) out.push_back("unbalanced val/test for speaker " + spk);
  }
  if (!train_fraction_ok(split.train.size(), corpus.utterances.size()))
    out.push_back("training share outside 70% +/- 5 points");
  return out;
}

template <typename Real>
void adam_update(std::span<Real> value, std::span<const Real> grad, AdamMoments& mom, std::size_t t,
                 double lr, const TrainConfig& cfg) {
  if (t == 0) throw InvalidInput("adam_update: step counts from 1");
  if (grad.size() != value.size()) throw InvalidInput("adam_update: gradient shape mismatch");
  if (mom.m.size() != value.size()) {
    mom.m.assign(value.size(), 0.0);
    mom.v.assign(value.size(), 0.0);
  }
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
    mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
    const double m_hat = mom.m[i] / c1;
    const double v_hat = mom.v[i] / c2;
    value[i] = static_cast<Real>(value[i] - lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
  }
}

template <typename Real>
void adam_step(const std::vector<ParamView<Real>>& params, AdamState& state, double lr,
               const TrainConfig& cfg) {
  for (const auto& p : params)
    for (Real g : p.grad)
      if (!std::isfinite(static_cast<double>(g)))
        throw DivergenceError("non-finite gradient in " + p.name);
  if (state.moments.size() != params.size()) state.moments.assign(params.size(), {});
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_update<Real>(params[i].value, std::span<const Real>(params[i].grad), state.moments[i],
                      state.step, lr, cfg);
}

template void adam_update<float>(std::span<float>, std::span<const float>, AdamMoments&, std::size_t,
                                 double, const TrainConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, AdamMoments&,
                                  std::size_t, double, const TrainConfig&);
template void adam_step<float>(const std::vector<ParamView<float>>&, AdamState&, double,
                               const TrainConfig&);
template void adam_step<double>(const std::vector<ParamView<double>>&, AdamState&, double,
                                const TrainConfig&);

std::string history_csv(const TrainHistory& h) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,lr\n";
  char buf[128];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.lr);
    os << buf;
  }
  return os.str();
}

namespace {

struct Batch {
  Tensor3<float> x;
  Tensor3<float> y;
  std::vector<std::size_t> valid;
};

Batch make_batch(const std::vector<const PreparedSegment*>& segs, std::span<const std::size_t> idx,
                 std::size_t n_targets) {
  const std::size_t in = kAudSpecChannels * kAudSpecFrames;
  Batch b{Tensor3<float>(idx.size(), kAudSpecChannels, kAudSpecFrames),
          Tensor3<float>(idx.size(), n_targets, kSegmentFrames), {}};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const PreparedSegment& s = *segs[idx[i]];
    std::copy(s.input.begin(), s.input.end(), b.x.data.begin() + static_cast<std::ptrdiff_t>(i * in));
    std::copy(s.targets.begin(), s.targets.begin() + static_cast<std::ptrdiff_t>(n_targets * kSegmentFrames),
              b.y.data.begin() + static_cast<std::ptrdiff_t>(i * n_targets * kSegmentFrames));
    b.valid.push_back(s.valid_frames);
  }
  return b;
}

std::size_t masked_count(const Batch& b) {
  std::size_t n = 0;
  for (auto v : b.valid) n += v;
  return n * b.y.channels;
}

// Batches of batch_size in the given order; a lone trailing segment joins
// the previous batch since batch statistics need two samples.
std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + size)));
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

double validation_loss(Tcn<float>& model, const std::vector<const PreparedSegment*>& val,
                       std::size_t batch_size) {
  std::vector<std::size_t> order(val.size());
  std::iota(order.begin(), order.end(), 0);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::span<const std::size_t> idx(order.data() + i, std::min(batch_size, order.size() - i));
    const Batch b = make_batch(val, idx, model.config().n_targets);
    const Tensor3<float> pred = model.forward(b.x, Mode::eval);
    const std::size_t n = masked_count(b);
    sum += mse_loss(pred, b.y, std::span<const std::size_t>(b.valid)).loss * static_cast<double>(n);
    count += n;
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TrainResult train_segments(const TrainConfig& cfg, const ModelConfig& model_cfg,
                           const std::vector<const PreparedSegment*>& train,
                           const std::vector<const PreparedSegment*>& val, const EpochCallback& on_epoch) {
  cfg.validate();
  model_cfg.validate();
  if (model_cfg.n_targets > kAllTargets) throw ConfigError("model.n_targets exceeds available targets");
  if (model_cfg.in_channels != kAudSpecChannels || model_cfg.input_frames != kAudSpecFrames ||
      model_cfg.output_frames() != kSegmentFrames)
    throw ConfigError("model input/output shape does not match the AudSpec segment layout");
  if (train.size() < 2) throw InvalidInput("train: need at least two training segments");
  if (val.empty()) throw InvalidInput("train: empty validation split");

  Tcn<float> model(model_cfg);
  const auto params = model.parameters();
  AdamState adam;
  std::mt19937_64 rng(cfg.seed);

  TrainResult result{model, {}};
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    seeded_shuffle(order, rng);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& idx : chunk(order, cfg.batch_size)) {
      const Batch b = make_batch(train, idx, model_cfg.n_targets);
      const Tensor3<float> pred = model.forward(b.x, Mode::train);
      const LossResult<float> loss = mse_loss(pred, b.y, std::span<const std::size_t>(b.valid));
      if (!std::isfinite(loss.loss)) throw DivergenceError("training loss is not finite");
      model.backward(loss.grad);
      adam_step(params, adam, lr, cfg);
      const std::size_t n = masked_count(b);
      sum += loss.loss * static_cast<double>(n);
      count += n;
    }
    if (cfg.bn_refresh) {
      std::vector<Tensor3<float>> inputs;
      for (std::size_t i = 0; i < train.size(); i += cfg.batch_size) {
        std::vector<std::size_t> idx(std::min(cfg.batch_size, train.size() - i));
        std::iota(idx.begin(), idx.end(), i);
        if (idx.size() == 1) break;  // a lone segment has no batch variance
        inputs.push_back(make_batch(train, idx, model_cfg.n_targets).x);
      }
      model.refresh_batchnorm(inputs);
    }
    const double val_loss = validation_loss(model, val, cfg.batch_size);
    if (!std::isfinite(val_loss)) throw DivergenceError("validation loss is not finite");

    const EpochRecord rec{epoch, sum / static_cast<double>(count), val_loss, lr};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (epoch == 0 || val_loss < result.history.best_val_loss) {
      result.history.best_epoch = epoch;
      result.history.best_val_loss = val_loss;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      result.history.stopped_early = true;
      break;
    }
  }
  return result;
}

std::vector<const PreparedSegment*> segments_of(const Dataset& ds, const std::vector<std::string>& ids) {
  std::vector<const PreparedSegment*> out;
  for (const auto& id : ids)
    for (const auto& s : ds.utterance(id).segments) out.push_back(&s);
  return out;
}

TrainResult train(const TrainConfig& cfg, ModelConfig model_cfg, const SplitManifest& split,
                  const Dataset& ds, const EpochCallback& on_epoch) {
  if (split.train.empty() || split.val.empty()) throw InvalidInput("train: empty split");
  model_cfg.n_targets = n_targets_for(cfg.targets);
  return train_segments(cfg, model_cfg, segments_of(ds, split.train), segments_of(ds, split.val), on_epoch);
}

TrialReport run_trials(const TrainConfig& cfg, const ModelConfig& model_cfg, const SplitManifest& split,
                       const Dataset& ds, const TrialHooks& hooks) {
  cfg.validate();
  if (split.test.empty()) throw InvalidInput("run_trials: empty test split");
  TrialReport rep;
  const std::size_t n_targets = n_targets_for(cfg.targets);
  rep.summary.tag = model_tag(n_targets);
  for (std::size_t i = 0; i < cfg.n_trials; ++i) {
    TrainConfig tc = cfg;
    tc.seed = cfg.seed + i;
    ModelConfig mc = model_cfg;
    mc.seed = tc.seed;
    if (hooks.on_start) hooks.on_start(i, tc.seed);
    TrainResult r = train(tc, mc, split, ds, hooks.on_epoch);
    if (hooks.on_done) hooks.on_done(i, r);
    rep.trials.push_back(evaluate(ds, split.test, model_predictor(r.model), n_targets, rep.summary.tag));
    rep.histories.push_back(std::move(r.history));
  }
  const auto kinds = target_kinds(n_targets);
  for (std::size_t k = 0; k < n_targets; ++k) {
    std::vector<double> means;
    for (const auto& t : rep.trials) means.push_back(t.row.scores[k].mean);
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(means.size());
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    rep.summary.scores.push_back({kinds[k], m, std::sqrt(ss / static_cast<double>(means.size())), means.size()});
  }
  return rep;
}

}  // namespace nasality
