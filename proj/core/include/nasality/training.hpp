#pragma once

// Speaker-independent splits, Adam with exponential learning-rate decay,
// the early-stopped training loop and multi-trial orchestration.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nasality/dataset.hpp"
#include "nasality/evaluation.hpp"
#include "nasality/file_formats.hpp"
#include "nasality/tcn.hpp"

namespace nasality {

enum class TargetSet { nasalance_only, with_source_features };

std::string_view to_string(TargetSet t) noexcept;
TargetSet parse_target_set(std::string_view name);  // "nasalance" | "all"
std::size_t n_targets_for(TargetSet t) noexcept;

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lr_gamma = 0.9;  // per-epoch decay
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 10;
  std::size_t n_trials = 8;
  std::uint64_t seed = 7;
  TargetSet targets = TargetSet::with_source_features;
  // Recompute BN running statistics over the training set after every
  // epoch, so validation sees statistics of the current weights.
  bool bn_refresh = true;

  void validate() const;  // throws ConfigError
};

// lr0 * gamma^epoch.
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

// Holds out speakers (one F and one M when both exist) and splits each
// held-out speaker's utterances half/half into val and test.
SplitManifest make_splits(const CorpusManifest& corpus, std::size_t n_train_speakers,
                          std::uint64_t seed);

// Human-readable violations of the split invariants; empty when valid.
std::vector<std::string> split_violations(const CorpusManifest& corpus, const SplitManifest& split);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::vector<AdamMoments> moments;  // one per parameter array
  std::size_t step = 0;
};

// Bias-corrected Adam update of one array at step t >= 1.
template <typename Real>
void adam_update(std::span<Real> value, std::span<const Real> grad, AdamMoments& moments,
                 std::size_t t, double lr, const TrainConfig& cfg);

// Advances the step counter and updates every parameter array. Throws
// DivergenceError, leaving parameters untouched, on a non-finite gradient.
template <typename Real>
void adam_step(const std::vector<ParamView<Real>>& params, AdamState& state, double lr,
               const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

std::string history_csv(const TrainHistory& h);

struct TrainResult {
  Tcn<float> model;  // parameters of the best validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains on explicit segment lists; val may equal train (overfit checks).
TrainResult train_segments(const TrainConfig& cfg, const ModelConfig& model_cfg,
                           const std::vector<const PreparedSegment*>& train,
                           const std::vector<const PreparedSegment*>& val,
                           const EpochCallback& on_epoch = {});

std::vector<const PreparedSegment*> segments_of(const Dataset& ds, const std::vector<std::string>& ids);

// model_cfg.n_targets is overridden from cfg.targets.
TrainResult train(const TrainConfig& cfg, ModelConfig model_cfg, const SplitManifest& split,
                  const Dataset& ds, const EpochCallback& on_epoch = {});

struct TrialReport {
  ScoreRow summary;                 // mean/std across trials of the per-trial test mean
  std::vector<EvalReport> trials;   // per-trial test evaluation
  std::vector<TrainHistory> histories;
};

struct TrialHooks {
  std::function<void(std::size_t trial, std::uint64_t seed)> on_start;
  EpochCallback on_epoch;
  std::function<void(std::size_t trial, const TrainResult&)> on_done;
};

// Trial i trains with model and shuffle seed cfg.seed + i on the fixed
// split and is scored on split.test.
TrialReport run_trials(const TrainConfig& cfg, const ModelConfig& model_cfg, const SplitManifest& split,
                       const Dataset& ds, const TrialHooks& hooks = {});

}  // namespace nasality
