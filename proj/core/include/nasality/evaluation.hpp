#pragma once

// PPMC scoring, the per-utterance evaluation protocol and velocity-based
// gesture landmarks on parameter traces.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nasality/dataset.hpp"
#include "nasality/physio_params.hpp"
#include "nasality/tcn.hpp"

namespace nasality {

// Pearson product-moment correlation. Throws InvalidInput on length
// mismatch, fewer than 2 samples or a constant input.
double ppmc(std::span<const double> a, std::span<const double> b);

struct TargetScore {
  TraceKind kind = TraceKind::nasalance;
  double mean = 0.0;
  double std = 0.0;  // population std
  std::size_t n = 0;
};

// One report row: a model tag and one score per predicted target.
struct ScoreRow {
  std::string tag;
  std::vector<TargetScore> scores;

  // Mean of the per-target means.
  double average() const;
};

struct EvalReport {
  ScoreRow row;
  std::vector<std::string> utterance_ids;
  std::vector<std::vector<double>> per_utterance;  // [target][utterance]
  std::size_t skipped = 0;  // utterance/target pairs with a constant trace
};

// Maps an utterance to predicted traces, one per requested target, each
// covering exactly the utterance's unpadded frames.
using Predictor = std::function<std::vector<std::vector<double>>(const PreparedUtterance&)>;

// Batches an utterance's segments through an eval-mode forward pass.
Predictor model_predictor(const Tcn<float>& model);

// Returns the ground truth itself; scores 1.0 wherever defined.
Predictor oracle_predictor(std::size_t n_targets);

EvalReport evaluate(const Dataset& ds, const std::vector<std::string>& ids,
                    const Predictor& predict, std::size_t n_targets, const std::string& tag);

// Loads the checkpoint and scores it on the listed utterances.
EvalReport evaluate_model(const std::filesystem::path& checkpoint, const std::vector<std::string>& ids,
                          const Dataset& ds);

// "SI-SF" with source features, "SI-noSF" for nasalance only.
std::string model_tag(std::size_t n_targets);

// Aligned text table with columns Nasalance Voicing Perio. Aperio. Pitch
// Average; cells read "mean(std)" and "-" where a row has no such target.
std::string render_table(const std::vector<ScoreRow>& rows);
std::string render_csv(const std::vector<ScoreRow>& rows);
std::string render_json(const std::vector<ScoreRow>& rows);

enum class EventKind { onset, peak, offset };
std::string_view to_string(EventKind k) noexcept;

struct GestureEvent {
  std::size_t gesture = 0;
  EventKind kind = EventKind::peak;
  double time_s = 0.0;
  TraceKind trace = TraceKind::generic;
};

inline constexpr std::size_t kLandmarkSmoothFrames = 5;
inline constexpr double kLandmarkPeakFraction = 0.5;
inline constexpr double kLandmarkVelocityFraction = 0.2;

// Gestures are runs of the smoothed trace above min + 0.5 * range; the peak
// is the run's maximum. Onset and offset are where the velocity falls back
// under 20% of the strongest rise (before the peak) or fall (after it),
// interpolated between frames. Events come out in time order.
std::vector<GestureEvent> detect_landmarks(const Trace& t);

struct LagRecord {
  std::size_t a_gesture = 0;
  std::size_t b_gesture = 0;
  EventKind kind = EventKind::peak;
  double lag_s = 0.0;  // a.time - b.time
};

inline constexpr double kPairingWindowS = 1.0;

// Pairs each gesture of a with the b gesture whose peak is nearest (within
// 1 s) and reports same-kind lags.
std::vector<LagRecord> relative_timing(const std::vector<GestureEvent>& a,
                                       const std::vector<GestureEvent>& b);

// offset - onset per gesture, in gesture order.
std::vector<double> gesture_durations(const std::vector<GestureEvent>& events);

std::string landmarks_csv(const std::vector<GestureEvent>& events);
std::string lags_csv(const std::vector<LagRecord>& lags);

}  // namespace nasality
