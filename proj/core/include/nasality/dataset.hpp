#pragma once

// Prepared training material: per-utterance 2 s segments holding the
// AudSpec network input and all five target traces, plus a binary cache.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "nasality/file_formats.hpp"
#include "nasality/physio_params.hpp"

namespace nasality {

// Target order of the output head. SI-noSF uses the first entry only.
inline constexpr std::size_t kAllTargets = 5;
const std::vector<TraceKind>& target_order();
std::vector<TraceKind> target_kinds(std::size_t n_targets);

struct PreparedSegment {
  std::size_t segment_index = 0;
  std::size_t valid_frames = 0;
  std::vector<float> input;    // kAudSpecChannels x kAudSpecFrames, channel-major
  std::vector<float> targets;  // kAllTargets x kSegmentFrames, target-major
};

struct PreparedUtterance {
  std::string id;
  std::string speaker_id;
  std::vector<PreparedSegment> segments;

  // Unpadded frames of one target concatenated across segments.
  std::vector<double> target_trace(std::size_t target) const;
  std::size_t frames() const;
};

struct Dataset {
  NasalanceConfig nasalance;
  std::vector<PreparedUtterance> utterances;

  const PreparedUtterance& utterance(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::size_t segment_count() const;
};

// All five targets of an utterance at 100 Hz, trimmed to a common length.
std::vector<Trace> extract_targets(const Signal& oral, const Signal& nasal, const Signal& egg,
                                   const NasalanceConfig& cfg = {});

PreparedUtterance prepare_utterance(const CorpusManifest& corpus, const UtteranceRecord& rec,
                                    const NasalanceConfig& cfg = {});

Dataset build_dataset(const CorpusManifest& corpus, const NasalanceConfig& cfg = {});

struct UtteranceCorrelation {
  std::string id;
  CorrelationReport report;
};

struct HsnValidation {
  std::vector<UtteranceCorrelation> utterances;
  double mean_r = 0.0;
};

// Nasalance versus HSV brightness for every utterance with an hsv file.
HsnValidation validate_corpus_hsv(const CorpusManifest& corpus, const NasalanceConfig& cfg = {});

// "NSDS", u32 version, nasalance config, utterances with f32 payloads.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace nasality
