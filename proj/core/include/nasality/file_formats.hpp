#pragma once

// WAV, trace CSV, corpus/split manifests and content hashing.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nasality/physio_params.hpp"
#include "nasality/signal_core.hpp"

namespace nasality {

// Mono IEEE float32 WAV. Samples are rounded to float on write.
void write_wav(const std::filesystem::path& path, const Signal& x);

// Accepts mono 16-bit PCM or 32-bit float; anything else is rejected.
Signal read_wav(const std::filesystem::path& path);

// "time_s,value" with 6 significant digits.
void write_trace_csv(const std::filesystem::path& path, const Trace& t);
Trace read_trace_csv(const std::filesystem::path& path, TraceKind kind = TraceKind::generic);

// "time_s,<kind>,<kind>,..." for traces sharing one time grid.
void write_traces_csv(const std::filesystem::path& path, const std::vector<Trace>& traces);
std::vector<Trace> read_traces_csv(const std::filesystem::path& path);

// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

struct SpeakerRecord {
  std::string id;
  std::string sex;  // "F" or "M"
  std::uint64_t profile_seed = 0;
  double f0_base_hz = 0.0;
  double formant_scale = 1.0;
  double nasal_coupling_gain = 1.0;
};

struct UtteranceRecord {
  std::string id;
  std::string speaker_id;
  std::string oral;   // paths relative to the manifest directory
  std::string nasal;
  std::string egg;
  std::string hsv;    // optional
  std::string vp_truth;  // optional
  double duration_s = 0.0;
  std::string contrast = "none";
  std::map<std::string, std::string> hashes;  // relative path -> file_hash
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  std::size_t utts_per_speaker = 0;
  std::vector<SpeakerRecord> speakers;
  std::vector<UtteranceRecord> utterances;
  std::filesystem::path root;  // directory holding the manifest; not serialized

  // Unique utterance ids; every utterance references a known speaker.
  void validate() const;
  const SpeakerRecord& speaker(const std::string& id) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

void write_corpus_manifest(const std::filesystem::path& path, const CorpusManifest& m);
CorpusManifest read_corpus_manifest(const std::filesystem::path& path);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;

  bool operator==(const SplitManifest&) const = default;
};

void write_split_manifest(const std::filesystem::path& path, const SplitManifest& s);
SplitManifest read_split_manifest(const std::filesystem::path& path);

// Replaces the file with text.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace nasality
