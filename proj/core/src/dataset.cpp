#include "nasality/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"
#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"

namespace nasality {
namespace {

constexpr std::uint32_t kDatasetVersion = 1;

void trim_to(Trace& t, std::size_t n) { t.values.resize(n); }

}  // namespace

const std::vector<TraceKind>& target_order() {
  static const std::vector<TraceKind> order{TraceKind::nasalance, TraceKind::voicing,
                                            TraceKind::periodicity, TraceKind::aperiodicity,
                                            TraceKind::pitch};
  return order;
}

std::vector<TraceKind> target_kinds(std::size_t n_targets) {
  if (n_targets != 1 && n_targets != kAllTargets)
    throw ConfigError("n_targets must be 1 (nasalance) or 5 (with source features)");
  const auto& all = target_order();
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_targets)};
}

std::vector<double> PreparedUtterance::target_trace(std::size_t target) const {
  if (target >= kAllTargets) throw InvalidInput("target index out of range");
  std::vector<double> out;
  for (const auto& seg : segments) {
    const float* row = seg.targets.data() + target * kSegmentFrames;
    out.insert(out.end(), row, row + seg.valid_frames);
  }
  return out;
}

std::size_t PreparedUtterance::frames() const {
  std::size_t n = 0;
  for (const auto& seg : segments) n += seg.valid_frames;
  return n;
}

const PreparedUtterance& Dataset::utterance(const std::string& id) const {
  for (const auto& u : utterances)
    if (u.id == id) return u;
  throw InvalidInput("dataset has no utterance '" + id + "'");
}

bool Dataset::contains(const std::string& id) const {
  return std::any_of(utterances.begin(), utterances.end(),
                     [&](const PreparedUtterance& u) { return u.id == id; });
}

std::size_t Dataset::segment_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.segments.size();
  return n;
}

std::vector<Trace> extract_targets(const Signal& oral, const Signal& nasal, const Signal& egg,
                                   const NasalanceConfig& cfg) {
  Trace nas = compute_nasalance(oral, nasal, cfg).trace;
  Trace voi = compute_voicing(egg, cfg).trace;
  AppTraces app = app_surrogate(mix_and_resample(oral, nasal), cfg.target_rate_hz);
  std::vector<Trace> out{std::move(nas), std::move(voi), std::move(app.periodicity),
                         std::move(app.aperiodicity), std::move(app.pitch)};
  std::size_t n = out.front().size();
  for (const auto& t : out) n = std::min(n, t.size());
  for (auto& t : out) trim_to(t, n);
  return out;
}

PreparedUtterance prepare_utterance(const CorpusManifest& corpus, const UtteranceRecord& rec,
                                    const NasalanceConfig& cfg) {
  const Signal oral = read_wav(corpus.resolve(rec.oral));
  const Signal nasal = read_wav(corpus.resolve(rec.nasal));
  const Signal egg = read_wav(corpus.resolve(rec.egg));
  const std::vector<Trace> targets = extract_targets(oral, nasal, egg, cfg);

  PreparedUtterance out;
  out.id = rec.id;
  out.speaker_id = rec.speaker_id;
  for (const Segment& seg : segment_utterance(mix_and_resample(oral, nasal), targets, rec.id)) {
    PreparedSegment p;
    p.segment_index = seg.segment_index;
    p.valid_frames = seg.valid_frames;
    p.input = audspec(seg.audio).bins;
    p.targets.reserve(kAllTargets * kSegmentFrames);
    for (const Trace& t : seg.targets)
      for (double v : t.values) p.targets.push_back(static_cast<float>(v));
    out.segments.push_back(std::move(p));
  }
  return out;
}

Dataset build_dataset(const CorpusManifest& corpus, const NasalanceConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.nasalance = cfg;
  ds.utterances.reserve(corpus.utterances.size());
  for (const auto& rec : corpus.utterances) ds.utterances.push_back(prepare_utterance(corpus, rec, cfg));
  return ds;
}

HsnValidation validate_corpus_hsv(const CorpusManifest& corpus, const NasalanceConfig& cfg) {
  HsnValidation out;
  for (const auto& rec : corpus.utterances) {
    if (rec.hsv.empty()) continue;
    const Trace nas = compute_nasalance(read_wav(corpus.resolve(rec.oral)),
                                        read_wav(corpus.resolve(rec.nasal)), cfg)
                          .trace;
    const Trace hsv = read_trace_csv(corpus.resolve(rec.hsv), TraceKind::hsv_intensity);
    out.utterances.push_back({rec.id, validate_against_hsv(nas, hsv)});
  }
  if (out.utterances.empty()) throw InvalidInput("corpus has no HSV traces");
  for (const auto& u : out.utterances) out.mean_r += u.report.r;
  out.mean_r /= static_cast<double>(out.utterances.size());
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("NSDS", 4);
  detail::put<std::uint32_t>(os, kDatasetVersion);
  detail::put<double>(os, ds.nasalance.hp_cutoff_hz);
  detail::put<std::uint64_t>(os, ds.nasalance.rms_window_samples);
  detail::put<double>(os, ds.nasalance.target_rate_hz);
  detail::put<std::uint64_t>(os, ds.nasalance.smooth_window_samples);
  detail::put<std::uint64_t>(os, ds.utterances.size());
  for (const auto& u : ds.utterances) {
    detail::put_string(os, u.id);
    detail::put_string(os, u.speaker_id);
    detail::put<std::uint64_t>(os, u.segments.size());
    for (const auto& s : u.segments) {
      detail::put<std::uint64_t>(os, s.segment_index);
      detail::put<std::uint64_t>(os, s.valid_frames);
      os.write(reinterpret_cast<const char*>(s.input.data()),
               static_cast<std::streamsize>(s.input.size() * sizeof(float)));
      os.write(reinterpret_cast<const char*>(s.targets.data()),
               static_cast<std::streamsize>(s.targets.size() * sizeof(float)));
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset " + path.string());
  detail::expect_magic(is, "NSDS");
  if (detail::get<std::uint32_t>(is) != kDatasetVersion) throw IoError("unsupported dataset version");
  Dataset ds;
  ds.nasalance.hp_cutoff_hz = detail::get<double>(is);
  ds.nasalance.rms_window_samples = detail::get<std::uint64_t>(is);
  ds.nasalance.target_rate_hz = detail::get<double>(is);
  ds.nasalance.smooth_window_samples = detail::get<std::uint64_t>(is);
  const auto n_utts = detail::get<std::uint64_t>(is);
  if (n_utts > (1u << 20)) throw IoError("dataset: implausible utterance count");
  for (std::uint64_t i = 0; i < n_utts; ++i) {
    PreparedUtterance u;
    u.id = detail::get_string(is, 4096);
    u.speaker_id = detail::get_string(is, 4096);
    const auto n_seg = detail::get<std::uint64_t>(is);
    if (n_seg > 4096) throw IoError("dataset: implausible segment count");
    for (std::uint64_t k = 0; k < n_seg; ++k) {
      PreparedSegment s;
      s.segment_index = detail::get<std::uint64_t>(is);
      s.valid_frames = detail::get<std::uint64_t>(is);
      if (s.valid_frames == 0 || s.valid_frames > kSegmentFrames)
        throw IoError("dataset: invalid frame count");
      s.input.resize(kAudSpecChannels * kAudSpecFrames);
      s.targets.resize(kAllTargets * kSegmentFrames);
      is.read(reinterpret_cast<char*>(s.input.data()),
              static_cast<std::streamsize>(s.input.size() * sizeof(float)));
      is.read(reinterpret_cast<char*>(s.targets.data()),
              static_cast<std::streamsize>(s.targets.size() * sizeof(float)));
      if (!is) throw IoError("dataset: truncated payload");
      u.segments.push_back(std::move(s));
    }
    ds.utterances.push_back(std::move(u));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("dataset: trailing bytes");
  ds.nasalance.validate();
  return ds;
}

}  // namespace nasality
