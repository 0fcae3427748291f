#include "nasality/file_formats.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "nasality/error.hpp"

namespace nasality {
namespace {

using nlohmann::json;

std::string format_g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double infer_rate(const std::vector<double>& times) {
  if (times.size() < 2) throw IoError("trace CSV needs at least two rows to infer a rate");
  const double span = times.back() - times.front();
  if (!(span > 0.0)) throw IoError("trace CSV times must increase");
  const double rate = static_cast<double>(times.size() - 1) / span;
  const double rounded = std::round(rate);
  // Times carry 6 significant digits, so accept a small relative error.
  return std::abs(rate - rounded) <= 1e-4 * rate ? rounded : rate;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Signal& x) {
  if (!(x.rate_hz > 0.0) || x.rate_hz != std::round(x.rate_hz))
    throw InvalidInput("write_wav: sample rate must be a positive integer");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto data_bytes = static_cast<std::uint32_t>(x.size() * sizeof(float));
  const auto rate = static_cast<std::uint32_t>(x.rate_hz);
  os.write("RIFF", 4);
  detail::put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  detail::put<std::uint32_t>(os, 16);
  detail::put<std::uint16_t>(os, 3);  // IEEE float
  detail::put<std::uint16_t>(os, 1);
  detail::put<std::uint32_t>(os, rate);
  detail::put<std::uint32_t>(os, rate * 4);
  detail::put<std::uint16_t>(os, 4);
  detail::put<std::uint16_t>(os, 32);
  os.write("data", 4);
  detail::put<std::uint32_t>(os, data_bytes);
  for (double v : x.samples) detail::put<float>(os, static_cast<float>(v));
  if (!os) throw IoError("failed writing " + path.string());
}

Signal read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char tag[4];
  auto read_tag = [&] {
    if (!is.read(tag, 4)) throw IoError(path.string() + ": truncated WAV");
  };
  read_tag();
  if (std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path.string() + ": not a RIFF file");
  detail::get<std::uint32_t>(is);
  read_tag();
  if (std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    read_tag();
    const auto size = detail::get<std::uint32_t>(is);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(path.string() + ": short fmt chunk");
      format = detail::get<std::uint16_t>(is);
      channels = detail::get<std::uint16_t>(is);
      rate = detail::get<std::uint32_t>(is);
      detail::get<std::uint32_t>(is);
      detail::get<std::uint16_t>(is);
      bits = detail::get<std::uint16_t>(is);
      is.seekg(size - 16 + (size & 1u), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path.string() + ": data chunk before fmt");
      if (channels != 1) throw IoError(path.string() + ": only mono WAV is supported");
      if (rate == 0) throw IoError(path.string() + ": zero sample rate");
      Signal x;
      x.rate_hz = rate;
      if (format == 3 && bits == 32) {
        x.samples.resize(size / 4);
        for (double& v : x.samples) {
          const auto f = detail::get<float>(is);
          if (!std::isfinite(f)) throw IoError(path.string() + ": non-finite sample");
          v = f;
        }
      } else if (format == 1 && bits == 16) {
        x.samples.resize(size / 2);
        for (double& v : x.samples) v = detail::get<std::int16_t>(is) / 32768.0;
      } else {
        throw IoError(path.string() + ": unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
      }
      return x;
    } else {
      is.seekg(size + (size & 1u), std::ios::cur);
    }
  }
}

void write_trace_csv(const std::filesystem::path& path, const Trace& t) {
  std::string text = "time_s,value\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    text += format_g6(t.t0_s + static_cast<double>(i) / t.rate_hz);
    text += ',';
    text += format_g6(t.values[i]);
    text += '\n';
  }
  write_text_file(path, text);
}

Trace read_trace_csv(const std::filesystem::path& path, TraceKind kind) {
  auto traces = read_traces_csv(path);
  if (traces.size() != 1) throw IoError(path.string() + ": expected a single value column");
  traces.front().kind = kind;
  return traces.front();
}

void write_traces_csv(const std::filesystem::path& path, const std::vector<Trace>& traces) {
  if (traces.empty()) throw InvalidInput("write_traces_csv: no traces");
  const Trace& ref = traces.front();
  std::string text = "time_s";
  for (const Trace& t : traces) {
    if (t.size() != ref.size() || t.rate_hz != ref.rate_hz)
      throw InvalidInput("write_traces_csv: traces must share one time grid");
    text += ',';
    text += to_string(t.kind);
  }
  text += '\n';
  for (std::size_t i = 0; i < ref.size(); ++i) {
    text += format_g6(ref.t0_s + static_cast<double>(i) / ref.rate_hz);
    for (const Trace& t : traces) {
      text += ',';
      text += format_g6(t.values[i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<Trace> read_traces_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty CSV");
  const auto header = split_commas(line);
  if (header.size() < 2 || header.front() != "time_s")
    throw IoError(path.string() + ": header must start with time_s");

  std::vector<double> times;
  std::vector<std::vector<double>> columns(header.size() - 1);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) throw IoError(path.string() + ": ragged row");
    times.push_back(parse_double(cells[0], path));
    for (std::size_t c = 1; c < cells.size(); ++c) columns[c - 1].push_back(parse_double(cells[c], path));
  }
  const double rate = infer_rate(times);
  std::vector<Trace> out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    TraceKind kind = TraceKind::generic;
    if (header[c + 1] != "value") kind = parse_trace_kind(header[c + 1]);
    out.push_back(Trace{std::move(columns[c]), rate, times.front(), kind});
  }
  return out;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void CorpusManifest::validate() const {
  std::set<std::string> speaker_ids;
  for (const auto& s : speakers) {
    if (!speaker_ids.insert(s.id).second) throw ConfigError("manifest: duplicate speaker id " + s.id);
  }
  std::set<std::string> utt_ids;
  for (const auto& u : utterances) {
    if (!utt_ids.insert(u.id).second) throw ConfigError("manifest: duplicate utterance id " + u.id);
    if (!speaker_ids.contains(u.speaker_id))
      throw ConfigError("manifest: utterance " + u.id + " references unknown speaker " + u.speaker_id);
    if (u.oral.empty() || u.nasal.empty() || u.egg.empty())
      throw ConfigError("manifest: utterance " + u.id + " lacks a required signal path");
  }
}

const SpeakerRecord& CorpusManifest::speaker(const std::string& id) const {
  for (const auto& s : speakers) {
    if (s.id == id) return s;
  }
  throw ConfigError("manifest: unknown speaker " + id);
}

void write_corpus_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["utts_per_speaker"] = m.utts_per_speaker;
  j["speakers"] = json::array();
  for (const auto& s : m.speakers) {
    j["speakers"].push_back({{"id", s.id},
                             {"sex", s.sex},
                             {"profile_seed", s.profile_seed},
                             {"f0_base_hz", s.f0_base_hz},
                             {"formant_scale", s.formant_scale},
                             {"nasal_coupling_gain", s.nasal_coupling_gain}});
  }
  j["utterances"] = json::array();
  for (const auto& u : m.utterances) {
    json ju{{"id", u.id},         {"speaker_id", u.speaker_id}, {"oral", u.oral},
            {"nasal", u.nasal},   {"egg", u.egg},               {"duration_s", u.duration_s},
            {"contrast", u.contrast}, {"hashes", u.hashes}};
    if (!u.hsv.empty()) ju["hsv"] = u.hsv;
    if (!u.vp_truth.empty()) ju["vp_truth"] = u.vp_truth;
    j["utterances"].push_back(std::move(ju));
  }
  write_text_file(path, j.dump(2) + "\n");
}

CorpusManifest read_corpus_manifest(const std::filesystem::path& path) {
  CorpusManifest m;
  try {
    const json j = json::parse(read_text_file(path));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.utts_per_speaker = j.value("utts_per_speaker", std::size_t{0});
    for (const auto& s : j.at("speakers")) {
      m.speakers.push_back(SpeakerRecord{s.at("id").get<std::string>(), s.at("sex").get<std::string>(),
                                         s.value("profile_seed", std::uint64_t{0}),
                                         s.value("f0_base_hz", 0.0), s.value("formant_scale", 1.0),
                                         s.value("nasal_coupling_gain", 1.0)});
    }
    for (const auto& u : j.at("utterances")) {
      UtteranceRecord r;
      r.id = u.at("id").get<std::string>();
      r.speaker_id = u.at("speaker_id").get<std::string>();
      r.oral = u.at("oral").get<std::string>();
      r.nasal = u.at("nasal").get<std::string>();
      r.egg = u.at("egg").get<std::string>();
      r.hsv = u.value("hsv", std::string{});
      r.vp_truth = u.value("vp_truth", std::string{});
      r.duration_s = u.at("duration_s").get<double>();
      r.contrast = u.value("contrast", std::string{"none"});
      r.hashes = u.value("hashes", std::map<std::string, std::string>{});
      m.utterances.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  m.root = path.parent_path();
  m.validate();
  return m;
}

void write_split_manifest(const std::filesystem::path& path, const SplitManifest& s) {
  json j{{"train", s.train}, {"val", s.val}, {"test", s.test}, {"seed", s.seed}};
  write_text_file(path, j.dump(2) + "\n");
}

SplitManifest read_split_manifest(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text_file(path));
    SplitManifest s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace nasality
