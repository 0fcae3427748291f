#include "nasality/synth_corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "nasality/error.hpp"

namespace nasality {
namespace {

constexpr double kPi = std::numbers::pi;

// Portable draws from mt19937_64 (the standard distributions are not
// specified bit-for-bit across library implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool chance(double p) { return uniform() < p; }
  int pick(int n) { return static_cast<int>(uniform() * n) % n; }
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// /a i u e o/ (F1, F2) in Hz.
constexpr std::array<std::array<double, 2>, 5> kVowelFormants{{
    {730.0, 1090.0}, {270.0, 2290.0}, {300.0, 870.0}, {530.0, 1840.0}, {570.0, 840.0}}};

std::array<double, 2> formant_targets(const ScriptSegment& s) {
  switch (s.kind) {
    case SegmentKind::oral_vowel:
      return kVowelFormants[static_cast<std::size_t>(std::clamp(s.quality, 0, 4))];
    case SegmentKind::nasal_consonant:
      return {300.0, 1100.0};
    case SegmentKind::oral_consonant:
      return s.voiced ? std::array<double, 2>{350.0, 1700.0} : std::array<double, 2>{1800.0, 3500.0};
    case SegmentKind::silence:
      break;
  }
  return {500.0, 1500.0};
}

// Raised-cosine blend of per-segment targets with transitions of `width`
// seconds centered on each boundary.
class Track {
 public:
  Track(std::vector<double> targets, std::vector<double> boundaries, double width)
      : targets_(std::move(targets)), boundaries_(std::move(boundaries)), half_(width / 2.0) {}

  // Queries must be made at non-decreasing times.
  double at(double t) {
    while (full_ < boundaries_.size() && boundaries_[full_] + half_ <= t) ++full_;
    double v = targets_[full_];
    for (std::size_t i = full_; i < boundaries_.size() && boundaries_[i] - half_ < t; ++i) {
      const double u = (t - (boundaries_[i] - half_)) / (2.0 * half_);
      v += (targets_[i + 1] - targets_[i]) * 0.5 * (1.0 - std::cos(kPi * u));
    }
    return v;
  }

 private:
  std::vector<double> targets_;
  std::vector<double> boundaries_;
  double half_;
  std::size_t full_ = 0;
};

// Two-pole resonator with approximately unit gain at its center frequency.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double step(double x, double freq_hz, double bw_hz, double rate) {
    const double r = std::exp(-kPi * bw_hz / rate);
    const double theta = 2.0 * kPi * freq_hz / rate;
    const double gain = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
    const double y = gain * x + 2.0 * r * std::cos(theta) * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

// Zero pair (anti-resonance) normalized to unit DC gain.
struct AntiResonator {
  double x1 = 0.0, x2 = 0.0;
  double b1 = 0.0, b2 = 0.0, norm = 1.0;
  AntiResonator(double freq_hz, double bw_hz, double rate) {
    const double r = std::exp(-kPi * bw_hz / rate);
    b1 = -2.0 * r * std::cos(2.0 * kPi * freq_hz / rate);
    b2 = r * r;
    norm = 1.0 / (1.0 + b1 + b2);
  }
  double step(double x) {
    const double y = norm * (x + b1 * x1 + b2 * x2);
    x2 = x1;
    x1 = x;
    return y;
  }
};

double rosenberg_flow(double phase) {
  constexpr double kOpen = 0.4;
  constexpr double kClose = 0.16;
  if (phase < kOpen) return 0.5 * (1.0 - std::cos(kPi * phase / kOpen));
  if (phase < kOpen + kClose) return std::cos(0.5 * kPi * (phase - kOpen) / kClose);
  return 0.0;
}

double quantize(double seconds) { return std::round(seconds * 100.0) / 100.0; }

// Fixed output calibration: overall mic level and the relative level of the
// nasal branch (the 280 Hz resonance sits near the strong low harmonics).
constexpr double kMicGain = 0.5;
constexpr double kPulseGain = 40.0;
constexpr double kNasalBranchGain = 0.7;
constexpr double kUnvoicedNoise = 0.12;
constexpr double kVoicedNoiseFloor = 0.004;
// Microphone self-noise: the outward-facing oral mic picks up more room
// noise than the shielded nasal mic, so silence reads as oral.
constexpr double kOralMicFloor = 2e-3;
constexpr double kNasalMicFloor = 2e-4;
constexpr double kEggAmplitude = 0.5;
constexpr double kHsvClosed = 0.8;
constexpr double kHsvSpan = 0.6;
constexpr double kHsvNoise = 0.02;

}  // namespace

std::string_view to_string(Contrast c) noexcept {
  switch (c) {
    case Contrast::rime_nasal:
      return "rime_nasal";
    case Contrast::onset_nasal:
      return "onset_nasal";
    case Contrast::none:
      break;
  }
  return "none";
}

SpeakerProfile SpeakerProfile::from_seed(std::uint64_t seed, bool female) {
  Rng rng(mix_seed(seed, 0x5eed));
  SpeakerProfile p;
  p.seed = seed;
  p.female = female;
  p.f0_base_hz = female ? rng.uniform(160.0, 230.0) : rng.uniform(90.0, 150.0);
  p.formant_scale = female ? rng.uniform(1.0, 1.15) : rng.uniform(0.85, 1.0);
  p.nasal_coupling_gain = rng.uniform(0.7, 1.0);
  return p;
}

double GestureScript::duration_s() const noexcept {
  double d = 0.0;
  for (const auto& s : segments) d += s.duration_s;
  return d;
}

void GestureScript::validate() const {
  if (segments.empty()) throw InvalidInput("script: no segments");
  for (const auto& s : segments) {
    if (!(s.duration_s > 0.0)) throw InvalidInput("script: segment durations must be positive");
    if (!(s.vp_target >= 0.0 && s.vp_target <= 1.0))
      throw InvalidInput("script: vp_target must lie in [0, 1]");
    if (s.kind == SegmentKind::silence && s.voiced)
      throw InvalidInput("script: silence cannot be voiced");
  }
  const double d = duration_s();
  if (d < 0.5 - 1e-9 || d > 12.0 + 1e-9) throw InvalidInput("script: total duration outside [0.5, 12] s");
}

SynthUtterance synthesize_utterance(const SpeakerProfile& profile, const GestureScript& script,
                                    std::uint64_t seed) {
  script.validate();
  Rng rng(mix_seed(seed, profile.seed));

  const double total = script.duration_s();
  const auto n = static_cast<std::size_t>(std::llround(total * kSynthRate));
  const double fs = kSynthRate;

  std::vector<double> boundaries;
  std::vector<double> vp, f1, f2, voice, noise, active;
  double acc = 0.0;
  bool any_sound = false;
  for (std::size_t i = 0; i < script.segments.size(); ++i) {
    const auto& s = script.segments[i];
    const auto formants = formant_targets(s);
    vp.push_back(s.vp_target);
    f1.push_back(formants[0] * profile.formant_scale);
    f2.push_back(formants[1] * profile.formant_scale);
    voice.push_back(s.voiced ? 1.0 : 0.0);
    noise.push_back(!s.voiced && s.kind == SegmentKind::oral_consonant ? 1.0 : 0.0);
    active.push_back(s.kind == SegmentKind::silence ? 0.0 : 1.0);
    any_sound = any_sound || s.kind != SegmentKind::silence;
    acc += s.duration_s;
    if (i + 1 < script.segments.size()) boundaries.push_back(acc);
  }

  Track vp_track(vp, boundaries, kVelumTransitionS);
  Track f1_track(f1, boundaries, 0.05);
  Track f2_track(f2, boundaries, 0.05);
  Track voice_track(voice, boundaries, 0.01);
  Track noise_track(noise, boundaries, 0.01);

  SynthUtterance out;
  out.oral = Signal{std::vector<double>(n), fs, 0.0};
  out.nasal = Signal{std::vector<double>(n), fs, 0.0};
  out.egg = Signal{std::vector<double>(n), fs, 0.0};

  const double f0_phase = rng.uniform(0.0, 2.0 * kPi);
  const double floor_gain = any_sound ? 1.0 : 0.0;
  Resonator r1, r2, rn;
  AntiResonator notch(1000.0, 200.0, fs);
  double phase = 0.0;
  double jitter = 1.0 + rng.uniform(-0.03, 0.03);
  double prev_flow = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double v = std::clamp(vp_track.at(t), 0.0, 1.0);
    const double gv = voice_track.at(t);
    const double gn = noise_track.at(t);

    const double f0 = profile.f0_base_hz * (1.0 + 0.06 * std::sin(2.0 * kPi * 0.7 * t + f0_phase)) *
                      (1.0 - 0.05 * t / total);
    phase += f0 * jitter / fs;
    if (phase >= 1.0) {
      phase -= 1.0;
      jitter = 1.0 + rng.uniform(-0.03, 0.03);
    }
    const double flow = rosenberg_flow(phase);
    const double pulse = (flow - prev_flow) * kPulseGain;
    prev_flow = flow;

    const double src = gv * (pulse + kVoicedNoiseFloor * rng.normal()) +
                       gn * kUnvoicedNoise * rng.normal();

    const double oral_branch =
        r1.step(src, f1_track.at(t), 90.0, fs) + 0.6 * r2.step(src, f2_track.at(t), 140.0, fs);
    const double nasal_branch = kNasalBranchGain * notch.step(rn.step(src, 280.0, 100.0, fs));

    const double oral_mic = (1.0 - 0.8 * v) * oral_branch + kLeakage * nasal_branch;
    const double nasal_mic =
        profile.nasal_coupling_gain * v * nasal_branch + kLeakage * oral_branch;

    out.oral.samples[i] = kMicGain * oral_mic + floor_gain * kOralMicFloor * rng.normal();
    out.nasal.samples[i] = kMicGain * nasal_mic + floor_gain * kNasalMicFloor * rng.normal();
    out.egg.samples[i] = kEggAmplitude * gv * std::sin(2.0 * kPi * phase);
  }

  // HSV brightness at 1 kHz.
  {
    Track v_track(vp, boundaries, kVelumTransitionS);
    const auto n_hsv = static_cast<std::size_t>(std::floor(total * kHsvRate + 1e-9));
    out.hsv = Trace{std::vector<double>(n_hsv), kHsvRate, 0.0, TraceKind::hsv_intensity};
    std::size_t seg = 0;
    double seg_end = script.segments.front().duration_s;
    for (std::size_t i = 0; i < n_hsv; ++i) {
      const double t = static_cast<double>(i) / kHsvRate;
      while (t >= seg_end && seg + 1 < script.segments.size()) seg_end += script.segments[++seg].duration_s;
      const double v = std::clamp(v_track.at(t), 0.0, 1.0);
      const double jitter_px = active[seg] > 0.0 ? kHsvNoise * rng.normal() : 0.0;
      out.hsv.values[i] = kHsvClosed - kHsvSpan * v + jitter_px;
    }
  }

  // Port opening at the 100 Hz frame centers used by the extracted traces.
  {
    Track v_track(vp, boundaries, kVelumTransitionS);
    const std::size_t block = 512;
    const std::size_t frames = n / block;
    const double t0 = (static_cast<double>(block) - 1.0) / (2.0 * fs);
    out.vp_truth = Trace{std::vector<double>(frames), 100.0, t0, TraceKind::generic};
    for (std::size_t k = 0; k < frames; ++k)
      out.vp_truth.values[k] = std::clamp(v_track.at(t0 + static_cast<double>(k) / 100.0), 0.0, 1.0);
  }
  return out;
}

GestureScript contrast_script(Contrast contrast) {
  using K = SegmentKind;
  GestureScript s;
  s.contrast = contrast;
  s.segments = {
      {K::silence, 0.25, 0.0, false, 0},
      {K::oral_vowel, 0.10, 0.0, true, 1},       // I
      {K::oral_consonant, 0.12, 0.0, false, 0},  // ts
      {K::oral_consonant, 0.06, 0.0, false, 0},  // h
      {K::oral_vowel, 0.22, 0.0, true, 4},       // o
      {K::nasal_consonant, 0.09, 1.0, true, 0},  // m
      {K::oral_vowel, 0.22, 0.0, true, 1},       // i
      {K::silence, 0.25, 0.0, false, 0},
  };
  if (contrast == Contrast::rime_nasal) s.segments[4].vp_target = 0.9;
  return s;
}

GestureScript random_script(std::uint64_t seed) {
  using K = SegmentKind;
  Rng rng(mix_seed(seed, 0x5c1f7));
  GestureScript s;
  s.segments.push_back({K::silence, quantize(rng.uniform(0.15, 0.3)), 0.0, false, 0});
  const int syllables = 5 + rng.pick(5);
  bool has_nasal = false;
  for (int k = 0; k < syllables; ++k) {
    if (rng.chance(0.7)) {
      if (rng.chance(0.35)) {
        s.segments.push_back({K::nasal_consonant, quantize(rng.uniform(0.06, 0.11)), 1.0, true, 0});
        has_nasal = true;
      } else {
        s.segments.push_back(
            {K::oral_consonant, quantize(rng.uniform(0.06, 0.12)), 0.0, rng.chance(0.5), 0});
      }
    }
    const bool nasal_coda = rng.chance(0.3);
    const bool oral_coda = !nasal_coda && rng.chance(0.2);
    const double vowel_vp = nasal_coda && rng.chance(0.5) ? 0.5 : 0.0;
    s.segments.push_back(
        {K::oral_vowel, quantize(rng.uniform(0.12, 0.25)), vowel_vp, true, rng.pick(5)});
    if (nasal_coda) {
      s.segments.push_back({K::nasal_consonant, quantize(rng.uniform(0.06, 0.11)), 1.0, true, 0});
      has_nasal = true;
    } else if (oral_coda) {
      s.segments.push_back(
          {K::oral_consonant, quantize(rng.uniform(0.06, 0.12)), 0.0, rng.chance(0.5), 0});
    }
    if (k + 1 < syllables && rng.chance(0.15))
      s.segments.push_back({K::silence, quantize(rng.uniform(0.08, 0.15)), 0.0, false, 0});
  }
  if (!has_nasal) {
    // Open the port on the last vowel's following consonant slot.
    s.segments.push_back({K::nasal_consonant, 0.09, 1.0, true, 0});
    s.segments.push_back({K::oral_vowel, 0.15, 0.0, true, rng.pick(5)});
  }
  s.segments.push_back({K::silence, quantize(rng.uniform(0.15, 0.3)), 0.0, false, 0});
  // Keep the total inside [1.5, 4] s by stretching or trimming the tail.
  auto& tail = s.segments.back().duration_s;
  while (s.duration_s() < 1.5) tail = quantize(tail + 0.01);
  while (s.duration_s() > 4.0 && tail > 0.05) tail = quantize(tail - 0.01);
  s.validate();
  return s;
}

SpeakerProfile profile_for(const SpeakerRecord& speaker) {
  return SpeakerProfile::from_seed(speaker.profile_seed, speaker.sex == "F");
}

CorpusManifest build_corpus(std::size_t n_speakers, std::size_t utts_per_speaker,
                            std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n_speakers < 3) throw InvalidInput("build_corpus: need at least 3 speakers");
  if (utts_per_speaker < 2)
    throw InvalidInput("build_corpus: need at least 2 utterances per speaker (contrast pair)");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  CorpusManifest m;
  m.seed = seed;
  m.utts_per_speaker = utts_per_speaker;
  m.root = out_dir;

  const std::size_t males = std::max<std::size_t>(1, (n_speakers * 3 + 4) / 8);
  for (std::size_t si = 0; si < n_speakers; ++si) {
    const bool male = si % 2 == 1 && si / 2 < males;
    char sid[32];
    std::snprintf(sid, sizeof sid, "spk%02zu", si + 1);
    SpeakerRecord rec;
    rec.id = sid;
    rec.sex = male ? "M" : "F";
    rec.profile_seed = mix_seed(seed, 1000 + si);
    const SpeakerProfile profile = SpeakerProfile::from_seed(rec.profile_seed, !male);
    rec.f0_base_hz = profile.f0_base_hz;
    rec.formant_scale = profile.formant_scale;
    rec.nasal_coupling_gain = profile.nasal_coupling_gain;
    m.speakers.push_back(rec);

    const std::filesystem::path spk_dir = out_dir / rec.id;
    std::filesystem::create_directories(spk_dir, ec);
    if (ec) throw IoError("cannot create " + spk_dir.string() + ": " + ec.message());

    for (std::size_t ui = 0; ui < utts_per_speaker; ++ui) {
      const std::uint64_t utt_seed = mix_seed(rec.profile_seed, ui);
      GestureScript script;
      if (ui == 0) script = contrast_script(Contrast::rime_nasal);
      else if (ui == 1) script = contrast_script(Contrast::onset_nasal);
      else script = random_script(utt_seed);

      const SynthUtterance utt = synthesize_utterance(profile, script, utt_seed);
      char uid[64];
      std::snprintf(uid, sizeof uid, "%s_u%03zu", sid, ui + 1);
      UtteranceRecord u;
      u.id = uid;
      u.speaker_id = rec.id;
      u.duration_s = script.duration_s();
      u.contrast = std::string(to_string(script.contrast));
      const std::string base = rec.id + "/" + u.id;
      u.oral = base + "_oral.wav";
      u.nasal = base + "_nasal.wav";
      u.egg = base + "_egg.wav";
      u.hsv = base + "_hsv.csv";
      u.vp_truth = base + "_vp.csv";
      write_wav(out_dir / u.oral, utt.oral);
      write_wav(out_dir / u.nasal, utt.nasal);
      write_wav(out_dir / u.egg, utt.egg);
      write_trace_csv(out_dir / u.hsv, utt.hsv);
      write_trace_csv(out_dir / u.vp_truth, utt.vp_truth);
      for (const auto& rel : {u.oral, u.nasal, u.egg, u.hsv, u.vp_truth})
        u.hashes[rel] = file_hash(out_dir / rel);
      m.utterances.push_back(std::move(u));
    }
  }
  m.validate();
  write_corpus_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace nasality
