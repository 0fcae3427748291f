#include "nasality/acoustic_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "binary_io.hpp"
#include "nasality/error.hpp"

namespace nasality {
namespace {

constexpr std::uint32_t kAudSpecVersion = 1;

}  // namespace

std::vector<double> audspec_channel_freqs() {
  std::vector<double> f(kAudSpecChannels);
  for (std::size_t k = 0; k < f.size(); ++k)
    f[k] = kAudSpecLowestHz * std::exp2(static_cast<double>(k) / kAudSpecChannelsPerOctave);
  return f;
}

Signal mix_and_resample(const Signal& oral, const Signal& nasal) {
  if (oral.empty() || nasal.empty()) throw InvalidInput("mix_and_resample: empty input");
  if (oral.size() != nasal.size() || oral.rate_hz != nasal.rate_hz)
    throw InvalidInput("mix_and_resample: oral and nasal signals must match in rate and length");
  if (oral.rate_hz < kFrontendRate)
    throw InvalidInput("mix_and_resample: source rate below 16 kHz");

  Signal mixed{std::vector<double>(oral.size()), oral.rate_hz, oral.t0_s};
  for (std::size_t i = 0; i < mixed.size(); ++i)
    mixed.samples[i] = 0.5 * (oral.samples[i] + nasal.samples[i]);

  Signal out = oral.rate_hz == kFrontendRate ? std::move(mixed)
                                             : resample_linear(mixed, kFrontendRate);
  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 1.0) {
    const double g = 0.9 / peak;
    for (double& v : out.samples) v *= g;
  }
  return out;
}

std::vector<Segment> segment_utterance(const Signal& audio, const std::vector<Trace>& targets,
                                       const std::string& utterance_id) {
  if (audio.empty()) throw InvalidInput("segment_utterance: empty audio");
  if (audio.rate_hz != kFrontendRate) throw InvalidInput("segment_utterance: audio must be 16 kHz");

  const std::size_t hop = kSegmentSamples / kSegmentFrames;
  std::size_t frames = (audio.size() + hop - 1) / hop;
  if (!targets.empty()) {
    frames = targets.front().size();
    for (const Trace& t : targets) {
      if (t.size() != frames) throw InvalidInput("segment_utterance: target lengths differ");
      if (t.rate_hz != 100.0) throw InvalidInput("segment_utterance: targets must be 100 Hz");
    }
    const double audio_s = static_cast<double>(audio.size()) / kFrontendRate;
    const double target_s = static_cast<double>(frames) / 100.0;
    if (std::abs(audio_s - target_s) > 0.01 + 1e-9)
      throw InvalidInput("segment_utterance: audio and targets differ by more than one frame");
  }
  if (frames == 0) throw InvalidInput("segment_utterance: no target frames");

  const std::size_t n_segments = (frames + kSegmentFrames - 1) / kSegmentFrames;
  std::vector<Segment> segments;
  segments.reserve(n_segments);
  for (std::size_t k = 0; k < n_segments; ++k) {
    Segment seg;
    seg.utterance_id = utterance_id;
    seg.segment_index = k;

    const std::size_t a0 = std::min(k * kSegmentSamples, audio.size());
    const std::size_t a1 = std::min(a0 + kSegmentSamples, audio.size());
    seg.audio = Signal{std::vector<double>(kSegmentSamples, 0.0), kFrontendRate,
                       audio.t0_s + 2.0 * static_cast<double>(k)};
    std::copy(audio.samples.begin() + static_cast<std::ptrdiff_t>(a0),
              audio.samples.begin() + static_cast<std::ptrdiff_t>(a1), seg.audio.samples.begin());
    seg.audio_valid_samples = a1 - a0;

    const std::size_t f0 = k * kSegmentFrames;
    const std::size_t f1 = std::min(f0 + kSegmentFrames, frames);
    seg.valid_frames = f1 - f0;
    for (const Trace& t : targets) {
      Trace part{std::vector<double>(kSegmentFrames, 0.0), t.rate_hz,
                 t.t0_s + 2.0 * static_cast<double>(k), t.kind};
      std::copy(t.values.begin() + static_cast<std::ptrdiff_t>(f0),
                t.values.begin() + static_cast<std::ptrdiff_t>(f1), part.values.begin());
      seg.targets.push_back(std::move(part));
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

AudSpec audspec(const Signal& segment_audio) {
  if (segment_audio.size() != kSegmentSamples)
    throw InvalidInput("audspec: segment must hold exactly 32000 samples");
  if (segment_audio.rate_hz != kFrontendRate) throw InvalidInput("audspec: audio must be 16 kHz");

  AudSpec out;
  out.channel_freqs_hz = audspec_channel_freqs();
  out.bins.assign(out.channels * out.frames, 0.0f);

  const double leak = std::exp(-1.0 / (kAudSpecIntegrationS * kFrontendRate));
  const auto& x = segment_audio.samples;

  for (std::size_t ch = 0; ch < out.channels; ++ch) {
    // Constant-peak-gain bandpass biquad.
    const double w0 = 2.0 * std::numbers::pi * out.channel_freqs_hz[ch] / kFrontendRate;
    const double alpha = std::sin(w0) / (2.0 * kAudSpecQ);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0;
    const double b2 = -alpha / a0;
    const double a1 = -2.0 * std::cos(w0) / a0;
    const double a2 = (1.0 - alpha) / a0;

    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0, level = 0.0;
    float* row = out.bins.data() + ch * out.frames;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double y = b0 * x[n] + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[n];
      y2 = y1;
      y1 = y;
      level = leak * level + (1.0 - leak) * std::max(y, 0.0);
      if ((n + 1) % kAudSpecHopSamples == 0)
        row[n / kAudSpecHopSamples] = static_cast<float>(std::cbrt(std::max(level, 0.0)));
    }
  }
  return out;
}

void write_audspec(const std::filesystem::path& path, const AudSpec& spec) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("ADSP", 4);
  detail::put<std::uint32_t>(os, kAudSpecVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.channels));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(spec.frames));
  detail::put<double>(os, spec.frame_hop_s);
  for (double f : spec.channel_freqs_hz) detail::put<double>(os, f);
  os.write(reinterpret_cast<const char*>(spec.bins.data()),
           static_cast<std::streamsize>(spec.bins.size() * sizeof(float)));
  if (!os) throw IoError("failed writing " + path.string());
}

AudSpec read_audspec(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  detail::expect_magic(is, "ADSP");
  if (detail::get<std::uint32_t>(is) != kAudSpecVersion)
    throw IoError(path.string() + ": unsupported AudSpec version");
  AudSpec spec;
  spec.channels = detail::get<std::uint32_t>(is);
  spec.frames = detail::get<std::uint32_t>(is);
  spec.frame_hop_s = detail::get<double>(is);
  if (spec.channels == 0 || spec.frames == 0 || spec.channels * spec.frames > (1u << 26))
    throw IoError(path.string() + ": implausible AudSpec shape");
  spec.channel_freqs_hz.resize(spec.channels);
  for (double& f : spec.channel_freqs_hz) f = detail::get<double>(is);
  spec.bins.resize(spec.channels * spec.frames);
  if (!is.read(reinterpret_cast<char*>(spec.bins.data()),
               static_cast<std::streamsize>(spec.bins.size() * sizeof(float))))
    throw IoError(path.string() + ": truncated AudSpec bins");
  return spec;
}

}  // namespace nasality
