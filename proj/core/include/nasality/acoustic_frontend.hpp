#pragma once

// Network input representation: mic mixing, 16 kHz resampling, 2 s
// segmentation and a constant-Q auditory spectrogram.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "nasality/physio_params.hpp"
#include "nasality/signal_core.hpp"

namespace nasality {

inline constexpr double kFrontendRate = 16000.0;
inline constexpr std::size_t kSegmentSamples = 32000;  // 2 s at 16 kHz
inline constexpr std::size_t kSegmentFrames = 200;     // 2 s at 100 Hz
inline constexpr std::size_t kAudSpecChannels = 128;
inline constexpr std::size_t kAudSpecFrames = 250;     // 2 s at 8 ms hop
inline constexpr std::size_t kAudSpecHopSamples = 128; // 8 ms at 16 kHz
inline constexpr double kAudSpecLowestHz = 180.0;
inline constexpr double kAudSpecChannelsPerOctave = 24.0;
inline constexpr double kAudSpecQ = 8.0;
inline constexpr double kAudSpecIntegrationS = 0.008;

// Log-frequency time-frequency matrix, channel-major (F x T).
struct AudSpec {
  std::size_t channels = kAudSpecChannels;
  std::size_t frames = kAudSpecFrames;
  double frame_hop_s = 0.008;
  std::vector<double> channel_freqs_hz;
  std::vector<float> bins;  // bins[f * frames + t]

  float at(std::size_t f, std::size_t t) const { return bins[f * frames + t]; }
};

struct Segment {
  std::string utterance_id;
  std::size_t segment_index = 0;
  Signal audio;                   // exactly kSegmentSamples at 16 kHz
  std::size_t audio_valid_samples = 0;
  std::vector<Trace> targets;     // each exactly kSegmentFrames long
  std::size_t valid_frames = 0;   // unpadded target frames, >= 1
};

// Center frequencies 180 * 2^(k/24) Hz, k = 0..127.
std::vector<double> audspec_channel_freqs();

// (oral + nasal) / 2 linearly interpolated onto a 16 kHz grid, scaled to a
// 0.9 peak when the mix would exceed 1.0.
Signal mix_and_resample(const Signal& oral, const Signal& nasal);

// Non-overlapping 2 s windows; the final window is zero-padded in audio and
// in every target. Segment k covers [2k, 2k + 2) s.
std::vector<Segment> segment_utterance(const Signal& audio, const std::vector<Trace>& targets,
                                       const std::string& utterance_id = {});

// Resonator bank, half-wave rectification, 8 ms leaky integration, frame
// sampling every 8 ms and cube-root compression.
AudSpec audspec(const Signal& segment_audio);

// Binary cache: "ADSP", u32 version, u32 F, u32 T, f64 hop, F x f64 channel
// frequencies, F*T little-endian f32 bins.
void write_audspec(const std::filesystem::path& path, const AudSpec& spec);
AudSpec read_audspec(const std::filesystem::path& path);

}  // namespace nasality
