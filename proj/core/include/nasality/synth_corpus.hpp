#pragma once

// Deterministic synthetic paired corpus: oral mic, nasal mic, EGG, an
// HSV-like port-brightness trace and the velopharyngeal ground truth,
// generated with a glottal-pulse source and a small resonator bank.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nasality/file_formats.hpp"
#include "nasality/physio_params.hpp"
#include "nasality/signal_core.hpp"

namespace nasality {

inline constexpr double kSynthRate = 51200.0;
inline constexpr double kHsvRate = 1000.0;
inline constexpr double kVelumTransitionS = 0.080;
inline constexpr double kLeakage = 0.05;

struct SpeakerProfile {
  double f0_base_hz = 120.0;       // [90, 230]
  double formant_scale = 1.0;      // [0.85, 1.15]
  double nasal_coupling_gain = 0.85;  // [0.7, 1.0]
  std::uint64_t seed = 0;
  bool female = false;

  // Female profiles draw f0 from [160, 230] Hz and formant scale from
  // [1.0, 1.15]; male ones from [90, 150] Hz and [0.85, 1.0].
  static SpeakerProfile from_seed(std::uint64_t seed, bool female);
};

enum class SegmentKind { oral_vowel, nasal_consonant, oral_consonant, silence };
enum class Contrast { none, rime_nasal, onset_nasal };

std::string_view to_string(Contrast c) noexcept;

struct ScriptSegment {
  SegmentKind kind = SegmentKind::silence;
  double duration_s = 0.1;
  double vp_target = 0.0;  // port opening in [0, 1]
  bool voiced = false;
  int quality = 0;  // vowel identity 0..4 (/a i u e o/)
};

struct GestureScript {
  std::vector<ScriptSegment> segments;
  Contrast contrast = Contrast::none;

  double duration_s() const noexcept;
  // Positive durations, vp_target in [0, 1], total in [0.5, 12] s, silent
  // segments unvoiced.
  void validate() const;
};

struct SynthUtterance {
  Signal oral;      // 51.2 kHz
  Signal nasal;     // 51.2 kHz
  Signal egg;       // 51.2 kHz
  Trace hsv;        // 1 kHz, bright = closed port
  Trace vp_truth;   // 100 Hz port opening in [0, 1]
};

SynthUtterance synthesize_utterance(const SpeakerProfile& profile, const GestureScript& script,
                                    std::uint64_t seed);

// "It's hoe me" / "It's home E" frame with matched segment durations. In the
// rime variant the vowel before /m/ is already nasalized.
GestureScript contrast_script(Contrast contrast);

// Random syllable string with at least one nasal consonant, 1.5-4 s long.
GestureScript random_script(std::uint64_t seed);

// Writes WAV/CSV files plus manifest.json under out_dir. The first two
// utterances of each speaker are the rime/onset contrast pair. Speakers
// alternate F/M until the male quota (3 of 8) is met.
CorpusManifest build_corpus(std::size_t n_speakers, std::size_t utts_per_speaker,
                            std::uint64_t seed, const std::filesystem::path& out_dir);

// Profile and script for a manifest utterance, rebuilt from the seeds.
SpeakerProfile profile_for(const SpeakerRecord& speaker);

}  // namespace nasality
