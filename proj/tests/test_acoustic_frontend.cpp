#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/error.hpp"
#include "support.hpp"

using namespace nasality;

TEST_CASE("mixing identities") {
  const Signal s = test::sine(0.4, 300.0, 51200.0, 1.0);
  const Signal mixed = mix_and_resample(s, s);
  CHECK(mixed.rate_hz == 16000.0);
  CHECK(test::max_abs_diff(mixed.samples, resample_linear(s, 16000.0).samples) < 1e-15);
  CHECK(mixed.size() == 16000);

  Signal neg = s;
  for (auto& v : neg.samples) v = -v;
  for (double v : mix_and_resample(s, neg).samples) CHECK(v == 0.0);
}

TEST_CASE("mix is peak-normalized only above unity") {
  const Signal loud = test::sine(3.0, 250.0, 51200.0, 0.5);
  const Signal m = mix_and_resample(loud, loud);
  double peak = 0.0;
  for (double v : m.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(0.9));

  const Signal quiet = test::sine(0.5, 250.0, 16000.0, 0.5);
  CHECK(mix_and_resample(quiet, quiet).samples == quiet.samples);

  CHECK_THROWS_AS(mix_and_resample(quiet, loud), InvalidInput);
}

TEST_CASE("segmentation pads the tail and tracks valid frames") {
  const Signal audio = test::sine(0.3, 200.0, 16000.0, 3.5);
  Trace t{std::vector<double>(350, 0.25), 100.0, 0.005, TraceKind::nasalance};
  for (std::size_t i = 0; i < t.size(); ++i) t.values[i] = static_cast<double>(i);
  const auto segs = segment_utterance(audio, {t}, "u1");
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].valid_frames == 200);
  CHECK(segs[1].valid_frames == 150);
  CHECK(segs[1].audio_valid_samples == 24000);
  for (const auto& s : segs) {
    CHECK(s.audio.size() == kSegmentSamples);
    CHECK(s.targets.front().size() == kSegmentFrames);
    CHECK(s.utterance_id == "u1");
  }
  CHECK(segs[1].targets[0].values[149] == 349.0);
  for (std::size_t i = 150; i < 200; ++i) CHECK(segs[1].targets[0].values[i] == 0.0);
  for (std::size_t i = 24000; i < kSegmentSamples; ++i) CHECK(segs[1].audio.samples[i] == 0.0);
  CHECK(segs[1].audio.t0_s == 2.0);

  // Exactly 2 s: a single unpadded segment.
  const auto one = segment_utterance(test::sine(0.3, 200.0, 16000.0, 2.0), {Trace{std::vector<double>(200, 0.0), 100.0, 0.0, TraceKind::voicing}});
  REQUIRE(one.size() == 1);
  CHECK(one[0].valid_frames == 200);

  Trace bad{std::vector<double>(100, 0.0), 100.0, 0.0, TraceKind::voicing};
  CHECK_THROWS_AS(segment_utterance(audio, {t, bad}), InvalidInput);
  CHECK_THROWS_AS(segment_utterance(audio, {bad}), InvalidInput);
}

TEST_CASE("auditory spectrogram layout") {
  const auto freqs = audspec_channel_freqs();
  REQUIRE(freqs.size() == 128);
  CHECK(freqs.front() == 180.0);
  for (std::size_t k = 1; k < freqs.size(); ++k)
    CHECK(freqs[k] / freqs[k - 1] == doctest::Approx(std::exp2(1.0 / 24.0)).epsilon(1e-9));

  Signal seg{std::vector<double>(kSegmentSamples, 0.0), 16000.0, 0.0};
  const AudSpec silent = audspec(seg);
  CHECK(silent.bins.size() == 128 * 250);
  for (float v : silent.bins) CHECK(v == 0.0f);

  Signal noise{test::gaussian(kSegmentSamples, 3, 0.2), 16000.0, 0.0};
  const AudSpec a = audspec(noise);
  CHECK(a.channels == 128);
  CHECK(a.frames == 250);
  CHECK(a.frame_hop_s == 0.008);
  for (float v : a.bins) CHECK((v >= 0.0f && std::isfinite(v)));

  CHECK_THROWS_AS(audspec(test::sine(1.0, 100.0, 16000.0, 1.0)), InvalidInput);
}

TEST_CASE("a tone peaks in its own channel") {
  const auto freqs = audspec_channel_freqs();
  for (std::size_t target : {10u, 60u, 110u}) {
    const AudSpec a = audspec(test::sine(0.5, freqs[target], 16000.0, 2.0));
    std::size_t best = 0;
    for (std::size_t f = 0; f < a.channels; ++f)
      if (a.at(f, 200) > a.at(best, 200)) best = f;
    CHECK(best == target);
  }
}

TEST_CASE("AudSpec cache round-trips") {
  const auto dir = test::scratch("audspec");
  const AudSpec a = audspec(Signal{test::gaussian(kSegmentSamples, 5, 0.1), 16000.0, 0.0});
  write_audspec(dir / "a.adsp", a);
  const AudSpec b = read_audspec(dir / "a.adsp");
  CHECK(b.bins == a.bins);
  CHECK(b.channel_freqs_hz == a.channel_freqs_hz);
  CHECK(b.frame_hop_s == a.frame_hop_s);

  {
    std::ofstream(dir / "bad.adsp") << "NOPE";
    CHECK_THROWS_AS(read_audspec(dir / "bad.adsp"), IoError);
  }
}
