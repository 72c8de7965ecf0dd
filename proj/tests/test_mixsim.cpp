// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "calm/mixsim.hpp"

using namespace calm;

namespace {
bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

SourceUtterance utt(std::vector<double> samples, const std::string& speaker,
                    int rate = 16000) {
  SourceUtterance u;
  u.samples = std::move(samples);
  u.speaker = speaker;
  u.rate = rate;
  return u;
}
}  // namespace

TEST_CASE("mix: single source, no delay, no noise is the identity") {
  auto s = utt({0.1, -0.2, 0.3}, "a");
  MixtureSpec spec;
  spec.delays = {0};
  auto rec = mix({s}, spec);
  REQUIRE(rec.mixture == s.samples);
  REQUIRE(rec.noise.empty());
  REQUIRE(rec.masks[0] == std::vector<double>{1, 1, 1});
}

TEST_CASE("mix: two sources overlap after the delay, hand arithmetic") {
  auto a = utt({1, 2, 3, 4, 5, 6, 7, 8}, "a");
  auto b = utt({10, 20, 30, 40}, "b");
  MixtureSpec spec;
  spec.delays = {0, 3};
  auto rec = mix({a, b}, spec);
  REQUIRE(rec.mixture == std::vector<double>{1, 2, 3, 14, 25, 36, 47, 8});
  REQUIRE(rec.masks[1] == std::vector<double>{0, 0, 0, 1, 1, 1, 1, 0});

  // second source longer than the first extends the mixture
  spec.delays = {0, 6};
  auto rec2 = mix({a, b}, spec);
  REQUIRE(rec2.mixture == std::vector<double>{1, 2, 3, 4, 5, 6, 17, 28, 30, 40});
}

TEST_CASE("mix: finite SNR noise has the exact measured power ratio") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 0.1);
  std::vector<double> s(500);
  for (auto& v : s) v = gauss(rng);
  MixtureSpec spec;
  spec.delays = {0};
  spec.snr_db = 10.0;
  spec.seed = 7;
  auto rec = mix({utt(s, "a")}, spec);
  double ps = 0, pn = 0;
  for (double v : s) ps += v * v;
  for (double v : rec.noise) pn += v * v;
  REQUIRE(10.0 * std::log10(ps / pn) == Catch::Approx(10.0).epsilon(1e-9));

  // same seed reproduces the noise bit-exactly
  auto rec2 = mix({utt(s, "a")}, spec);
  REQUIRE(rec2.mixture == rec.mixture);
}

TEST_CASE("mix: validation errors") {
  auto a = utt({0.1}, "a");
  auto b = utt({0.2}, "b", 8000);
  MixtureSpec spec;
  spec.delays = {0, 0};
  REQUIRE_THROWS_AS(mix({a, b}, spec), Error);  // rate mismatch
  spec.delays = {1, 0};
  REQUIRE_THROWS_AS(mix({a, a}, spec), Error);  // speaker-1 delay nonzero
  spec.delays = {0};
  REQUIRE_THROWS_AS(mix({a, a}, spec), Error);  // delay count mismatch
}

TEST_CASE("reconstruction from stored components is bit-exact") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 0.3);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_int_distribution<long> delay(0, 20);
  std::uniform_int_distribution<int> nsrc(1, 3);
  for (int it = 0; it < 100; ++it) {
    std::vector<SourceUtterance> sources;
    MixtureSpec spec;
    int C = nsrc(rng);
    for (int c = 0; c < C; ++c) {
      std::vector<double> s(static_cast<std::size_t>(len(rng)));
      for (auto& v : s) v = gauss(rng);
      sources.push_back(utt(std::move(s), "s" + std::to_string(c)));
      spec.delays.push_back(c == 0 ? 0 : delay(rng));
    }
    spec.snr_db = it % 2 == 0 ? 15.0 : std::numeric_limits<double>::infinity();
    spec.seed = static_cast<std::uint64_t>(it);
    auto rec = mix(sources, spec);
    REQUIRE(rec.reconstruct() == rec.mixture);
  }
}

TEST_CASE("mix is linear in the sources when noiseless") {
  auto a = utt({0.1, 0.2, 0.3}, "a");
  auto b = utt({0.4, 0.5}, "b");
  MixtureSpec spec;
  spec.delays = {0, 1};
  auto base = mix({a, b}, spec);
  for (auto& v : a.samples) v *= 2.0;  // power-of-two scale keeps this exact
  for (auto& v : b.samples) v *= 2.0;
  auto scaled = mix({a, b}, spec);
  for (std::size_t t = 0; t < base.mixture.size(); ++t)
    REQUIRE(scaled.mixture[t] == 2.0 * base.mixture[t]);
}

TEST_CASE("make_enrollment: crop length, whole-utterance fallback, seeds") {
  std::vector<double> long_samples(32000);
  for (std::size_t i = 0; i < long_samples.size(); ++i)
    long_samples[i] = static_cast<double>(i) / 32000.0;
  std::vector<SourceUtterance> pool = {utt(long_samples, "a"),
                                       utt({0.5, 0.5}, "b")};
  auto e = make_enrollment(pool, "a", 1.0, 5);
  REQUIRE(e.samples.size() == 16000);

  auto whole = make_enrollment(pool, "b", 1.0, 5);
  REQUIRE(whole.samples == std::vector<double>{0.5, 0.5});

  auto e2 = make_enrollment(pool, "a", 1.0, 5);
  REQUIRE(e2.samples == e.samples);
  auto e3 = make_enrollment(pool, "a", 1.0, 6);
  REQUIRE(e3.samples != e.samples);

  REQUIRE_THROWS_AS(make_enrollment(pool, "zz", 1.0, 5), Error);
}

TEST_CASE("vad_labels: all-active and all-silent masks") {
  FrontendConfig fc;
  fc.window = 4;
  fc.hop = 4;
  std::vector<double> active(20, 1.0), silent(20, 0.0);
  REQUIRE(vad_labels(active, fc) == std::vector<double>(5, 1.0));
  REQUIRE(vad_labels(silent, fc) == std::vector<double>(5, 0.0));
}

TEST_CASE("vad_labels: half-active toy mask, hand span arithmetic") {
  FrontendConfig fc;
  fc.window = 4;
  fc.hop = 4;
  fc.subsample = 1;
  std::vector<double> mask(12, 0.0);
  for (int i = 0; i < 6; ++i) mask[static_cast<std::size_t>(i)] = 1.0;
  // spans [0,4) 4/4 active -> 1; [4,8) 2/4, not > 50% -> 0; [8,12) -> 0
  REQUIRE(vad_labels(mask, fc) == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("vad_labels: subsampling widens the receptive span") {
  FrontendConfig fc;
  fc.window = 4;
  fc.hop = 4;
  fc.subsample = 2;
  std::vector<double> mask(16, 0.0);
  for (int i = 0; i < 6; ++i) mask[static_cast<std::size_t>(i)] = 1.0;
  // encoder frame 0 spans samples [0,8): 6/8 active -> 1; frame 1 [8,16) -> 0
  REQUIRE(vad_labels(mask, fc) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("log_mel: silence maps every bank to the log floor") {
  std::vector<double> silence(720, 0.0);
  auto feats = log_mel(silence, 16000);
  REQUIRE(feats.frames.rows() == 3);  // 1 + (720-400)/160
  REQUIRE(feats.frames.cols() == 80);
  for (int t = 0; t < feats.frames.rows(); ++t)
    for (int m = 0; m < 80; ++m)
      REQUIRE(feats.frames(t, m) == kLogMelFloor);
}

TEST_CASE("log_mel: 1 kHz tone peaks in the bank containing 1 kHz") {
  std::vector<double> tone(800);
  for (std::size_t i = 0; i < tone.size(); ++i)
    tone[i] = std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 16000.0);
  auto feats = log_mel(tone, 16000);
  int argmax = 0;
  feats.frames.row(0).maxCoeff(&argmax);
  // frequency-bin oracle: recompute the mel center of the winning bank
  auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  double center = hz(mel(8000.0) * (argmax + 1) / 81.0);
  REQUIRE(std::abs(center - 1000.0) < 150.0);
}

TEST_CASE("log_mel: frame-count contract and rate check") {
  REQUIRE(log_mel(std::vector<double>(399, 0.0), 16000).frames.rows() == 0);
  REQUIRE(log_mel(std::vector<double>(400, 0.0), 16000).frames.rows() == 1);
  REQUIRE(log_mel(std::vector<double>(560, 0.0), 16000).frames.rows() == 2);
  REQUIRE_THROWS_AS(log_mel({0.0}, 8000), Error);
}

TEST_CASE("WAV round trip at PCM16 precision") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> s(300);
  for (auto& v : s) v = unit(rng);
  auto path = (std::filesystem::temp_directory_path() / "calm_wav_test.wav").string();
  write_wav(s, 16000, path);
  auto back = read_wav(path);
  REQUIRE(back.rate == 16000);
  REQUIRE(back.samples.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    REQUIRE(back.samples[i] == Catch::Approx(s[i]).margin(1.0 / 32767.0));
  // a second pass through quantization is the identity
  write_wav(back.samples, 16000, path);
  REQUIRE(read_wav(path).samples == back.samples);
  std::filesystem::remove(path);
}

TEST_CASE("synth_task: noiseless single speaker with R=1 is exact one-hot") {
  SynthConfig cfg;
  cfg.vocab_size = 6;
  cfg.rare_vocab = 2;
  cfg.num_speakers = 3;
  cfg.speakers_per_mix = 1;
  cfg.frames_per_token = 1;
  cfg.noise_std = 0.0;
  cfg.num_examples = 4;
  cfg.seed = 21;
  auto ds = synth_task(cfg);
  REQUIRE(ds.examples.size() == 4);
  for (const auto& ex : ds.examples) {
    REQUIRE(ex.mixture.rows() == static_cast<int>(ex.transcripts[0].size()));
    for (std::size_t i = 0; i < ex.transcripts[0].size(); ++i) {
      int t = static_cast<int>(i);
      for (int d = 0; d < cfg.feature_dim(); ++d) {
        double expect = 0.0;
        if (d == ex.transcripts[0][i]) expect = 1.0;
        if (d == cfg.vocab_size + 1 + ex.speakers[0]) expect = 1.0;
        REQUIRE(ex.mixture(t, d) == expect);
      }
    }
    REQUIRE(ex.vad[0] == std::vector<double>(static_cast<std::size_t>(
                             ex.mixture.rows()), 1.0));
  }
}

TEST_CASE("synth_task: rare gain scales only rare-token frames") {
  SynthConfig cfg;
  cfg.vocab_size = 6;
  cfg.rare_vocab = 3;
  cfg.rare_rate = 0.5;
  cfg.speakers_per_mix = 1;
  cfg.rare_gain = 0.25;
  cfg.num_examples = 6;
  cfg.seed = 23;
  auto ds = synth_task(cfg);
  for (const auto& ex : ds.examples)
    for (std::size_t i = 0; i < ex.transcripts[0].size(); ++i) {
      int tok = ex.transcripts[0][i];
      double expect = cfg.is_rare(tok) ? 0.25 : 1.0;
      REQUIRE(ex.mixture(static_cast<int>(i), tok) == expect);
    }
}

TEST_CASE("synth_task: fixed seed is bit-reproducible") {
  SynthConfig cfg;
  cfg.num_examples = 5;
  cfg.speakers_per_mix = 2;
  cfg.noise_std = 0.05;
  cfg.speaker_mixing = true;
  cfg.seed = 31;
  auto a = synth_task(cfg);
  auto b = synth_task(cfg);
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    REQUIRE(same(a.examples[i].mixture, b.examples[i].mixture));
    REQUIRE(a.examples[i].transcripts == b.examples[i].transcripts);
    REQUIRE(a.examples[i].speakers == b.examples[i].speakers);
    for (std::size_t c = 0; c < a.examples[i].enrollments.size(); ++c)
      REQUIRE(same(a.examples[i].enrollments[c], b.examples[i].enrollments[c]));
  }
}

TEST_CASE("synth_task: rare rate 0.1 over ~1000 tokens within binomial 3 sigma") {
  SynthConfig cfg;
  cfg.vocab_size = 40;
  cfg.rare_vocab = 8;
  cfg.rare_rate = 0.1;
  cfg.speakers_per_mix = 1;
  cfg.min_tokens = 10;
  cfg.max_tokens = 10;
  cfg.num_examples = 100;  // 1000 tokens total
  cfg.seed = 37;
  auto ds = synth_task(cfg);
  long long total = 0, rare = 0;
  for (const auto& ex : ds.examples)
    for (int tok : ex.transcripts[0]) {
      ++total;
      rare += cfg.is_rare(tok);
    }
  REQUIRE(total == 1000);
  // binomial 3 sigma around 100 is [71, 129]; the fixed-seed exact count:
  REQUIRE(rare >= 71);
  REQUIRE(rare <= 129);
}

TEST_CASE("dataset save/load round trip is bit-exact") {
  SynthConfig cfg;
  cfg.num_examples = 3;
  cfg.speakers_per_mix = 2;
  cfg.noise_std = 0.1;
  cfg.seed = 41;
  auto ds = synth_task(cfg);
  auto path = (std::filesystem::temp_directory_path() / "calm_ds_test.json").string();
  save_dataset(ds, path);
  auto back = load_dataset(path);
  REQUIRE(back.examples.size() == ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    REQUIRE(same(back.examples[i].mixture, ds.examples[i].mixture));
    REQUIRE(back.examples[i].transcripts == ds.examples[i].transcripts);
    REQUIRE(back.examples[i].vad == ds.examples[i].vad);
    REQUIRE(back.examples[i].speakers == ds.examples[i].speakers);
    for (std::size_t c = 0; c < ds.examples[i].enrollments.size(); ++c)
      REQUIRE(same(back.examples[i].enrollments[c], ds.examples[i].enrollments[c]));
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".bin");
}
