// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Mixture simulation: delayed, masked sums of clean sources plus optional
// white noise at a target SNR; enrollment cropping; frame-level activity
// labels; a log-mel frontend; and a fully synthetic feature-domain task.

#ifndef CALM_MIXSIM_HPP
#define CALM_MIXSIM_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "calm/checkpoint.hpp"
#include "calm/common.hpp"
#include "calm/types.hpp"

namespace calm {

struct SourceUtterance {
  std::vector<double> samples;  // PCM in [-1, 1]
  int rate = 16000;
  std::string speaker;
  std::string transcript;
};

struct MixtureSpec {
  std::vector<long> delays;  // per-speaker sample offsets; delays[0] must be 0
  double snr_db = std::numeric_limits<double>::infinity();  // inf -> no noise
  std::uint64_t seed = 0;

  void validate(std::size_t num_sources) const {
    CALM_CHECK(num_sources >= 1, "MixtureSpec: need at least one source");
    CALM_CHECK(delays.size() == num_sources,
               "MixtureSpec: " << delays.size() << " delays for " << num_sources
                               << " sources");
    CALM_CHECK(delays[0] == 0, "MixtureSpec: delay of speaker 1 must be 0");
    for (long d : delays) CALM_CHECK(d >= 0, "MixtureSpec: negative delay");
  }
};

struct MixtureRecord {
  std::vector<double> mixture;                    // X
  std::vector<std::vector<double>> placed;        // S^c zero-padded to |X|
  std::vector<std::vector<double>> masks;         // Y^c, 0/1 per sample
  std::vector<double> noise;                      // G, |X| (empty -> zero)
  std::vector<std::string> speakers;
  std::vector<std::string> transcripts;
  int rate = 16000;

  // Replays X = sum_c Y^c (.) S^c + G in storage order.
  std::vector<double> reconstruct() const {
    std::vector<double> x(mixture.size(), 0.0);
    for (std::size_t c = 0; c < placed.size(); ++c)
      for (std::size_t t = 0; t < x.size(); ++t)
        x[t] += masks[c][t] * placed[c][t];
    if (!noise.empty())
      for (std::size_t t = 0; t < x.size(); ++t) x[t] += noise[t];
    return x;
  }
};

inline MixtureRecord mix(const std::vector<SourceUtterance>& sources,
                         const MixtureSpec& spec) {
  spec.validate(sources.size());
  for (const auto& s : sources)
    CALM_CHECK(s.rate == sources[0].rate, "mix: sample-rate mismatch "
                                              << s.rate << " vs "
                                              << sources[0].rate);

  std::size_t length = 0;
  for (std::size_t c = 0; c < sources.size(); ++c)
    length = std::max(length, static_cast<std::size_t>(spec.delays[c]) +
                                  sources[c].samples.size());

  MixtureRecord rec;
  rec.rate = sources[0].rate;
  rec.mixture.assign(length, 0.0);
  for (std::size_t c = 0; c < sources.size(); ++c) {
    std::vector<double> placed(length, 0.0);
    std::vector<double> mask(length, 0.0);
    std::size_t d = static_cast<std::size_t>(spec.delays[c]);
    for (std::size_t t = 0; t < sources[c].samples.size(); ++t) {
      placed[d + t] = sources[c].samples[t];
      mask[d + t] = 1.0;
    }
    for (std::size_t t = 0; t < length; ++t) rec.mixture[t] += mask[t] * placed[t];
    rec.placed.push_back(std::move(placed));
    rec.masks.push_back(std::move(mask));
    rec.speakers.push_back(sources[c].speaker);
    rec.transcripts.push_back(sources[c].transcript);
  }

  if (std::isfinite(spec.snr_db)) {
    double signal_power = 0.0;
    for (double x : rec.mixture) signal_power += x * x;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> g(length);
    double raw_power = 0.0;
    for (auto& v : g) {
      v = gauss(rng);
      raw_power += v * v;
    }
    // scale so the measured SNR against the source sum is exact
    double target_power = signal_power * std::pow(10.0, -spec.snr_db / 10.0);
    double scale = raw_power > 0.0 ? std::sqrt(target_power / raw_power) : 0.0;
    for (auto& v : g) v *= scale;
    for (std::size_t t = 0; t < length; ++t) rec.mixture[t] += g[t];
    rec.noise = std::move(g);
  }
  return rec;
}

// Seeded contiguous crop of a disjoint utterance of the speaker. The pool
// must not contain the mixed utterance; shorter material is used whole.
inline SourceUtterance make_enrollment(const std::vector<SourceUtterance>& pool,
                                       const std::string& speaker,
                                       double duration_s, std::uint64_t seed) {
  std::vector<const SourceUtterance*> candidates;
  for (const auto& u : pool)
    if (u.speaker == speaker) candidates.push_back(&u);
  CALM_CHECK(!candidates.empty(),
             "make_enrollment: no disjoint material for speaker " << speaker);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  const SourceUtterance& src = *candidates[pick(rng)];
  auto want = static_cast<std::size_t>(duration_s * src.rate);

  SourceUtterance out;
  out.rate = src.rate;
  out.speaker = src.speaker;
  out.transcript = src.transcript;
  if (want >= src.samples.size()) {
    if (want > src.samples.size())
      std::cerr << "[calm] warning: enrollment material shorter than "
                << duration_s << "s for speaker " << speaker << "\n";
    out.samples = src.samples;
    return out;
  }
  std::uniform_int_distribution<std::size_t> off(0, src.samples.size() - want);
  std::size_t start = off(rng);
  out.samples.assign(src.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     src.samples.begin() + static_cast<std::ptrdiff_t>(start + want));
  return out;
}

struct FrontendConfig {
  int window = 400;  // samples
  int hop = 160;
  int subsample = 1;  // encoder subsample factor

  void validate() const {
    CALM_CHECK_CONFIG(window > 0 && hop > 0 && subsample > 0,
                      "FrontendConfig: window/hop/subsample must be positive");
  }
};

inline int frontend_frames(std::size_t num_samples, const FrontendConfig& cfg) {
  if (num_samples < static_cast<std::size_t>(cfg.window)) return 0;
  return 1 + static_cast<int>((num_samples - cfg.window) / cfg.hop);
}

// Frame t is active iff more than 50% of its receptive span is. An encoder
// frame pools `subsample` frontend frames; frontend frame f spans samples
// [f*hop, f*hop + window).
inline std::vector<double> vad_labels(const std::vector<double>& mask,
                                      const FrontendConfig& cfg) {
  cfg.validate();
  int F = frontend_frames(mask.size(), cfg);
  int T = (F + cfg.subsample - 1) / cfg.subsample;
  std::vector<double> labels(static_cast<std::size_t>(std::max(T, 0)));
  for (int t = 0; t < T; ++t) {
    std::size_t lo = static_cast<std::size_t>(t) * cfg.subsample * cfg.hop;
    int last = std::min((t + 1) * cfg.subsample, F) - 1;
    std::size_t hi = std::min(mask.size(),
                              static_cast<std::size_t>(last) * cfg.hop + cfg.window);
    long long active = 0;
    for (std::size_t i = lo; i < hi; ++i) active += mask[i] != 0.0;
    labels[static_cast<std::size_t>(t)] =
        2 * active > static_cast<long long>(hi - lo) ? 1.0 : 0.0;
  }
  return labels;
}

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// 80 triangular mel filters over the nfft/2+1 magnitude bins.
inline Matrix mel_filterbank(int num_banks, int nfft, int rate) {
  int bins = nfft / 2 + 1;
  Matrix fb = Matrix::Zero(num_banks, bins);
  double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(rate / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(num_banks) + 2);
  for (int m = 0; m < num_banks + 2; ++m)
    centers[static_cast<std::size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (num_banks + 1));
  for (int m = 0; m < num_banks; ++m) {
    double lo = centers[static_cast<std::size_t>(m)];
    double mid = centers[static_cast<std::size_t>(m) + 1];
    double hi = centers[static_cast<std::size_t>(m) + 2];
    for (int b = 0; b < bins; ++b) {
      double f = static_cast<double>(b) * rate / nfft;
      if (f > lo && f < mid)
        fb(m, b) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb(m, b) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace detail

inline constexpr double kLogMelFloor = -23.025850929940457;  // ln(1e-10)

// 80-dim log-mel frames: 25 ms Hann window, 10 ms hop, 512-point DFT.
inline FeatureSequence log_mel(const std::vector<double>& samples, int rate) {
  CALM_CHECK(rate == 16000, "log_mel: unsupported sample rate " << rate);
  constexpr int kWindow = 400, kHop = 160, kNfft = 512, kBanks = 80;
  FrontendConfig fc;
  int T = frontend_frames(samples.size(), fc);

  static const Matrix fb = detail::mel_filterbank(kBanks, kNfft, 16000);
  std::vector<double> hann(kWindow);
  for (int i = 0; i < kWindow; ++i)
    hann[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * i / (kWindow - 1));

  FeatureSequence feats;
  feats.frame_hop_seconds = static_cast<double>(kHop) / rate;
  feats.frames = Matrix::Zero(std::max(T, 0), kBanks);
  Vector power(kNfft / 2 + 1);
  for (int t = 0; t < T; ++t) {
    // windowed frame, zero-padded to nfft; naive real DFT
    std::vector<double> frame(kNfft, 0.0);
    for (int i = 0; i < kWindow; ++i)
      frame[static_cast<std::size_t>(i)] =
          samples[static_cast<std::size_t>(t) * kHop + i] *
          hann[static_cast<std::size_t>(i)];
    for (int k = 0; k <= kNfft / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < kNfft; ++n) {
        double ang = -2.0 * M_PI * k * n / kNfft;
        re += frame[static_cast<std::size_t>(n)] * std::cos(ang);
        im += frame[static_cast<std::size_t>(n)] * std::sin(ang);
      }
      power(k) = re * re + im * im;
    }
    Vector mel = fb * power;
    for (int m = 0; m < kBanks; ++m)
      feats.frames(t, m) = std::log(std::max(mel(m), 1e-10));
  }
  return feats;
}

// --- WAV I/O: PCM16, mono ---------------------------------------------------

inline void write_wav(const std::vector<double>& samples, int rate,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  CALM_CHECK(out.good(), "write_wav: cannot write " << path);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
  std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate) * 2);
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(data_bytes);
  for (double s : samples) {
    double clamped = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    out.write(reinterpret_cast<char*>(&v), 2);
  }
}

inline SourceUtterance read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  CALM_CHECK(in.good(), "read_wav: cannot read " << path);
  auto u32 = [&]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto u16 = [&]() {
    std::uint16_t v;
    in.read(reinterpret_cast<char*>(&v), 2);
    return v;
  };
  char tag[5] = {};
  in.read(tag, 4);
  CALM_CHECK(std::string(tag) == "RIFF", "read_wav: not a RIFF file: " << path);
  u32();
  in.read(tag, 4);
  CALM_CHECK(std::string(tag) == "WAVE", "read_wav: not a WAVE file: " << path);

  SourceUtterance out;
  while (in.read(tag, 4)) {
    std::uint32_t size = u32();
    std::string chunk(tag);
    if (chunk == "fmt ") {
      CALM_CHECK(u16() == 1, "read_wav: only PCM supported");
      CALM_CHECK(u16() == 1, "read_wav: only mono supported");
      out.rate = static_cast<int>(u32());
      u32();
      u16();
      CALM_CHECK(u16() == 16, "read_wav: only 16-bit supported");
    } else if (chunk == "data") {
      out.samples.resize(size / 2);
      for (auto& s : out.samples) {
        std::int16_t v;
        in.read(reinterpret_cast<char*>(&v), 2);
        s = static_cast<double>(v) / 32767.0;
      }
      return out;
    } else {
      in.seekg(size, std::ios::cur);
    }
  }
  throw Error("read_wav: no data chunk in " + path);
}

// --- Synthetic feature-domain task ------------------------------------------

struct SynthConfig {
  int vocab_size = 40;        // non-blank tokens 1..vocab_size
  int rare_vocab = 8;         // the last rare_vocab token ids are rare
  int num_speakers = 8;
  int speakers_per_mix = 2;
  int min_tokens = 5;         // tokens per speaker per utterance
  int max_tokens = 8;
  int frames_per_token = 1;   // R
  int max_delay_frames = 4;   // speaker 1 delay is always 0
  int enroll_tokens = 6;
  double rare_rate = 0.1;     // probability a token position draws a rare token
  double rare_gain = 1.0;     // amplitude on rare-token frames
  double speaker_gain_min = 1.0;  // token-block gains spread over [min, 1]
  double noise_std = 0.0;
  bool speaker_mixing = false;  // render tokens through a per-speaker matrix
  int num_examples = 1;
  std::uint64_t seed = 0;

  int feature_dim() const { return vocab_size + 1 + num_speakers; }

  void validate() const {
    CALM_CHECK_CONFIG(vocab_size >= 1, "SynthConfig: vocab_size must be >= 1");
    CALM_CHECK_CONFIG(rare_vocab >= 0 && rare_vocab < vocab_size,
                      "SynthConfig: rare_vocab must be in [0, vocab_size)");
    CALM_CHECK_CONFIG(num_speakers >= 1, "SynthConfig: need speakers");
    CALM_CHECK_CONFIG(
        speakers_per_mix >= 1 && speakers_per_mix <= num_speakers,
        "SynthConfig: speakers_per_mix must be in [1, num_speakers]");
    CALM_CHECK_CONFIG(min_tokens >= 1 && max_tokens >= min_tokens,
                      "SynthConfig: bad token range");
    CALM_CHECK_CONFIG(frames_per_token >= 1, "SynthConfig: R must be >= 1");
    CALM_CHECK_CONFIG(max_delay_frames >= 0, "SynthConfig: negative delay");
    CALM_CHECK_CONFIG(enroll_tokens >= 1, "SynthConfig: enroll_tokens >= 1");
    CALM_CHECK_CONFIG(rare_rate >= 0.0 && rare_rate <= 1.0,
                      "SynthConfig: rare_rate must be in [0, 1]");
    CALM_CHECK_CONFIG(rare_gain > 0.0, "SynthConfig: rare_gain must be > 0");
    CALM_CHECK_CONFIG(speaker_gain_min > 0.0 && speaker_gain_min <= 1.0,
                      "SynthConfig: speaker_gain_min must be in (0, 1]");
    CALM_CHECK_CONFIG(noise_std >= 0.0, "SynthConfig: negative noise_std");
    CALM_CHECK_CONFIG(num_examples >= 0, "SynthConfig: negative num_examples");
  }

  bool is_rare(int token) const { return token > vocab_size - rare_vocab; }

  // Amplitude cue identifying the speaker; 1 for everyone by default.
  double speaker_gain(int speaker) const {
    if (num_speakers == 1) return 1.0;
    return 1.0 - (1.0 - speaker_gain_min) * speaker / (num_speakers - 1);
  }
};

struct SynthExample {
  Matrix mixture;                             // T x feature_dim
  std::vector<Matrix> enrollments;            // one per mixed speaker
  std::vector<std::vector<int>> transcripts;  // token ids per speaker
  std::vector<std::vector<double>> vad;       // per speaker, one label per frame
  std::vector<int> speakers;
};

struct SynthDataset {
  SynthConfig config;
  std::vector<SynthExample> examples;
};

namespace detail {

// Token k of speaker s renders as R frames of (token one-hot (+) speaker
// one-hot); with speaker_mixing the token block goes through a fixed
// per-speaker rotation so demixing requires knowing the speaker.
inline Matrix render_tokens(const std::vector<int>& tokens, int speaker,
                            const SynthConfig& cfg,
                            const std::vector<Matrix>& speaker_mats,
                            std::mt19937_64& rng) {
  int T = static_cast<int>(tokens.size()) * cfg.frames_per_token;
  Matrix frames = Matrix::Zero(T, cfg.feature_dim());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    int tok = tokens[i];
    double gain = (cfg.is_rare(tok) ? cfg.rare_gain : 1.0) * cfg.speaker_gain(speaker);
    Vector token_vec = Vector::Zero(cfg.vocab_size + 1);
    token_vec(tok) = gain;
    if (cfg.speaker_mixing)
      token_vec = speaker_mats[static_cast<std::size_t>(speaker)] * token_vec;
    for (int r = 0; r < cfg.frames_per_token; ++r) {
      int t = static_cast<int>(i) * cfg.frames_per_token + r;
      frames.block(t, 0, 1, cfg.vocab_size + 1) = token_vec.transpose();
      frames(t, cfg.vocab_size + 1 + speaker) = 1.0;
    }
  }
  if (cfg.noise_std > 0.0)
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < cfg.feature_dim(); ++d)
        frames(t, d) += cfg.noise_std * gauss(rng);
  return frames;
}

// Haar-ish random rotation of the token block via QR of a Gaussian matrix.
inline std::vector<Matrix> speaker_matrices(const SynthConfig& cfg) {
  std::vector<Matrix> mats;
  if (!cfg.speaker_mixing) return mats;
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < cfg.num_speakers; ++s) {
    Matrix g(cfg.vocab_size + 1, cfg.vocab_size + 1);
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    mats.push_back(qr.householderQ() * Matrix::Identity(g.rows(), g.cols()));
  }
  return mats;
}

inline std::vector<int> draw_tokens(int count, const SynthConfig& cfg,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> common(1, cfg.vocab_size - cfg.rare_vocab);
  std::uniform_int_distribution<int> rare(cfg.vocab_size - cfg.rare_vocab + 1,
                                          cfg.vocab_size);
  std::vector<int> tokens(static_cast<std::size_t>(count));
  for (auto& t : tokens)
    t = (cfg.rare_vocab > 0 && unit(rng) < cfg.rare_rate) ? rare(rng) : common(rng);
  return tokens;
}

}  // namespace detail

inline SynthDataset synth_task(const SynthConfig& cfg) {
  cfg.validate();
  auto speaker_mats = detail::speaker_matrices(cfg);
  SynthDataset ds;
  ds.config = cfg;

  for (int ex = 0; ex < cfg.num_examples; ++ex) {
    // independent seeded stream per example so generation order is irrelevant
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (ex + 1ull));
    SynthExample rec;

    std::vector<int> speakers(static_cast<std::size_t>(cfg.num_speakers));
    std::iota(speakers.begin(), speakers.end(), 0);
    for (int i = 0; i < cfg.speakers_per_mix; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, speakers.size() - 1);
      std::swap(speakers[static_cast<std::size_t>(i)], speakers[pick(rng)]);
    }
    speakers.resize(static_cast<std::size_t>(cfg.speakers_per_mix));
    rec.speakers = speakers;

    std::uniform_int_distribution<int> num_tokens(cfg.min_tokens, cfg.max_tokens);
    std::uniform_int_distribution<int> delay(0, cfg.max_delay_frames);
    std::vector<Matrix> streams;
    std::vector<int> delays;
    int total_frames = 0;
    for (int c = 0; c < cfg.speakers_per_mix; ++c) {
      auto tokens = detail::draw_tokens(num_tokens(rng), cfg, rng);
      rec.transcripts.push_back(tokens);
      streams.push_back(detail::render_tokens(
          tokens, speakers[static_cast<std::size_t>(c)], cfg, speaker_mats, rng));
      delays.push_back(c == 0 ? 0 : delay(rng));
      total_frames = std::max(
          total_frames, delays.back() + static_cast<int>(streams.back().rows()));
    }

    rec.mixture = Matrix::Zero(total_frames, cfg.feature_dim());
    for (int c = 0; c < cfg.speakers_per_mix; ++c) {
      const Matrix& s = streams[static_cast<std::size_t>(c)];
      rec.mixture.block(delays[static_cast<std::size_t>(c)], 0, s.rows(),
                        s.cols()) += s;
      std::vector<double> vad(static_cast<std::size_t>(total_frames), 0.0);
      for (int t = 0; t < s.rows(); ++t)
        vad[static_cast<std::size_t>(delays[static_cast<std::size_t>(c)] + t)] = 1.0;
      rec.vad.push_back(std::move(vad));
    }

    for (int c = 0; c < cfg.speakers_per_mix; ++c) {
      auto tokens = detail::draw_tokens(cfg.enroll_tokens, cfg, rng);
      rec.enrollments.push_back(detail::render_tokens(
          tokens, speakers[static_cast<std::size_t>(c)], cfg, speaker_mats, rng));
    }
    ds.examples.push_back(std::move(rec));
  }
  return ds;
}

// Dataset persistence through the tensor-store blob format.
inline void save_dataset(const SynthDataset& ds, const std::string& path) {
  TensorStore store;
  Matrix meta(1, 6);
  meta << static_cast<double>(ds.examples.size()),
      static_cast<double>(ds.config.feature_dim()),
      static_cast<double>(ds.config.vocab_size),
      static_cast<double>(ds.config.num_speakers),
      static_cast<double>(ds.config.rare_vocab),
      static_cast<double>(ds.config.frames_per_token);
  store.put("meta", meta);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    std::string p = "ex" + std::to_string(i) + "/";
    store.put(p + "mixture", ex.mixture);
    for (std::size_t c = 0; c < ex.speakers.size(); ++c) {
      std::string q = p + "spk" + std::to_string(c) + "/";
      store.put(q + "enrollment", ex.enrollments[c]);
      Matrix label(1, ex.transcripts[c].size());
      for (std::size_t u = 0; u < ex.transcripts[c].size(); ++u)
        label(0, static_cast<int>(u)) = ex.transcripts[c][u];
      store.put(q + "labels", label);
      Matrix vad(1, ex.vad[c].size());
      for (std::size_t t = 0; t < ex.vad[c].size(); ++t)
        vad(0, static_cast<int>(t)) = ex.vad[c][t];
      store.put(q + "vad", vad);
      Matrix spk(1, 1);
      spk(0, 0) = ex.speakers[c];
      store.put(q + "id", spk);
    }
  }
  store.save(path);
}

inline SynthDataset load_dataset(const std::string& path) {
  TensorStore store = TensorStore::load(path);
  SynthDataset ds;
  const Matrix& meta = store.at("meta");
  auto count = static_cast<std::size_t>(meta(0, 0));
  ds.config.vocab_size = static_cast<int>(meta(0, 2));
  ds.config.num_speakers = static_cast<int>(meta(0, 3));
  ds.config.rare_vocab = static_cast<int>(meta(0, 4));
  ds.config.frames_per_token = static_cast<int>(meta(0, 5));
  for (std::size_t i = 0; i < count; ++i) {
    std::string p = "ex" + std::to_string(i) + "/";
    SynthExample ex;
    ex.mixture = store.at(p + "mixture");
    for (std::size_t c = 0;; ++c) {
      std::string q = p + "spk" + std::to_string(c) + "/";
      if (!store.contains(q + "enrollment")) break;
      ex.enrollments.push_back(store.at(q + "enrollment"));
      const Matrix& label = store.at(q + "labels");
      std::vector<int> tokens;
      for (int u = 0; u < label.cols(); ++u)
        tokens.push_back(static_cast<int>(label(0, u)));
      ex.transcripts.push_back(std::move(tokens));
      const Matrix& vad = store.at(q + "vad");
      std::vector<double> v;
      for (int t = 0; t < vad.cols(); ++t) v.push_back(vad(0, t));
      ex.vad.push_back(std::move(v));
      ex.speakers.push_back(static_cast<int>(store.at(q + "id")(0, 0)));
    }
    ds.config.speakers_per_mix =
        std::max(ds.config.speakers_per_mix, static_cast<int>(ex.speakers.size()));
    ds.examples.push_back(std::move(ex));
  }
  ds.config.num_examples = static_cast<int>(ds.examples.size());
  return ds;
}

}  // namespace calm

#endif  // CALM_MIXSIM_HPP
