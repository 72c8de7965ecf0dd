// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0

#ifndef CALM_TYPES_HPP
#define CALM_TYPES_HPP

#include <algorithm>
#include <set>
#include <vector>

#include "calm/common.hpp"

namespace calm {

// Blank has a fixed index in the static vocabulary.
constexpr int kBlank = 0;

// T x D matrix of frame features, one frame per row.
struct FeatureSequence {
  Matrix frames;
  double frame_hop_seconds = 0.01;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }

  void validate() const {
    CALM_CHECK(frames.rows() >= 1, "FeatureSequence: need at least one frame");
    CALM_CHECK(all_finite(frames), "FeatureSequence: non-finite values");
  }
};

// Fixed-size vector derived from an enrollment clip.
struct SpeakerEmbedding {
  Vector vector;
};

struct EncoderStates {
  Matrix states;       // T_enc x D_enc
  int layer_index = 0; // 1-based
};

struct FilmParams {
  Vector gamma;
  Vector beta;
};

// Ordered list of biasing phrases, each a token sequence over the static
// vocabulary. Duplicates are rejected.
struct BiasList {
  std::vector<std::vector<int>> phrases;

  int size() const { return static_cast<int>(phrases.size()); }

  void validate() const {
    std::set<std::vector<int>> seen;
    for (const auto& p : phrases) {
      CALM_CHECK(!p.empty(), "BiasList: empty phrase");
      CALM_CHECK(seen.insert(p).second, "BiasList: duplicate phrase");
    }
  }
};

// N x D_bias phrase embedding matrix; row i belongs to phrases[i].
struct BiasEmbeddings {
  Matrix vectors;
};

// Row-stochastic T_enc x (M+N) posterior matrix over the extended vocabulary.
struct PosteriorGrid {
  Matrix probs;
  int static_size = 0;
  int dynamic_size = 0;

  int num_frames() const { return static_cast<int>(probs.rows()); }
  int vocab_size() const { return static_size + dynamic_size; }

  void validate(double tol = 1e-6) const {
    CALM_CHECK(probs.cols() == static_size + dynamic_size,
               "PosteriorGrid: column count mismatch");
    CALM_CHECK((probs.array() >= 0.0).all() && (probs.array() <= 1.0).all(),
               "PosteriorGrid: entries outside [0,1]");
    for (int t = 0; t < probs.rows(); ++t) {
      CALM_CHECK(std::abs(probs.row(t).sum() - 1.0) <= tol,
                 "PosteriorGrid: row " << t << " not normalized");
    }
  }
};

// Per-frame target-speaker activity posteriors in [0,1].
struct VadTrack {
  Vector posteriors;
};

// Label token sequence over the extended vocabulary; blank never appears.
struct LabelSequence {
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }

  void validate(int vocab_size) const {
    for (int t : tokens) {
      CALM_CHECK(t != kBlank, "LabelSequence: blank in label");
      CALM_CHECK(t > 0 && t < vocab_size,
                 "LabelSequence: token " << t << " outside vocabulary");
    }
  }
};

}  // namespace calm

#endif  // CALM_TYPES_HPP
