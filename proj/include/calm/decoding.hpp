// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// CTC decoding over the extended vocabulary: greedy best-path collapse and
// prefix beam search, plus expansion of dynamic tokens back into their
// phrases. The biasing weight mu acts inside the output head, not here.

#ifndef CALM_DECODING_HPP
#define CALM_DECODING_HPP

#include <algorithm>
#include <map>
#include <vector>

#include "calm/common.hpp"
#include "calm/types.hpp"

namespace calm {

struct DecodeConfig {
  enum class Mode { kGreedy, kBeam };
  Mode mode = Mode::kBeam;
  int beam_size = 8;
  double mu = 0.1;

  void validate() const {
    CALM_CHECK_CONFIG(beam_size >= 1, "DecodeConfig: beam_size must be >= 1");
    CALM_CHECK_CONFIG(mu > 0.0 && mu <= 1.0, "DecodeConfig: mu must be in (0, 1]");
  }
};

struct Hypothesis {
  std::vector<int> tokens;   // extended-vocabulary indices
  double score = 0.0;        // log probability
  std::vector<int> surface;  // static tokens only, dynamic tokens expanded
};

// Replaces each dynamic index (>= static_size) by its phrase's tokens.
inline std::vector<int> expand_dynamic(const std::vector<int>& tokens,
                                       const BiasList& bias, int static_size) {
  std::vector<int> out;
  for (int tok : tokens) {
    if (tok < static_size) {
      out.push_back(tok);
    } else {
      int i = tok - static_size;
      CALM_CHECK(i < bias.size(), "expand_dynamic: dynamic index " << i
                                      << " >= list size " << bias.size());
      out.insert(out.end(), bias.phrases[i].begin(), bias.phrases[i].end());
    }
  }
  return out;
}

// Inverse mapping for training labels: greedy leftmost-longest replacement of
// phrase occurrences by their dynamic token.
inline std::vector<int> map_to_dynamic(const std::vector<int>& tokens,
                                       const BiasList& bias, int static_size) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    int best = -1;
    std::size_t best_len = 0;
    for (int pi = 0; pi < bias.size(); ++pi) {
      const auto& ph = bias.phrases[pi];
      if (ph.size() > best_len && i + ph.size() <= tokens.size() &&
          std::equal(ph.begin(), ph.end(), tokens.begin() + i))
        best = pi, best_len = ph.size();
    }
    if (best >= 0) {
      out.push_back(static_size + best);
      i += best_len;
    } else {
      out.push_back(tokens[i++]);
    }
  }
  return out;
}

// Per-frame argmax (ties to the lowest index), collapse repeats, drop blanks.
inline Hypothesis greedy_decode(const PosteriorGrid& grid,
                                const BiasList& bias = {}) {
  Hypothesis hyp;
  int prev = -1;
  for (int t = 0; t < grid.num_frames(); ++t) {
    Eigen::Index arg;
    grid.probs.row(t).maxCoeff(&arg);  // first maximum = lowest index
    int k = static_cast<int>(arg);
    hyp.score += std::log(grid.probs(t, arg));
    if (k != prev && k != kBlank) hyp.tokens.push_back(k);
    prev = k;
  }
  hyp.surface = expand_dynamic(hyp.tokens, bias, grid.static_size);
  return hyp;
}

// CTC prefix beam search; prefixes ranked by total (blank + non-blank) mass,
// ties broken lexicographically.
inline std::vector<Hypothesis> beam_decode(const PosteriorGrid& grid,
                                           const DecodeConfig& cfg,
                                           const BiasList& bias = {}) {
  cfg.validate();
  struct Mass {
    double log_b = kLogZero;   // prefix ends in blank
    double log_nb = kLogZero;  // prefix ends in its last symbol
    double total() const { return log_sum_exp(log_b, log_nb); }
  };
  using Beam = std::map<std::vector<int>, Mass>;

  Beam beam;
  beam[{}] = Mass{0.0, kLogZero};

  const int V = grid.vocab_size();
  for (int t = 0; t < grid.num_frames(); ++t) {
    Beam next;
    for (const auto& [prefix, mass] : beam) {
      for (int k = 0; k < V; ++k) {
        double logp = std::log(grid.probs(t, k));
        if (k == kBlank) {
          Mass& m = next[prefix];
          m.log_b = log_sum_exp(m.log_b, mass.total() + logp);
        } else if (!prefix.empty() && prefix.back() == k) {
          // same symbol again extends the run (non-blank path) ...
          Mass& same = next[prefix];
          same.log_nb = log_sum_exp(same.log_nb, mass.log_nb + logp);
          // ... or starts a new occurrence after a blank
          auto ext = prefix;
          ext.push_back(k);
          Mass& m = next[ext];
          m.log_nb = log_sum_exp(m.log_nb, mass.log_b + logp);
        } else {
          auto ext = prefix;
          ext.push_back(k);
          Mass& m = next[ext];
          m.log_nb = log_sum_exp(m.log_nb, mass.total() + logp);
        }
      }
    }
    // prune: score desc, then lexicographic token order (std::map iterates
    // lexicographically, so stable_sort keeps that order among ties)
    std::vector<Beam::iterator> order;
    for (auto it = next.begin(); it != next.end(); ++it) order.push_back(it);
    std::stable_sort(order.begin(), order.end(),
                     [](auto a, auto b) { return a->second.total() > b->second.total(); });
    Beam pruned;
    for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(cfg.beam_size); ++i)
      pruned.insert(*order[i]);
    beam = std::move(pruned);
  }

  std::vector<std::pair<std::vector<int>, double>> ranked;
  for (const auto& [prefix, mass] : beam) ranked.emplace_back(prefix, mass.total());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<Hypothesis> out;
  for (const auto& [tokens, score] : ranked) {
    Hypothesis hyp;
    hyp.tokens = tokens;
    hyp.score = score;
    hyp.surface = expand_dynamic(tokens, bias, grid.static_size);
    out.push_back(std::move(hyp));
  }
  return out;
}

inline std::vector<Hypothesis> decode(const PosteriorGrid& grid,
                                      const DecodeConfig& cfg,
                                      const BiasList& bias = {}) {
  if (cfg.mode == DecodeConfig::Mode::kGreedy) return {greedy_decode(grid, bias)};
  return beam_decode(grid, cfg, bias);
}

}  // namespace calm

#endif  // CALM_DECODING_HPP
