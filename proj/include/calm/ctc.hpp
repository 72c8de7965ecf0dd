// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Log-domain CTC forward-backward over the extended (static + dynamic)
// vocabulary. Blank is index 0; skips are allowed between distinct labels.

#ifndef CALM_CTC_HPP
#define CALM_CTC_HPP

#include <vector>

#include "calm/autodiff.hpp"
#include "calm/common.hpp"
#include "calm/types.hpp"

namespace calm {

inline int ctc_min_frames(const std::vector<int>& label) {
  int repeats = 0;
  for (std::size_t i = 1; i < label.size(); ++i)
    if (label[i] == label[i - 1]) ++repeats;
  return static_cast<int>(label.size()) + repeats;
}

// Negative log-likelihood of `label` under the per-frame distribution `probs`
// (T x V, rows sum to 1). If grad_out is non-null it receives dLoss/dprobs.
// Throws Error when the label cannot be aligned in T frames.
inline double ctc_loss_value(const Matrix& probs, const std::vector<int>& label,
                             Matrix* grad_out = nullptr) {
  const int T = static_cast<int>(probs.rows());
  const int V = static_cast<int>(probs.cols());
  const int U = static_cast<int>(label.size());
  for (int u : label) {
    CALM_CHECK(u != kBlank, "ctc_loss: blank inside label");
    CALM_CHECK(u > 0 && u < V, "ctc_loss: label token " << u << " out of range");
  }
  CALM_CHECK(T >= ctc_min_frames(label),
             "ctc_loss: label infeasible, need " << ctc_min_frames(label)
                                                 << " frames, have " << T);

  const int S = 2 * U + 1;
  auto ext = [&](int s) { return (s % 2 == 0) ? kBlank : label[s / 2]; };

  Matrix logp = probs.array().max(0.0).log();

  Matrix alpha = Matrix::Constant(T, S, kLogZero);
  alpha(0, 0) = logp(0, kBlank);
  if (S > 1) alpha(0, 1) = logp(0, ext(1));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_sum_exp(a, alpha(t - 1, s - 1));
      if (s >= 2 && ext(s) != kBlank && ext(s) != ext(s - 2))
        a = log_sum_exp(a, alpha(t - 1, s - 2));
      alpha(t, s) = a + logp(t, ext(s));
    }
  }

  double loglik = alpha(T - 1, S - 1);
  if (S > 1) loglik = log_sum_exp(loglik, alpha(T - 1, S - 2));
  const double loss = -loglik;

  if (grad_out == nullptr) return loss;

  // beta(t,s): log-prob of completing the label from state s after frame t
  // (emission at t excluded, so p(Y) = sum_s exp(alpha(t,s) + beta(t,s))).
  Matrix beta = Matrix::Constant(T, S, kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + logp(t + 1, ext(s));
      if (s + 1 < S) b = log_sum_exp(b, beta(t + 1, s + 1) + logp(t + 1, ext(s + 1)));
      if (s + 2 < S && ext(s + 2) != kBlank && ext(s + 2) != ext(s))
        b = log_sum_exp(b, beta(t + 1, s + 2) + logp(t + 1, ext(s + 2)));
      beta(t, s) = b;
    }
  }

  // dLoss/dy(t,k) = -exp(lse_{s:ext(s)=k}(alpha+beta) - loglik - log y(t,k))
  *grad_out = Matrix::Zero(T, V);
  if (loglik == kLogZero) return loss;  // zero-likelihood grid: gradient undefined, report 0
  std::vector<double> acc(V);
  for (int t = 0; t < T; ++t) {
    std::fill(acc.begin(), acc.end(), kLogZero);
    for (int s = 0; s < S; ++s) {
      double ab = alpha(t, s) + beta(t, s);
      if (ab != kLogZero) acc[ext(s)] = log_sum_exp(acc[ext(s)], ab);
    }
    for (int k = 0; k < V; ++k) {
      if (acc[k] == kLogZero || logp(t, k) == kLogZero) continue;
      (*grad_out)(t, k) = -std::exp(acc[k] - loglik - logp(t, k));
    }
  }
  return loss;
}

inline double ctc_loss(const PosteriorGrid& grid, const LabelSequence& label,
                       Matrix* grad_out = nullptr) {
  return ctc_loss_value(grid.probs, label.tokens, grad_out);
}

// Tape node: loss as a 1x1 Var; backward adds dLoss/dgrid to the grid node.
inline ad::Var ctc_loss_node(ad::Var grid, const std::vector<int>& label) {
  Matrix grad;
  double loss = ctc_loss_value(grid.value(), label, &grad);
  Matrix v(1, 1);
  v(0, 0) = loss;
  ad::Var out = grid.graph()->emplace(std::move(v), grid.node()->requires_grad);
  ad::Node* gn = grid.node();
  ad::Node* on = out.node();
  out.node()->back = [gn, on, grad = std::move(grad)]() {
    if (gn->requires_grad) gn->grad += on->grad(0, 0) * grad;
  };
  return out;
}

}  // namespace calm

#endif  // CALM_CTC_HPP
