// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Shared test-only utilities: RNG helpers, finite differences, and the
// brute-force CTC path-enumeration oracle. Everything here is independent of
// the implementation paths it is used to check.

#ifndef CALM_TESTS_HELPERS_HPP
#define CALM_TESTS_HELPERS_HPP

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                              double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = d(rng);
  return m;
}

// Random row-stochastic matrix with strictly positive entries.
inline MatrixXd random_grid(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> d(0.05, 1.0);
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
      m(r, c) = d(rng);
      s += m(r, c);
    }
    m.row(r) /= s;
  }
  return m;
}

// Central finite difference of a scalar function w.r.t. one matrix argument.
inline MatrixXd finite_difference(std::function<double(const MatrixXd&)> f,
                                  MatrixXd x, double step = 1e-6) {
  MatrixXd g(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < x.cols(); ++c) {
      double orig = x(r, c);
      x(r, c) = orig + step;
      double fp = f(x);
      x(r, c) = orig - step;
      double fm = f(x);
      x(r, c) = orig;
      g(r, c) = (fp - fm) / (2.0 * step);
    }
  }
  return g;
}

inline double rel_err(const MatrixXd& a, const MatrixXd& b) {
  double denom = std::max(1e-12, std::max(a.norm(), b.norm()));
  return (a - b).norm() / denom;
}

// Collapses a frame-level CTC path: merge repeats, then drop blanks.
inline std::vector<int> collapse_path(const std::vector<int>& path, int blank = 0) {
  std::vector<int> out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != blank) out.push_back(s);
    prev = s;
  }
  return out;
}

// Brute-force CTC likelihood: enumerate all V^T frame paths, sum the
// probability of those whose collapse equals the label.
inline double ctc_brute_force(const MatrixXd& probs, const std::vector<int>& label,
                              int blank = 0) {
  const int T = static_cast<int>(probs.rows());
  const int V = static_cast<int>(probs.cols());
  double total = 0.0;
  std::vector<int> path(T, 0);
  long long n = 1;
  for (int t = 0; t < T; ++t) n *= V;
  for (long long code = 0; code < n; ++code) {
    long long c = code;
    for (int t = 0; t < T; ++t) {
      path[t] = static_cast<int>(c % V);
      c /= V;
    }
    if (collapse_path(path, blank) != label) continue;
    double p = 1.0;
    for (int t = 0; t < T; ++t) p *= probs(t, path[t]);
    total += p;
  }
  return total;
}

// Brute-force best labeling: the label sequence with maximum total CTC path
// probability, ties broken lexicographically (shorter first).
inline std::pair<std::vector<int>, double> best_labeling_brute_force(
    const MatrixXd& probs, int blank = 0) {
  const int T = static_cast<int>(probs.rows());
  const int V = static_cast<int>(probs.cols());
  std::vector<std::vector<int>> labels;
  // all label sequences with length <= T, tokens in [1, V)
  std::function<void(std::vector<int>&)> gen = [&](std::vector<int>& cur) {
    labels.push_back(cur);
    if (static_cast<int>(cur.size()) == T) return;
    for (int v = 1; v < V; ++v) {
      cur.push_back(v);
      gen(cur);
      cur.pop_back();
    }
  };
  std::vector<int> cur;
  gen(cur);
  std::vector<int> best;
  double best_p = -1.0;
  for (const auto& lab : labels) {
    double p = ctc_brute_force(probs, lab, blank);
    if (p > best_p + 1e-15) {
      best_p = p;
      best = lab;
    }
  }
  return {best, best_p};
}

}  // namespace testutil

#endif  // CALM_TESTS_HELPERS_HPP
