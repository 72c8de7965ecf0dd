// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0

#ifndef CALM_COMMON_HPP
#define CALM_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace calm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Generic runtime failure (bad inputs, infeasible labels, I/O trouble).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration or shape mismatch between configured dimensions.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

#define CALM_CHECK(cond, msg)                                  \
  do {                                                         \
    if (!(cond)) {                                             \
      std::ostringstream oss__;                                \
      oss__ << msg;                                            \
      throw ::calm::Error(oss__.str());                        \
    }                                                          \
  } while (0)

#define CALM_CHECK_CONFIG(cond, msg)                           \
  do {                                                         \
    if (!(cond)) {                                             \
      std::ostringstream oss__;                                \
      oss__ << msg;                                            \
      throw ::calm::ConfigError(oss__.str());                  \
    }                                                          \
  } while (0)

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

}  // namespace calm

#endif  // CALM_COMMON_HPP
