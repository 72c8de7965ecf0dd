// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Levenshtein alignment and WER/CER with the biased/unbiased decomposition.
// Substitutions and deletions follow the reference unit's list membership,
// insertions the hypothesis unit's.

#ifndef CALM_SCORING_HPP
#define CALM_SCORING_HPP

#include <cctype>
#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "calm/common.hpp"
#include "calm/vocab.hpp"

namespace calm {

struct AlignmentOp {
  enum class Kind { kMatch, kSubstitution, kDeletion, kInsertion };
  Kind kind;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

// Minimum-edit-distance alignment with unit costs; backtrace ties prefer
// match > substitution > deletion > insertion.
inline std::vector<AlignmentOp> align(const std::vector<std::string>& ref,
                                      const std::vector<std::string>& hyp) {
  const std::size_t I = ref.size(), J = hyp.size();
  std::vector<std::vector<int>> d(I + 1, std::vector<int>(J + 1));
  for (std::size_t i = 0; i <= I; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= J; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= I; ++i)
    for (std::size_t j = 1; j <= J; ++j) {
      int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }

  std::vector<AlignmentOp> ops;
  std::size_t i = I, j = J;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      ops.push_back({AlignmentOp::Kind::kMatch, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      ops.push_back({AlignmentOp::Kind::kSubstitution, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.push_back({AlignmentOp::Kind::kDeletion, ref[i - 1], ""});
      --i;
    } else {
      ops.push_back({AlignmentOp::Kind::kInsertion, "", hyp[j - 1]});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

inline int edit_distance(const std::vector<AlignmentOp>& ops) {
  int d = 0;
  for (const auto& op : ops) d += op.kind != AlignmentOp::Kind::kMatch;
  return d;
}

struct CategoryCounts {
  long long substitutions = 0;
  long long deletions = 0;
  long long insertions = 0;
  long long ref_units = 0;  // rate denominator

  long long errors() const { return substitutions + deletions + insertions; }
  double rate() const {
    return ref_units == 0 ? std::numeric_limits<double>::quiet_NaN()
                          : static_cast<double>(errors()) / ref_units;
  }

  CategoryCounts& operator+=(const CategoryCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_units += o.ref_units;
    return *this;
  }
};

struct ScoreReport {
  CategoryCounts overall;
  CategoryCounts unbiased;
  CategoryCounts biased;

  ScoreReport& operator+=(const ScoreReport& o) {
    overall += o.overall;
    unbiased += o.unbiased;
    biased += o.biased;
    return *this;
  }

  nlohmann::json to_json() const {
    auto cat = [](const CategoryCounts& c) {
      nlohmann::json j = {{"substitutions", c.substitutions},
                          {"deletions", c.deletions},
                          {"insertions", c.insertions},
                          {"ref_units", c.ref_units}};
      if (c.ref_units > 0) j["rate"] = c.rate();
      return j;
    };
    return {{"overall", cat(overall)},
            {"unbiased", cat(unbiased)},
            {"biased", cat(biased)}};
  }
};

// Attributes each alignment op to the biased or unbiased category.
// `is_biased` decides membership per unit.
inline ScoreReport score(const std::vector<AlignmentOp>& ops,
                         const std::function<bool(const std::string&)>& is_biased) {
  ScoreReport r;
  for (const auto& op : ops) {
    switch (op.kind) {
      case AlignmentOp::Kind::kMatch: {
        CategoryCounts& c = is_biased(op.ref) ? r.biased : r.unbiased;
        ++c.ref_units;
        ++r.overall.ref_units;
        break;
      }
      case AlignmentOp::Kind::kSubstitution: {
        CategoryCounts& c = is_biased(op.ref) ? r.biased : r.unbiased;
        ++c.substitutions;
        ++c.ref_units;
        ++r.overall.substitutions;
        ++r.overall.ref_units;
        break;
      }
      case AlignmentOp::Kind::kDeletion: {
        CategoryCounts& c = is_biased(op.ref) ? r.biased : r.unbiased;
        ++c.deletions;
        ++c.ref_units;
        ++r.overall.deletions;
        ++r.overall.ref_units;
        break;
      }
      case AlignmentOp::Kind::kInsertion: {
        CategoryCounts& c = is_biased(op.hyp) ? r.biased : r.unbiased;
        ++c.insertions;
        ++r.overall.insertions;
        break;
      }
    }
  }
  return r;
}

// A unit is biased when it occurs as any token of any phrase in the list.
inline std::unordered_set<std::string> bias_unit_set(
    const std::vector<std::string>& phrases, UnitKind kind) {
  std::unordered_set<std::string> units;
  for (const auto& p : phrases)
    for (const auto& u : tokenize(p, kind)) units.insert(u);
  return units;
}

struct ScoringOptions {
  bool case_fold = false;
  bool strip_punctuation = false;
};

inline std::string normalize_unit(std::string u, const ScoringOptions& opt) {
  if (opt.strip_punctuation) {
    std::string out;
    for (char c : u)
      if (!std::ispunct(static_cast<unsigned char>(c))) out += c;
    u = out;
  }
  if (opt.case_fold)
    for (char& c : u) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return u;
}

inline std::vector<std::string> normalize_units(std::vector<std::string> units,
                                                const ScoringOptions& opt) {
  if (!opt.case_fold && !opt.strip_punctuation) return units;
  std::vector<std::string> out;
  for (auto& u : units) {
    auto n = normalize_unit(std::move(u), opt);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

// One utterance end to end: tokenize, normalize, align, attribute.
inline ScoreReport score_utterance(const std::string& ref_text,
                                   const std::string& hyp_text,
                                   const std::vector<std::string>& bias_phrases,
                                   UnitKind kind, const ScoringOptions& opt = {}) {
  auto ref = normalize_units(tokenize(ref_text, kind), opt);
  auto hyp = normalize_units(tokenize(hyp_text, kind), opt);
  std::unordered_set<std::string> biased;
  for (const auto& u : bias_unit_set(bias_phrases, kind))
    biased.insert(normalize_unit(u, opt));
  return score(align(ref, hyp),
               [&biased](const std::string& u) { return biased.count(u) > 0; });
}

}  // namespace calm

#endif  // CALM_SCORING_HPP
