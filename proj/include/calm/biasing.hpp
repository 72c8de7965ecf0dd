// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Biasing-list construction: corpus frequency tables, rare-unit extraction
// from references, and seeded distractor sampling into per-speaker or
// per-utterance lists.

#ifndef CALM_BIASING_HPP
#define CALM_BIASING_HPP

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "calm/common.hpp"
#include "calm/vocab.hpp"

namespace calm {

struct FrequencyTable {
  std::unordered_map<std::string, long long> counts;
  UnitKind kind = UnitKind::kWord;
  long long total = 0;

  // Top-K units by (count desc, unit lexicographic asc); ties at the K
  // boundary keep the lexicographically smaller unit common.
  std::vector<std::string> top(int k) const {
    std::vector<std::pair<std::string, long long>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < entries.size() && i < static_cast<std::size_t>(k); ++i)
      out.push_back(entries[i].first);
    return out;
  }

  std::unordered_set<std::string> common_set(int k) const {
    auto t = top(k);
    return {t.begin(), t.end()};
  }

  // All units outside the top-K, in (count desc, lexicographic) order.
  std::vector<std::string> rare_pool(int k) const {
    std::vector<std::pair<std::string, long long>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = static_cast<std::size_t>(k); i < entries.size(); ++i)
      out.push_back(entries[i].first);
    return out;
  }

  void save_tsv(const std::string& path) const {
    std::ofstream out(path);
    CALM_CHECK(out.good(), "FrequencyTable: cannot write " << path);
    for (const auto& [unit, count] : counts) out << unit << "\t" << count << "\n";
  }

  static FrequencyTable load_tsv(const std::string& path, UnitKind kind) {
    std::ifstream in(path);
    CALM_CHECK(in.good(), "FrequencyTable: cannot read " << path);
    FrequencyTable table;
    table.kind = kind;
    std::string line;
    while (std::getline(in, line)) {
      auto tab = line.find('\t');
      CALM_CHECK(tab != std::string::npos, "FrequencyTable: malformed line " << line);
      long long c = std::stoll(line.substr(tab + 1));
      table.counts[line.substr(0, tab)] = c;
      table.total += c;
    }
    return table;
  }
};

struct BiasListSpec {
  int common_set_size = 5000;  // K; 1500 for character mode, 1000 conversational
  int list_size = 50;          // N per speaker (or per utterance)
  enum class Scope { kPerSpeaker, kPerUtterance };
  Scope scope = Scope::kPerSpeaker;
  std::uint64_t seed = 0;

  void validate() const {
    CALM_CHECK_CONFIG(common_set_size >= 1, "BiasListSpec: K must be >= 1");
    CALM_CHECK_CONFIG(list_size >= 0, "BiasListSpec: N must be >= 0");
  }
};

inline FrequencyTable build_frequency_table(
    const std::vector<std::string>& transcripts, UnitKind kind) {
  FrequencyTable table;
  table.kind = kind;
  for (const auto& t : transcripts)
    for (const auto& u : tokenize(t, kind)) {
      ++table.counts[u];
      ++table.total;
    }
  CALM_CHECK(table.total > 0, "build_frequency_table: empty corpus");
  return table;
}

// Ordered unique reference units outside the top-K common set. Units unseen
// in training count as rare.
inline std::vector<std::string> extract_rare(const std::string& reference,
                                             const FrequencyTable& table, int k) {
  auto common = table.common_set(k);
  std::vector<std::string> rare;
  std::unordered_set<std::string> seen;
  for (const auto& u : tokenize(reference, table.kind))
    if (common.count(u) == 0 && seen.insert(u).second) rare.push_back(u);
  return rare;
}

// Per-speaker scope: each speaker's reference rare units plus seeded
// distractors up to N, concatenated in speaker order. Per-utterance scope:
// one list over all speakers' rare units. Distractors are drawn without
// replacement from the pool minus the utterance's own rare units.
inline std::vector<std::string> assemble_list(
    const std::vector<std::vector<std::string>>& rare_per_speaker,
    const std::vector<std::string>& rare_pool, const BiasListSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  std::unordered_set<std::string> own;
  for (const auto& sp : rare_per_speaker) own.insert(sp.begin(), sp.end());

  std::vector<std::string> candidates;
  for (const auto& u : rare_pool)
    if (own.count(u) == 0) candidates.push_back(u);

  std::vector<std::string> list;
  std::unordered_set<std::string> used;
  auto push = [&](const std::string& u) {
    if (used.insert(u).second) list.push_back(u);
  };
  auto draw_distractors = [&](int needed) {
    CALM_CHECK(needed <= static_cast<int>(candidates.size()),
               "assemble_list: rare pool too small, need " << needed
                   << " distractors but only " << candidates.size() << " remain");
    for (int i = 0; i < needed; ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      std::size_t j = pick(rng);
      push(candidates[j]);
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(j));
    }
  };

  if (spec.scope == BiasListSpec::Scope::kPerUtterance) {
    for (const auto& sp : rare_per_speaker)
      for (const auto& u : sp) push(u);
    if (static_cast<int>(list.size()) > spec.list_size) {
      std::cerr << "[calm] warning: reference rare units (" << list.size()
                << ") exceed list size N=" << spec.list_size << "\n";
    } else {
      draw_distractors(spec.list_size - static_cast<int>(list.size()));
    }
    return list;
  }

  for (const auto& sp : rare_per_speaker) {
    std::size_t before = list.size();
    for (const auto& u : sp) push(u);
    int have = static_cast<int>(list.size() - before);
    if (have > spec.list_size) {
      std::cerr << "[calm] warning: speaker rare units (" << have
                << ") exceed list size N=" << spec.list_size << "\n";
    } else {
      draw_distractors(spec.list_size - have);
    }
  }
  return list;
}

inline void save_list(const std::vector<std::string>& list, const std::string& path) {
  std::ofstream out(path);
  CALM_CHECK(out.good(), "save_list: cannot write " << path);
  for (const auto& phrase : list) out << phrase << "\n";
}

inline std::vector<std::string> load_list(const std::string& path) {
  std::ifstream in(path);
  CALM_CHECK(in.good(), "load_list: cannot read " << path);
  std::vector<std::string> list;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) list.push_back(line);
  return list;
}

// Phrase strings -> token-id phrases over the static vocabulary.
inline BiasList to_bias_list(const std::vector<std::string>& phrases,
                             const Vocab& vocab, UnitKind kind) {
  BiasList bias;
  for (const auto& p : phrases) bias.phrases.push_back(vocab.to_ids(p, kind));
  bias.validate();
  return bias;
}

}  // namespace calm

#endif  // CALM_BIASING_HPP
