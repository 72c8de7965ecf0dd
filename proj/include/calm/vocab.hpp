// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0

#ifndef CALM_VOCAB_HPP
#define CALM_VOCAB_HPP

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "calm/common.hpp"
#include "calm/types.hpp"

namespace calm {

enum class UnitKind { kWord, kCharacter };

inline UnitKind unit_kind_from_string(const std::string& s) {
  if (s == "word") return UnitKind::kWord;
  if (s == "character" || s == "char") return UnitKind::kCharacter;
  throw ConfigError("unknown unit kind: " + s);
}

inline std::string to_string(UnitKind kind) {
  return kind == UnitKind::kWord ? "word" : "character";
}

// Splits a transcript into units. Word mode splits on whitespace; character
// mode yields one unit per UTF-8 codepoint, whitespace excluded.
inline std::vector<std::string> tokenize(const std::string& text, UnitKind kind) {
  std::vector<std::string> units;
  if (kind == UnitKind::kWord) {
    std::istringstream iss(text);
    std::string w;
    while (iss >> w) units.push_back(w);
    return units;
  }
  for (std::size_t i = 0; i < text.size();) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    len = std::min(len, text.size() - i);
    std::string u = text.substr(i, len);
    i += len;
    if (u != " " && u != "\t" && u != "\n" && u != "\r") units.push_back(u);
  }
  return units;
}

inline std::string join_units(const std::vector<std::string>& units, UnitKind kind) {
  std::string out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (i > 0 && kind == UnitKind::kWord) out += ' ';
    out += units[i];
  }
  return out;
}

// Static-vocabulary symbol table; index 0 is the blank.
class Vocab {
 public:
  Vocab() { add("<blank>"); }

  explicit Vocab(const std::vector<std::string>& units) : Vocab() {
    for (const auto& u : units) add(u);
  }

  int add(const std::string& unit) {
    auto it = index_.find(unit);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(units_.size());
    index_.emplace(unit, id);
    units_.push_back(unit);
    return id;
  }

  int id(const std::string& unit) const {
    auto it = index_.find(unit);
    CALM_CHECK(it != index_.end(), "Vocab: unknown unit '" << unit << "'");
    return it->second;
  }

  bool contains(const std::string& unit) const { return index_.count(unit) > 0; }

  const std::string& unit(int id) const {
    CALM_CHECK(id >= 0 && id < size(), "Vocab: id " << id << " out of range");
    return units_[id];
  }

  int size() const { return static_cast<int>(units_.size()); }

  std::vector<int> to_ids(const std::string& text, UnitKind kind) const {
    std::vector<int> ids;
    for (const auto& u : tokenize(text, kind)) ids.push_back(id(u));
    return ids;
  }

  std::string to_text(const std::vector<int>& ids, UnitKind kind) const {
    std::vector<std::string> units;
    for (int i : ids) units.push_back(unit(i));
    return join_units(units, kind);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    CALM_CHECK(out.good(), "Vocab: cannot write " << path);
    for (const auto& u : units_) out << u << "\n";
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    CALM_CHECK(in.good(), "Vocab: cannot read " << path);
    Vocab v;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        CALM_CHECK(line == "<blank>", "Vocab: first entry must be <blank>");
        first = false;
        continue;
      }
      v.add(line);
    }
    return v;
  }

 private:
  std::vector<std::string> units_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace calm

#endif  // CALM_VOCAB_HPP
