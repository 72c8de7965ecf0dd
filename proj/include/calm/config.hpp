// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Experiment configuration: a JSON file with a schema-version field covering
// model, losses, decoding, biasing, simulation, and optimizer settings.
// Round-trips losslessly; dotted-path overrides for CLI flags.

#ifndef CALM_CONFIG_HPP
#define CALM_CONFIG_HPP

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "calm/biasing.hpp"
#include "calm/common.hpp"
#include "calm/decoding.hpp"
#include "calm/losses.hpp"
#include "calm/mixsim.hpp"
#include "calm/model.hpp"

namespace calm {

struct TrainConfig {
  int steps = 200;
  double step_size = 0.05;
  int batch_size = 8;
  double clip_norm = 5.0;
  double lr_decay = 1.0;  // multiplicative step-size decay per epoch
  int list_min = 2;  // per-batch biasing-list size range (N drawn uniformly)
  int list_max = 6;
  std::uint64_t seed = 0;

  void validate() const {
    CALM_CHECK_CONFIG(steps >= 0, "TrainConfig: steps must be >= 0");
    CALM_CHECK_CONFIG(step_size >= 0.0, "TrainConfig: step_size must be >= 0");
    CALM_CHECK_CONFIG(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    CALM_CHECK_CONFIG(clip_norm > 0.0, "TrainConfig: clip_norm must be > 0");
    CALM_CHECK_CONFIG(lr_decay > 0.0 && lr_decay <= 1.0,
                      "TrainConfig: lr_decay must be in (0, 1]");
    CALM_CHECK_CONFIG(0 <= list_min && list_min <= list_max,
                      "TrainConfig: need 0 <= list_min <= list_max");
  }
};

struct PathConfig {
  std::string dataset;
  std::string checkpoint;
  std::string lists;
  std::string hypotheses;
  std::string log;
  std::string report;
};

struct ExperimentConfig {
  ModelConfig model;
  LossWeights loss_weights;
  DecodeConfig decode;
  BiasListSpec biasing;
  SynthConfig synth;
  TrainConfig train;
  PathConfig paths;
  UnitKind unit_kind = UnitKind::kWord;

  void validate() const {
    model.validate();
    loss_weights.validate();
    decode.validate();
    biasing.validate();
    synth.validate();
    train.validate();
  }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ExperimentConfig load(const std::string& path);
};

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["unit_kind"] = to_string(unit_kind);
  j["model"] = {{"L", model.L},
                {"input_dim", model.input_dim},
                {"d_enc", model.d_enc},
                {"d_emb", model.d_emb},
                {"d_bias", model.d_bias},
                {"d_dec", model.d_dec},
                {"static_size", model.static_size},
                {"subsample_factor", model.subsample_factor},
                {"tap_layers", model.tap_layers},
                {"decoder_layers", model.decoder_layers},
                {"self_cond_weight", model.self_cond_weight}};
  j["loss_weights"] = {{"lambda_ctc", loss_weights.lambda_ctc},
                       {"lambda_vad", loss_weights.lambda_vad},
                       {"lambda_interctc", loss_weights.lambda_interctc}};
  j["decode"] = {{"mode", decode.mode == DecodeConfig::Mode::kBeam ? "beam" : "greedy"},
                 {"beam_size", decode.beam_size},
                 {"mu", decode.mu}};
  j["biasing"] = {
      {"common_set_size", biasing.common_set_size},
      {"list_size", biasing.list_size},
      {"scope", biasing.scope == BiasListSpec::Scope::kPerSpeaker ? "per_speaker"
                                                                  : "per_utterance"},
      {"seed", biasing.seed}};
  j["synth"] = {{"vocab_size", synth.vocab_size},
                {"rare_vocab", synth.rare_vocab},
                {"num_speakers", synth.num_speakers},
                {"speakers_per_mix", synth.speakers_per_mix},
                {"min_tokens", synth.min_tokens},
                {"max_tokens", synth.max_tokens},
                {"frames_per_token", synth.frames_per_token},
                {"max_delay_frames", synth.max_delay_frames},
                {"enroll_tokens", synth.enroll_tokens},
                {"rare_rate", synth.rare_rate},
                {"rare_gain", synth.rare_gain},
                {"speaker_gain_min", synth.speaker_gain_min},
                {"noise_std", synth.noise_std},
                {"speaker_mixing", synth.speaker_mixing},
                {"num_examples", synth.num_examples},
                {"seed", synth.seed}};
  j["train"] = {{"steps", train.steps},
                {"step_size", train.step_size},
                {"batch_size", train.batch_size},
                {"clip_norm", train.clip_norm},
                {"lr_decay", train.lr_decay},
                {"list_min", train.list_min},
                {"list_max", train.list_max},
                {"seed", train.seed}};
  j["paths"] = {{"dataset", paths.dataset},       {"checkpoint", paths.checkpoint},
                {"lists", paths.lists},           {"hypotheses", paths.hypotheses},
                {"log", paths.log},               {"report", paths.report}};
  return j;
}

namespace detail {
// Reads j[key] into out when present; unknown keys in a section are rejected
// by the caller to catch typos.
template <typename T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& section) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    CALM_CHECK_CONFIG(ok, "config: unknown key '" << key << "' in " << section);
  }
}
}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  CALM_CHECK_CONFIG(j.value("schema_version", 0) == 1,
                    "config: unsupported schema_version");
  detail::check_keys(j,
                     {"schema_version", "unit_kind", "model", "loss_weights",
                      "decode", "biasing", "synth", "train", "paths"},
                     "config");
  ExperimentConfig c;
  if (j.contains("unit_kind"))
    c.unit_kind = unit_kind_from_string(j.at("unit_kind").get<std::string>());
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m,
                       {"L", "input_dim", "d_enc", "d_emb", "d_bias", "d_dec",
                        "static_size", "subsample_factor", "tap_layers",
                        "decoder_layers", "self_cond_weight"},
                       "model");
    detail::get_to(m, "L", c.model.L);
    detail::get_to(m, "input_dim", c.model.input_dim);
    detail::get_to(m, "d_enc", c.model.d_enc);
    detail::get_to(m, "d_emb", c.model.d_emb);
    detail::get_to(m, "d_bias", c.model.d_bias);
    detail::get_to(m, "d_dec", c.model.d_dec);
    detail::get_to(m, "static_size", c.model.static_size);
    detail::get_to(m, "subsample_factor", c.model.subsample_factor);
    detail::get_to(m, "tap_layers", c.model.tap_layers);
    detail::get_to(m, "decoder_layers", c.model.decoder_layers);
    detail::get_to(m, "self_cond_weight", c.model.self_cond_weight);
  }
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    detail::check_keys(w, {"lambda_ctc", "lambda_vad", "lambda_interctc"},
                       "loss_weights");
    detail::get_to(w, "lambda_ctc", c.loss_weights.lambda_ctc);
    detail::get_to(w, "lambda_vad", c.loss_weights.lambda_vad);
    detail::get_to(w, "lambda_interctc", c.loss_weights.lambda_interctc);
  }
  if (j.contains("decode")) {
    const auto& d = j.at("decode");
    detail::check_keys(d, {"mode", "beam_size", "mu"}, "decode");
    if (d.contains("mode")) {
      auto mode = d.at("mode").get<std::string>();
      if (mode == "beam")
        c.decode.mode = DecodeConfig::Mode::kBeam;
      else if (mode == "greedy")
        c.decode.mode = DecodeConfig::Mode::kGreedy;
      else
        throw ConfigError("config: unknown decode mode '" + mode + "'");
    }
    detail::get_to(d, "beam_size", c.decode.beam_size);
    detail::get_to(d, "mu", c.decode.mu);
  }
  if (j.contains("biasing")) {
    const auto& b = j.at("biasing");
    detail::check_keys(b, {"common_set_size", "list_size", "scope", "seed"},
                       "biasing");
    detail::get_to(b, "common_set_size", c.biasing.common_set_size);
    detail::get_to(b, "list_size", c.biasing.list_size);
    if (b.contains("scope")) {
      auto scope = b.at("scope").get<std::string>();
      if (scope == "per_speaker")
        c.biasing.scope = BiasListSpec::Scope::kPerSpeaker;
      else if (scope == "per_utterance")
        c.biasing.scope = BiasListSpec::Scope::kPerUtterance;
      else
        throw ConfigError("config: unknown biasing scope '" + scope + "'");
    }
    detail::get_to(b, "seed", c.biasing.seed);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    detail::check_keys(s,
                       {"vocab_size", "rare_vocab", "num_speakers",
                        "speakers_per_mix", "min_tokens", "max_tokens",
                        "frames_per_token", "max_delay_frames", "enroll_tokens",
                        "rare_rate", "rare_gain", "speaker_gain_min", "noise_std", "speaker_mixing",
                        "num_examples", "seed"},
                       "synth");
    detail::get_to(s, "vocab_size", c.synth.vocab_size);
    detail::get_to(s, "rare_vocab", c.synth.rare_vocab);
    detail::get_to(s, "num_speakers", c.synth.num_speakers);
    detail::get_to(s, "speakers_per_mix", c.synth.speakers_per_mix);
    detail::get_to(s, "min_tokens", c.synth.min_tokens);
    detail::get_to(s, "max_tokens", c.synth.max_tokens);
    detail::get_to(s, "frames_per_token", c.synth.frames_per_token);
    detail::get_to(s, "max_delay_frames", c.synth.max_delay_frames);
    detail::get_to(s, "enroll_tokens", c.synth.enroll_tokens);
    detail::get_to(s, "rare_rate", c.synth.rare_rate);
    detail::get_to(s, "rare_gain", c.synth.rare_gain);
    detail::get_to(s, "speaker_gain_min", c.synth.speaker_gain_min);
    detail::get_to(s, "noise_std", c.synth.noise_std);
    detail::get_to(s, "speaker_mixing", c.synth.speaker_mixing);
    detail::get_to(s, "num_examples", c.synth.num_examples);
    detail::get_to(s, "seed", c.synth.seed);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t,
                       {"steps", "step_size", "batch_size", "clip_norm",
                        "lr_decay", "list_min", "list_max", "seed"},
                       "train");
    detail::get_to(t, "steps", c.train.steps);
    detail::get_to(t, "step_size", c.train.step_size);
    detail::get_to(t, "batch_size", c.train.batch_size);
    detail::get_to(t, "clip_norm", c.train.clip_norm);
    detail::get_to(t, "lr_decay", c.train.lr_decay);
    detail::get_to(t, "list_min", c.train.list_min);
    detail::get_to(t, "list_max", c.train.list_max);
    detail::get_to(t, "seed", c.train.seed);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    detail::check_keys(p,
                       {"dataset", "checkpoint", "lists", "hypotheses", "log",
                        "report"},
                       "paths");
    detail::get_to(p, "dataset", c.paths.dataset);
    detail::get_to(p, "checkpoint", c.paths.checkpoint);
    detail::get_to(p, "lists", c.paths.lists);
    detail::get_to(p, "hypotheses", c.paths.hypotheses);
    detail::get_to(p, "log", c.paths.log);
    detail::get_to(p, "report", c.paths.report);
  }
  c.validate();
  return c;
}

inline void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  CALM_CHECK(out.good(), "config: cannot write " << path);
  out << to_json().dump(2) << "\n";
}

inline ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  CALM_CHECK(in.good(), "config: cannot read " << path);
  return from_json(nlohmann::json::parse(in));
}

// Applies "section.key=value" to a config JSON; the value is parsed as JSON
// when possible and falls back to a plain string.
inline void apply_override(nlohmann::json& j, const std::string& dotted) {
  auto eq = dotted.find('=');
  CALM_CHECK_CONFIG(eq != std::string::npos,
                    "override must look like section.key=value: " << dotted);
  std::string path = dotted.substr(0, eq);
  std::string value = dotted.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t pos = 0;
  while (true) {
    auto dot = path.find('.', pos);
    std::string key = path.substr(pos, dot - pos);
    CALM_CHECK_CONFIG(!key.empty(), "override has an empty path segment: " << dotted);
    if (dot == std::string::npos) {
      auto parsed = nlohmann::json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

// Default config path for the CLI; overridden by the CALM_CONFIG env var.
inline std::string default_config_path() {
  const char* env = std::getenv("CALM_CONFIG");
  return env ? env : "calm.json";
}

}  // namespace calm

#endif  // CALM_CONFIG_HPP
