// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// calm: experiment driver. Subcommands: simulate, build-bias, train, decode,
// score. All settings come from a JSON config (CALM_CONFIG or --config) with
// dotted-path --set overrides.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calm/biasing.hpp"
#include "calm/config.hpp"
#include "calm/decoding.hpp"
#include "calm/mixsim.hpp"
#include "calm/scoring.hpp"
#include "calm/trainer.hpp"

namespace {

using namespace calm;

struct CommonOpts {
  std::string config_path = default_config_path();
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Config file (JSON)")
      ->capture_default_str();
  cmd->add_option("--set", opts.overrides,
                  "Override a config field, e.g. --set decode.mu=0.3");
}

ExperimentConfig load_config(const CommonOpts& opts) {
  nlohmann::json j;
  if (std::filesystem::exists(opts.config_path)) {
    std::ifstream in(opts.config_path);
    j = nlohmann::json::parse(in);
  } else {
    j = ExperimentConfig{}.to_json();
  }
  for (const auto& o : opts.overrides) apply_override(j, o);
  return ExperimentConfig::from_json(j);
}

// Token-id vocabulary for the synthetic task: unit "k" <-> id k.
Vocab id_vocab(int static_size) {
  Vocab v;
  for (int k = 1; k < static_size; ++k) v.add(std::to_string(k));
  return v;
}

std::string utt_id(std::size_t example, std::size_t speaker) {
  return "ex" + std::to_string(example) + ".spk" + std::to_string(speaker);
}

std::string transcript_text(const std::vector<int>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(tokens[i]);
  }
  return out;
}

// id TAB text, one utterance per line.
std::map<std::string, std::string> read_tsv(const std::string& path) {
  std::ifstream in(path);
  CALM_CHECK(in.good(), "cannot read " << path);
  std::map<std::string, std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    CALM_CHECK(tab != std::string::npos, "malformed line (want id TAB text): " << line);
    rows[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return rows;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  CALM_CHECK_CONFIG(!cfg.paths.dataset.empty(), "simulate: paths.dataset is empty");
  auto ds = synth_task(cfg.synth);
  save_dataset(ds, cfg.paths.dataset);

  std::ofstream manifest(cfg.paths.dataset + ".manifest.jsonl");
  CALM_CHECK(manifest.good(), "simulate: cannot write manifest");
  std::ofstream refs(cfg.paths.dataset + ".refs.tsv");
  CALM_CHECK(refs.good(), "simulate: cannot write references");
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    nlohmann::json row = {{"id", "ex" + std::to_string(i)},
                          {"speakers", ex.speakers},
                          {"frames", ex.mixture.rows()},
                          {"seed", cfg.synth.seed}};
    row["transcripts"] = nlohmann::json::array();
    for (const auto& t : ex.transcripts) row["transcripts"].push_back(t);
    manifest << row.dump() << "\n";
    for (std::size_t c = 0; c < ex.transcripts.size(); ++c)
      refs << utt_id(i, c) << "\t" << transcript_text(ex.transcripts[c]) << "\n";
  }
  std::cout << "wrote " << ds.examples.size() << " mixtures to "
            << cfg.paths.dataset << "\n";
  return 0;
}

int cmd_build_bias(const ExperimentConfig& cfg, const std::string& transcripts_path) {
  CALM_CHECK_CONFIG(!cfg.paths.lists.empty(), "build-bias: paths.lists is empty");
  auto rows = read_tsv(transcripts_path);
  CALM_CHECK(!rows.empty(), "build-bias: no transcripts in " << transcripts_path);

  std::vector<std::string> corpus;
  for (const auto& [id, text] : rows) corpus.push_back(text);
  auto table = build_frequency_table(corpus, cfg.unit_kind);
  auto pool = table.rare_pool(cfg.biasing.common_set_size);

  std::filesystem::create_directories(cfg.paths.lists);
  std::uint64_t salt = 0;
  for (const auto& [id, text] : rows) {
    auto rare = extract_rare(text, table, cfg.biasing.common_set_size);
    BiasListSpec spec = cfg.biasing;
    spec.seed = cfg.biasing.seed + salt++;
    auto list = assemble_list({rare}, pool, spec);
    save_list(list, (std::filesystem::path(cfg.paths.lists) / (id + ".txt")).string());
  }
  std::cout << "wrote " << rows.size() << " lists to " << cfg.paths.lists << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  CALM_CHECK_CONFIG(!cfg.paths.dataset.empty(), "train: paths.dataset is empty");
  CALM_CHECK_CONFIG(!cfg.paths.checkpoint.empty(), "train: paths.checkpoint is empty");
  auto ds = load_dataset(cfg.paths.dataset);
  Model model(cfg.model, cfg.train.seed);
  auto stats = train(model, ds, cfg.train, cfg.loss_weights, cfg.paths.log);
  model.params().save(cfg.paths.checkpoint);
  if (!stats.step_losses.empty())
    std::cout << "final step loss " << stats.step_losses.back() << " (skipped "
              << stats.skipped << " infeasible draws)\n";
  std::cout << "wrote checkpoint " << cfg.paths.checkpoint << "\n";
  return 0;
}

int cmd_decode(const ExperimentConfig& cfg) {
  CALM_CHECK_CONFIG(!cfg.paths.dataset.empty(), "decode: paths.dataset is empty");
  CALM_CHECK_CONFIG(!cfg.paths.checkpoint.empty(), "decode: paths.checkpoint is empty");
  CALM_CHECK_CONFIG(!cfg.paths.hypotheses.empty(), "decode: paths.hypotheses is empty");
  auto ds = load_dataset(cfg.paths.dataset);
  Model model(cfg.model, TensorStore::load(cfg.paths.checkpoint));
  Vocab vocab = id_vocab(cfg.model.static_size);

  std::ofstream hyps(cfg.paths.hypotheses);
  CALM_CHECK(hyps.good(), "decode: cannot write " << cfg.paths.hypotheses);
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    const auto& ex = ds.examples[i];
    for (std::size_t c = 0; c < ex.speakers.size(); ++c) {
      BiasList bias;  // empty when no list file exists (N = 0)
      if (!cfg.paths.lists.empty()) {
        auto list_path =
            std::filesystem::path(cfg.paths.lists) / (utt_id(i, c) + ".txt");
        if (std::filesystem::exists(list_path))
          bias = to_bias_list(load_list(list_path.string()), vocab, cfg.unit_kind);
      }
      FeatureSequence feats{ex.mixture};
      FeatureSequence enroll{ex.enrollments[c]};
      auto [grid, vad] = model.infer(feats, enroll, bias, cfg.decode.mu);
      auto ranked = decode(grid, cfg.decode, bias);
      CALM_CHECK(!ranked.empty(), "decode: no hypothesis produced");
      hyps << utt_id(i, c) << "\t" << transcript_text(ranked[0].surface) << "\n";
    }
  }
  std::cout << "wrote hypotheses " << cfg.paths.hypotheses << "\n";
  return 0;
}

int cmd_score(const ExperimentConfig& cfg, const std::string& refs_path,
              const std::string& hyps_path) {
  auto refs = read_tsv(refs_path);
  auto hyps = read_tsv(hyps_path);
  ScoreReport corpus;
  for (const auto& [id, ref] : refs) {
    auto it = hyps.find(id);
    std::string hyp = it == hyps.end() ? "" : it->second;
    std::vector<std::string> phrases;
    if (!cfg.paths.lists.empty()) {
      auto list_path = std::filesystem::path(cfg.paths.lists) / (id + ".txt");
      if (std::filesystem::exists(list_path)) phrases = load_list(list_path.string());
    }
    corpus += score_utterance(ref, hyp, phrases, cfg.unit_kind);
  }
  auto j = corpus.to_json();
  if (!cfg.paths.report.empty()) {
    std::ofstream out(cfg.paths.report);
    CALM_CHECK(out.good(), "score: cannot write " << cfg.paths.report);
    out << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CALM: target-speaker ASR with dynamic-vocabulary biasing"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string transcripts_path, refs_path, hyps_path;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  add_common(simulate, opts);

  auto* build_bias = app.add_subcommand("build-bias", "Build biasing-list files");
  add_common(build_bias, opts);
  build_bias->add_option("--transcripts", transcripts_path, "id TAB text file")
      ->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, opts);

  auto* decode_cmd = app.add_subcommand("decode", "Decode a dataset");
  add_common(decode_cmd, opts);

  auto* score_cmd = app.add_subcommand("score", "Score hypotheses");
  add_common(score_cmd, opts);
  score_cmd->add_option("--refs", refs_path, "reference id TAB text file")->required();
  score_cmd->add_option("--hyps", hyps_path, "hypothesis id TAB text file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load_config(opts);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (build_bias->parsed()) return cmd_build_bias(cfg, transcripts_path);
    if (train_cmd->parsed()) return cmd_train(cfg);
    if (decode_cmd->parsed()) return cmd_decode(cfg);
    if (score_cmd->parsed()) return cmd_score(cfg, refs_path, hyps_path);
  } catch (const std::exception& e) {
    std::cerr << "calm: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
