// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// SGD training loop over the synthetic feature-domain task: per-batch
// biasing-list regeneration, gradient clipping at a global norm, a JSONL
// step-loss log, and deterministic runs under a fixed seed.

#ifndef CALM_TRAINER_HPP
#define CALM_TRAINER_HPP

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "calm/config.hpp"
#include "calm/decoding.hpp"
#include "calm/losses.hpp"
#include "calm/mixsim.hpp"
#include "calm/model.hpp"

namespace calm {

struct TrainStats {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;  // mean step loss per epoch
  int skipped = 0;                   // CTC-infeasible draws
};

// Blocks of `factor` mixture frames collapse to one encoder label via the
// >50%-active rule, matching the model's mean-pool subsampling.
inline Vector subsample_vad_track(const std::vector<double>& frames, int factor) {
  const int T = static_cast<int>(frames.size());
  const int T_enc = (T + factor - 1) / factor;
  Vector out(T_enc);
  for (int i = 0; i < T_enc; ++i) {
    int lo = i * factor, hi = std::min(T, (i + 1) * factor);
    double active = 0.0;
    for (int t = lo; t < hi; ++t) active += frames[static_cast<std::size_t>(t)] != 0.0;
    out(i) = 2.0 * active > static_cast<double>(hi - lo) ? 1.0 : 0.0;
  }
  return out;
}

// Single-token phrases: the target's rare tokens plus seeded distractors
// from the rest of the rare vocabulary, up to `n` entries.
inline BiasList synth_bias_list(const std::vector<int>& transcript,
                                const SynthConfig& synth, int n,
                                std::mt19937_64& rng) {
  BiasList bias;
  std::unordered_set<int> own;
  for (int tok : transcript)
    if (synth.is_rare(tok) && own.insert(tok).second) bias.phrases.push_back({tok});

  std::vector<int> pool;
  for (int tok = synth.vocab_size - synth.rare_vocab + 1; tok <= synth.vocab_size;
       ++tok)
    if (own.count(tok) == 0) pool.push_back(tok);
  while (static_cast<int>(bias.phrases.size()) < n && !pool.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::size_t j = pick(rng);
    bias.phrases.push_back({pool[j]});
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return bias;
}

inline TrainStats train(Model& model, const SynthDataset& ds,
                        const TrainConfig& cfg, const LossWeights& weights,
                        const std::string& log_path = "") {
  cfg.validate();
  weights.validate();
  CALM_CHECK(!ds.examples.empty() || cfg.steps == 0, "train: empty dataset");
  CALM_CHECK(ds.config.vocab_size + 1 == model.config().static_size,
             "train: dataset vocabulary " << ds.config.vocab_size
                 << " does not match static size " << model.config().static_size);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    CALM_CHECK(log.good(), "train: cannot write log " << log_path);
  }

  std::mt19937_64 rng(cfg.seed);
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(ds.examples.size()) / cfg.batch_size);

  TrainStats stats;
  double epoch_sum = 0.0;
  int epoch_count = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    int epoch = step / steps_per_epoch;
    double lr = cfg.step_size * std::pow(cfg.lr_decay, epoch);

    std::map<std::string, Matrix> grad_sum;
    double loss_sum = 0.0;
    LossReport last;
    int used = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      std::uniform_int_distribution<std::size_t> pick_ex(0, ds.examples.size() - 1);
      const SynthExample& ex = ds.examples[pick_ex(rng)];
      std::uniform_int_distribution<std::size_t> pick_spk(0, ex.speakers.size() - 1);
      std::size_t c = pick_spk(rng);
      std::uniform_int_distribution<int> pick_n(cfg.list_min, cfg.list_max);
      BiasList bias = synth_bias_list(ex.transcripts[c], ds.config, pick_n(rng), rng);

      LabelSequence label{map_to_dynamic(ex.transcripts[c], bias,
                                         model.config().static_size)};
      int t_enc = model.config().subsampled_length(static_cast<int>(ex.mixture.rows()));
      if (t_enc < ctc_min_frames(label.tokens)) {
        ++stats.skipped;
        continue;
      }

      FeatureSequence feats{ex.mixture};
      FeatureSequence enroll{ex.enrollments[c]};
      Vector vad = subsample_vad_track(ex.vad[c], model.config().subsample_factor);

      ad::Graph g;
      BoundParams p = model.bind(g);
      ForwardResult fwd = model.forward(g, p, feats, enroll, bias, 1.0);
      last = multitask_loss(g, model, p, fwd, label, vad, weights);
      loss_sum += last.total;
      for (const auto& [name, grad] : last.gradients) {
        auto it = grad_sum.find(name);
        if (it == grad_sum.end())
          grad_sum.emplace(name, grad);
        else
          it->second += grad;
      }
      ++used;
    }
    if (used == 0) continue;

    double norm_sq = 0.0;
    for (auto& [name, grad] : grad_sum) {
      grad /= static_cast<double>(used);
      norm_sq += grad.squaredNorm();
    }
    double norm = std::sqrt(norm_sq);
    double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
    for (const auto& [name, grad] : grad_sum)
      model.params().at(name) -= (lr * clip) * grad;

    double mean_loss = loss_sum / used;
    stats.step_losses.push_back(mean_loss);
    epoch_sum += mean_loss;
    ++epoch_count;
    if (log.is_open()) {
      nlohmann::json line = {{"step", step},
                             {"loss", mean_loss},
                             {"ctc", last.ctc_final},
                             {"interctc", last.interctc},
                             {"attention", last.attention},
                             {"vad", last.vad},
                             {"lr", lr},
                             {"grad_norm", norm}};
      log << line.dump() << "\n";
    }
    if ((step + 1) % steps_per_epoch == 0 || step + 1 == cfg.steps) {
      stats.epoch_losses.push_back(epoch_sum / epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  return stats;
}

}  // namespace calm

#endif  // CALM_TRAINER_HPP
