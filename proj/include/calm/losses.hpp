// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// Training objectives: CTC at the final layer, interCTC over tap layers,
// attention cross-entropy with teacher forcing, VAD BCE, and their weighted
// combination. All values in nats.

#ifndef CALM_LOSSES_HPP
#define CALM_LOSSES_HPP

#include <map>
#include <string>
#include <vector>

#include "calm/ctc.hpp"
#include "calm/model.hpp"
#include "calm/types.hpp"

namespace calm {

struct LossWeights {
  double lambda_ctc = 0.3;
  double lambda_vad = 0.15;
  double lambda_interctc = 0.5;

  void validate() const {
    CALM_CHECK_CONFIG(lambda_ctc >= 0.0 && lambda_ctc <= 1.0 &&
                          lambda_vad >= 0.0 && lambda_vad <= 1.0 &&
                          lambda_interctc >= 0.0 && lambda_interctc <= 1.0,
                      "LossWeights: weights must lie in [0,1]");
    CALM_CHECK_CONFIG(lambda_ctc + lambda_vad <= 1.0,
                      "LossWeights: lambda_ctc + lambda_vad must be <= 1");
  }

  double lambda_att() const { return 1.0 - lambda_ctc - lambda_vad; }
};

struct LossReport {
  double ctc_final = 0.0;
  double interctc = 0.0;
  double attention = 0.0;
  double vad = 0.0;
  double total = 0.0;
  std::map<std::string, Matrix> gradients;
};

// Arithmetic mean of per-tap CTC losses.
inline double interctc_loss(const std::vector<PosteriorGrid>& grids,
                            const LabelSequence& label) {
  CALM_CHECK(!grids.empty(), "interctc_loss: no tap grids");
  double sum = 0.0;
  for (const auto& grid : grids) sum += ctc_loss(grid, label);
  return sum / static_cast<double>(grids.size());
}

// Teacher-forced negative log-likelihood. `rows` holds one row-stochastic
// distribution per step; `gold` is the label with the end symbol appended.
inline double attention_loss(const Matrix& rows, const std::vector<int>& gold) {
  CALM_CHECK(rows.rows() == static_cast<Eigen::Index>(gold.size()),
             "attention_loss: step count mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    int tok = gold[i];
    CALM_CHECK(tok >= 0 && tok < rows.cols(),
               "attention_loss: token " << tok << " outside extended vocabulary");
    sum += -std::log(rows(i, tok));
  }
  return sum;
}

// Mean binary cross-entropy in nats, posteriors clamped at 1e-12.
inline double vad_loss(const VadTrack& track, const Vector& labels) {
  CALM_CHECK(track.posteriors.size() == labels.size(),
             "vad_loss: length mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    double p = std::clamp(track.posteriors(i), 1e-12, 1.0 - 1e-12);
    sum += -(labels(i) * std::log(p) + (1.0 - labels(i)) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(labels.size());
}

// lambda_ctc [(1-lambda_ic) L_ctc^L + lambda_ic L_inter]
//   + lambda_vad L_vad + (1 - lambda_ctc - lambda_vad) L_att
inline double total_loss(double ctc_final, double interctc, double attention,
                         double vad, const LossWeights& w) {
  w.validate();
  double ctc = (1.0 - w.lambda_interctc) * ctc_final + w.lambda_interctc * interctc;
  return w.lambda_ctc * ctc + w.lambda_vad * vad + w.lambda_att() * attention;
}

// Full multitask objective on a recorded forward pass. The returned report
// carries parameter gradients of the total loss (populated by backward()).
inline LossReport multitask_loss(ad::Graph& g, const Model& model,
                                 const BoundParams& p, const ForwardResult& fwd,
                                 const LabelSequence& label,
                                 const Vector& vad_labels, const LossWeights& w,
                                 bool run_backward = true) {
  w.validate();
  const int vocab = model.config().static_size + fwd.dynamic_size;
  label.validate(vocab);

  LossReport report;
  ad::Var ctc_final = ctc_loss_node(fwd.final_grid, label.tokens);
  report.ctc_final = ctc_final.value()(0, 0);

  ad::Var ctc_term;
  if (!fwd.tap_grids.empty()) {
    ad::Var inter;
    for (const auto& [layer, grid] : fwd.tap_grids) {
      ad::Var l = ctc_loss_node(grid, label.tokens);
      inter = inter.valid() ? ad::add(inter, l) : l;
    }
    inter = ad::scale(inter, 1.0 / static_cast<double>(fwd.tap_grids.size()));
    report.interctc = inter.value()(0, 0);
    ctc_term = ad::add(ad::scale(ctc_final, 1.0 - w.lambda_interctc),
                       ad::scale(inter, w.lambda_interctc));
  } else {
    CALM_CHECK_CONFIG(w.lambda_interctc == 0.0,
                      "multitask_loss: lambda_interctc > 0 but the model has no taps");
    ctc_term = ctc_final;
  }

  // teacher forcing, blank doubles as the end symbol
  std::vector<int> gold = label.tokens;
  gold.push_back(kBlank);
  std::vector<int> prefix = {kDecoderStart};
  ad::Var att;
  for (int tok : gold) {
    ad::Var row = model.decoder_step(g, p, prefix, fwd.encoder_final, fwd.bias_vectors);
    ad::Var nll = ad::pick_neg_log(row, tok);
    att = att.valid() ? ad::add(att, nll) : nll;
    prefix.push_back(tok);
  }
  report.attention = att.value()(0, 0);

  CALM_CHECK(fwd.vad.rows() == vad_labels.size(), "multitask_loss: VAD length mismatch");
  ad::Var vad = ad::bce(fwd.vad, vad_labels);
  report.vad = vad.value()(0, 0);

  ad::Var total = ad::add(
      ad::add(ad::scale(ctc_term, w.lambda_ctc), ad::scale(vad, w.lambda_vad)),
      ad::scale(att, w.lambda_att()));
  report.total = total.value()(0, 0);
  CALM_CHECK(std::isfinite(report.total), "multitask_loss: non-finite loss");

  if (run_backward) {
    g.backward(total);
    for (const auto& [name, var] : p.vars) report.gradients[name] = var.grad();
  }
  return report;
}

}  // namespace calm

#endif  // CALM_LOSSES_HPP
