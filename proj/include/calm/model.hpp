// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0
//
// The forward computation graph: feature projection, residual encoder stack
// with self-conditioning taps, FiLM speaker adaptation, bias encoder, joint
// static+dynamic output head, VAD head and a minimal cross-attention decoder.

#ifndef CALM_MODEL_HPP
#define CALM_MODEL_HPP

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "calm/autodiff.hpp"
#include "calm/checkpoint.hpp"
#include "calm/common.hpp"
#include "calm/types.hpp"

namespace calm {

// Start-of-sequence marker for the attention decoder prefix.
constexpr int kDecoderStart = -1;

struct ModelConfig {
  int L = 4;                 // encoder layers
  int input_dim = 48;        // raw feature dimension D
  int d_enc = 48;
  int d_emb = 16;
  int d_bias = 24;
  int d_dec = 32;
  int static_size = 41;      // M, blank included
  int subsample_factor = 2;
  std::vector<int> tap_layers;  // 1-based, strictly inside (0, L)
  int decoder_layers = 1;
  double self_cond_weight = 1.0;

  // Quarter points of the stack, mirroring taps at 3/6/9 of a 12-layer model.
  static std::vector<int> default_taps(int layers) {
    std::vector<int> taps;
    for (int k = 1; k <= 3; ++k) {
      int l = static_cast<int>(std::lround(k * layers / 4.0));
      if (l >= 1 && l < layers && (taps.empty() || taps.back() != l))
        taps.push_back(l);
    }
    return taps;
  }

  void validate() const {
    CALM_CHECK_CONFIG(L >= 1, "ModelConfig: L must be >= 1");
    CALM_CHECK_CONFIG(static_size >= 2, "ModelConfig: static vocab needs blank + 1 symbol");
    CALM_CHECK_CONFIG(input_dim >= 1 && d_enc >= 1 && d_emb >= 1 &&
                          d_bias >= 1 && d_dec >= 1,
                      "ModelConfig: dimensions must be positive");
    CALM_CHECK_CONFIG(subsample_factor >= 1, "ModelConfig: subsample_factor must be >= 1");
    CALM_CHECK_CONFIG(decoder_layers >= 1, "ModelConfig: decoder_layers must be >= 1");
    for (int l : tap_layers)
      CALM_CHECK_CONFIG(l >= 1 && l < L, "ModelConfig: tap layer " << l
                                             << " not strictly inside (0, " << L << ")");
  }

  std::vector<int> taps() const {
    return tap_layers.empty() ? default_taps(L) : tap_layers;
  }

  int subsampled_length(int T) const {
    return (T + subsample_factor - 1) / subsample_factor;
  }
};

namespace ad_ops = calm::ad;

// Parameters of one forward pass bound to a tape as gradient-tracking leaves.
struct BoundParams {
  std::map<std::string, ad::Var> vars;

  ad::Var at(const std::string& name) const {
    auto it = vars.find(name);
    CALM_CHECK(it != vars.end(), "BoundParams: missing " << name);
    return it->second;
  }
};

struct ForwardResult {
  std::map<int, ad::Var> tap_grids;  // layer -> T_enc x (M+N) posterior grid
  ad::Var final_grid;
  ad::Var vad;                       // T_enc x 1 posteriors
  ad::Var encoder_final;             // FiLM-adapted final states
  ad::Var bias_vectors;              // invalid when N = 0
  int dynamic_size = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    init_params(seed);
  }

  Model(ModelConfig cfg, TensorStore params)
      : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
  }

  const ModelConfig& config() const { return cfg_; }
  TensorStore& params() { return params_; }
  const TensorStore& params() const { return params_; }

  BoundParams bind(ad::Graph& g) const {
    BoundParams b;
    for (const auto& [name, m] : params_.tensors()) b.vars.emplace(name, g.leaf(m));
    return b;
  }

  // ---- spec operations -----------------------------------------------------

  // Z = X W, one frame per row; W is D x D_enc.
  static ad::Var project_features(ad::Var frames, ad::Var w) {
    CALM_CHECK_CONFIG(frames.cols() == w.rows(),
                      "project_features: feature dim " << frames.cols()
                          << " vs projection rows " << w.rows());
    return ad::matmul(frames, w);
  }

  // Mean+std pooling over frames (permutation invariant), then an affine map
  // to D_emb. Population std, zero for a single frame.
  static Vector pool_enrollment(const FeatureSequence& enrollment) {
    enrollment.validate();
    const Matrix& x = enrollment.frames;
    const Eigen::Index T = x.rows(), D = x.cols();
    // summation over sorted values: bitwise invariant to frame permutation
    Vector pooled(2 * D);
    std::vector<double> col(static_cast<std::size_t>(T));
    for (Eigen::Index d = 0; d < D; ++d) {
      for (Eigen::Index t = 0; t < T; ++t) col[t] = x(t, d);
      std::sort(col.begin(), col.end());
      double sum = 0.0;
      for (double v : col) sum += v;
      double mean = sum / static_cast<double>(T);
      for (Eigen::Index t = 0; t < T; ++t) col[t] = (x(t, d) - mean) * (x(t, d) - mean);
      std::sort(col.begin(), col.end());
      double sq = 0.0;
      for (double v : col) sq += v;
      pooled(d) = mean;
      pooled(D + d) = std::sqrt(std::max(0.0, sq / static_cast<double>(T)));
    }
    return pooled;
  }

  ad::Var speaker_encode(ad::Graph& g, const BoundParams& p,
                         const FeatureSequence& enrollment) const {
    CALM_CHECK_CONFIG(enrollment.dim() == cfg_.input_dim,
                      "speaker_encode: enrollment dim mismatch");
    Vector pooled = pool_enrollment(enrollment);
    ad::Var pv = g.constant(pooled.transpose());  // 1 x 2D
    return ad::add_row(ad::matmul(pv, p.at("spk/w")), p.at("spk/b"));
  }

  // gamma(E_s), beta(E_s): two affine maps D_emb -> D_enc.
  static std::pair<ad::Var, ad::Var> film_params(const BoundParams& p, ad::Var es) {
    ad::Var gamma = ad::add_row(ad::matmul(es, p.at("film/gamma_w")), p.at("film/gamma_b"));
    ad::Var beta = ad::add_row(ad::matmul(es, p.at("film/beta_w")), p.at("film/beta_b"));
    return {gamma, beta};
  }

  // H_hat = gamma .* H + beta, broadcast per frame.
  static ad::Var film_modulate(ad::Var h, ad::Var gamma, ad::Var beta) {
    CALM_CHECK_CONFIG(gamma.cols() == h.cols() && beta.cols() == h.cols(),
                      "film_modulate: dimension mismatch");
    return ad::add_row(ad::mul_row(h, gamma), beta);
  }

  // V = mixer(mean of token embeddings per phrase); N = 0 gives an empty Var.
  ad::Var encode_bias_list(ad::Graph& g, const BoundParams& p,
                           const BiasList& bias) const {
    bias.validate();
    const int n = bias.size();
    if (n == 0) return ad::Var();
    std::vector<int> flat;
    Matrix averaging = Matrix::Zero(n, 0);
    for (const auto& phrase : bias.phrases)
      for (int tok : phrase) {
        CALM_CHECK(tok >= 0 && tok < cfg_.static_size,
                   "encode_bias_list: token " << tok << " outside static vocabulary");
        flat.push_back(tok);
      }
    averaging = Matrix::Zero(n, static_cast<int>(flat.size()));
    int col = 0;
    for (int i = 0; i < n; ++i) {
      int len = static_cast<int>(bias.phrases[i].size());
      for (int j = 0; j < len; ++j) averaging(i, col++) = 1.0 / len;
    }
    ad::Var tokens = ad::gather_rows(p.at("bias/emb"), flat);
    ad::Var means = ad::matmul(g.constant(averaging), tokens);
    return ad::add_row(ad::matmul(means, p.at("bias/mixer_w")), p.at("bias/mixer_b"));
  }

  // Joint static/dynamic softmax; dynamic scores carry the 1/sqrt(D_bias)
  // scale and a ln(mu) offset. mu = 1 reproduces the training distribution.
  ad::Var output_head(ad::Var h, ad::Var v, const BoundParams& p, double mu) const {
    CALM_CHECK_CONFIG(mu > 0.0 && mu <= 1.0, "output_head: mu must be in (0, 1]");
    ad::Var stat = ad::add_row(ad::matmul(h, p.at("head/w_stat")), p.at("head/b_stat"));
    if (!v.valid() || v.rows() == 0) return ad::row_softmax(stat);
    ad::Var q = ad::matmul(h, p.at("head/w_q"));
    ad::Var keys = ad::matmul(v, p.at("head/w_b"));
    ad::Var dyn = ad::scale(ad::matmul(q, ad::transpose(keys)),
                            1.0 / std::sqrt(static_cast<double>(cfg_.d_bias)));
    dyn = ad::add_const(dyn, std::log(mu));
    return ad::row_softmax(ad::concat_cols(stat, dyn));
  }

  ad::Var vad_head(ad::Var h, const BoundParams& p) const {
    return ad::sigmoid_(ad::add_row(ad::matmul(h, p.at("vad/w")), p.at("vad/b")));
  }

  // Mean pooling over blocks of subsample_factor frames, once before layer 1.
  ad::Var subsample(ad::Graph& g, ad::Var z) const {
    const int T = static_cast<int>(z.rows());
    const int s = cfg_.subsample_factor;
    if (s == 1) return z;
    const int T_enc = cfg_.subsampled_length(T);
    Matrix pool = Matrix::Zero(T_enc, T);
    for (int i = 0; i < T_enc; ++i) {
      int lo = i * s, hi = std::min(T, (i + 1) * s);
      for (int t = lo; t < hi; ++t) pool(i, t) = 1.0 / (hi - lo);
    }
    return ad::matmul(g.constant(pool), z);
  }

  // One residual block: x + tanh(x W + b).
  static ad::Var encoder_block(ad::Var x, ad::Var w, ad::Var b) {
    return ad::add(x, ad::tanh_(ad::add_row(ad::matmul(x, w), b)));
  }

  // Self-conditioning feature re-injected after a tap:
  // O_stat W_sc_stat + (O_dyn V) W_sc_dyn.
  ad::Var conditioning_feature(ad::Var grid, ad::Var v, const BoundParams& p) const {
    const int m = cfg_.static_size;
    ad::Var feat = ad::matmul(ad::cols(grid, 0, m), p.at("selfcond/w_stat"));
    const Eigen::Index n = grid.cols() - m;
    if (n > 0) {
      CALM_CHECK(v.valid() && v.rows() == n, "conditioning_feature: grid/V mismatch");
      feat = ad::add(feat, ad::matmul(ad::matmul(ad::cols(grid, m, n), v),
                                      p.at("selfcond/w_dyn")));
    }
    return feat;
  }

  // Encoder stack without speaker adaptation; optional external per-tap
  // conditioning grids, scaled by `weight`. Returns one state matrix per
  // layer. Used directly by tests; the integrated pass is forward().
  std::vector<ad::Var> encode(ad::Graph& g, const BoundParams& p, ad::Var projected,
                              const std::map<int, PosteriorGrid>& conditioning = {},
                              double weight = 1.0,
                              const Matrix* bias_vectors = nullptr) const {
    ad::Var x = subsample(g, projected);
    std::vector<ad::Var> states;
    auto taps = cfg_.taps();
    for (int l = 1; l <= cfg_.L; ++l) {
      ad::Var h = encoder_block(x, p.at(layer_name(l, "w")), p.at(layer_name(l, "b")));
      states.push_back(h);
      x = h;
      auto it = conditioning.find(l);
      if (it != conditioning.end()) {
        CALM_CHECK(std::find(taps.begin(), taps.end(), l) != taps.end(),
                   "encode: conditioning grid at non-tap layer " << l);
        const PosteriorGrid& grid = it->second;
        CALM_CHECK(grid.num_frames() == h.rows(), "encode: conditioning length mismatch");
        grid.validate();
        ad::Var gv = g.constant(grid.probs);
        ad::Var v = (grid.dynamic_size > 0 && bias_vectors != nullptr)
                        ? g.constant(*bias_vectors)
                        : ad::Var();
        x = ad::add(h, ad::scale(conditioning_feature(gv, v, p), weight));
      }
    }
    return states;
  }

  // One autoregressive decoder step. The prefix starts with kDecoderStart and
  // may contain extended-vocabulary tokens; returns a row-stochastic 1x(M+N)
  // distribution (blank doubles as the end symbol).
  ad::Var decoder_step(ad::Graph& g, const BoundParams& p,
                       const std::vector<int>& prefix, ad::Var enc_final,
                       ad::Var v) const {
    CALM_CHECK(!prefix.empty(), "decoder_step: empty prefix");
    const int n = v.valid() ? static_cast<int>(v.rows()) : 0;
    const int m = cfg_.static_size;
    ad::Var q;
    for (int tok : prefix) {
      ad::Var e;
      if (tok == kDecoderStart) {
        e = p.at("dec/start");
      } else if (tok >= 0 && tok < m) {
        e = ad::gather_rows(p.at("dec/emb"), {tok});
      } else if (tok >= m && tok < m + n) {
        e = ad::matmul(ad::gather_rows(v, {tok - m}), p.at("dec/w_dyn_emb"));
      } else {
        throw Error("decoder_step: prefix token " + std::to_string(tok) +
                    " outside extended vocabulary");
      }
      q = q.valid() ? ad::add(q, e) : e;
    }
    q = ad::scale(q, 1.0 / static_cast<double>(prefix.size()));

    for (int l = 1; l <= cfg_.decoder_layers; ++l) {
      auto name = [l](const char* s) { return "dec/l" + std::to_string(l) + "/" + s; };
      ad::Var qk = ad::matmul(q, p.at(name("w_q")));
      ad::Var keys = ad::matmul(enc_final, p.at(name("w_k")));
      ad::Var att = ad::row_softmax(ad::scale(
          ad::matmul(qk, ad::transpose(keys)),
          1.0 / std::sqrt(static_cast<double>(cfg_.d_dec))));
      ad::Var ctx = ad::matmul(att, ad::matmul(enc_final, p.at(name("w_v"))));
      q = ad::add(q, ctx);
      q = ad::add(q, ad::tanh_(ad::add_row(ad::matmul(q, p.at(name("ffn_w"))),
                                           p.at(name("ffn_b")))));
    }

    ad::Var stat = ad::add_row(ad::matmul(q, p.at("dec/w_out")), p.at("dec/b_out"));
    if (n == 0) return ad::row_softmax(stat);
    ad::Var dyn = ad::scale(
        ad::matmul(ad::matmul(q, p.at("dec/w_zq")),
                   ad::transpose(ad::matmul(v, p.at("dec/w_zb")))),
        1.0 / std::sqrt(static_cast<double>(cfg_.d_bias)));
    return ad::row_softmax(ad::concat_cols(stat, dyn));
  }

  // Integrated pass: projection, subsampling, FiLM at taps and at layer L,
  // per-tap output grids fed back into the stack, final grid (with mu), VAD.
  ForwardResult forward(ad::Graph& g, const BoundParams& p,
                        const FeatureSequence& features,
                        const FeatureSequence& enrollment, const BiasList& bias,
                        double mu = 1.0) const {
    features.validate();
    ad::Var x = project_features(g.constant(features.frames), p.at("proj/w"));
    x = subsample(g, x);

    ad::Var es = speaker_encode(g, p, enrollment);
    auto [gamma, beta] = film_params(p, es);
    ad::Var v = encode_bias_list(g, p, bias);

    ForwardResult out;
    out.dynamic_size = bias.size();
    out.bias_vectors = v;

    auto taps = cfg_.taps();
    for (int l = 1; l <= cfg_.L; ++l) {
      ad::Var h = encoder_block(x, p.at(layer_name(l, "w")), p.at(layer_name(l, "b")));
      bool tap = std::find(taps.begin(), taps.end(), l) != taps.end();
      if (tap || l == cfg_.L) h = film_modulate(h, gamma, beta);
      x = h;
      if (tap) {
        ad::Var grid = output_head(h, v, p, 1.0);
        out.tap_grids.emplace(l, grid);
        x = ad::add(h, ad::scale(conditioning_feature(grid, v, p),
                                 cfg_.self_cond_weight));
      }
    }
    out.encoder_final = x;  // = FiLM-adapted layer-L states (taps are < L)
    out.final_grid = output_head(out.encoder_final, v, p, mu);
    out.vad = vad_head(out.encoder_final, p);
    return out;
  }

  // Inference convenience: grids and VAD as plain values.
  std::pair<PosteriorGrid, VadTrack> infer(const FeatureSequence& features,
                                           const FeatureSequence& enrollment,
                                           const BiasList& bias, double mu) const {
    ad::Graph g;
    BoundParams p = bind_const(g);
    ForwardResult r = forward(g, p, features, enrollment, bias, mu);
    PosteriorGrid grid{r.final_grid.value(), cfg_.static_size, bias.size()};
    VadTrack vad{r.vad.value().col(0)};
    return {grid, vad};
  }

  // Constant binding (no gradients tracked), for inference.
  BoundParams bind_const(ad::Graph& g) const {
    BoundParams b;
    for (const auto& [name, m] : params_.tensors()) b.vars.emplace(name, g.constant(m));
    return b;
  }

  static std::string layer_name(int l, const char* suffix) {
    return "enc/l" + std::to_string(l) + "/" + suffix;
  }

 private:
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto normal = [&rng](int rows, int cols, double scale) {
      std::normal_distribution<double> d(0.0, scale);
      Matrix m(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = d(rng);
      return m;
    };
    auto glorot = [&normal](int rows, int cols) {
      return normal(rows, cols, std::sqrt(1.0 / rows));
    };
    const int d = cfg_.input_dim, de = cfg_.d_enc, dm = cfg_.d_emb,
              db = cfg_.d_bias, dd = cfg_.d_dec, m = cfg_.static_size;

    params_.put("proj/w", glorot(d, de));
    params_.put("spk/w", glorot(2 * d, dm));
    params_.put("spk/b", Matrix::Zero(1, dm));
    // FiLM starts as the identity modulation
    params_.put("film/gamma_w", Matrix::Zero(dm, de));
    params_.put("film/gamma_b", Matrix::Ones(1, de));
    params_.put("film/beta_w", Matrix::Zero(dm, de));
    params_.put("film/beta_b", Matrix::Zero(1, de));
    for (int l = 1; l <= cfg_.L; ++l) {
      params_.put(layer_name(l, "w"), glorot(de, de));
      params_.put(layer_name(l, "b"), Matrix::Zero(1, de));
    }
    params_.put("bias/emb", normal(m, db, 1.0 / std::sqrt(db)));
    params_.put("bias/mixer_w", Matrix::Identity(db, db));
    params_.put("bias/mixer_b", Matrix::Zero(1, db));
    params_.put("head/w_stat", glorot(de, m));
    params_.put("head/b_stat", Matrix::Zero(1, m));
    params_.put("head/w_q", glorot(de, db));
    params_.put("head/w_b", glorot(db, db));
    params_.put("selfcond/w_stat", glorot(m, de));
    params_.put("selfcond/w_dyn", glorot(db, de));
    params_.put("vad/w", glorot(de, 1));
    params_.put("vad/b", Matrix::Zero(1, 1));
    params_.put("dec/emb", normal(m, dd, 1.0 / std::sqrt(dd)));
    params_.put("dec/start", normal(1, dd, 1.0 / std::sqrt(dd)));
    params_.put("dec/w_dyn_emb", glorot(db, dd));
    for (int l = 1; l <= cfg_.decoder_layers; ++l) {
      auto name = [l](const char* s) { return "dec/l" + std::to_string(l) + "/" + s; };
      params_.put(name("w_q"), glorot(dd, dd));
      params_.put(name("w_k"), glorot(de, dd));
      params_.put(name("w_v"), glorot(de, dd));
      params_.put(name("ffn_w"), glorot(dd, dd));
      params_.put(name("ffn_b"), Matrix::Zero(1, dd));
    }
    params_.put("dec/w_out", glorot(dd, m));
    params_.put("dec/b_out", Matrix::Zero(1, m));
    params_.put("dec/w_zq", glorot(dd, db));
    params_.put("dec/w_zb", glorot(db, db));
  }

  ModelConfig cfg_;
  TensorStore params_;
};

}  // namespace calm

#endif  // CALM_MODEL_HPP
