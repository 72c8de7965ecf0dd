// Copyright 2026 CALM Authors
// Licensed under the Apache License, Version 2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "calm/model.hpp"
#include "helpers.hpp"

using namespace calm;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.L = 4;
  cfg.input_dim = 6;
  cfg.d_enc = 6;
  cfg.d_emb = 4;
  cfg.d_bias = 5;
  cfg.d_dec = 5;
  cfg.static_size = 4;
  cfg.subsample_factor = 2;
  return cfg;
}

FeatureSequence random_features(std::mt19937_64& rng, int T, int D) {
  return FeatureSequence{testutil::random_matrix(rng, T, D), 0.01};
}

}  // namespace

TEST_CASE("project_features: identity, zero and hand-computed product") {
  ad::Graph g;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;

  ad::Var id = g.constant(Matrix::Identity(3, 3));
  REQUIRE(Model::project_features(g.constant(x), id).value() == x);

  ad::Var zero = g.constant(Matrix::Zero(3, 2));
  REQUIRE(Model::project_features(g.constant(x), zero).value().isZero());

  Matrix w(3, 2);
  w << 0.5, -1.0, 2.0, 0.25, -0.5, 1.5;
  Matrix expect = x * w;  // independent matrix-multiply oracle
  REQUIRE((Model::project_features(g.constant(x), g.constant(w)).value() - expect)
              .norm() == 0.0);

  REQUIRE_THROWS_AS(
      Model::project_features(g.constant(x), g.constant(Matrix::Zero(4, 2))),
      ConfigError);
}

TEST_CASE("speaker_encode: deterministic, permutation invariant, pooling values") {
  std::mt19937_64 rng(5);
  auto cfg = small_config();
  Model model(cfg, 1);
  FeatureSequence clip = random_features(rng, 5, cfg.input_dim);

  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix e1 = model.speaker_encode(g, p, clip).value();
  Matrix e2 = model.speaker_encode(g, p, clip).value();
  REQUIRE(e1 == e2);

  FeatureSequence permuted = clip;
  permuted.frames.row(0).swap(permuted.frames.row(3));
  permuted.frames.row(1).swap(permuted.frames.row(4));
  REQUIRE(model.speaker_encode(g, p, permuted).value() == e1);

  FeatureSequence empty{Matrix(0, cfg.input_dim), 0.01};
  REQUIRE_THROWS_AS(model.speaker_encode(g, p, empty), Error);
}

TEST_CASE("speaker_encode with identity projection exposes mean and std") {
  ModelConfig cfg = small_config();
  cfg.input_dim = 2;
  cfg.d_emb = 4;  // = 2 * input_dim so the projection can be the identity
  Model model(cfg, 1);
  model.params().at("spk/w") = Matrix::Identity(4, 4);
  model.params().at("spk/b") = Matrix::Zero(1, 4);

  Matrix frames(2, 2);
  frames << 1.0, 4.0, 3.0, 8.0;
  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix e = model.speaker_encode(g, p, {frames, 0.01}).value();
  // mean = (2, 6), population std = (1, 2)
  REQUIRE(e(0, 0) == Catch::Approx(2.0));
  REQUIRE(e(0, 1) == Catch::Approx(6.0));
  REQUIRE(e(0, 2) == Catch::Approx(1.0));
  REQUIRE(e(0, 3) == Catch::Approx(2.0));
}

TEST_CASE("film_modulate: identity, zero input, hand values") {
  ad::Graph g;
  Matrix h(2, 2);
  h << 1, 2, 3, 4;
  ad::Var hv = g.constant(h);

  ad::Var ones = g.constant(Matrix::Ones(1, 2));
  ad::Var zeros = g.constant(Matrix::Zero(1, 2));
  REQUIRE(Model::film_modulate(hv, ones, zeros).value() == h);

  Matrix beta(1, 2);
  beta << 0.5, -0.5;
  Matrix zero_h = Matrix::Zero(3, 2);
  Matrix modulated =
      Model::film_modulate(g.constant(zero_h), ones, g.constant(beta)).value();
  for (int r = 0; r < 3; ++r) REQUIRE(modulated.row(r) == beta.row(0));

  Matrix gamma(1, 2);
  gamma << 2.0, 0.5;
  Matrix b2(1, 2);
  b2 << 1.0, -1.0;
  Matrix expect(2, 2);
  expect << 3, 0, 7, 1;
  REQUIRE(Model::film_modulate(hv, g.constant(gamma), g.constant(b2)).value() ==
          expect);
}

TEST_CASE("encode_bias_list: empty, singleton, mean of two, OOV") {
  auto cfg = small_config();
  Model model(cfg, 2);
  // identity mixer so rows are raw means
  model.params().at("bias/mixer_w") = Matrix::Identity(cfg.d_bias, cfg.d_bias);
  model.params().at("bias/mixer_b") = Matrix::Zero(1, cfg.d_bias);
  const Matrix& emb = model.params().at("bias/emb");

  ad::Graph g;
  auto p = model.bind_const(g);

  REQUIRE_FALSE(model.encode_bias_list(g, p, BiasList{}).valid());

  BiasList one{{{2}}};
  Matrix v1 = model.encode_bias_list(g, p, one).value();
  REQUIRE((v1.row(0) - emb.row(2)).norm() < 1e-15);

  BiasList two{{{1, 3}}};
  Matrix v2 = model.encode_bias_list(g, p, two).value();
  REQUIRE((v2.row(0) - 0.5 * (emb.row(1) + emb.row(3))).norm() < 1e-15);

  BiasList oov{{{cfg.static_size}}};
  REQUIRE_THROWS_AS(model.encode_bias_list(g, p, oov), Error);

  BiasList dup{{{1}, {1}}};
  REQUIRE_THROWS_AS(model.encode_bias_list(g, p, dup), Error);
}

TEST_CASE("output_head: degenerate concat, symmetry, ln(mu) offset") {
  ModelConfig cfg = small_config();
  cfg.static_size = 2;
  cfg.d_bias = 3;
  Model model(cfg, 3);
  // zero all head scores
  model.params().at("head/w_stat").setZero();
  model.params().at("head/b_stat").setZero();
  model.params().at("head/w_q").setZero();

  ad::Graph g;
  auto p = model.bind_const(g);
  ad::Var h = g.constant(Matrix::Zero(1, cfg.d_enc));
  ad::Var v = g.constant(Matrix::Ones(1, cfg.d_bias));

  Matrix uniform = model.output_head(h, v, p, 1.0).value();
  for (int k = 0; k < 3; ++k)
    REQUIRE(uniform(0, k) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));

  Matrix weighted = model.output_head(h, v, p, 0.5).value();
  REQUIRE(weighted(0, 0) == Catch::Approx(0.4).epsilon(1e-12));
  REQUIRE(weighted(0, 1) == Catch::Approx(0.4).epsilon(1e-12));
  REQUIRE(weighted(0, 2) == Catch::Approx(0.2).epsilon(1e-12));

  REQUIRE_THROWS_AS(model.output_head(h, v, p, 0.0), ConfigError);
  REQUIRE_THROWS_AS(model.output_head(h, v, p, 1.5), ConfigError);
}

TEST_CASE("output_head with N=0 equals the static-only softmax") {
  std::mt19937_64 rng(17);
  auto cfg = small_config();
  Model model(cfg, 4);
  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix h0 = testutil::random_matrix(rng, 5, cfg.d_enc);
  Matrix grid = model.output_head(g.constant(h0), ad::Var(), p, 0.7).value();

  Matrix scores = (h0 * model.params().at("head/w_stat")).rowwise() +
                  model.params().at("head/b_stat").row(0);
  for (int t = 0; t < 5; ++t) {
    Eigen::RowVectorXd e = (scores.row(t).array() - scores.row(t).maxCoeff()).exp();
    e /= e.sum();
    REQUIRE((grid.row(t) - e).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("posterior rows sum to 1 for N in {0, 1, 50, 200}") {
  std::mt19937_64 rng(23);
  auto cfg = small_config();
  Model model(cfg, 5);
  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix h0 = testutil::random_matrix(rng, 7, cfg.d_enc);
  for (int n : {0, 1, 50, 200}) {
    ad::Var v = n == 0 ? ad::Var()
                       : g.constant(testutil::random_matrix(rng, n, cfg.d_bias));
    PosteriorGrid grid{model.output_head(g.constant(h0), v, p, 0.3).value(),
                       cfg.static_size, n};
    grid.validate(1e-6);
  }
}

TEST_CASE("dynamic probability mass is monotone non-decreasing in mu") {
  std::mt19937_64 rng(29);
  auto cfg = small_config();
  Model model(cfg, 6);
  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix h0 = testutil::random_matrix(rng, 4, cfg.d_enc);
  ad::Var v = g.constant(testutil::random_matrix(rng, 6, cfg.d_bias));
  double prev = -1.0;
  for (double mu : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    Matrix grid = model.output_head(g.constant(h0), v, p, mu).value();
    double mass = grid.rightCols(6).sum();
    REQUIRE(mass >= prev);
    prev = mass;
  }
}

TEST_CASE("vad_head: 0.5 at zero weights, saturation, hand sigmoid") {
  ModelConfig cfg = small_config();
  cfg.d_enc = 2;
  cfg.input_dim = 2;
  Model model(cfg, 7);
  ad::Graph g;

  model.params().at("vad/w").setZero();
  model.params().at("vad/b").setZero();
  auto p0 = model.bind_const(g);
  Matrix h = testutil::random_matrix(*(new std::mt19937_64(1)), 4, 2);
  Matrix vad = model.vad_head(g.constant(h), p0).value();
  for (int t = 0; t < 4; ++t) REQUIRE(vad(t, 0) == Catch::Approx(0.5).epsilon(1e-12));

  model.params().at("vad/b")(0, 0) = 20.0;
  auto p1 = model.bind_const(g);
  Matrix sat = model.vad_head(g.constant(Matrix::Zero(3, 2)), p1).value();
  for (int t = 0; t < 3; ++t) REQUIRE(sat(t, 0) > 1.0 - 1e-8);

  model.params().at("vad/w") = Matrix::Ones(2, 1);
  model.params().at("vad/b").setZero();
  auto p2 = model.bind_const(g);
  Matrix one_frame(1, 2);
  one_frame << 0.5, 0.5;
  REQUIRE(model.vad_head(g.constant(one_frame), p2).value()(0, 0) ==
          Catch::Approx(0.7310585786300049).epsilon(1e-9));
}

TEST_CASE("encode: zero conditioning weight is bitwise-identical to none") {
  std::mt19937_64 rng(31);
  auto cfg = small_config();
  Model model(cfg, 8);
  FeatureSequence feats = random_features(rng, 9, cfg.input_dim);

  ad::Graph g;
  auto p = model.bind_const(g);
  ad::Var z = Model::project_features(g.constant(feats.frames), p.at("proj/w"));

  auto plain = model.encode(g, p, z);

  int tap = cfg.taps().front();
  int t_enc = cfg.subsampled_length(9);
  PosteriorGrid cond{testutil::random_grid(rng, t_enc, cfg.static_size),
                     cfg.static_size, 0};
  auto off = model.encode(g, p, z, {{tap, cond}}, 0.0);
  auto on = model.encode(g, p, z, {{tap, cond}}, 1.0);

  for (int l = 0; l < cfg.L; ++l) REQUIRE(plain[l].value() == off[l].value());
  REQUIRE(plain.back().value() != on.back().value());
}

TEST_CASE("encode: zero block weights pass the subsampled input through") {
  std::mt19937_64 rng(37);
  ModelConfig cfg = small_config();
  cfg.L = 1;
  cfg.tap_layers = {};
  Model model(cfg, 9);
  model.params().at(Model::layer_name(1, "w")).setZero();
  model.params().at(Model::layer_name(1, "b")).setZero();

  FeatureSequence feats = random_features(rng, 8, cfg.input_dim);
  ad::Graph g;
  auto p = model.bind_const(g);
  ad::Var z = g.constant(feats.frames);
  auto states = model.encode(g, p, z);
  // subsample factor 2: rows are means of frame pairs
  REQUIRE(states[0].rows() == 4);
  for (int i = 0; i < 4; ++i) {
    Eigen::RowVectorXd mean =
        0.5 * (feats.frames.row(2 * i) + feats.frames.row(2 * i + 1));
    REQUIRE((states[0].value().row(i) - mean).norm() < 1e-15);
  }
}

TEST_CASE("encode: two-layer forward matches an independent trace") {
  std::mt19937_64 rng(41);
  ModelConfig cfg = small_config();
  cfg.L = 2;
  cfg.tap_layers = {1};
  cfg.subsample_factor = 1;
  Model model(cfg, 10);
  FeatureSequence feats = random_features(rng, 3, cfg.input_dim);

  ad::Graph g;
  auto p = model.bind_const(g);
  auto states = model.encode(g, p, g.constant(feats.frames));

  // independent forward-pass oracle
  const auto& P = model.params();
  Matrix x = feats.frames;
  Matrix h1 = x + ((x * P.at(Model::layer_name(1, "w"))).rowwise() +
                   P.at(Model::layer_name(1, "b")).row(0))
                      .array()
                      .tanh()
                      .matrix();
  Matrix h2 = h1 + ((h1 * P.at(Model::layer_name(2, "w"))).rowwise() +
                    P.at(Model::layer_name(2, "b")).row(0))
                       .array()
                       .tanh()
                       .matrix();
  REQUIRE((states[0].value() - h1).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((states[1].value() - h2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("decoder_step: uniform at zero output projection, deterministic") {
  std::mt19937_64 rng(43);
  auto cfg = small_config();
  Model model(cfg, 11);
  ad::Graph g;

  FeatureSequence feats = random_features(rng, 6, cfg.input_dim);
  Matrix enc = testutil::random_matrix(rng, 3, cfg.d_enc);
  Matrix vm = testutil::random_matrix(rng, 2, cfg.d_bias);

  model.params().at("dec/w_out").setZero();
  model.params().at("dec/b_out").setZero();
  model.params().at("dec/w_zq").setZero();
  auto p = model.bind_const(g);
  int mn = cfg.static_size + 2;
  Matrix row = model
                   .decoder_step(g, p, {kDecoderStart}, g.constant(enc),
                                 g.constant(vm))
                   .value();
  for (int k = 0; k < mn; ++k)
    REQUIRE(row(0, k) == Catch::Approx(1.0 / mn).epsilon(1e-12));

  Model model2(cfg, 12);
  auto p2 = model2.bind_const(g);
  std::vector<int> prefix = {kDecoderStart, 1, cfg.static_size};
  Matrix r1 = model2.decoder_step(g, p2, prefix, g.constant(enc), g.constant(vm)).value();
  Matrix r2 = model2.decoder_step(g, p2, prefix, g.constant(enc), g.constant(vm)).value();
  REQUIRE(r1 == r2);
  REQUIRE(std::abs(r1.sum() - 1.0) < 1e-12);

  REQUIRE_THROWS_AS(
      model2.decoder_step(g, p2, {kDecoderStart, mn}, g.constant(enc), g.constant(vm)),
      Error);
}

TEST_CASE("decoder_step: single-block toy decoder matches a hand trace") {
  ModelConfig cfg = small_config();
  cfg.decoder_layers = 1;
  Model model(cfg, 13);
  std::mt19937_64 rng(47);
  Matrix enc = testutil::random_matrix(rng, 2, cfg.d_enc);

  ad::Graph g;
  auto p = model.bind_const(g);
  Matrix row = model.decoder_step(g, p, {kDecoderStart}, g.constant(enc), ad::Var())
                   .value();

  // independent trace with plain Eigen
  const auto& P = model.params();
  Eigen::RowVectorXd q = P.at("dec/start").row(0);
  Eigen::RowVectorXd qk = q * P.at("dec/l1/w_q");
  Matrix keys = enc * P.at("dec/l1/w_k");
  Eigen::RowVectorXd scores = qk * keys.transpose() / std::sqrt(double(cfg.d_dec));
  Eigen::RowVectorXd att = (scores.array() - scores.maxCoeff()).exp();
  att /= att.sum();
  Eigen::RowVectorXd ctx = att * (enc * P.at("dec/l1/w_v"));
  q = q + ctx;
  q = q + (q * P.at("dec/l1/ffn_w") + P.at("dec/l1/ffn_b")).array().tanh().matrix();
  Eigen::RowVectorXd out = q * P.at("dec/w_out") + P.at("dec/b_out");
  Eigen::RowVectorXd soft = (out.array() - out.maxCoeff()).exp();
  soft /= soft.sum();
  REQUIRE((row.row(0) - soft).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("integrated forward: FiLM identity and valid grids end to end") {
  std::mt19937_64 rng(53);
  auto cfg = small_config();
  Model model(cfg, 14);
  FeatureSequence feats = random_features(rng, 10, cfg.input_dim);
  FeatureSequence enroll = random_features(rng, 4, cfg.input_dim);
  BiasList bias{{{1}, {2, 3}}};

  auto [grid, vad] = model.infer(feats, enroll, bias, 0.1);
  grid.validate(1e-6);
  REQUIRE(grid.dynamic_size == 2);
  REQUIRE(vad.posteriors.size() == cfg.subsampled_length(10));
  REQUIRE((vad.posteriors.array() > 0.0).all());
  REQUIRE((vad.posteriors.array() < 1.0).all());
}

TEST_CASE("config validation rejects bad tap layers and vocab") {
  ModelConfig cfg = small_config();
  cfg.tap_layers = {4};  // == L
  REQUIRE_THROWS_AS(Model(cfg, 1), ConfigError);
  cfg = small_config();
  cfg.static_size = 1;
  REQUIRE_THROWS_AS(Model(cfg, 1), ConfigError);
}

TEST_CASE("default taps mirror the quarter points") {
  REQUIRE(ModelConfig::default_taps(12) == std::vector<int>{3, 6, 9});
  REQUIRE(ModelConfig::default_taps(4) == std::vector<int>{1, 2, 3});
}
