#include <cmath>
#include <cstring>

#include "doctest.h"
#include "difflab/checkpoint.hpp"
#include "difflab/errors.hpp"
#include "difflab/model.hpp"
#include "difflab/predictor.hpp"
#include "test_util.hpp"

using namespace difflab;
using difflab::testing::random_tensor;

TEST_SUITE("model") {

TEST_CASE("time embedding") {
  const auto e0 = embed_time(0, 32, 100);
  double n2 = 0;
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(e0[k] == 0.0);
    CHECK(e0[16 + k] == 1.0);
  }
  for (double v : e0) n2 += v * v;
  CHECK(std::sqrt(n2) == doctest::Approx(std::sqrt(16.0)));

  std::vector<std::vector<double>> all;
  for (int t = 1; t <= 100; ++t) all.push_back(embed_time(t, 32, 100));
  double min_d = 1e300;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < 32; ++k) d += (all[i][k] - all[j][k]) * (all[i][k] - all[j][k]);
      min_d = std::min(min_d, std::sqrt(d));
    }
  }
  CHECK(min_d > 0.0);
}

TEST_CASE("zero output layers give zero predictions") {
  ModelConfig cfg;
  cfg.heads = {PredictionType::D, PredictionType::V, PredictionType::A};
  cfg.hidden = {16, 16};
  RngStream init = Rng(1).stream("init");
  const DenoiserModel m(cfg, init, true);
  RngStream rng = Rng(2).stream("x");
  const Tensor x = random_tensor(rng, {5, 2}, 3.0);
  const std::vector<int> ts{1, 10, 100, 500, 1000};
  const auto out = m.predict(x, ts);
  for (PredictionType p : kAllPredictionTypes) {
    REQUIRE(out[code(p)]);
    for (double v : out[code(p)]->data()) CHECK(v == 0.0);
  }
}

TEST_CASE("identical rows give identical outputs") {
  ModelConfig cfg;
  cfg.hidden = {32, 32};
  RngStream init = Rng(3).stream("init");
  const DenoiserModel m(cfg, init);
  const Tensor x = Tensor::from_rows({{0.3, -0.2}, {0.3, -0.2}, {0.3, -0.2}});
  const std::vector<int> ts{42, 42, 42};
  const Tensor y = *m.predict(x, ts)[code(PredictionType::A)];
  CHECK(y.at(0, 0) == y.at(1, 0));
  CHECK(y.at(2, 1) == y.at(1, 1));
}

TEST_CASE("full model MSE gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig cfg;
    cfg.hidden = {8, 8};
    cfg.time_embed_dim = 4;
    cfg.T = 50;
    cfg.heads = {PredictionType::D, PredictionType::A};
    RngStream init = Rng(seed).stream("init");
    DenoiserModel m(cfg, init);
    RngStream rng = Rng(seed).stream("batch");
    const Tensor xt = random_tensor(rng, {6, 2});
    const Tensor target = random_tensor(rng, {6, 2});
    std::vector<int> ts(6);
    for (int& t : ts) t = rng.uniform_int(1, 50);
    std::vector<Tensor> params;
    for (const auto& p : m.params()) params.push_back(p.value);
    // Independent graph built from the documented layout: [x_t | embed(t)] → SiLU trunk → heads D, A.
    const ScalarGraphFn g = [&](Tape& tape, std::span<const Var> p) {
      Tensor in = Tensor::matrix(xt.rows(), 2 + cfg.time_embed_dim);
      for (std::size_t i = 0; i < xt.rows(); ++i) {
        in.at(i, 0) = xt.at(i, 0);
        in.at(i, 1) = xt.at(i, 1);
        const auto e = embed_time(ts[i], cfg.time_embed_dim, cfg.T);
        for (std::size_t k = 0; k < e.size(); ++k) in.at(i, 2 + k) = e[k];
      }
      Var h = tape.constant(in);
      std::size_t k = 0;
      for (std::size_t l = 0; l < cfg.hidden.size(); ++l, k += 2) h = silu(add_row(matmul(h, p[k]), p[k + 1]));
      Var loss = mse(add_row(matmul(h, p[k]), p[k + 1]), tape.constant(target));
      return add(loss, mse(add_row(matmul(h, p[k + 2]), p[k + 3]), tape.constant(target)));
    };
    CHECK(grad_check(g, params, 1e-6) < 1e-4);

    // The model's own forward pass agrees with the hand-built graph.
    Tape tape;
    const ForwardResult r = m.forward(tape, xt, ts);
    Var loss = add(mse(*r.heads[code(PredictionType::D)], tape.constant(target)),
                   mse(*r.heads[code(PredictionType::A)], tape.constant(target)));
    tape.backward(loss);
    Tape ref;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(ref.param(p));
    Var ref_loss = g(ref, vars);
    CHECK(tape.value(loss)[0] == doctest::Approx(ref.value(ref_loss)[0]).epsilon(1e-12));
    ref.backward(ref_loss);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      CHECK(difflab::testing::max_abs_diff(tape.grad(r.params[i]), ref.grad(vars[i])) < 1e-12);
    }
  }
}

TEST_CASE("forward on caller-owned parameters") {
  ModelConfig cfg;
  cfg.hidden = {6};
  cfg.time_embed_dim = 4;
  cfg.T = 30;
  cfg.heads = {PredictionType::V};
  RngStream init = Rng(4).stream("init");
  const DenoiserModel m(cfg, init);
  RngStream rng = Rng(4).stream("batch");
  const Tensor xt = random_tensor(rng, {3, 2});
  const Tensor target = random_tensor(rng, {3, 2});
  const std::vector<int> ts{1, 15, 30};

  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : m.params()) vars.push_back(tape.param(p.value));
  const Var y = *m.forward(tape, xt, ts, vars).heads[code(PredictionType::V)];
  CHECK(y.value() == *m.predict(xt, ts)[code(PredictionType::V)]);

  std::vector<Tensor> params;
  for (const auto& p : m.params()) params.push_back(p.value);
  const ScalarGraphFn f = [&](Tape& t, std::span<const Var> p) {
    return mse(*m.forward(t, xt, ts, p).heads[code(PredictionType::V)], t.constant(target));
  };
  CHECK(grad_check(f, params, 1e-6) < 1e-6);

  vars.pop_back();
  CHECK_THROWS_AS(m.forward(tape, xt, ts, vars), ContractError);
  vars.push_back(tape.param(Tensor({3}, 0.0)));
  CHECK_THROWS_AS(m.forward(tape, xt, ts, vars), ContractError);
}

TEST_CASE("parameter layout and validation") {
  ModelConfig cfg;
  cfg.heads = {PredictionType::A, PredictionType::D};
  RngStream init = Rng(0).stream("init");
  const DenoiserModel m(cfg, init);
  const auto idx = m.head_param_indices(PredictionType::D);
  CHECK(m.params()[idx[0]].name == "head.d.weight");
  CHECK(m.params()[idx[1]].name == "head.d.bias");
  CHECK_THROWS_AS(m.head_param_indices(PredictionType::V), ContractError);

  ModelConfig bad = cfg;
  bad.time_embed_dim = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.heads = {PredictionType::A, PredictionType::A};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_json({{"data_dim", 2}, {"depth", 3}}), ConfigError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  ModelConfig cfg;
  cfg.hidden = {16};
  RngStream init = Rng(8).stream("init");
  const DenoiserModel m(cfg, init);
  Checkpoint c;
  c.header["model"] = cfg.to_json();
  c.blobs = m.params();
  const auto bytes = serialize_checkpoint(c);
  const Checkpoint r = deserialize_checkpoint(bytes);
  REQUIRE(r.blobs.size() == c.blobs.size());
  for (std::size_t i = 0; i < c.blobs.size(); ++i) {
    CHECK(r.blobs[i].name == c.blobs[i].name);
    CHECK(r.blobs[i].value.shape() == c.blobs[i].value.shape());
    CHECK(std::memcmp(r.blobs[i].value.data().data(), c.blobs[i].value.data().data(),
                      c.blobs[i].value.size() * sizeof(double)) == 0);
  }
  CHECK(serialize_checkpoint(r) == bytes);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DLABCKPT");

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), IoError);
  auto corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(corrupt), IoError);
}

}  // TEST_SUITE
