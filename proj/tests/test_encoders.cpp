// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "coral8/encoders.hpp"
#include "coral8/model.hpp"
#include "support.hpp"

using namespace coral8;
using coral8::testing::random_tensor;

namespace {

ModelConfig small(std::size_t hidden = 4) {
  ModelConfig c;
  c.images = 2;
  c.positions = 4;
  c.channels = 3;
  c.embed = 3;
  c.hidden = hidden;
  c.attn = 3;
  c.vocab = 7;
  return c;
}

ParamSet zeroed(ParamSet p) {
  for (auto& [name, t] : p) std::fill(t.storage().begin(), t.storage().end(), 0.0);
  return p;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("flatten_panel layouts") {
  ModelConfig big;
  big.vocab = 5;
  const PanelGrid g = flatten_panel(Tensor({8, 14, 14, 512}, 0.25), big);
  CHECK(g.local.dims() == Shape{8, 196, 512});
  CHECK(g.pooled.dims() == Shape{1, 8 * 512});
  CHECK(g.by_position.dims() == Shape{196, 8 * 512});
  CHECK(g.image_mean.dims() == Shape{196, 512});

  const ModelConfig c = small();
  CHECK_THROWS(flatten_panel(Tensor({3, 4, 3}, 0.0), c));
  CHECK_THROWS(flatten_panel(Tensor({2, 4, 5}, 0.0), c));
  Tensor bad({2, 4, 3}, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS(flatten_panel(bad, c));
}

TEST_CASE("pooled and per-position views") {
  const ModelConfig c = small();
  Rng rng(2);
  const Tensor raw = random_tensor(rng, {2, 4, 3});
  const PanelGrid g = flatten_panel(raw, c);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        s += raw[(n * 4 + i) * 3 + k];
        CHECK(g.by_position.at(i, n * 3 + k) == raw[(n * 4 + i) * 3 + k]);
      }
      CHECK(g.pooled[n * 3 + k] == doctest::Approx(s / 4.0));
    }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(g.image_mean.at(i, k) == doctest::Approx(0.5 * (raw[i * 3 + k] + raw[(4 + i) * 3 + k])));
}

TEST_CASE("F_init closed forms") {
  ModelConfig c = small();
  ParamSet p = zeroed(init_params(c, 1));
  CHECK(encode_images(Tensor({2, 4, 3}, 0.7), p, c).f_init == Tensor({1, 4}, 0.0));

  c.images = 1;
  ParamSet q = init_params(c, 3);
  const PanelFeatures f = encode_images(Tensor({1, 4, 3}, 2.0), q, c);
  CHECK(f.grid.pooled == Tensor({1, 3}, 2.0));
  for (std::size_t h = 0; h < 4; ++h) {
    double want = 0.0;
    for (std::size_t k = 0; k < 3; ++k) want += q.at("img.fc.W").at(h, k) * 2.0;
    CHECK(f.f_init[h] == doctest::Approx(want));
  }
}

TEST_CASE("permuting panel images permutes the local grid") {
  const ModelConfig c = small();
  Rng rng(4);
  const Tensor raw = random_tensor(rng, {2, 4, 3});
  Tensor swapped(raw.dims(), 0.0);
  for (std::size_t i = 0; i < 12; ++i) {
    swapped[i] = raw[12 + i];
    swapped[12 + i] = raw[i];
  }
  const PanelGrid a = flatten_panel(raw, c), b = flatten_panel(swapped, c);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.local[i] == b.local[12 + i]);
    CHECK(a.local[12 + i] == b.local[i]);
  }
  CHECK(a.image_mean == b.image_mean);
}

TEST_CASE("lstm cell fixtures") {
  Tape t;
  const Var w = t.constant(Tensor({8, 3}, 0.0)), u = t.constant(Tensor({8, 2}, 0.0)), b = t.constant(Tensor({1, 8}, 0.0));
  const LstmState zero = lstm_cell(t.constant(Tensor({1, 3}, 1.0)), {t.constant(Tensor({1, 2}, 0.0)), t.constant(Tensor({1, 2}, 0.0))}, w, u, b);
  CHECK(zero.h.value() == Tensor({1, 2}, 0.0));
  CHECK(zero.c.value() == Tensor({1, 2}, 0.0));
  const LstmState two = lstm_cell(t.constant(Tensor({1, 3}, 1.0)), {t.constant(Tensor({1, 2}, 0.0)), t.constant(Tensor({1, 2}, 2.0))}, w, u, b);
  CHECK(two.c.value()[0] == doctest::Approx(1.0));
  CHECK(two.h.value()[0] == doctest::Approx(0.5 * std::tanh(1.0)));
  CHECK(two.h.value()[0] == doctest::Approx(0.380797).epsilon(1e-6));
}

TEST_CASE("bilstm single token matches a hand-unrolled step") {
  const ModelConfig c = small(4);
  const ParamSet p = init_params(c, 11);
  Tape t;
  ParamBinder b(t, p, false);
  Rng rng(6);
  const Tensor x = random_tensor(rng, {1, 3});
  const Tensor j = bilstm_encode(b, t.constant(x)).value();

  // One LSTM step from zero state: c = i * g, h = o * tanh(c); biases are zero.
  auto step = [&](const std::string& dir) {
    const Tensor& W = p.at("prior." + dir + ".W");
    const std::size_t h = W.rows() / 4;
    std::vector<double> out(h);
    for (std::size_t k = 0; k < h; ++k) {
      auto pre = [&](std::size_t gate) {
        double s = 0.0;
        for (std::size_t e = 0; e < 3; ++e) s += W.at(gate * h + k, e) * x[e];
        return s;
      };
      const double cell = sigm(pre(0)) * std::tanh(pre(2));
      out[k] = sigm(pre(3)) * std::tanh(cell);
    }
    return out;
  };
  std::vector<double> both = step("fwd");
  for (double v : step("bwd")) both.push_back(v);
  const Tensor& J = p.at("prior.j.W");
  for (std::size_t r = 0; r < 4; ++r) {
    double want = 0.0;
    for (std::size_t k = 0; k < 4; ++k) want += J.at(r, k) * both[k];
    CHECK(j[r] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("bilstm on a palindrome with mirrored directions") {
  const ModelConfig c = small(4);
  ParamSet p = init_params(c, 5);
  for (const char* leaf : {"W", "U", "b"}) p.at(std::string("prior.bwd.") + leaf) = p.at(std::string("prior.fwd.") + leaf);
  Tensor identity({4, 4}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) identity.at(i, i) = 1.0;
  p.at("prior.j.W") = identity;
  Tape t;
  ParamBinder b(t, p, false);
  Rng rng(1);
  const Tensor a = random_tensor(rng, {1, 3}), m = random_tensor(rng, {1, 3});
  std::vector<double> rows;
  for (const Tensor* r : {&a, &m, &a}) rows.insert(rows.end(), r->values().begin(), r->values().end());
  const Tensor j = bilstm_encode(b, t.constant(Tensor({3, 3}, rows))).value();
  CHECK(j[0] == doctest::Approx(j[2]).epsilon(1e-14));
  CHECK(j[1] == doctest::Approx(j[3]).epsilon(1e-14));
}

TEST_CASE("odd hidden width splits ceil/floor across directions") {
  const ModelConfig c = small(5);
  const ParamSet p = init_params(c, 2);
  CHECK(p.at("prior.fwd.U").dims() == Shape{12, 3});
  CHECK(p.at("prior.bwd.U").dims() == Shape{8, 2});
  Tape t;
  ParamBinder b(t, p, false);
  CHECK(bilstm_encode(b, t.constant(Tensor({2, 3}, 0.5))).value().dims() == Shape{1, 5});
  ModelConfig bad = small(1);
  CHECK_THROWS(parameter_layout(bad));
}

TEST_CASE("encode_prior closed forms") {
  const ModelConfig c = small(4);
  const Vocabulary v = Vocabulary::build({{"x", "x", "y", "y"}});
  const TokenSequence sentence = encode_sentence({"x", "y"}, v);
  const ContextState start{Tensor::row({0.1, -0.2, 0.3, 0.4}), 2};

  ParamSet zero_fc = init_params(c, 3);
  zero_fc.at("prior.fc.W") = Tensor({4, 8}, 0.0);
  const ContextState z = encode_prior(sentence, start, zero_fc);
  CHECK(z.f == Tensor({1, 4}, 0.0));
  CHECK(z.sentence_index == 3);

  ParamSet pass = init_params(c, 3);
  Tensor fc({4, 8}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) fc.at(i, 4 + i) = 1.0;
  pass.at("prior.fc.W") = fc;
  CHECK(encode_prior(sentence, start, pass).f == start.f);

  const ParamSet p = init_params(c, 8);
  ContextState a = start, b = start;
  for (int m = 0; m < 4; ++m) {
    a = encode_prior(sentence, a, p);
    b = encode_prior(sentence, b, p);
  }
  CHECK(a.f == b.f);
  CHECK(a.f.all_finite());
  CHECK(a.f.dims() == Shape{1, 4});
}

TEST_CASE("the m = 0 path reads the notes and F_init") {
  const ModelConfig c = small(4);
  const ParamSet p = init_params(c, 9);
  const Vocabulary v = Vocabulary::build({{"x", "x", "y", "y"}});
  const PanelFeatures panel = encode_images(Tensor({2, 4, 3}, 0.3), p, c);
  const ContextState init{panel.f_init, 0};
  const ContextState fx = encode_prior(encode_sentence({"x"}, v), init, p);
  const ContextState fy = encode_prior(encode_sentence({"y"}, v), init, p);
  CHECK_FALSE(fx.f == fy.f);
  const PanelFeatures other = encode_images(Tensor({2, 4, 3}, 0.9), p, c);
  CHECK_FALSE(encode_prior(encode_sentence({"x"}, v), {other.f_init, 0}, p).f == fx.f);
}
