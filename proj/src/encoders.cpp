// SPDX-License-Identifier: Apache-2.0

#include "coral8/encoders.hpp"

#include <stdexcept>

namespace coral8 {

PanelGrid flatten_panel(const Tensor& raw, const ModelConfig& cfg) {
  const Shape& dims = raw.dims();
  PanelGrid g;
  if (dims.size() == 4) {
    g.images = dims[0];
    g.positions = dims[1] * dims[2];
    g.channels = dims[3];
  } else if (dims.size() == 3) {
    g.images = dims[0];
    g.positions = dims[1];
    g.channels = dims[2];
  } else {
    throw ShapeError("panel features must be (N x h x w x d) or (N x a x d), got " + to_string(dims));
  }
  if (g.images != cfg.images || g.positions != cfg.positions || g.channels != cfg.channels)
    throw ShapeError("panel features " + to_string(dims) + " do not match model (N=" +
                     std::to_string(cfg.images) + ", a=" + std::to_string(cfg.positions) +
                     ", d=" + std::to_string(cfg.channels) + ")");
  if (!raw.all_finite()) throw NumericError("panel features contain non-finite values");

  const std::size_t N = g.images, a = g.positions, d = g.channels;
  g.local = raw.reshaped({N, a, d});
  g.pooled = Tensor({1, N * d});
  g.by_position = Tensor({a, N * d});
  g.image_mean = Tensor({a, d});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        const double v = g.local[(n * a + i) * d + c];
        g.pooled[n * d + c] += v / static_cast<double>(a);
        g.by_position[i * N * d + n * d + c] = v;
        g.image_mean[i * d + c] += v / static_cast<double>(N);
      }
  return g;
}

Var global_context(ParamBinder& p, const PanelGrid& panel) {
  Var pooled = p.tape().constant(panel.pooled);
  return add_row(linear(pooled, p("img.fc.W")), p("img.fc.b"));
}

PanelFeatures encode_images(const Tensor& raw, const ParamSet& params, const ModelConfig& cfg) {
  PanelFeatures out{flatten_panel(raw, cfg), {}};
  Tape tape;
  ParamBinder p(tape, params, false);
  out.f_init = global_context(p, out.grid).value();
  return out;
}

LstmState lstm_cell(Var x, const LstmState& state, Var w, Var u, Var b) {
  const std::size_t H = state.h.value().cols();
  Var gates = add_row(add(linear(x, w), linear(state.h, u)), b);
  Var i = sigmoid(slice_cols(gates, 0, H));
  Var f = sigmoid(slice_cols(gates, H, 2 * H));
  Var g = tanh(slice_cols(gates, 2 * H, 3 * H));
  Var o = sigmoid(slice_cols(gates, 3 * H, 4 * H));
  Var c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var bilstm_encode(ParamBinder& p, Var embedded) {
  const std::size_t steps = embedded.value().rows();
  if (steps == 0) throw std::invalid_argument("bilstm_encode: empty sentence");
  Tape& t = p.tape();
  const Tensor zf({1, p.params().at("prior.fwd.U").cols()}, 0.0);
  const Tensor zb({1, p.params().at("prior.bwd.U").cols()}, 0.0);

  LstmState fwd{t.constant(zf), t.constant(zf)};
  Var fw = p("prior.fwd.W"), fu = p("prior.fwd.U"), fb = p("prior.fwd.b");
  for (std::size_t s = 0; s < steps; ++s) fwd = lstm_cell(slice_rows(embedded, s, s + 1), fwd, fw, fu, fb);

  LstmState bwd{t.constant(zb), t.constant(zb)};
  Var bw = p("prior.bwd.W"), bu = p("prior.bwd.U"), bb = p("prior.bwd.b");
  for (std::size_t s = steps; s-- > 0;) bwd = lstm_cell(slice_rows(embedded, s, s + 1), bwd, bw, bu, bb);

  const Var both[] = {fwd.h, bwd.h};
  return add_row(linear(concat_cols(both), p("prior.j.W")), p("prior.j.b"));
}

Var encode_prior(ParamBinder& p, const TokenSequence& prev, Var f_prev) {
  Var j = bilstm_encode(p, embed(prev, p("embed")));
  const Var parts[] = {j, f_prev};
  return add_row(linear(concat_cols(parts), p("prior.fc.W")), p("prior.fc.b"));
}

ContextState encode_prior(const TokenSequence& prev, const ContextState& prev_context,
                          const ParamSet& params) {
  Tape tape;
  ParamBinder p(tape, params, false);
  Var f = encode_prior(p, prev, tape.constant(prev_context.f));
  return {f.value(), prev_context.sentence_index + 1};
}

}  // namespace coral8
