// SPDX-License-Identifier: Apache-2.0

#include "coral8/generator.hpp"

#include <stdexcept>

namespace coral8 {

AttentionInputs prepare_attention(ParamBinder& p, const PanelGrid& panel) {
  Tape& t = p.tape();
  AttentionInputs in;
  in.by_position = t.constant(panel.by_position);
  in.position_keys = linear(t.constant(panel.image_mean), p("att.sp.Wa"));
  in.images = panel.images;
  in.channels = panel.channels;
  return in;
}

namespace {

// Additive scorer over the rows of `keys` (rows x k) given h_prev; returns (1 x rows) weights.
Var attention_weights(Var keys, Var h_prev, Var wh, Var v) {
  Var pre = add_row(keys, linear(h_prev, wh));
  Var scores = linear(tanh(pre), v);  // (rows x 1)
  return softmax_rows(transpose(scores));
}

}  // namespace

SpatialAttention attend_spatial(ParamBinder& p, const AttentionInputs& in, Var h_prev) {
  Var kappa = attention_weights(in.position_keys, h_prev, p("att.sp.Wh"), p("att.sp.v"));
  Var z = reshape(matmul(kappa, in.by_position), {in.images, in.channels});
  return {kappa, z};
}

ImageAttention attend_images(ParamBinder& p, Var z, Var h_prev) {
  Var keys = linear(z, p("att.im.Wa"));
  Var alpha = attention_weights(keys, h_prev, p("att.im.Wh"), p("att.im.v"));
  return {alpha, matmul(alpha, z)};
}

SentinelGates sentinel(ParamBinder& p, Var h_prev) {
  Var bl = sigmoid(add(linear(h_prev, p("sent.wL")), p("sent.bL")));
  Var bf = sigmoid(add(linear(h_prev, p("sent.wF")), p("sent.bF")));
  return {bl, bf};
}

GeneratorState lstm_step(ParamBinder& p, Var input, const GeneratorState& state) {
  if (!state.lstm.h.value().all_finite() || !state.lstm.c.value().all_finite())
    throw NumericError("lstm_step: non-finite state");
  return {lstm_cell(input, state.lstm, p("gen.W"), p("gen.U"), p("gen.b")), state.t + 1};
}

Var output_scores(ParamBinder& p, Var s_prev, Var h, Var local, Var context) {
  Var inner = add(s_prev, linear(h, p("head.Wh")));
  if (local.valid()) inner = add(inner, linear(local, p("head.WL")));
  inner = add(inner, linear(context, p("head.WF")));
  return linear(inner, p("head.Wv"));
}

Var output_distribution(ParamBinder& p, Var s_prev, Var h, Var local, Var context, bool tanh_head) {
  return head_distribution(output_scores(p, s_prev, h, local, context), tanh_head);
}

Var head_distribution(Var scores, bool tanh_head) {
  return softmax_rows(tanh_head ? tanh(scores) : scores);
}

StepResult generator_step(ParamBinder& p, const ModelConfig& cfg, const AttentionInputs& attn,
                          Var context, int input_token, const GeneratorState& state) {
  const int ids[] = {input_token};
  Var s = gather_rows(p("embed"), ids);
  StepResult r;
  if (cfg.vanilla) {
    const Var parts[] = {context, s};
    r.state = lstm_step(p, concat_cols(parts), state);
    r.scores = output_scores(p, s, r.state.lstm.h, Var{}, context);
    r.probs = head_distribution(r.scores, cfg.tanh_head);
    return r;
  }
  const Var h_prev = state.lstm.h;
  SpatialAttention sp = attend_spatial(p, attn, h_prev);
  ImageAttention im = attend_images(p, sp.z, h_prev);
  SentinelGates gates = sentinel(p, h_prev);
  const Var parts[] = {scale(gates.beta_l, im.local), scale(gates.beta_f, context), s};
  r.state = lstm_step(p, concat_cols(parts), state);
  r.scores = output_scores(p, s, r.state.lstm.h, im.local, context);
  r.probs = head_distribution(r.scores, cfg.tanh_head);
  r.kappa = sp.kappa;
  r.alpha = im.alpha;
  return r;
}

LstmMemory LstmMemory::zeros(std::size_t hidden) {
  return {Tensor({1, hidden}, 0.0), Tensor({1, hidden}, 0.0)};
}

GeneratorState bind_state(Tape& tape, const LstmMemory& memory) {
  return {{tape.constant(memory.h), tape.constant(memory.c)}, 0};
}

LstmMemory snapshot(const GeneratorState& state) {
  return {state.lstm.h.value(), state.lstm.c.value()};
}

SentenceForward teacher_forced(ParamBinder& p, const ModelConfig& cfg, const AttentionInputs& attn,
                               Var context, const TokenSequence& target, const GeneratorState& init) {
  validate(target);
  SentenceForward out;
  GeneratorState state = init;
  for (std::size_t t = 0; t + 1 < target.effective_length; ++t) {
    StepResult r = generator_step(p, cfg, attn, context, target.ids[t], state);
    out.probs.push_back(r.probs);
    if (r.kappa.valid()) {
      out.kappa.push_back(r.kappa);
      out.alpha.push_back(r.alpha);
    }
    state = r.state;
  }
  out.final_state = state;
  return out;
}

namespace {

// tanh is strictly monotone, so the argmax of the pre-tanh scores is the
// argmax of the distribution without the ties tanh rounding creates near +-1.
int greedy_token(const Tensor& scores) {
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int id = static_cast<int>(i);
    if (id == kNullId || id == kNewlineId) continue;
    if (best < 0 || scores[i] > scores[static_cast<std::size_t>(best)]) best = id;
  }
  return best;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) return {};
  std::vector<double> data;
  for (const auto& r : rows) data.insert(data.end(), r.values().begin(), r.values().end());
  return Tensor({rows.size(), rows.front().size()}, std::move(data));
}

}  // namespace

GeneratedSentence generate_sentence(const PanelFeatures& panel, const Tensor& context,
                                    const ParamSet& params, const ModelConfig& cfg,
                                    const LstmMemory& start) {
  Tape tape;
  ParamBinder p(tape, params, false);
  AttentionInputs attn;
  if (!cfg.vanilla) attn = prepare_attention(p, panel.grid);
  Var ctx = tape.constant(context);

  GeneratedSentence out;
  TokenSequence& seq = out.sentence;
  seq.ids[0] = kNewlineId;
  GeneratorState state = bind_state(tape, start);
  std::vector<Tensor> kappa, alpha;
  int input = kNewlineId;
  for (std::size_t pos = 1; pos < kSentenceLength; ++pos) {
    StepResult r = generator_step(p, cfg, attn, ctx, input, state);
    state = r.state;
    if (r.kappa.valid()) {
      kappa.push_back(r.kappa.value());
      alpha.push_back(r.alpha.value());
    }
    int token = greedy_token(r.scores.value());
    if (pos + 1 == kSentenceLength) token = kEosId;
    seq.ids[pos] = token;
    if (token == kEosId) {
      seq.effective_length = pos + 1;
      break;
    }
    input = token;
  }
  out.trace = {stack_rows(kappa), stack_rows(alpha)};
  out.memory = snapshot(state);
  return out;
}

GeneratedReport generate_report(const PanelFeatures& panel, const TokenSequence& notes,
                                const ParamSet& params, const ModelConfig& cfg) {
  GeneratedReport out;
  ContextState ctx{panel.f_init, 0};
  if (!cfg.vanilla && !cfg.no_notes) ctx = encode_prior(notes, ctx, params);
  LstmMemory memory = LstmMemory::zeros(cfg.hidden);
  for (std::size_t m = 0; m < kReportSentences; ++m) {
    if (m > 0 && !cfg.vanilla) ctx = encode_prior(out.sentences[m - 1], ctx, params);
    out.contexts[m] = ctx.f;
    // Only the vanilla model carries its LSTM state from sentence to sentence.
    GeneratedSentence s = generate_sentence(panel, ctx.f, params, cfg,
                                            cfg.vanilla ? memory : LstmMemory::zeros(cfg.hidden));
    memory = s.memory;
    out.sentences[m] = s.sentence;
    out.traces[m] = std::move(s.trace);
  }
  return out;
}

}  // namespace coral8
