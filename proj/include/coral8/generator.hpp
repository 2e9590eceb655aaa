// SPDX-License-Identifier: Apache-2.0
//
// Sentence generator: spatial attention (kappa) over grid positions, then
// inter-image attention (alpha) over the N attended image vectors, sentinel
// gating of the visual and context inputs, an LSTM step and the deep output
// layer. Greedy decoding on top.

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "coral8/autodiff.hpp"
#include "coral8/encoders.hpp"
#include "coral8/model.hpp"
#include "coral8/textpipe.hpp"

namespace coral8 {

/// Per-panel attention operands, bound once per tape.
struct AttentionInputs {
  Var by_position;    // (a x N*d) constant
  Var position_keys;  // (a x k): image-averaged features through att.sp.Wa
  std::size_t images = 0, channels = 0;
};

AttentionInputs prepare_attention(ParamBinder& p, const PanelGrid& panel);

struct SpatialAttention {
  Var kappa;  // (1 x a)
  Var z;      // (N x d), Z_n = sum_i kappa_i A[n, i, :]
};

/// e_i = v . tanh(Wa Abar_i + Wh h_prev); kappa = softmax(e).
SpatialAttention attend_spatial(ParamBinder& p, const AttentionInputs& in, Var h_prev);

struct ImageAttention {
  Var alpha;  // (1 x N)
  Var local;  // (1 x d), L = sum_n alpha_n Z_n
};

ImageAttention attend_images(ParamBinder& p, Var z, Var h_prev);

struct SentinelGates {
  Var beta_l;  // (1 x 1)
  Var beta_f;  // (1 x 1)
};

SentinelGates sentinel(ParamBinder& p, Var h_prev);

struct GeneratorState {
  LstmState lstm;
  std::size_t t = 0;
};

GeneratorState lstm_step(ParamBinder& p, Var input, const GeneratorState& state);

/// Wv (s_prev + Wh h + WL L + WF F), the head before tanh. `local` may be invalid (vanilla).
Var output_scores(ParamBinder& p, Var s_prev, Var h, Var local, Var context);
/// softmax(output_scores(...)), or softmax(tanh(output_scores(...))) with `tanh_head`.
Var output_distribution(ParamBinder& p, Var s_prev, Var h, Var local, Var context, bool tanh_head);
Var head_distribution(Var scores, bool tanh_head);

struct StepResult {
  GeneratorState state;
  Var scores;  // (1 x V) head projection before tanh
  Var probs;   // (1 x V)
  Var kappa;  // invalid for vanilla
  Var alpha;  // invalid for vanilla
};

/// One word step: attention, sentinel, LSTM, output distribution.
StepResult generator_step(ParamBinder& p, const ModelConfig& cfg, const AttentionInputs& attn,
                          Var context, int input_token, const GeneratorState& state);

/// LSTM state carried across tapes as plain values.
struct LstmMemory {
  Tensor h, c;
  static LstmMemory zeros(std::size_t hidden);
};

GeneratorState bind_state(Tape& tape, const LstmMemory& memory);
LstmMemory snapshot(const GeneratorState& state);

struct SentenceForward {
  std::vector<Var> probs;  // one (1 x V) row per predicted position
  std::vector<Var> kappa;
  std::vector<Var> alpha;
  GeneratorState final_state;
};

/// Feeds target ids[0 .. L-2] and predicts ids[1 .. L-1].
SentenceForward teacher_forced(ParamBinder& p, const ModelConfig& cfg, const AttentionInputs& attn,
                               Var context, const TokenSequence& target, const GeneratorState& init);

struct AttentionTrace {
  Tensor kappa;  // (steps x a); empty for vanilla
  Tensor alpha;  // (steps x N); empty for vanilla
};

struct GeneratedSentence {
  TokenSequence sentence;
  AttentionTrace trace;
  LstmMemory memory;  // final LSTM state
};

/// Greedy decoding from NEWLINE until EOS, forcing EOS at the 40-token cap.
/// NULL and NEWLINE are never emitted.
GeneratedSentence generate_sentence(const PanelFeatures& panel, const Tensor& context,
                                    const ParamSet& params, const ModelConfig& cfg,
                                    const LstmMemory& start);

struct GeneratedReport {
  Report sentences;
  std::array<AttentionTrace, kReportSentences> traces;
  std::array<Tensor, kReportSentences> contexts;  // F_m used for sentence m
};

GeneratedReport generate_report(const PanelFeatures& panel, const TokenSequence& notes,
                                const ParamSet& params, const ModelConfig& cfg);

}  // namespace coral8
