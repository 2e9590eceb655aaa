// SPDX-License-Identifier: Apache-2.0
//
// Image encoder (local grids and the global context F_init) and the prior
// encoder that turns the previous sentence, or the clinical notes, into the
// next sentence's context vector.

#pragma once

#include <cstddef>

#include "coral8/autodiff.hpp"
#include "coral8/model.hpp"
#include "coral8/textpipe.hpp"

namespace coral8 {

/// Flattened, immutable view of one panel of feature grids.
struct PanelGrid {
  std::size_t images = 0, positions = 0, channels = 0;
  Tensor local;        // (N x a x d), axis order image, position, channel
  Tensor pooled;       // (1 x N*d), per-image spatial means concatenated in panel order
  Tensor by_position;  // (a x N*d), row i holds position i of every image
  Tensor image_mean;   // (a x d), features averaged over images
};

/// Accepts (N x h x w x d) backbone output or (N x a x d) grids.
PanelGrid flatten_panel(const Tensor& raw, const ModelConfig& cfg);

/// F_init = FC(pooled): (1 x H).
Var global_context(ParamBinder& p, const PanelGrid& panel);

struct PanelFeatures {
  PanelGrid grid;
  Tensor f_init;  // (1 x H)
};

PanelFeatures encode_images(const Tensor& raw, const ParamSet& params, const ModelConfig& cfg);

struct LstmState {
  Var h;
  Var c;
};

/// Gate order in W/U/b rows: input, forget, candidate, output.
LstmState lstm_cell(Var x, const LstmState& state, Var w, Var u, Var b);

/// J = FC([last forward hidden ; last backward hidden]) for an embedded sentence (C x E).
Var bilstm_encode(ParamBinder& p, Var embedded);

/// F_m = FC([J(prev) ; F_prev]).
Var encode_prior(ParamBinder& p, const TokenSequence& prev, Var f_prev);

struct ContextState {
  Tensor f;  // (1 x H)
  std::size_t sentence_index = 0;
};

ContextState encode_prior(const TokenSequence& prev, const ContextState& prev_context,
                          const ParamSet& params);

}  // namespace coral8
