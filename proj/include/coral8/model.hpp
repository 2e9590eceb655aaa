// SPDX-License-Identifier: Apache-2.0
//
// Model dimensions, ablation switches and parameter initialisation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "coral8/autodiff.hpp"

namespace coral8 {

struct ModelConfig {
  std::size_t images = 8;       // N, panel size
  std::size_t positions = 196;  // a, flattened spatial grid
  std::size_t channels = 512;   // d
  std::size_t embed = 512;      // E
  std::size_t hidden = 512;     // H; the prior encoder runs ceil(H/2) forward and floor(H/2) backward units
  std::size_t attn = 512;       // hidden width of the additive attention scorers
  std::size_t vocab = 0;        // V
  bool vanilla = false;         // LSTM on (F_init, s_t) only: no attention, sentinel or prior encoder
  bool no_notes = false;        // F_0 = F_init
  bool tanh_head = false;       // probs = softmax(tanh(scores)) instead of softmax(scores)
};

void validate(const ModelConfig& cfg);

/// Parameter names and shapes for a configuration (sorted by name).
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg);

/// Glorot-uniform weights, zero biases, embedding uniform in [-1, 1].
ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed);

bool is_bias(const std::string& name);
std::size_t parameter_count(const ParamSet& params);

}  // namespace coral8
