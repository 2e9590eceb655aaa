// SPDX-License-Identifier: Apache-2.0

#include "coral8/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "coral8/rng.hpp"

namespace coral8 {

void validate(const ModelConfig& cfg) {
  for (auto [v, name] : {std::pair{cfg.images, "images"}, {cfg.positions, "positions"},
                         {cfg.channels, "channels"}, {cfg.embed, "embed"}, {cfg.hidden, "hidden"},
                         {cfg.attn, "attn"}, {cfg.vocab, "vocab"}})
    if (v == 0) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
  if (cfg.hidden < 2)
    throw std::invalid_argument("model config: hidden must be at least 2 for the bidirectional encoder");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  validate(cfg);
  const std::size_t N = cfg.images, d = cfg.channels, E = cfg.embed, H = cfg.hidden, k = cfg.attn,
                    V = cfg.vocab, hf = (H + 1) / 2, hb = H / 2;
  std::vector<std::pair<std::string, Shape>> out{
      {"embed", {V, E}},
      {"img.fc.W", {H, N * d}},
      {"img.fc.b", {1, H}},
      {"gen.U", {4 * H, H}},
      {"gen.b", {1, 4 * H}},
      {"head.Wv", {V, E}},
      {"head.Wh", {E, H}},
      {"head.WF", {E, H}},
  };
  if (cfg.vanilla) {
    out.push_back({"gen.W", {4 * H, H + E}});
  } else {
    out.insert(out.end(), {
        {"gen.W", {4 * H, d + H + E}},
        {"head.WL", {E, d}},
        {"prior.fwd.W", {4 * hf, E}},
        {"prior.fwd.U", {4 * hf, hf}},
        {"prior.fwd.b", {1, 4 * hf}},
        {"prior.bwd.W", {4 * hb, E}},
        {"prior.bwd.U", {4 * hb, hb}},
        {"prior.bwd.b", {1, 4 * hb}},
        {"prior.j.W", {H, H}},
        {"prior.j.b", {1, H}},
        {"prior.fc.W", {H, 2 * H}},
        {"prior.fc.b", {1, H}},
        {"att.sp.Wa", {k, d}},
        {"att.sp.Wh", {k, H}},
        {"att.sp.v", {1, k}},
        {"att.im.Wa", {k, d}},
        {"att.im.Wh", {k, H}},
        {"att.im.v", {1, k}},
        {"sent.wL", {1, H}},
        {"sent.bL", {1, 1}},
        {"sent.wF", {1, H}},
        {"sent.bF", {1, 1}},
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_bias(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return leaf == "b" || leaf == "bL" || leaf == "bF";
}

ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamSet params;
  for (const auto& [name, dims] : parameter_layout(cfg)) {
    Tensor t(dims, 0.0);
    if (name == "embed") {
      for (double& v : t.storage()) v = rng.uniform(-1.0, 1.0);
    } else if (!is_bias(name)) {
      const double bound = std::sqrt(6.0 / static_cast<double>(dims[0] + dims[1]));
      for (double& v : t.storage()) v = rng.uniform(-bound, bound);
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

std::size_t parameter_count(const ParamSet& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

}  // namespace coral8
