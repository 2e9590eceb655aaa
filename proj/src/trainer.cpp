// SPDX-License-Identifier: Apache-2.0

#include "coral8/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "coral8/container.hpp"
#include "coral8/rng.hpp"

namespace coral8 {

ModelConfig TrainConfig::effective_model() const {
  ModelConfig m = model;
  m.vanilla = m.vanilla || ablations.vanilla;
  m.no_notes = m.no_notes || ablations.no_notes;
  return m;
}

RegWeights TrainConfig::effective_reg() const {
  RegWeights w = reg;
  if (ablations.no_reg || ablations.vanilla || model.vanilla) w.lambda1 = w.lambda2 = w.lambda3 = 0.0;
  if (ablations.no_xu) w.lambda1 = 0.0;
  if (ablations.no_sal) w.lambda2 = 0.0;
  if (ablations.no_tdvar) w.lambda3 = 0.0;
  return w;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (!(cfg.lr > 0)) throw std::invalid_argument("lr must be positive");
  if (!(cfg.clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
  validate(cfg.reg);
  validate(cfg.effective_model());
}

Var sequence_nll(const std::vector<Var>& probs, const TokenSequence& target) {
  if (probs.empty()) throw std::invalid_argument("sequence_nll: no predicted positions");
  Var total;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const int y = target.ids[t + 1];
    if (y == kNullId) continue;
    Var term = log_floor(pick(probs[t], static_cast<std::size_t>(y)), kProbabilityFloor);
    total = total.valid() ? add(total, term) : term;
  }
  if (!total.valid()) throw std::invalid_argument("sequence_nll: target has no predicted tokens");
  return neg(total);
}

WindowLoss window_loss(ParamBinder& p, const TrainConfig& cfg, const EncodedSample& sample,
                       std::size_t m, const WindowCarry& incoming) {
  if (m >= kReportSentences) throw std::out_of_range("window index beyond the report");
  const ModelConfig mc = cfg.effective_model();
  const RegWeights w = cfg.effective_reg();
  Tape& tape = p.tape();

  Var context;
  if (mc.vanilla) {
    context = global_context(p, sample.panel);
  } else if (m == 0) {
    Var f_init = global_context(p, sample.panel);
    context = mc.no_notes ? f_init : encode_prior(p, sample.notes, f_init);
  } else {
    context = encode_prior(p, sample.report[m - 1], tape.constant(incoming.context));
  }

  AttentionInputs attn;
  if (!mc.vanilla) attn = prepare_attention(p, sample.panel);
  const bool carry_state = mc.vanilla && m > 0;
  GeneratorState init = bind_state(tape, carry_state ? incoming.memory : LstmMemory::zeros(mc.hidden));

  const TokenSequence& target = sample.report[m];
  SentenceForward fw = teacher_forced(p, mc, attn, context, target, init);

  WindowLoss out;
  Var nll = sequence_nll(fw.probs, target);
  out.total = nll;
  out.parts.nll = nll.value().item();

  const bool any_reg = w.lambda1 > 0 || w.lambda2 > 0 || w.lambda3 > 0;
  if (!mc.vanilla && any_reg && !target.is_pad()) {
    std::size_t content = 0;
    for (const auto& s : sample.report) content += s.is_pad() ? 0 : 1;
    Var reg = c_alpha(concat_rows(fw.alpha), w);
    if (cfg.reg_kappa) reg = add(reg, c_alpha(concat_rows(fw.kappa), w));
    reg = mul_scalar(reg, 1.0 / static_cast<double>(content));
    out.parts.c_alpha = reg.value().item();
    out.total = add(nll, reg);
  }
  out.parts.total = out.total.value().item();
  out.carry = {context.value(), snapshot(fw.final_state)};
  return out;
}

Trainer::Trainer(TrainConfig cfg, ParamSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  validate(cfg_);
}

void Trainer::apply(Gradients& grads, StepStats& stats) {
  clip_global_norm(grads, cfg_.clip_norm);
  stats.max_clipped_norm = std::max(stats.max_clipped_norm, global_norm(grads));
  adam_step(params_, grads, adam_, cfg_.lr);
}

StepStats Trainer::tbtt_step(const EncodedSample& sample) {
  StepStats stats;
  WindowCarry carry;
  Gradients accumulated;
  for (std::size_t m = 0; m < kReportSentences; ++m) {
    Tape tape;
    ParamBinder p(tape, params_, true);
    WindowLoss wl = window_loss(p, cfg_, sample, m, carry);
    if (!std::isfinite(wl.parts.total))
      throw NumericError("non-finite loss in sample " + sample.id + " window " + std::to_string(m));
    Gradients grads = tape.backward(wl.total);
    stats.loss.nll += wl.parts.nll;
    stats.loss.c_alpha += wl.parts.c_alpha;
    stats.loss.total += wl.parts.total;
    carry = std::move(wl.carry);
    if (cfg_.update_per_window) {
      apply(grads, stats);
    } else {
      for (auto& [name, g] : grads) {
        auto [it, fresh] = accumulated.try_emplace(name, g);
        if (!fresh)
          for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
      }
    }
  }
  if (!cfg_.update_per_window) apply(accumulated, stats);
  return stats;
}

std::string EpochLog::line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "epoch=%d step=%llu nll=%.6f c_alpha=%.6f total=%.6f", epoch,
                static_cast<unsigned long long>(step), mean.nll, mean.c_alpha, mean.total);
  return buf;
}

FitResult fit(const std::vector<EncodedSample>& train, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train.empty()) throw std::invalid_argument("fit: empty training split");
  validate(cfg);
  Rng root(cfg.seed);
  Rng init_rng = root.split(1);
  Rng order_rng = root.split(2);

  Trainer trainer(cfg, init_params(cfg.effective_model(), init_rng.next()));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FitResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    LossParts acc;
    for (std::size_t idx : order) {
      const StepStats s = trainer.tbtt_step(train[idx]);
      acc.nll += s.loss.nll;
      acc.c_alpha += s.loss.c_alpha;
      acc.total += s.loss.total;
    }
    const double n = static_cast<double>(train.size());
    EpochLog log{epoch, trainer.adam().step, {acc.nll / n, acc.c_alpha / n, acc.total / n}};
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, Checkpoint{trainer.params(), trainer.adam(), cfg});
  }
  result.checkpoint = {trainer.params(), trainer.adam(), cfg};
  return result;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

Tensor num(double v) { return Tensor::scalar(v); }

double get(const NamedTensors& e, const std::string& key) {
  auto it = e.find(key);
  if (it == e.end()) throw std::runtime_error("checkpoint missing entry " + key);
  return it->second.item();
}

std::size_t get_size(const NamedTensors& e, const std::string& key) {
  return static_cast<std::size_t>(get(e, key));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  NamedTensors e;
  for (const auto& [name, t] : ckpt.params) e.emplace("param." + name, t);
  for (const auto& [name, t] : ckpt.adam.m) e.emplace("adam.m." + name, t);
  for (const auto& [name, t] : ckpt.adam.v) e.emplace("adam.v." + name, t);
  e.emplace("adam.step", num(static_cast<double>(ckpt.adam.step)));
  e.emplace("adam.beta1", num(ckpt.adam.beta1));
  e.emplace("adam.beta2", num(ckpt.adam.beta2));
  e.emplace("adam.eps", num(ckpt.adam.eps));

  const TrainConfig& c = ckpt.config;
  e.emplace("config.epochs", num(c.epochs));
  e.emplace("config.lr", num(c.lr));
  e.emplace("config.lambda1", num(c.reg.lambda1));
  e.emplace("config.lambda2", num(c.reg.lambda2));
  e.emplace("config.lambda3", num(c.reg.lambda3));
  e.emplace("config.delta", num(c.reg.delta));
  e.emplace("config.clip_norm", num(c.clip_norm));
  e.emplace("config.seed_hi", num(static_cast<double>(c.seed >> 32)));
  e.emplace("config.seed_lo", num(static_cast<double>(c.seed & 0xFFFFFFFFULL)));
  e.emplace("config.no_notes", num(c.ablations.no_notes));
  e.emplace("config.no_sal", num(c.ablations.no_sal));
  e.emplace("config.no_tdvar", num(c.ablations.no_tdvar));
  e.emplace("config.no_xu", num(c.ablations.no_xu));
  e.emplace("config.no_reg", num(c.ablations.no_reg));
  e.emplace("config.vanilla", num(c.ablations.vanilla || c.model.vanilla));
  e.emplace("config.model_no_notes", num(c.model.no_notes));
  e.emplace("config.tanh_head", num(c.model.tanh_head));
  e.emplace("config.reg_kappa", num(c.reg_kappa));
  e.emplace("config.update_per_window", num(c.update_per_window));
  e.emplace("config.images", num(static_cast<double>(c.model.images)));
  e.emplace("config.positions", num(static_cast<double>(c.model.positions)));
  e.emplace("config.channels", num(static_cast<double>(c.model.channels)));
  e.emplace("config.embed", num(static_cast<double>(c.model.embed)));
  e.emplace("config.hidden", num(static_cast<double>(c.model.hidden)));
  e.emplace("config.attn", num(static_cast<double>(c.model.attn)));
  e.emplace("config.vocab", num(static_cast<double>(c.model.vocab)));
  write_checkpoint(path, e);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const NamedTensors e = read_checkpoint(path);
  Checkpoint ckpt;
  TrainConfig& c = ckpt.config;
  c.epochs = static_cast<int>(get(e, "config.epochs"));
  c.lr = get(e, "config.lr");
  c.reg = {get(e, "config.lambda1"), get(e, "config.lambda2"), get(e, "config.lambda3"), get(e, "config.delta")};
  c.clip_norm = get(e, "config.clip_norm");
  c.seed = (static_cast<std::uint64_t>(get(e, "config.seed_hi")) << 32) |
           static_cast<std::uint64_t>(get(e, "config.seed_lo"));
  c.ablations = {get(e, "config.no_notes") != 0, get(e, "config.no_sal") != 0,
                 get(e, "config.no_tdvar") != 0, get(e, "config.no_xu") != 0,
                 get(e, "config.no_reg") != 0, get(e, "config.vanilla") != 0};
  c.reg_kappa = get(e, "config.reg_kappa") != 0;
  c.update_per_window = get(e, "config.update_per_window") != 0;
  c.model.images = get_size(e, "config.images");
  c.model.positions = get_size(e, "config.positions");
  c.model.channels = get_size(e, "config.channels");
  c.model.embed = get_size(e, "config.embed");
  c.model.hidden = get_size(e, "config.hidden");
  c.model.attn = get_size(e, "config.attn");
  c.model.vocab = get_size(e, "config.vocab");
  c.model.vanilla = c.ablations.vanilla;
  c.model.no_notes = get(e, "config.model_no_notes") != 0;
  c.model.tanh_head = get(e, "config.tanh_head") != 0;

  ckpt.adam.step = static_cast<std::uint64_t>(get(e, "adam.step"));
  ckpt.adam.beta1 = get(e, "adam.beta1");
  ckpt.adam.beta2 = get(e, "adam.beta2");
  ckpt.adam.eps = get(e, "adam.eps");

  auto strip = [](const std::string& key, const std::string& prefix) -> std::string {
    return key.compare(0, prefix.size(), prefix) == 0 ? key.substr(prefix.size()) : std::string{};
  };
  for (const auto& [key, t] : e) {
    if (auto n = strip(key, "param."); !n.empty()) ckpt.params.emplace(n, t);
    else if (auto mn = strip(key, "adam.m."); !mn.empty()) ckpt.adam.m.emplace(mn, t);
    else if (auto vn = strip(key, "adam.v."); !vn.empty()) ckpt.adam.v.emplace(vn, t);
  }

  for (const auto& [name, dims] : parameter_layout(c.effective_model())) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) throw std::runtime_error("checkpoint missing parameter " + name);
    if (it->second.dims() != dims)
      throw ShapeError("checkpoint parameter " + name + " has shape " + to_string(it->second.dims()) +
                       ", expected " + to_string(dims));
  }
  return ckpt;
}

}  // namespace coral8
