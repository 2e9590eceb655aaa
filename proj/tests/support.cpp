// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>

#include "coral8/attnreg.hpp"
#include "coral8/container.hpp"
#include "coral8/encoders.hpp"
#include "coral8/metrics.hpp"
#include "coral8/model.hpp"

namespace coral8::testing {

namespace fs = std::filesystem;

ScratchDir::ScratchDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          ("coral8-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Tensor random_tensor(Rng& rng, Shape dims, double lo, double hi) {
  Tensor t(dims, 0.0);
  for (auto& x : t.storage()) x = rng.uniform(lo, hi);
  return t;
}

Tensor random_stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = random_tensor(rng, {rows, cols}, 0.1, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += t.at(r, c);
    for (std::size_t c = 0; c < cols; ++c) t.at(r, c) /= s;
  }
  return t;
}

namespace {

// Weighted sum so every output element carries a distinct gradient.
Var reduce(ParamBinder& p, Var y) { return sum(mul(y, p("w_out"))); }

GradCase unary(std::string name, Rng& rng, Shape dims, std::function<Var(Var)> op, double lo = -1.0,
               double hi = 1.0) {
  GradCase c{std::move(name), {}, {}};
  c.params.emplace("x", random_tensor(rng, dims, lo, hi));
  c.params.emplace("w_out", random_tensor(rng, op(Tape{}.constant(Tensor(dims, 0.5))).dims()));
  c.graph = [op](ParamBinder& p) { return reduce(p, op(p("x"))); };
  return c;
}

GradCase binary(std::string name, Rng& rng, Shape da, Shape db, std::function<Var(Var, Var)> op,
                double lo = -1.0, double hi = 1.0) {
  GradCase c{std::move(name), {}, {}};
  c.params.emplace("a", random_tensor(rng, da, lo, hi));
  c.params.emplace("b", random_tensor(rng, db, lo, hi));
  Tape probe;
  c.params.emplace("w_out", random_tensor(rng, op(probe.constant(Tensor(da, 0.5)), probe.constant(Tensor(db, 0.5))).dims()));
  c.graph = [op](ParamBinder& p) { return reduce(p, op(p("a"), p("b"))); };
  return c;
}

}  // namespace

std::vector<GradCase> op_gradient_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCase> out;
  const Shape m23{2, 3};
  out.push_back(binary("add", rng, m23, m23, [](Var a, Var b) { return add(a, b); }));
  out.push_back(binary("sub", rng, m23, m23, [](Var a, Var b) { return sub(a, b); }));
  out.push_back(binary("mul", rng, m23, m23, [](Var a, Var b) { return mul(a, b); }));
  out.push_back(binary("div", rng, m23, m23, [](Var a, Var b) { return div(a, b); }, 0.5, 2.0));
  out.push_back(binary("add_row", rng, {3, 4}, {1, 4}, [](Var a, Var b) { return add_row(a, b); }));
  out.push_back(binary("scale", rng, {1, 1}, m23, [](Var a, Var b) { return scale(a, b); }));
  out.push_back(binary("matmul", rng, {2, 3}, {3, 4}, [](Var a, Var b) { return matmul(a, b); }));
  out.push_back(binary("linear", rng, {2, 3}, {4, 3}, [](Var a, Var b) { return linear(a, b); }));
  out.push_back(binary("concat_cols", rng, {2, 3}, {2, 2}, [](Var a, Var b) {
    const Var v[] = {a, b};
    return concat_cols(v);
  }));
  out.push_back(binary("concat_rows", rng, {2, 3}, {1, 3}, [](Var a, Var b) {
    const Var v[] = {a, b};
    return concat_rows(v);
  }));
  out.push_back(unary("mul_scalar", rng, m23, [](Var x) { return mul_scalar(x, -1.7); }));
  out.push_back(unary("add_scalar", rng, m23, [](Var x) { return add_scalar(x, 0.3); }));
  out.push_back(unary("neg", rng, m23, [](Var x) { return neg(x); }));
  out.push_back(unary("square", rng, m23, [](Var x) { return square(x); }));
  out.push_back(unary("reciprocal", rng, m23, [](Var x) { return reciprocal(x); }, 0.5, 2.0));
  out.push_back(unary("clamp_min", rng, m23, [](Var x) { return clamp_min(x, 0.05); }));
  out.push_back(unary("log_floor", rng, m23, [](Var x) { return log_floor(x, 1e-12); }, 0.2, 2.0));
  out.push_back(unary("sigmoid", rng, m23, [](Var x) { return sigmoid(x); }, -3.0, 3.0));
  out.push_back(unary("tanh", rng, m23, [](Var x) { return tanh(x); }, -2.0, 2.0));
  out.push_back(unary("softmax_rows", rng, m23, [](Var x) { return softmax_rows(x); }, -2.0, 2.0));
  out.push_back(unary("transpose", rng, m23, [](Var x) { return transpose(x); }));
  out.push_back(unary("reshape", rng, m23, [](Var x) { return reshape(x, {3, 2}); }));
  out.push_back(unary("slice_cols", rng, {2, 5}, [](Var x) { return slice_cols(x, 1, 4); }));
  out.push_back(unary("slice_rows", rng, {4, 3}, [](Var x) { return slice_rows(x, 1, 3); }));
  out.push_back(unary("gather_rows", rng, {4, 3}, [](Var x) {
    const int ids[] = {2, 0, 2};
    return gather_rows(x, ids);
  }));
  out.push_back(unary("pick", rng, m23, [](Var x) { return pick(x, 4); }));
  out.push_back(unary("sum", rng, m23, [](Var x) { return sum(x); }));
  out.push_back(unary("mean", rng, m23, [](Var x) { return mean(x); }));
  out.push_back(unary("sum_rows", rng, {3, 4}, [](Var x) { return sum_rows(x); }));
  out.push_back(unary("mean_rows", rng, {3, 4}, [](Var x) { return mean_rows(x); }));
  out.push_back(unary("max_rows", rng, {3, 4}, [](Var x) { return max_rows(x); }));
  out.push_back(unary("std_rows", rng, {3, 4}, [](Var x) { return std_rows(x); }));
  return out;
}

MicroModel micro_model(std::uint64_t seed, bool tanh_head, bool vanilla) {
  MicroModel mm;
  ModelConfig& mc = mm.cfg.model;
  mc.images = 2;
  mc.positions = 4;
  mc.channels = 3;
  mc.embed = 4;
  mc.hidden = 5;
  mc.attn = 3;
  mc.vocab = 6;
  mc.tanh_head = tanh_head;
  mm.cfg.ablations.vanilla = vanilla;
  mm.cfg.seed = seed;

  Rng rng(seed);
  mm.params = init_params(mm.cfg.effective_model(), rng.split(1).next());
  Rng bias = rng.split(2);
  for (auto& [name, t] : mm.params)
    if (is_bias(name))
      for (auto& x : t.storage()) x = bias.uniform(-0.3, 0.3);

  Rng data = rng.split(3);
  mm.sample.id = "micro";
  mm.sample.panel = flatten_panel(random_tensor(data, {2, 4, 3}, 0.0, 1.0), mm.cfg.effective_model());
  TokenSequence notes;
  notes.ids.fill(kNullId);
  notes.ids[0] = kNewlineId;
  notes.ids[1] = 5;
  notes.ids[2] = kEosId;
  notes.effective_length = 3;
  mm.sample.notes = notes;
  std::vector<TokenSequence> sentences;
  for (const auto& words : std::vector<std::vector<int>>{{4, 5, 4}, {5, 4}}) {
    TokenSequence s;
    s.ids.fill(kNullId);
    s.ids[0] = kNewlineId;
    for (std::size_t i = 0; i < words.size(); ++i) s.ids[i + 1] = words[i];
    s.ids[words.size() + 1] = kEosId;
    s.effective_length = words.size() + 2;
    sentences.push_back(s);
  }
  mm.sample.report = encode_report(sentences);
  return mm;
}

ScalarGraph micro_window_graph(const MicroModel& mm, std::size_t m) {
  WindowCarry carry;
  for (std::size_t k = 0; k < m; ++k) {
    Tape tape;
    ParamBinder constants(tape, mm.params, false);
    carry = window_loss(constants, mm.cfg, mm.sample, k, carry).carry;
  }
  return [cfg = mm.cfg, sample = mm.sample, m, carry](ParamBinder& p) {
    return window_loss(p, cfg, sample, m, carry).total;
  };
}

ToyTask make_toy_task(const fs::path& dir, std::uint64_t seed, std::size_t test_samples) {
  SynthSpec spec;
  spec.seed = seed;
  spec.test = test_samples;
  synth_generate(spec, dir);
  ToyTask t;
  t.splits = load_manifest(dir);
  t.vocab = Vocabulary::build(vocabulary_corpus(t.splits.train), 2);
  t.model.images = spec.images;
  t.model.positions = spec.positions;
  t.model.channels = spec.channels;
  t.model.embed = 48;
  t.model.hidden = 48;
  t.model.attn = 32;
  t.model.vocab = t.vocab.size();
  t.train = encode_samples(t.splits.train, t.vocab, t.model);
  t.test = encode_samples(t.splits.test, t.vocab, t.model);
  return t;
}

TrainConfig toy_config(const ToyTask& task, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.model = task.model;
  cfg.seed = seed;
  return cfg;
}

std::vector<GeneratedReport> generate_all(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                          const ParamSet& params, const ModelConfig& cfg) {
  std::vector<GeneratedReport> out;
  for (const Sample& s : samples) {
    const PanelFeatures panel = encode_images(read_tensor_file(s.features), params, cfg);
    out.push_back(generate_report(panel, encode_sentence(tokenize(s.notes), vocab), params, cfg));
  }
  return out;
}

MetricReport score(const std::vector<GeneratedReport>& reports, const std::vector<Sample>& samples,
                   const Vocabulary& vocab) {
  std::vector<Tokens> gen, ref;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    gen.push_back(flatten(reports[i].sentences, vocab));
    ref.push_back(reference_tokens(samples[i], &vocab));
  }
  return evaluate_corpus(gen, ref);
}

AttentionStats attention_stats(const std::vector<GeneratedReport>& reports) {
  double max_sum = 0.0, var_sum = 0.0;
  std::size_t steps = 0, columns = 0;
  for (const auto& rep : reports) {
    for (std::size_t m = 0; m < rep.sentences.size(); ++m) {
      if (rep.sentences[m].is_pad()) continue;
      const Tensor& a = rep.traces[m].alpha;
      if (a.empty()) continue;
      const std::size_t C = a.rows(), N = a.cols();
      for (std::size_t t = 0; t < C; ++t) {
        double mx = 0.0;
        for (std::size_t n = 0; n < N; ++n) mx = std::max(mx, a.at(t, n));
        max_sum += mx;
        ++steps;
      }
      for (std::size_t n = 0; n < N; ++n) {
        double mu = 0.0, sq = 0.0;
        for (std::size_t t = 0; t < C; ++t) mu += a.at(t, n);
        mu /= static_cast<double>(C);
        for (std::size_t t = 0; t < C; ++t) sq += (a.at(t, n) - mu) * (a.at(t, n) - mu);
        var_sum += sq / static_cast<double>(C);
        ++columns;
      }
    }
  }
  return {steps ? max_sum / static_cast<double>(steps) : 0.0,
          columns ? var_sum / static_cast<double>(columns) : 0.0};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace coral8::testing
