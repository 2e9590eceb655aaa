// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "coral8/autodiff.hpp"
#include "coral8/dataio.hpp"
#include "coral8/generator.hpp"
#include "coral8/rng.hpp"
#include "coral8/trainer.hpp"

namespace coral8::testing {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag);
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

Tensor random_tensor(Rng& rng, Shape dims, double lo = -1.0, double hi = 1.0);
/// Rows drawn uniformly then normalized: strictly positive, rows sum to 1.
Tensor random_stochastic(Rng& rng, std::size_t rows, std::size_t cols);

struct GradCase {
  std::string name;
  ScalarGraph graph;
  ParamSet params;
};

/// One scalar graph per differentiable op, on small random shapes.
std::vector<GradCase> op_gradient_cases(std::uint64_t seed);

/// Micro model (V=6, N=2, a=4, d=3, H=5, E=4) with non-zero biases and a
/// three-word sample.
struct MicroModel {
  TrainConfig cfg;
  ParamSet params;
  EncodedSample sample;
};
MicroModel micro_model(std::uint64_t seed, bool tanh_head = false, bool vanilla = false);

/// Loss of window m of the micro model; windows before m run on constants.
ScalarGraph micro_window_graph(const MicroModel& mm, std::size_t m);

/// Synthetic toy task written to disk and encoded.
struct ToyTask {
  Splits splits;
  Vocabulary vocab;
  ModelConfig model;
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> test;
};
ToyTask make_toy_task(const std::filesystem::path& dir, std::uint64_t seed, std::size_t test_samples = 0);

/// Toy-scale training configuration (E = H = 48, attention width 32, 30 epochs).
TrainConfig toy_config(const ToyTask& task, std::uint64_t seed);

std::vector<GeneratedReport> generate_all(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                          const ParamSet& params, const ModelConfig& cfg);

/// Corpus metrics of generated reports against the samples' references.
MetricReport score(const std::vector<GeneratedReport>& reports, const std::vector<Sample>& samples,
                   const Vocabulary& vocab);

struct AttentionStats {
  double mean_max_alpha = 0.0;       // mean over steps of max over images
  double temporal_variance = 0.0;    // mean over sentences and images of var over steps
};
AttentionStats attention_stats(const std::vector<GeneratedReport>& reports);

double median(std::vector<double> v);

}  // namespace coral8::testing
