// SPDX-License-Identifier: Apache-2.0
//
// Training: masked NLL plus the attention regularizer, truncated
// backpropagation through time with one window per sentence, Adam and
// global-norm clipping.
//
// Window m covers the prior encoding of sentence m-1 (the notes at m = 0)
// and the teacher-forced generation of sentence m. The context F_{m-1}
// entering the window is a constant, so no gradient leaves the window.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "coral8/attnreg.hpp"
#include "coral8/encoders.hpp"
#include "coral8/generator.hpp"
#include "coral8/model.hpp"
#include "coral8/optim.hpp"
#include "coral8/textpipe.hpp"

namespace coral8 {

inline constexpr double kProbabilityFloor = 1e-12;

struct Ablations {
  bool no_notes = false;
  bool no_sal = false;
  bool no_tdvar = false;
  bool no_xu = false;
  bool no_reg = false;
  bool vanilla = false;
};

struct TrainConfig {
  int epochs = 30;
  double lr = 0.001;
  RegWeights reg;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  Ablations ablations;
  ModelConfig model;
  bool reg_kappa = false;        // also apply c_alpha to the spatial weights
  bool update_per_window = true; // false: accumulate the windows of a report into one update

  /// Model flags and regularizer weights after applying the ablation switches.
  ModelConfig effective_model() const;
  RegWeights effective_reg() const;
};

void validate(const TrainConfig& cfg);

/// One training example in model-ready form.
struct EncodedSample {
  std::string id;
  PanelGrid panel;
  TokenSequence notes;
  Report report;
};

struct LossParts {
  double nll = 0.0;
  double c_alpha = 0.0;
  double total = 0.0;
};

/// -sum log max(p[target], floor) over the predicted positions of `target`
/// (everything after NEWLINE up to and including EOS; NULL never counts).
Var sequence_nll(const std::vector<Var>& probs, const TokenSequence& target);

/// Values carried from one window to the next.
struct WindowCarry {
  Tensor context;     // F_m of the finished window
  LstmMemory memory;  // final generator state (vanilla carries it across sentences)
};

struct WindowLoss {
  Var total;
  LossParts parts;
  WindowCarry carry;
};

/// Builds the loss of window m on the binder's tape. `incoming` is ignored at m = 0.
WindowLoss window_loss(ParamBinder& p, const TrainConfig& cfg, const EncodedSample& sample,
                       std::size_t m, const WindowCarry& incoming);

struct StepStats {
  LossParts loss;            // summed over the report's windows
  double max_clipped_norm = 0.0;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, ParamSet params);

  /// Runs every window of one sample, updating parameters as configured.
  StepStats tbtt_step(const EncodedSample& sample);

  const ParamSet& params() const { return params_; }
  const AdamState& adam() const { return adam_; }
  AdamState& adam() { return adam_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  void apply(Gradients& grads, StepStats& stats);

  TrainConfig cfg_;
  ParamSet params_;
  AdamState adam_;
};

struct EpochLog {
  int epoch = 0;
  std::uint64_t step = 0;
  LossParts mean;  // per-sample average over the epoch

  /// `epoch=<k> step=<s> nll=<x> c_alpha=<y> total=<z>`
  std::string line() const;
};

struct Checkpoint {
  ParamSet params;
  AdamState adam;
  TrainConfig config;
};

using EpochCallback = std::function<void(const EpochLog&, const Checkpoint&)>;

struct FitResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

/// Epoch loop over a seeded shuffle of `train`.
FitResult fit(const std::vector<EncodedSample>& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace coral8
