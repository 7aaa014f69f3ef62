#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "atcline/dataset.hpp"
#include "atcline/nn.hpp"

// Deterministic single-threaded Adam trainer with a cosine-annealed learning
// rate, versioned binary checkpoints, and the finite-difference gradient
// check that guards the hand-written backward pass.
namespace atcline {

struct TrainConfig {
  double lr = 1e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  LossVariant variant = LossVariant::paper;
  bool cosine = true;

  void validate() const;
};

// Schedule value at epoch E of N: lr0 * (1 + cos(pi E / N)) / 2. E = 0 gives
// lr0 back exactly.
double cosine_lr(double lr0, std::size_t epoch, std::size_t n_epochs);

// Everything prediction needs, in one file: model config and parameters,
// the training-split normalization stats, and the feature schema hash that
// guards against drift between dataset and model.
struct Checkpoint {
  ModelParams params;
  DatasetStats stats;
  std::uint64_t schema_hash = 0;
  LossVariant variant = LossVariant::paper;
  std::string improvement;  // "offset" | "duration" | "overall"
  std::size_t epoch = 0;
  double val_mae_offset = 0.0;
  double val_mae_duration = 0.0;
  double val_mae_overall = 0.0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-sample loss over the epoch
  double val_mae_offset = 0.0;
  double val_mae_duration = 0.0;
  double val_mae_overall = 0.0;
  std::vector<std::string> improved;   // criteria that improved this epoch
  std::uint64_t param_hash = 0;        // parameter bytes after the epoch
};

// Receives every emitted checkpoint in emission order; callers persist them.
using CheckpointSink = std::function<void(const Checkpoint&)>;

struct TrainResult {
  ModelParams params;  // final-epoch parameters
  // For each improvement tag, the last two checkpoints emitted with it.
  // Improvements are monotone, so these are the best two per criterion.
  std::vector<Checkpoint> checkpoints;
  std::vector<EpochLog> curve;
};

// Adam over shuffled mini-batches; deterministic under (dataset, mcfg, tcfg):
// the seed fixes init, per-epoch shuffles, and the dropout stream. Validation
// MAE is measured in seconds on de-standardized predictions; a checkpoint is
// emitted whenever MAE_offset, MAE_duration, or MAE_overall improves.
TrainResult train(const Dataset& ds, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, const CheckpointSink& sink = {});

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t n_scalars = 0;
  std::size_t adjustments = 0;  // boundary nudges applied before the sweep
};

// Central finite differences (step 1e-5) against the analytic gradient of
// loss_joint(forward(.)) summed over synthetic samples, for every parameter
// scalar. Pre-activations near a ReLU boundary are nudged away through their
// additive upstream parameter, and targets near the smooth-L1 kink are moved
// off it, so both gradient evaluations sit on the same smooth piece.
GradCheckReport gradient_check(const ModelConfig& tiny_cfg, std::uint64_t seed,
                               std::size_t n_samples = 3);

// FNV-1a over the little-endian bytes of every parameter tensor in canonical
// order; the determinism contract's per-epoch fingerprint.
std::uint64_t param_bytes_hash(const ModelParams& p);

}  // namespace atcline
