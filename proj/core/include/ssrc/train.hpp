#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssrc/hsi.hpp"
#include "ssrc/model.hpp"

namespace ssrc {

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  /// Mean class-weighted cross-entropy over the epoch's batches.
  double train_loss = 0.0;
  double validation_auc = 0.0;
};

struct TrainResult {
  /// Parameters from the epoch with the best validation AUC (earliest on ties).
  Model model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_validation_auc = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on class-weighted cross-entropy with weights N / N_i from the training
/// labels. Batches are reshuffled each epoch from derive_seed(seed, epoch).
TrainResult train_model(const ModelConfig& config, const PatchSet& train, const PatchSet& validation,
                        const TrainOptions& options, const EpochCallback& on_epoch = {});

/// Softmax probability of the malignant class for every patch.
std::vector<double> predict_scores(const Model& model, const PatchSet& patches, std::size_t batch = 64);

struct GridPoint {
  double lr = 0.0;
  std::size_t hidden = 0;
  double validation_auc = 0.0;
  std::size_t best_epoch = 0;
};

struct GridResult {
  TrainResult best;
  TrainOptions options;
  std::vector<GridPoint> points;
};

/// Trains every (lr, hidden) pair and keeps the best validation AUC; the first
/// pair wins ties. Empty lists fall back to the base values.
GridResult grid_search(const ModelConfig& base, const PatchSet& train, const PatchSet& validation,
                       const TrainOptions& options, std::span<const double> lrs,
                       std::span<const std::size_t> hiddens, const EpochCallback& on_epoch = {});

std::string training_log_tsv(std::span<const EpochLog> log);

}  // namespace ssrc
