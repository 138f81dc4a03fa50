#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/corpus.hpp"
#include "glassbox/model.hpp"

namespace glassbox {

enum class L1Placement { kNone, kInputToHidden, kHiddenToOutput };

L1Placement l1_placement_from_string(const std::string& s);
std::string to_string(L1Placement p);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lambda = 0.0;
  L1Placement l1_placement = L1Placement::kHiddenToOutput;
  std::uint64_t seed = 0;

  void validate() const;
};

// Same shapes as the trainable parameters of TextCnnModel.
struct Gradients {
  Matrix embedding;
  std::vector<Matrix> filter_weights;
  std::vector<double> filter_bias;
  Matrix w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static Gradients zeros_like(const TextCnnModel& model);
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

// Mean binary cross-entropy over the batch plus lambda * mean |w| over the
// placement-selected matrix. Gradients are exact backpropagation: the ReLU
// subgradient at 0 is 0, max-pool routes only to the argmax window, and the
// <PAD> embedding row never receives gradient.
LossAndGradients loss_and_gradients(const TextCnnModel& model,
                                    std::span<const TokenizedDocument* const> batch,
                                    const TrainConfig& cfg);
LossAndGradients loss_and_gradients(const TextCnnModel& model, const Dataset& batch,
                                    const TrainConfig& cfg);

// Only the loss part of loss_and_gradients; used by finite-difference checks.
double batch_loss(const TextCnnModel& model, const Dataset& batch, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> val_auc;
  std::size_t region_count = 0;  // distinct activation patterns on validation
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
};

struct FitResult {
  TextCnnModel model;  // snapshot of the best validation epoch
  TrainHistory history;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over shuffled minibatches; the
// batch order depends only on cfg.seed.
FitResult fit(const TextCnnModel& initial, const Dataset& train, const Dataset& val,
              const TrainConfig& cfg);

std::string history_to_csv(const TrainHistory& history);

struct SplitData {
  std::size_t vocab_size = 0;
  Dataset train;
  Dataset validation;
  Dataset test;
};

struct SweepCell {
  std::size_t filters_per_size = 0;
  std::size_t hidden_units = 0;
  double lambda = 0.0;
  double val_accuracy = 0.0;
  double accuracy = 0.0;  // test
  std::optional<double> auc;  // test
  std::size_t region_count = 0;  // distinct activation patterns on test
  std::size_t effective_region_count = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

// One model per (n_f, n_h) cell, trained from init_model(base with that cell).
SweepResult sweep_complexity(std::span<const std::size_t> nf_values,
                             std::span<const std::size_t> nh_values, const ModelConfig& base,
                             const TrainConfig& cfg, const SplitData& data);

// One model per lambda value (ascending, nonnegative) at the given placement.
SweepResult sweep_lambda(std::span<const double> lambda_values, L1Placement placement,
                         const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const SplitData& data);

// Best validation accuracy among cells with region_count < max_regions (ties
// to the larger lambda); otherwise the lambda of the fewest regions.
double select_lambda(const SweepResult& sweep, std::size_t max_regions);

std::string sweep_to_csv(const SweepResult& sweep);

}  // namespace glassbox
