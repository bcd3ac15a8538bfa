#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tridetect/data.hpp"
#include "tridetect/losses.hpp"
#include "tridetect/metrics.hpp"
#include "tridetect/model.hpp"
#include "tridetect/sinkhorn.hpp"

namespace tridetect {

struct TrainConfig {
  int epochs = 5;
  std::size_t batch_size = 128;
  double lr = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 1e-4;  // decoupled (AdamW style)
  LossWeights loss;
  SinkhornConfig sinkhorn;
  double augment_strength = 1.0;
  std::uint64_t seed = 1024;
  std::size_t clusters = 2;
  std::vector<std::size_t> hidden = {256, 128};
  // When set, the consistency term is reported but contributes no gradient.
  bool detach_consistency = false;

  void validate() const;
};

// Flat "key = value" rendering of every field; also used as the run header.
std::string config_text(const TrainConfig& cfg);

struct StepRecord {
  long step = 0;
  int epoch = 0;
  LossReport loss;
};

struct EpochSummary {
  int epoch = 0;
  LossReport mean;
  double minority_share = 0.0;  // smallest cluster share among training fakes
};

struct TrainState {
  TriarchyModel model;
  Gradients first_moment;
  Gradients second_moment;
  long step = 0;
  std::vector<StepRecord> history;
  std::vector<EpochSummary> epochs;
};

TrainState init_state(std::size_t input_dim, const TrainConfig& cfg);

// One AdamW update with decoupled weight decay; increments state.step.
void adam_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg);

struct BatchObjective {
  LossReport loss;
  Gradients grads;
  std::size_t fakes = 0;
};

// Full objective for one batch and its two views: binary loss on view 1,
// swapped prediction against detached assignments, consistency through the
// assignment map. Gradients cover both views.
BatchObjective batch_objective(const TriarchyModel& model, const Matrix& view1,
                               const Matrix& view2, std::span<const std::uint8_t> labels,
                               const TrainConfig& cfg);

using EpochCallback = std::function<void(const TrainState&)>;

// Throws TrainingAborted on a non-finite loss or parameter. When `initial` is
// given, training starts from its parameters (with fresh optimizer moments);
// its shape must agree with ds.dim(), cfg.hidden and cfg.clusters.
TrainState train(const EmbeddingDataset& ds, const TrainConfig& cfg,
                 const EmbeddingDataset* paired_views = nullptr,
                 const EpochCallback& on_epoch = {}, const TriarchyModel* initial = nullptr);

struct EvalResult {
  std::vector<double> scores;            // p(fake)
  std::vector<std::optional<int>> cluster;  // for label-1 or predicted-fake rows
};

EvalResult evaluate(const TriarchyModel& model, const EmbeddingDataset& ds);
std::vector<ScoredSample> scored_samples(const EmbeddingDataset& ds, const EvalResult& r);

// Fraction of fake samples whose argmax fake-cluster is the least used one.
double minority_share(const TriarchyModel& model, const EmbeddingDataset& ds);

std::string history_csv(const TrainState& state);
std::string epochs_csv(const TrainState& state);

}  // namespace tridetect
