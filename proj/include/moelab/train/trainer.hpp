#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "moelab/model/model.hpp"
#include "moelab/tasks/sample.hpp"
#include "moelab/train/adamw.hpp"
#include "moelab/train/batching.hpp"
#include "moelab/train/schedule.hpp"

namespace moelab::train {

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double aux_loss = 0.0;
  double load_ratio = 1.0;  // max/mean expert load, 1 for dense
};

struct EvalLog {
  std::int64_t step = 0;
  double exact_match = 0.0;
  double load_ratio = 1.0;
};

struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EvalLog> evals;
  double final_loss() const { return steps.empty() ? 0.0 : steps.back().loss; }
};

void to_json(nlohmann::json& j, const StepLog& s);
void to_json(nlohmann::json& j, const EvalLog& e);

struct TrainOptions {
  // Append-only JSONL log of every step.
  std::optional<std::filesystem::path> log_path;
  // Written with the last finite weights when training diverges.
  std::optional<std::filesystem::path> divergence_checkpoint;
  std::function<void(const StepLog&, std::span<const model::RoutingTrace>)> on_step;
};

std::int64_t total_steps(std::size_t dataset_size, const TrainConfig& cfg);

// Masked next-token cross-entropy of a batch (plus the weighted balance loss
// when the model enables it).
struct BatchLoss {
  ad::Var loss;
  ad::Var nll;
  std::vector<model::RoutingTrace> traces;
};
BatchLoss batch_loss(model::Model& model, ad::Tape& tape, const Batch& batch);

// Trains in place. Deterministic given the model's init, cfg.seed and data.
// Throws DivergenceError (after restoring the last finite weights) when the
// loss or a gradient stops being finite.
TrainLog train(model::Model& model, std::span<const tasks::Sample> data, const TrainConfig& cfg,
               const TrainOptions& options = {});

}  // namespace moelab::train
