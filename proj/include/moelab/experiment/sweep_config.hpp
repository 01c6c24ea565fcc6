#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "moelab/model/config.hpp"
#include "moelab/train/schedule.hpp"

namespace moelab::experiment {

enum class Task { shortest_path, phonebook, memorization, length2_verify };
std::string to_string(Task t);
Task task_from_string(const std::string& name);

// floor(m_d / sqrt(K)): the width at which K experts match a dense model's
// total parameter order.
int match_params(int dense_width, int experts);

// Expert FFN width that brings an MoE of the given width to the dense
// model's non-embedding total as closely as possible.
int matched_intermediate(const model::ModelConfig& dense, const model::ModelConfig& moe);

// One (model, training, seed) run.
struct JobSpec {
  Task task = Task::phonebook;
  model::ModelConfig model;
  train::TrainConfig train;
  std::uint64_t seed = 0;
  nlohmann::json task_args = nlohmann::json::object();
  std::vector<std::string> metrics;

  // Stable identity of the run: FNV-1a of the canonical JSON.
  std::string key() const;
  nlohmann::json to_json() const;
};
JobSpec job_from_json(const nlohmann::json& j);

// Sweep file schema (JSON):
// {
//   "task": "phonebook" | "shortest_path",
//   "output_dir": "runs/x",
//   "seeds": [0, 1],
//   "workers": 4,                        optional; MOELAB_WORKERS overrides
//   "metrics": ["phonebook_capacity"],   optional, per-task default
//   "task_args": {...},                  see runner.hpp
//   "models": [ {"arch": "moe", "width": [32], "depth": [2], "experts": [4, 8],
//                "top_k": [2], "heads": [1], "ffn_intermediate": [0]}, ... ],
//   "matched_total": {"dense_width": [64], "experts": [4, 16], "depth": [2],
//                     "top_k": 2},       optional
//   "train": {"learning_rate": [1e-3], "epochs": [5], "batch_size": [32],
//             "weight_decay": 0.1, "warmup_fraction": 0.2, "grad_clip": null}
// }
// Every list field is a grid axis; jobs are the Cartesian product of all axes
// and seeds.
struct ExperimentConfig {
  Task task = Task::phonebook;
  std::filesystem::path output_dir = "runs";
  std::vector<std::uint64_t> seeds{0};
  int workers = 0;  // 0: hardware concurrency
  std::vector<std::string> metrics;
  nlohmann::json task_args = nlohmann::json::object();
  nlohmann::json models = nlohmann::json::array();
  nlohmann::json matched_total;  // null when absent
  nlohmann::json train = nlohmann::json::object();

  void validate() const;
};
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Model configurations of the grid, without vocabulary or sequence length
// (the runner fills those from the task).
std::vector<model::ModelConfig> expand_models(const ExperimentConfig& cfg);
std::vector<train::TrainConfig> expand_train(const ExperimentConfig& cfg);
std::vector<JobSpec> expand_jobs(const ExperimentConfig& cfg);

std::vector<std::string> default_metrics(Task task);

}  // namespace moelab::experiment
