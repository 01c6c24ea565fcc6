#pragma once

#include <vector>

#include <json.hpp>

#include "moelab/experiment/records.hpp"
#include "moelab/experiment/sweep_config.hpp"

namespace moelab::experiment {

// task_args understood by the runner:
//   phonebook:     sizes [256, 512, ...], num_queries 1000, threshold 0.9,
//                  search "ascending" | "exhaustive" | "bisect"
//   shortest_path: n 12, p (optional), target_mean_length 3.5,
//                  calibration_trials 200, calibration_seed 0,
//                  train_size 1000, test_size 100
struct JobResult {
  std::vector<ExperimentRecord> records;
  nlohmann::json details = nlohmann::json::object();
};

// Seeds derived from the job: the data seed depends only on (task_args,
// seed) so every model of a sweep sees the same data; the init and shuffle
// seeds also depend on the model and training configuration.
std::uint64_t data_seed(const JobSpec& job);
std::uint64_t init_seed(const JobSpec& job);

// Edge probability for the shortest-path task: task_args.p when given,
// otherwise calibrated to target_mean_length (memoized per process).
double shortest_path_p(const nlohmann::json& task_args);

JobResult run_job(const JobSpec& job);

ExperimentRecord base_record(const JobSpec& job);

}  // namespace moelab::experiment
