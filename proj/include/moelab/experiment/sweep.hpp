#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "moelab/experiment/runner.hpp"
#include "moelab/experiment/sweep_config.hpp"

namespace moelab::experiment {

// Worker count: explicit override, then MOELAB_WORKERS, then the config,
// then the hardware concurrency.
int resolve_workers(int config_workers, int override_workers = 0);

struct SweepOptions {
  int workers = 0;
  std::function<void(const JobSpec&, const JobResult&)> on_done;
};

struct SweepSummary {
  std::size_t jobs = 0;
  std::size_t skipped = 0;  // already in the manifest
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::filesystem::path csv;
};

// Output directory layout:
//   records.csv     ExperimentRecords
//   manifest.jsonl  one {"key", "job"} line per completed job
//   failures.jsonl  one {"key", "job", "error"} line per failed job
// Jobs already listed in the manifest are skipped, so an interrupted sweep
// resumes without duplicating rows.
SweepSummary run_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

std::vector<JobSpec> read_manifest(const std::filesystem::path& output_dir);

// The manifest job that produced `row`, if any.
std::optional<JobSpec> find_job(const std::vector<JobSpec>& jobs, const ExperimentRecord& row);

}  // namespace moelab::experiment
