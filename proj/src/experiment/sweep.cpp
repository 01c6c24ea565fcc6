#include "moelab/experiment/sweep.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "moelab/errors.hpp"

namespace moelab::experiment {

using nlohmann::json;

int resolve_workers(int config_workers, int override_workers) {
  if (override_workers > 0) return override_workers;
  if (const char* env = std::getenv("MOELAB_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  if (config_workers > 0) return config_workers;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

bool same_run(const ExperimentRecord& a, const ExperimentRecord& b) {
  return a.task == b.task && a.arch == b.arch && a.d == b.d && a.L == b.L && a.H == b.H && a.E == b.E &&
         a.top_k == b.top_k && a.total_params == b.total_params && a.seed == b.seed && a.lr == b.lr &&
         a.epochs == b.epochs;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + path.string());
}

}  // namespace

std::vector<JobSpec> read_manifest(const std::filesystem::path& output_dir) {
  std::vector<JobSpec> jobs;
  std::ifstream in(output_dir / "manifest.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      jobs.push_back(job_from_json(json::parse(line).at("job")));
    } catch (const json::exception&) {
      // a torn final line from an interrupted append
    }
  }
  return jobs;
}

std::optional<JobSpec> find_job(const std::vector<JobSpec>& jobs, const ExperimentRecord& row) {
  for (const auto& j : jobs) {
    if (same_run(base_record(j), row)) return j;
  }
  return std::nullopt;
}

SweepSummary run_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  const auto jobs = expand_jobs(config);
  std::filesystem::create_directories(config.output_dir);
  const auto csv = config.output_dir / "records.csv";
  const auto manifest = config.output_dir / "manifest.jsonl";
  const auto failures = config.output_dir / "failures.jsonl";

  std::set<std::string> done;
  for (const auto& j : read_manifest(config.output_dir)) done.insert(j.key());
  // rows written by a job that was interrupted before its manifest line
  std::vector<ExperimentRecord> existing;
  if (std::filesystem::exists(csv)) existing = read_records(csv);

  SweepSummary summary;
  summary.jobs = jobs.size();
  summary.csv = csv;
  std::vector<const JobSpec*> todo;
  for (const auto& j : jobs) {
    if (done.count(j.key())) {
      ++summary.skipped;
      continue;
    }
    const auto base = base_record(j);
    const auto wanted = j.metrics.empty() ? default_metrics(j.task) : j.metrics;
    std::size_t have = 0;
    for (const auto& name : wanted) {
      for (const auto& r : existing) {
        if (same_run(r, base) && r.metric_name == name) {
          ++have;
          break;
        }
      }
    }
    if (have == wanted.size() && have > 0) {
      append_line(manifest, json{{"key", j.key()}, {"job", j.to_json()}}.dump());
      ++summary.skipped;
      continue;
    }
    todo.push_back(&j);
  }

  RecordWriter writer(csv);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const JobSpec& job = *todo[i];
      try {
        JobResult res = run_job(job);
        std::lock_guard lock(mu);
        writer.append(res.records);
        append_line(manifest, json{{"key", job.key()}, {"job", job.to_json()}, {"details", res.details}}.dump());
        ++summary.completed;
        if (options.on_done) options.on_done(job, res);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        append_line(failures, json{{"key", job.key()}, {"job", job.to_json()}, {"error", e.what()}}.dump());
        ++summary.failed;
      }
    }
  };
  const int workers = std::min<int>(resolve_workers(config.workers, options.workers),
                                    static_cast<int>(std::max<std::size_t>(1, todo.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return summary;
}

}  // namespace moelab::experiment
