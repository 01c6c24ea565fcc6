#include "moelab/experiment/runner.hpp"

#include <chrono>
#include <map>
#include <mutex>

#include "moelab/errors.hpp"
#include "moelab/experiment/digest.hpp"
#include "moelab/tasks/graph.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/tasks/shortest_path.hpp"
#include "moelab/train/capacity.hpp"
#include "moelab/train/evaluate.hpp"
#include "moelab/train/trainer.hpp"

namespace moelab::experiment {

using nlohmann::json;

std::uint64_t data_seed(const JobSpec& job) { return mix_seed(fnv1a(job.task_args.dump()), job.seed); }

std::uint64_t init_seed(const JobSpec& job) {
  json j = {{"model", job.model}, {"train", job.train}, {"task", to_string(job.task)}};
  return mix_seed(fnv1a(j.dump()), job.seed);
}

double shortest_path_p(const json& args) {
  if (args.contains("p") && !args.at("p").is_null()) return args.at("p").get<double>();
  const int n = args.value("n", 12);
  const double target = args.value("target_mean_length", 3.5);
  const int trials = args.value("calibration_trials", 200);
  const std::uint64_t seed = args.value("calibration_seed", std::uint64_t{0});
  static std::mutex mu;
  static std::map<std::tuple<int, double, int, std::uint64_t>, double> cache;
  const auto key = std::make_tuple(n, target, trials, seed);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double p = tasks::calibrate_p(n, target, trials, seed).p;
  std::lock_guard lock(mu);
  cache[key] = p;
  return p;
}

ExperimentRecord base_record(const JobSpec& job) {
  ExperimentRecord r;
  const auto counts = model::count_params(job.model);
  r.task = to_string(job.task);
  r.arch = model::to_string(job.model.arch);
  r.d = job.model.width;
  r.L = job.model.depth;
  r.H = job.model.heads;
  r.E = job.model.experts;
  r.top_k = job.model.top_k;
  r.total_params = counts.total_nonembedding;
  r.active_params = counts.active_nonembedding;
  r.seed = job.seed;
  r.lr = job.train.learning_rate;
  r.epochs = job.train.epochs;
  return r;
}

namespace {

train::TrainConfig job_train_config(const JobSpec& job) {
  train::TrainConfig tc = job.train;
  tc.seed = mix_seed(init_seed(job), 1);
  return tc;
}

void check_metrics(const JobSpec& job, std::initializer_list<const char*> allowed) {
  for (const auto& m : job.metrics) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || m == a;
    if (!ok) throw SchemaError("metric " + m + " is not produced by task " + to_string(job.task));
  }
}

JobResult run_phonebook(const JobSpec& job, std::map<std::string, double>& metrics) {
  check_metrics(job, {"phonebook_capacity"});
  const auto& args = job.task_args;
  auto sizes = args.value("sizes", std::vector<std::size_t>{256, 512, 1024, 2048, 4096, 8192, 16384});
  train::CapacityOptions opt;
  opt.threshold = args.value("threshold", 0.9);
  opt.num_queries = args.value("num_queries", std::size_t{1000});
  opt.data_seed = data_seed(job);
  const std::string search = args.value("search", std::string("ascending"));
  if (search == "ascending") {
    opt.search = train::CapacityOptions::Search::ascending;
  } else if (search == "exhaustive") {
    opt.search = train::CapacityOptions::Search::exhaustive;
  } else if (search == "bisect") {
    opt.search = train::CapacityOptions::Search::bisect;
  } else {
    throw SchemaError("unknown capacity search " + search);
  }
  const std::uint64_t iseed = init_seed(job);
  auto res = train::phonebook_capacity([&] { return model::Model(job.model, iseed); }, job_train_config(job), sizes,
                                       opt);
  metrics["phonebook_capacity"] = static_cast<double>(res.capacity);
  JobResult out;
  for (const auto& p : res.points) out.details["accuracy_by_size"][std::to_string(p.size)] = p.accuracy;
  return out;
}

JobResult run_shortest_path(const JobSpec& job, std::map<std::string, double>& metrics) {
  check_metrics(job, {"exact_match", "valid_path_accuracy", "final_train_loss", "load_ratio"});
  const auto& args = job.task_args;
  const int n = args.value("n", 12);
  const double p = shortest_path_p(args);
  auto ds = tasks::gen_shortest_path_dataset(n, p, args.value("train_size", std::size_t{1000}),
                                             args.value("test_size", std::size_t{100}), data_seed(job));
  const auto vocab = tasks::Vocabulary::graph(n);
  model::Model m(job.model, init_seed(job));
  auto log = train::train(m, ds.train, job_train_config(job));
  auto eval = train::evaluate(m, ds.test, &vocab);
  metrics["exact_match"] = eval.exact_match();
  metrics["valid_path_accuracy"] = eval.valid_path_accuracy();
  metrics["final_train_loss"] = log.final_loss();
  metrics["load_ratio"] = eval.load_ratio;
  JobResult out;
  out.details["p"] = p;
  return out;
}

}  // namespace

JobResult run_job(const JobSpec& job) {
  const auto start = std::chrono::steady_clock::now();
  std::map<std::string, double> metrics;
  JobResult out;
  switch (job.task) {
    case Task::phonebook: out = run_phonebook(job, metrics); break;
    case Task::shortest_path: out = run_shortest_path(job, metrics); break;
    default: throw ContractError("task " + to_string(job.task) + " is not trainable");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto wanted = job.metrics.empty() ? default_metrics(job.task) : job.metrics;
  for (const auto& name : wanted) {
    ExperimentRecord r = base_record(job);
    r.metric_name = name;
    r.metric_value = metrics.at(name);
    r.wall_seconds = wall;
    out.records.push_back(r);
  }
  return out;
}

}  // namespace moelab::experiment
