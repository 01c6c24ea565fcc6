#include "moelab/experiment/sweep_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "moelab/errors.hpp"
#include "moelab/experiment/digest.hpp"
#include "moelab/experiment/records.hpp"
#include "moelab/tasks/phonebook.hpp"
#include "moelab/tasks/vocab.hpp"

namespace moelab::experiment {

using nlohmann::json;

std::string to_string(Task t) {
  switch (t) {
    case Task::shortest_path: return "shortest_path";
    case Task::phonebook: return "phonebook";
    case Task::memorization: return "memorization";
    case Task::length2_verify: return "length2_verify";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  for (Task t : {Task::shortest_path, Task::phonebook, Task::memorization, Task::length2_verify}) {
    if (to_string(t) == name) return t;
  }
  throw SchemaError("unknown task " + name);
}

int match_params(int dense_width, int experts) {
  if (experts < 1) throw ContractError("match_params needs K >= 1");
  if (dense_width < 1) throw ContractError("match_params needs a positive width");
  // exact integer floor of m_d / sqrt(K): largest w with w^2 K <= m_d^2
  const long long md = dense_width;
  auto w = static_cast<long long>(std::floor(md / std::sqrt(static_cast<double>(experts))));
  while (w > 0 && w * w * experts > md * md) --w;
  while ((w + 1) * (w + 1) * experts <= md * md) ++w;
  return static_cast<int>(w);
}

int matched_intermediate(const model::ModelConfig& dense, const model::ModelConfig& moe) {
  const auto target = model::count_params(dense).total_nonembedding;
  int best = 1;
  long long best_gap = -1;
  for (int f = 1; f <= 64 * std::max(dense.width, moe.width); ++f) {
    auto c = moe;
    c.ffn_intermediate = f;
    const long long gap = std::llabs(model::count_params(c).total_nonembedding - target);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best = f;
    }
  }
  return best;
}

json JobSpec::to_json() const {
  json j = {{"task", experiment::to_string(task)}, {"model", model}, {"train", train},
            {"seed", seed}, {"task_args", task_args}, {"metrics", metrics}};
  return j;
}

std::string JobSpec::key() const { return hex_digest(fnv1a(to_json().dump())); }

JobSpec job_from_json(const json& j) {
  JobSpec s;
  s.task = task_from_string(j.at("task").get<std::string>());
  s.model = j.at("model").get<model::ModelConfig>();
  s.train = j.at("train").get<train::TrainConfig>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.task_args = j.value("task_args", json::object());
  s.metrics = j.value("metrics", std::vector<std::string>{});
  return s;
}

std::vector<std::string> default_metrics(Task task) {
  switch (task) {
    case Task::phonebook: return {"phonebook_capacity"};
    case Task::shortest_path: return {"exact_match"};
    default: return {};
  }
}

void ExperimentConfig::validate() const {
  if (task != Task::phonebook && task != Task::shortest_path) {
    throw SchemaError("sweeps support the phonebook and shortest_path tasks");
  }
  if (seeds.empty()) throw SchemaError("seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw SchemaError("seeds must be distinct");
  }
  if (models.empty() && matched_total.is_null()) throw SchemaError("model grid is empty");
  for (const auto& m : metrics) {
    if (!is_metric_name(m)) throw SchemaError("unknown metric " + m);
  }
}

ExperimentConfig experiment_config_from_json(const json& j) {
  static const std::set<std::string> known{"task", "output_dir", "seeds", "workers", "metrics",
                                           "task_args", "models", "matched_total", "train"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw SchemaError("unknown sweep config field " + k);
  }
  ExperimentConfig c;
  try {
    c.task = task_from_string(j.at("task").get<std::string>());
    c.output_dir = j.value("output_dir", std::string("runs"));
    c.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
    c.workers = j.value("workers", 0);
    c.metrics = j.value("metrics", default_metrics(c.task));
    c.task_args = j.value("task_args", json::object());
    c.models = j.value("models", json::array());
    c.matched_total = j.contains("matched_total") ? j.at("matched_total") : json();
    c.train = j.value("train", json::object());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

namespace {

std::vector<json> as_list(const json& j, const char* field, json fallback) {
  json v = j.contains(field) ? j.at(field) : fallback;
  if (v.is_array()) {
    if (v.empty()) throw SchemaError(std::string("grid axis ") + field + " is empty");
    return {v.begin(), v.end()};
  }
  return {v};
}

// Cartesian product over named axes, first axis slowest.
void product(const std::vector<std::pair<std::string, std::vector<json>>>& axes, std::size_t i, json& cur,
             std::vector<json>& out) {
  if (i == axes.size()) {
    out.push_back(cur);
    return;
  }
  for (const auto& v : axes[i].second) {
    cur[axes[i].first] = v;
    product(axes, i + 1, cur, out);
  }
}

void fill_task_shape(const ExperimentConfig& cfg, model::ModelConfig& m) {
  if (cfg.task == Task::phonebook) {
    m.vocab_size = static_cast<int>(tasks::Vocabulary::phonebook().size());
    m.max_seq_len = static_cast<int>(1 + tasks::kNameLength + 1 + tasks::kNumberLength + 1);
  } else {
    const int n = cfg.task_args.value("n", 12);
    m.vocab_size = n + 6;
    m.max_seq_len = 4 * n * (n - 1) + n + 6;
  }
}

}  // namespace

std::vector<model::ModelConfig> expand_models(const ExperimentConfig& cfg) {
  std::vector<model::ModelConfig> out;
  for (const auto& group : cfg.models) {
    const std::string arch = group.value("arch", std::string("dense"));
    const bool moe = arch == "moe";
    std::vector<std::pair<std::string, std::vector<json>>> axes{
        {"width", as_list(group, "width", 32)},
        {"depth", as_list(group, "depth", 2)},
        {"experts", as_list(group, "experts", moe ? 8 : 1)},
        {"top_k", as_list(group, "top_k", moe ? 2 : 1)},
        {"heads", as_list(group, "heads", nullptr)},
        {"ffn_intermediate", as_list(group, "ffn_intermediate", 0)},
        {"aux_load_loss_weight", as_list(group, "aux_load_loss_weight", 0.0)},
        {"ffn_bias", as_list(group, "ffn_bias", false)}};
    std::vector<json> combos;
    json cur = json::object();
    product(axes, 0, cur, combos);
    for (auto& c : combos) {
      c["arch"] = arch;
      if (c["heads"].is_null()) c.erase("heads");
      auto m = c.get<model::ModelConfig>();
      fill_task_shape(cfg, m);
      m.validate();
      out.push_back(m);
    }
  }
  if (!cfg.matched_total.is_null()) {
    const auto& mt = cfg.matched_total;
    const int top_k = mt.value("top_k", 2);
    for (const auto& dw : as_list(mt, "dense_width", 64)) {
      for (const auto& depth : as_list(mt, "depth", 2)) {
        model::ModelConfig dense = model::ModelConfig::dense(dw.get<int>(), depth.get<int>(), 1, 1);
        fill_task_shape(cfg, dense);
        out.push_back(dense);
        for (const auto& e : as_list(mt, "experts", json::array({4}))) {
          const int k = e.get<int>();
          model::ModelConfig moe =
              model::ModelConfig::moe(match_params(dense.width, k), dense.depth, k, std::min(top_k, k), 1, 1);
          fill_task_shape(cfg, moe);
          moe.ffn_intermediate = matched_intermediate(dense, moe);
          moe.validate();
          out.push_back(moe);
        }
      }
    }
  }
  return out;
}

std::vector<train::TrainConfig> expand_train(const ExperimentConfig& cfg) {
  const auto& t = cfg.train;
  const train::TrainConfig d;
  std::vector<std::pair<std::string, std::vector<json>>> axes{
      {"learning_rate", as_list(t, "learning_rate", d.learning_rate)},
      {"epochs", as_list(t, "epochs", d.epochs)},
      {"batch_size", as_list(t, "batch_size", d.batch_size)},
      {"weight_decay", as_list(t, "weight_decay", d.weight_decay)},
      {"warmup_fraction", as_list(t, "warmup_fraction", d.warmup_fraction)},
      {"grad_clip", as_list(t, "grad_clip", nullptr)}};
  std::vector<json> combos;
  json cur = json::object();
  product(axes, 0, cur, combos);
  std::vector<train::TrainConfig> out;
  for (auto& c : combos) {
    auto tc = c.get<train::TrainConfig>();
    tc.validate();
    out.push_back(tc);
  }
  return out;
}

std::vector<JobSpec> expand_jobs(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<JobSpec> jobs;
  for (const auto& m : expand_models(cfg)) {
    for (const auto& t : expand_train(cfg)) {
      for (auto seed : cfg.seeds) {
        JobSpec j;
        j.task = cfg.task;
        j.model = m;
        j.train = t;
        j.seed = seed;
        j.task_args = cfg.task_args;
        j.metrics = cfg.metrics;
        jobs.push_back(std::move(j));
      }
    }
  }
  return jobs;
}

}  // namespace moelab::experiment
