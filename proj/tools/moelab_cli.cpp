#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "moelab/errors.hpp"
#include "moelab/experiment/digest.hpp"
#include "moelab/experiment/records.hpp"
#include "moelab/experiment/report.hpp"
#include "moelab/experiment/runner.hpp"
#include "moelab/experiment/sweep.hpp"
#include "moelab/experiment/verify.hpp"
#include "moelab/model/checkpoint.hpp"
#include "moelab/tasks/dataset_io.hpp"
#include "moelab/tasks/phonebook.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/tasks/shortest_path.hpp"
#include "moelab/train/evaluate.hpp"
#include "moelab/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace moelab;

namespace {

constexpr int kUsage = 1;
constexpr int kVerifyFailed = 2;
constexpr int kRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_digest(const fs::path& p) {
  std::cout << p.filename().string() << " " << experiment::hex_digest(experiment::file_digest(p)) << "\n";
}

struct GenArgs {
  std::string task;
  fs::path out = ".";
  std::uint64_t seed = 0;
  long long size = 0;
  long long queries = 1000;
  int n = 12;
  std::optional<double> p;
  double target_mean_length = 3.5;
  long long train = 1000;
  long long test = 100;
};

int cmd_gen(const GenArgs& a) {
  fs::create_directories(a.out);
  if (a.task == "phonebook") {
    if (a.size <= 0) throw UsageError("phonebook size must be positive");
    if (a.queries <= 0) throw UsageError("query count must be positive");
    const auto vocab = tasks::Vocabulary::phonebook();
    auto book = tasks::gen_phonebook(static_cast<std::size_t>(a.size), a.seed);
    auto data = tasks::phonebook_samples(book, vocab, static_cast<std::size_t>(a.queries), mix_seed(a.seed, 1));
    tasks::write_samples(a.out / "train.jsonl", data.train);
    tasks::write_samples(a.out / "queries.jsonl", data.queries);
    vocab.save(a.out / "vocab.txt");
    for (const char* f : {"train.jsonl", "queries.jsonl", "vocab.txt"}) print_digest(a.out / f);
    return 0;
  }
  if (a.task == "shortest-path") {
    if (a.n < 2) throw UsageError("graphs need at least 2 vertices");
    if (a.train < 0 || a.test < 0 || a.train + a.test == 0) throw UsageError("train/test sizes must be non-negative and not both zero");
    json args{{"n", a.n}, {"target_mean_length", a.target_mean_length}};
    if (a.p) {
      if (*a.p <= 0.0 || *a.p > 1.0) throw UsageError("edge probability must lie in (0, 1]");
      args["p"] = *a.p;
    }
    const double p = experiment::shortest_path_p(args);
    auto ds = tasks::gen_shortest_path_dataset(a.n, p, static_cast<std::size_t>(a.train),
                                               static_cast<std::size_t>(a.test), a.seed);
    const auto vocab = tasks::Vocabulary::graph(a.n);
    tasks::write_samples(a.out / "train.jsonl", ds.train);
    tasks::write_samples(a.out / "test.jsonl", ds.test);
    vocab.save(a.out / "vocab.txt");
    std::cout << "p " << p << "\n";
    for (const char* f : {"train.jsonl", "test.jsonl", "vocab.txt"}) print_digest(a.out / f);
    return 0;
  }
  throw UsageError("unknown task " + a.task + " (phonebook | shortest-path)");
}

std::string sample_task(const std::vector<tasks::Sample>& samples) {
  return samples.empty() ? "phonebook" : samples.front().meta.value("task", std::string("phonebook"));
}

experiment::ExperimentRecord record_for(const model::Model& m, const std::string& task, std::uint64_t seed,
                                        double lr, int epochs) {
  experiment::JobSpec job;
  job.task = experiment::task_from_string(task);
  job.model = m.config();
  job.seed = seed;
  job.train.learning_rate = lr;
  job.train.epochs = epochs;
  return experiment::base_record(job);
}

fs::path meta_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".meta.json"); }

struct TrainArgs {
  fs::path data, vocab, checkpoint, log, records;
  std::string arch = "dense";
  int width = 32, depth = 2, heads = 0, experts = 1, top_k = 1, ffn = 0;
  bool bias = false;
  double aux = 0.0;
  train::TrainConfig train;
};

int cmd_train(TrainArgs a) {
  const auto start = std::chrono::steady_clock::now();
  auto samples = tasks::read_samples(a.data);
  if (samples.empty()) throw UsageError("dataset is empty");
  const auto vocab = tasks::Vocabulary::load(a.vocab);
  std::size_t max_len = 0;
  for (const auto& s : samples) max_len = std::max(max_len, s.tokens.size());
  const int V = static_cast<int>(vocab.size()), T = static_cast<int>(max_len);
  model::ModelConfig cfg = a.arch == "moe" ? model::ModelConfig::moe(a.width, a.depth, a.experts, a.top_k, V, T)
                                           : model::ModelConfig::dense(a.width, a.depth, V, T);
  if (a.arch != "moe" && a.arch != "dense") throw UsageError("arch must be dense or moe");
  if (a.heads > 0) cfg.heads = a.heads;
  cfg.ffn_intermediate = a.ffn;
  cfg.ffn_bias = a.bias;
  cfg.aux_load_loss_weight = a.aux;
  try {
    cfg.validate();
    a.train.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const std::string task = sample_task(samples);
  const std::uint64_t init = mix_seed(experiment::fnv1a(json(cfg).dump()), a.train.seed);
  model::Model m(cfg, init);
  train::TrainOptions opts;
  if (!a.log.empty()) opts.log_path = a.log;
  opts.divergence_checkpoint = fs::path(a.checkpoint.string() + ".diverged");
  train::TrainConfig tc = a.train;
  tc.seed = mix_seed(init, 1);
  train::TrainLog log;
  try {
    log = train::train(m, samples, tc, opts);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kRuntime;
  }
  model::save_checkpoint(m, a.checkpoint);
  std::ofstream(meta_path(a.checkpoint)) << json{{"task", task}, {"seed", a.train.seed}, {"train", a.train}}.dump(2) << "\n";
  std::cout << "final_train_loss " << log.final_loss() << "\n";
  if (!a.records.empty()) {
    auto r = record_for(m, task, a.train.seed, a.train.learning_rate, a.train.epochs);
    r.metric_name = "final_train_loss";
    r.metric_value = log.final_loss();
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    experiment::RecordWriter(a.records).append({r});
  }
  return 0;
}

struct EvalArgs {
  fs::path checkpoint, data, vocab, records;
};

int cmd_eval(const EvalArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  if (!fs::exists(a.checkpoint)) throw std::runtime_error("checkpoint " + a.checkpoint.string() + " not found");
  model::Model m = model::load_checkpoint(a.checkpoint);
  auto samples = tasks::read_samples(a.data);
  const auto vocab = tasks::Vocabulary::load(a.vocab);
  const std::string task = sample_task(samples);
  const bool graph = task == "shortest_path";
  auto res = train::evaluate(m, samples, graph ? &vocab : nullptr);
  std::cout << "exact_match " << res.exact_match() << "\n";
  if (graph) std::cout << "valid_path_accuracy " << res.valid_path_accuracy() << "\n";
  if (!a.records.empty()) {
    json meta = json::object();
    if (fs::exists(meta_path(a.checkpoint))) std::ifstream(meta_path(a.checkpoint)) >> meta;
    const auto tc = meta.contains("train") ? meta["train"].get<train::TrainConfig>() : train::TrainConfig{};
    auto base = record_for(m, task, meta.value("seed", std::uint64_t{0}), tc.learning_rate, tc.epochs);
    base.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<experiment::ExperimentRecord> rows;
    base.metric_name = "exact_match";
    base.metric_value = res.exact_match();
    rows.push_back(base);
    if (graph) {
      base.metric_name = "valid_path_accuracy";
      base.metric_value = res.valid_path_accuracy();
      rows.push_back(base);
    }
    experiment::RecordWriter(a.records).append(rows);
  }
  return 0;
}

int cmd_verify(const experiment::VerifyOptions& o, const fs::path& out) {
  if (!theory::is_power_of_two(o.experts)) throw UsageError("experts must be a power of 2");
  auto summary = experiment::run_verify(o);
  experiment::write_verify_reports(summary, out);
  for (const auto& r : summary.reports) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.construction << " instances=" << r.instance_count;
    if (!r.passed()) std::cout << " first failure: " << r.failures.front();
    std::cout << "\n";
  }
  return summary.passed() ? 0 : kVerifyFailed;
}

int cmd_sweep(const fs::path& config_path, int workers, const std::string& output_dir) {
  auto cfg = experiment::load_experiment_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  experiment::SweepOptions opts;
  opts.workers = workers;
  opts.on_done = [](const experiment::JobSpec& job, const experiment::JobResult& res) {
    std::cout << "done " << job.key() << " " << res.records.size() << " rows" << std::endl;
  };
  auto s = experiment::run_sweep(cfg, opts);
  std::cout << "jobs " << s.jobs << " skipped " << s.skipped << " completed " << s.completed << " failed "
            << s.failed << "\n";
  return s.failed ? kRuntime : 0;
}

int cmd_report(const fs::path& csv, const fs::path& out, double floor) {
  auto rows = experiment::read_records(csv);
  experiment::ReportOptions opts;
  opts.capacity_floor = floor;
  auto report = experiment::build_report(rows, opts);
  experiment::write_report(report, out);
  std::cout << report.table();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moelab: dense and mixture-of-experts transformers on synthetic tasks"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a dataset and print file digests");
  g->add_option("task", gen.task, "phonebook | shortest-path")->required();
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed);
  g->add_option("--size", gen.size, "phone-book entries");
  g->add_option("--queries", gen.queries, "phone-book query count");
  g->add_option("-n,--vertices", gen.n, "graph size");
  g->add_option("--p", gen.p, "edge probability (calibrated when absent)");
  g->add_option("--target-mean-length", gen.target_mean_length);
  g->add_option("--train", gen.train);
  g->add_option("--test", gen.test);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model and write a checkpoint");
  t->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
  t->add_option("--vocab", tr.vocab)->required()->check(CLI::ExistingFile);
  t->add_option("--checkpoint", tr.checkpoint)->required();
  t->add_option("--log", tr.log, "JSONL step log");
  t->add_option("--records", tr.records, "CSV to append a record to");
  t->add_option("--arch", tr.arch);
  t->add_option("--width", tr.width);
  t->add_option("--depth", tr.depth);
  t->add_option("--heads", tr.heads);
  t->add_option("--experts", tr.experts);
  t->add_option("--top-k", tr.top_k);
  t->add_option("--ffn-intermediate", tr.ffn);
  t->add_flag("--ffn-bias", tr.bias);
  t->add_option("--aux-loss", tr.aux);
  t->add_option("--lr", tr.train.learning_rate);
  t->add_option("--weight-decay", tr.train.weight_decay);
  t->add_option("--epochs", tr.train.epochs);
  t->add_option("--batch-size", tr.train.batch_size);
  t->add_option("--warmup", tr.train.warmup_fraction);
  t->add_option("--grad-clip", tr.train.grad_clip);
  t->add_option("--seed", tr.train.seed);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "exact-match evaluation of a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
  e->add_option("--vocab", ev.vocab)->required()->check(CLI::ExistingFile);
  e->add_option("--records", ev.records);

  experiment::VerifyOptions vo;
  fs::path verify_out = "verify-reports";
  auto* v = app.add_subcommand("verify-constructions", "check the explicit constructions");
  v->add_option("--out", verify_out);
  v->add_option("--max-vertices", vo.max_vertices);
  v->add_option("--threshold-scale", vo.threshold_scale, "length-2 threshold in units of 1/|V|");
  v->add_option("--r", vo.disjointness_r);
  v->add_option("--experts,-K", vo.experts);
  v->add_option("--dim", vo.dim);
  v->add_option("--law-draws", vo.law_draws);
  v->add_option("--balance-n", vo.balance_n);
  v->add_option("--balance-seeds", vo.balance_seeds);
  v->add_option("--memorizer-n", vo.memorizer_n);
  v->add_option("--memorizer-seq-len", vo.memorizer_seq_len);
  v->add_option("--memorizer-seeds", vo.memorizer_seeds);
  v->add_option("--length2-bits", vo.length2_bits, "0 selects ceil(log2 N) + 4");
  v->add_option("--memorizer-bits", vo.memorizer_bits);
  v->add_option("--seed", vo.seed);

  fs::path sweep_config;
  int workers = 0;
  std::string sweep_out;
  auto* s = app.add_subcommand("sweep", "run a grid sweep from a JSON config");
  s->add_option("config", sweep_config)->required()->check(CLI::ExistingFile);
  s->add_option("--workers", workers);
  s->add_option("--output-dir", sweep_out);

  fs::path csv, report_out = "report";
  double floor = 128.0;
  auto* r = app.add_subcommand("report", "plots and trend summary from a records CSV");
  r->add_option("csv", csv)->required()->check(CLI::ExistingFile);
  r->add_option("--out", report_out);
  r->add_option("--capacity-floor", floor);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*v) return cmd_verify(vo, verify_out);
    if (*s) return cmd_sweep(sweep_config, workers, sweep_out);
    if (*r) return cmd_report(csv, report_out, floor);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
