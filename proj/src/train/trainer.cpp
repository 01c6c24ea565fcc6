#include "moelab/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "moelab/errors.hpp"
#include "moelab/model/checkpoint.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::train {

void to_json(nlohmann::json& j, const StepLog& s) {
  j = {{"step", s.step}, {"epoch", s.epoch},         {"lr", s.lr},
       {"train_loss", s.loss}, {"aux_loss", s.aux_loss}, {"load_ratio", s.load_ratio}};
}

void to_json(nlohmann::json& j, const EvalLog& e) {
  j = {{"step", e.step}, {"exact_match", e.exact_match}, {"load_ratio", e.load_ratio}};
}

std::int64_t total_steps(std::size_t dataset_size, const TrainConfig& cfg) {
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  return static_cast<std::int64_t>((dataset_size + b - 1) / b) * cfg.epochs;
}

BatchLoss batch_loss(model::Model& model, ad::Tape& tape, const Batch& batch) {
  auto fwd = model.forward(tape, batch.inputs, batch.layout);
  BatchLoss out;
  out.nll = ad::cross_entropy_masked(fwd.logits, batch.targets, batch.mask);
  out.loss = fwd.aux_loss.valid() ? ad::add(out.nll, fwd.aux_loss) : out.nll;
  out.traces = std::move(fwd.traces);
  return out;
}

namespace {

void check_traces(std::span<const model::RoutingTrace> traces, std::size_t tokens) {
  for (const auto& tr : traces) {
    if (tr.tokens() != tokens) throw ContractError("routing trace does not cover every token");
    for (std::size_t t = 0; t < tokens; ++t) {
      double total = 0.0;
      for (std::size_t s = 0; s < tr.top_k; ++s) {
        total += tr.gates[t * tr.top_k + s];
        for (std::size_t r = 0; r < s; ++r) {
          if (tr.chosen[t * tr.top_k + r] == tr.chosen[t * tr.top_k + s]) {
            throw ContractError("token routed twice to the same expert");
          }
        }
      }
      if (std::abs(total - 1.0) > 1e-9) throw ContractError("gate weights do not sum to 1");
    }
  }
}

void clip_gradients(std::span<const OptimTarget> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.value->has_grad()) continue;
    for (double g : p.value->grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double f = max_norm / norm;
  for (const auto& p : params) {
    if (!p.value->has_grad()) continue;
    for (double& g : p.value->mutable_grad()) g *= f;
  }
}

}  // namespace

TrainLog train(model::Model& model, std::span<const tasks::Sample> data, const TrainConfig& cfg,
               const TrainOptions& options) {
  cfg.validate();
  if (data.empty()) throw ContractError("train needs a nonempty dataset");
  for (const auto& s : data) {
    for (auto t : s.tokens) {
      if (t < 0 || t >= model.config().vocab_size) throw ContractError("dataset token outside the model vocabulary");
    }
  }

  std::vector<OptimTarget> targets;
  for (auto& p : model.params()) targets.push_back({&p.value, p.decay, p.name});
  model.set_trainable(true);

  std::ofstream log_file;
  if (options.log_path) {
    log_file.open(*options.log_path, std::ios::app);
    if (!log_file) throw std::runtime_error("cannot open train log " + options.log_path->string());
  }

  const std::int64_t total = total_steps(data.size(), cfg);
  AdamState state;
  TrainLog log;
  std::vector<ad::Tensor> last_good;
  std::vector<std::size_t> order(data.size());
  std::int64_t step = 0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += bs, ++step) {
      const std::size_t end = std::min(order.size(), begin + bs);
      Batch batch = make_batch(data, std::span(order).subspan(begin, end - begin));
      const double lr = lr_at(step, total, cfg);

      last_good.clear();
      for (const auto& p : model.params()) last_good.push_back(p.value);
      StepLog entry{step, epoch, lr, 0.0, 0.0, 1.0};
      try {
        for (auto& p : model.params()) {
          p.value.ensure_grad();
          p.value.zero_grad();
        }
        ad::Tape tape;
        BatchLoss bl = batch_loss(model, tape, batch);
        entry.loss = bl.nll.value().item();
        entry.aux_loss = bl.loss.value().item() - entry.loss;
        tape.backward(bl.loss);
        if (!bl.traces.empty()) {
          check_traces(bl.traces, batch.inputs.size());
          entry.load_ratio = model::load_balance_stats(bl.traces).max_mean_ratio;
        }
        if (cfg.grad_clip) clip_gradients(targets, *cfg.grad_clip);
        adamw_step(targets, state, lr, cfg.weight_decay);
        model.check_finite();
        if (options.on_step) options.on_step(entry, bl.traces);
      } catch (const NumericError& e) {
        for (std::size_t i = 0; i < last_good.size(); ++i) model.params()[i].value = last_good[i];
        model.set_trainable(false);
        if (options.divergence_checkpoint) model::save_checkpoint(model, *options.divergence_checkpoint);
        throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what());
      }
      log.steps.push_back(entry);
      if (log_file) log_file << nlohmann::json(entry).dump() << '\n';
    }
  }
  model.set_trainable(false);
  return log;
}

}  // namespace moelab::train
