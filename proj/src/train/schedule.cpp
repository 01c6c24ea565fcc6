#include "moelab/train/schedule.hpp"

#include <string>

#include "moelab/errors.hpp"

namespace moelab::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ContractError("invalid train config: " + what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be nonnegative");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) fail("warmup_fraction must lie in [0, 1)");
  if (epochs < 0) fail("epochs must be nonnegative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) fail("grad_clip must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},               {"batch_size", c.batch_size},
       {"warmup_fraction", c.warmup_fraction}, {"schedule", "linear_decay"},
       {"seed", c.seed}};
  if (c.grad_clip) j["grad_clip"] = *c.grad_clip;
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  if (j.value("schedule", std::string("linear_decay")) != "linear_decay") {
    throw SchemaError("unknown schedule " + j.at("schedule").dump());
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("grad_clip") && !j.at("grad_clip").is_null()) c.grad_clip = j.at("grad_clip").get<double>();
}

double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw ContractError("lr_at needs total_steps >= 1");
  if (step < 0 || step > total_steps) throw ContractError("lr_at: step outside [0, total_steps]");
  const double s = static_cast<double>(step), total = static_cast<double>(total_steps);
  const double warm = cfg.warmup_fraction * total;
  if (s < warm) return cfg.learning_rate * s / warm;
  return cfg.learning_rate * (total - s) / (total - warm);
}

}  // namespace moelab::train
