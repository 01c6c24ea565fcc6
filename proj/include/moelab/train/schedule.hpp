#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

namespace moelab::train {

enum class Schedule { linear_decay };

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  int epochs = 1;
  int batch_size = 16;
  double warmup_fraction = 0.2;
  Schedule schedule = Schedule::linear_decay;
  std::uint64_t seed = 0;
  std::optional<double> grad_clip;  // global L2 norm

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Linear ramp 0 -> peak over the first warmup_fraction * total steps, then
// linear decay to 0 at total.
double lr_at(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg);

}  // namespace moelab::train
