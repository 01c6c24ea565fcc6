#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "moelab/model/model.hpp"
#include "moelab/train/evaluate.hpp"
#include "moelab/train/schedule.hpp"

namespace moelab::train {

struct CapacityPoint {
  std::size_t size = 0;
  double accuracy = 0.0;
};

struct CapacityResult {
  std::size_t capacity = 0;  // largest passing size, 0 if none
  std::vector<CapacityPoint> points;
  model::ParamCounts params;
};

struct CapacityOptions {
  double threshold = 0.9;
  std::size_t num_queries = 1000;
  std::uint64_t data_seed = 0;
  // ascending: sizes in order, stopping at the first failure.
  // bisect: binary search over the grid, assuming pass/fail is monotone.
  enum class Search { ascending, exhaustive, bisect } search = Search::ascending;
};

using ModelBuilder = std::function<model::Model()>;

// Trains a fresh model on a phone-book of each size and reports the largest
// size whose exact-match accuracy on sampled training entries reaches the
// threshold.
CapacityResult phonebook_capacity(const ModelBuilder& build, const TrainConfig& cfg,
                                  std::span<const std::size_t> sizes, const CapacityOptions& options = {});

// Exact-match accuracy on train_subset minus accuracy on test_set.
double train_test_gap(model::Model& model, std::span<const tasks::Sample> train_subset,
                      std::span<const tasks::Sample> test_set);

}  // namespace moelab::train
