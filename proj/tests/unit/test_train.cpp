#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "moelab/errors.hpp"
#include "moelab/model/checkpoint.hpp"
#include "moelab/tasks/phonebook.hpp"
#include "moelab/tasks/shortest_path.hpp"
#include "moelab/train/adamw.hpp"
#include "moelab/train/batching.hpp"
#include "moelab/train/capacity.hpp"
#include "moelab/train/evaluate.hpp"
#include "moelab/train/schedule.hpp"
#include "moelab/train/trainer.hpp"

using namespace moelab;
using namespace moelab::train;

namespace {

std::vector<tasks::Sample> phonebook_train(std::size_t size, std::uint64_t seed) {
  auto vocab = tasks::Vocabulary::phonebook();
  return tasks::phonebook_samples(tasks::gen_phonebook(size, seed), vocab, size, seed + 1).train;
}

model::ModelConfig small_phonebook_model() {
  return model::ModelConfig::dense(32, 2, static_cast<int>(tasks::Vocabulary::phonebook().size()), 16);
}

TrainConfig overfit_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 200;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Schedule, WarmupThenLinearDecay) {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.warmup_fraction = 0.2;
  EXPECT_DOUBLE_EQ(lr_at(0, 10, c), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(1, 10, c), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(2, 10, c), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(6, 10, c), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(10, 10, c), 0.0);
  EXPECT_THROW(lr_at(11, 10, c), ContractError);
  EXPECT_THROW(lr_at(-1, 10, c), ContractError);
  EXPECT_THROW(lr_at(0, 0, c), ContractError);
  c.warmup_fraction = 0.0;
  EXPECT_DOUBLE_EQ(lr_at(0, 4, c), 1.0);
}

TEST(Schedule, ConfigValidationAndJson) {
  TrainConfig c;
  c.grad_clip = 1.0;
  nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<TrainConfig>()), j);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ContractError);
  TrainConfig w;
  w.warmup_fraction = 1.5;
  EXPECT_THROW(w.validate(), ContractError);
}

TEST(AdamW, FirstStepMovesBySignTimesLr) {
  // after one step mhat = g and vhat = g^2, so the update is lr * g/(|g|+eps)
  ad::Tensor w({3}, {1.0, -2.0, 0.5}, true);
  w.ensure_grad();
  auto g = w.mutable_grad();
  g[0] = 0.3;
  g[1] = -4.0;
  g[2] = 0.0;
  std::vector<OptimTarget> targets{{&w, false, "w"}};
  AdamState st;
  adamw_step(targets, st, 0.1, 0.0);
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(w[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_DOUBLE_EQ(w[2], 0.5);
  EXPECT_EQ(st.step, 1);
}

TEST(AdamW, DecoupledDecayOnlyWhereEnabled) {
  ad::Tensor a({1}, {2.0}, true), b({1}, {2.0}, true);
  a.ensure_grad();
  b.ensure_grad();
  std::vector<OptimTarget> targets{{&a, true, "a"}, {&b, false, "b"}};
  AdamState st;
  adamw_step(targets, st, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(a[0], 2.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(b[0], 2.0);
}

TEST(AdamW, MatchesHandRolledRecurrenceOverSteps) {
  ad::Tensor w({1}, {0.7}, true);
  w.ensure_grad();
  std::vector<OptimTarget> targets{{&w, true, "w"}};
  AdamState st;
  double x = 0.7, m = 0, v = 0;
  const double lr = 0.01, wd = 0.1;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2 * x - 0.3;
    w.mutable_grad()[0] = g;
    adamw_step(targets, st, lr, wd);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x = x * (1 - lr * wd) - lr * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(w[0], x, 1e-14);
  }
}

TEST(Batching, ShiftsTargetsAndPacks) {
  tasks::Sample a;
  a.tokens = {1, 2, 3};
  a.loss_mask = {0, 1, 1};
  a.answer_begin = 1;
  a.answer_end = 3;
  tasks::Sample b;
  b.tokens = {4, 5};
  b.loss_mask = {0, 1};
  b.answer_begin = 1;
  b.answer_end = 2;
  std::vector<tasks::Sample> s{a, b};
  auto batch = make_batch(s);
  EXPECT_EQ(batch.inputs, (std::vector<tasks::TokenId>{1, 2, 4}));
  EXPECT_EQ(batch.targets, (std::vector<tasks::TokenId>{2, 3, 5}));
  EXPECT_EQ(batch.mask, (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(batch.layout.offsets, (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(batch.masked(), 3u);
}

TEST(Trainer, TotalSteps) {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 3;
  EXPECT_EQ(total_steps(33, c), 9);
  EXPECT_EQ(total_steps(32, c), 6);
}

TEST(Trainer, OverfitsSixteenPhonebookEntries) {
  auto data = phonebook_train(16, 1);
  model::Model m(small_phonebook_model(), 2);
  auto log = train::train(m, data, overfit_config());
  EXPECT_EQ(static_cast<std::int64_t>(log.steps.size()), total_steps(16, overfit_config()));
  EXPECT_LT(log.final_loss(), log.steps.front().loss);
  EXPECT_DOUBLE_EQ(evaluate_exact_match(m, data), 1.0);
}

TEST(Trainer, DeterministicGivenSeeds) {
  auto data = phonebook_train(16, 3);
  auto cfg = overfit_config();
  cfg.epochs = 3;
  model::Model a(small_phonebook_model(), 4), b(small_phonebook_model(), 4);
  auto la = train::train(a, data, cfg);
  auto lb = train::train(b, data, cfg);
  ASSERT_EQ(la.steps.size(), lb.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) EXPECT_EQ(la.steps[i].loss, lb.steps[i].loss);
  for (std::size_t p = 0; p < a.params().size(); ++p)
    EXPECT_EQ(a.params()[p].value.values(), b.params()[p].value.values());
}

TEST(Trainer, MoeStepsReportLoadAndAuxLoss) {
  auto data = phonebook_train(32, 4);
  auto cfg = model::ModelConfig::moe(16, 1, 4, 2, 39, 16);
  cfg.aux_load_loss_weight = 0.01;
  model::Model m(cfg, 1);
  TrainConfig tc;
  tc.epochs = 2;
  std::size_t seen = 0;
  TrainOptions opts;
  opts.on_step = [&](const StepLog& s, std::span<const model::RoutingTrace> traces) {
    EXPECT_GE(s.load_ratio, 1.0);
    EXPECT_GT(s.aux_loss, 0.0);
    EXPECT_EQ(traces.size(), 1u);
    ++seen;
  };
  train::train(m, data, tc, opts);
  EXPECT_EQ(seen, static_cast<std::size_t>(total_steps(32, tc)));
}

TEST(Trainer, DivergenceRestoresFiniteWeightsAndCheckpoints) {
  auto data = phonebook_train(16, 5);
  model::Model m(small_phonebook_model(), 6);
  TrainConfig tc;
  tc.learning_rate = 1e300;
  tc.warmup_fraction = 0.0;
  tc.weight_decay = 0.0;
  tc.epochs = 50;
  const auto ckpt = std::filesystem::temp_directory_path() / "moelab_diverged.ckpt";
  std::filesystem::remove(ckpt);
  TrainOptions opts;
  opts.divergence_checkpoint = ckpt;
  EXPECT_THROW(train::train(m, data, tc, opts), DivergenceError);
  EXPECT_NO_THROW(m.check_finite());
  ASSERT_TRUE(std::filesystem::exists(ckpt));
  EXPECT_NO_THROW(model::load_checkpoint(ckpt).check_finite());
  std::filesystem::remove(ckpt);
}

TEST(Trainer, WritesJsonlStepLog) {
  auto data = phonebook_train(16, 7);
  model::Model m(small_phonebook_model(), 8);
  TrainConfig tc;
  const auto path = std::filesystem::temp_directory_path() / "moelab_steps.jsonl";
  std::filesystem::remove(path);
  TrainOptions opts;
  opts.log_path = path;
  train::train(m, data, tc, opts);
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("train_loss"));
    EXPECT_TRUE(j.contains("lr"));
    ++n;
  }
  EXPECT_EQ(n, 1u);
  std::filesystem::remove(path);
}

TEST(Evaluate, TeacherForcedExactMatchAgreesWithGreedyDecoding) {
  auto vocab = tasks::Vocabulary::graph(6);
  auto ds = tasks::gen_shortest_path_dataset(6, 0.35, 80, 40, 2);
  std::size_t max_len = 0;
  for (const auto* split : {&ds.train, &ds.test})
    for (const auto& s : *split) max_len = std::max(max_len, s.tokens.size());
  model::Model m(model::ModelConfig::dense(16, 2, static_cast<int>(vocab.size()), static_cast<int>(max_len)), 3);
  TrainConfig tc;
  tc.epochs = 20;
  tc.learning_rate = 3e-3;
  train::train(m, ds.train, tc);
  auto res = evaluate(m, ds.test, &vocab);
  std::size_t exact = 0, valid = 0;
  const auto eos = vocab.id(tasks::kEos);
  for (const auto& s : ds.test) {
    auto out = greedy_decode(m, s.prompt(), s.answer().size(), eos);
    const auto ref = s.answer();
    if (std::equal(out.begin(), out.end(), ref.begin(), ref.end())) ++exact;
    auto path = tasks::decode_path(out, vocab);
    if (path) {
      auto parsed = tasks::parse_shortest_path_prompt(s.prompt(), vocab);
      auto best = tasks::bfs_shortest_path(parsed.graph, parsed.source, parsed.target);
      if (tasks::is_valid_path(parsed.graph, *path, parsed.source, parsed.target) && path->size() == best->size())
        ++valid;
    }
  }
  EXPECT_EQ(res.total, ds.test.size());
  EXPECT_EQ(res.exact, exact);
  EXPECT_EQ(res.valid_path, valid);
  EXPECT_GE(res.valid_path, res.exact);
}

TEST(Evaluate, UntrainedModelScoresLowAndGreedyStopsAtEos) {
  auto data = phonebook_train(20, 9);
  model::Model m(small_phonebook_model(), 10);
  EXPECT_LT(evaluate_exact_match(m, data), 0.1);
  auto eos = tasks::Vocabulary::phonebook().id(tasks::kEos);
  auto out = greedy_decode(m, data[0].prompt(), 9, eos);
  EXPECT_LE(out.size(), 9u);
  for (std::size_t i = 0; i + 1 < out.size(); ++i) EXPECT_NE(out[i], eos);
}

TEST(Capacity, AscendingStopsAtFirstFailureAndReportsCounts) {
  TrainConfig tc = overfit_config();
  CapacityOptions o;
  o.data_seed = 3;
  std::vector<std::size_t> sizes{16, 4096};
  auto builder = [] { return model::Model(small_phonebook_model(), 1); };
  std::vector<std::size_t> first{16};
  auto pass = phonebook_capacity(builder, tc, first, o);
  EXPECT_EQ(pass.capacity, 16u);
  EXPECT_EQ(pass.params.total_nonembedding, 12448);
  // one epoch fails the first size, so the 4096 book is never trained
  tc.epochs = 1;
  auto fail = phonebook_capacity(builder, tc, sizes, o);
  EXPECT_EQ(fail.capacity, 0u);
  EXPECT_EQ(fail.points.size(), 1u);
}

TEST(Capacity, TrainTestGapOfAMemorizingModel) {
  auto vocab = tasks::Vocabulary::phonebook();
  auto book = tasks::gen_phonebook(32, 11);
  auto data = tasks::phonebook_samples(book, vocab, 32, 1);
  std::vector<tasks::Sample> train_part(data.train.begin(), data.train.begin() + 16);
  std::vector<tasks::Sample> held_out(data.train.begin() + 16, data.train.end());
  model::Model m(small_phonebook_model(), 12);
  train::train(m, train_part, overfit_config());
  EXPECT_GT(train_test_gap(m, train_part, held_out), 0.9);
}
