#include <gtest/gtest.h>

#include <cmath>

#include "moelab/errors.hpp"
#include "moelab/tasks/graph.hpp"
#include "moelab/tasks/memorization.hpp"
#include "moelab/theory/length2.hpp"
#include "moelab/theory/memorizer.hpp"
#include "moelab/theory/quantize.hpp"
#include "moelab/theory/report.hpp"
#include "moelab/theory/sign_router.hpp"

using namespace moelab;
using namespace moelab::theory;

TEST(Length2, StreamLayout) {
  // 4 vertices, s = 3, t = 4; edges s->1, 1->t, 2->t, 1->2
  Graph g(4);
  g.add_edge(3, 1);
  g.add_edge(1, 4);
  g.add_edge(1, 2);
  g.add_edge(2, 4);
  g.set_endpoints(3, 4);
  auto s = encode_length2_input(g);
  std::vector<EdgeToken> expect{{3, 1}, {3, 0}, {3, 0}, {3, 0}, {1, 2}, {4, 1}, {4, 2}, {4, 0}, {4, 0}};
  EXPECT_EQ(s, expect);
}

TEST(Length2, PreThresholdReadsTwoOverVForSharedNeighbours) {
  Graph g(5);
  g.add_edge(4, 1);
  g.add_edge(4, 2);
  g.add_edge(1, 5);
  g.set_endpoints(4, 5);
  auto tf = build_length2_dense(5);
  auto stream = encode_length2_input(g);
  auto h = tf.pre_threshold(stream);
  EXPECT_NEAR(h(0), 2.0 / 5, 1e-12);
  EXPECT_NEAR(h(1), 1.0 / 5, 1e-12);
  EXPECT_NEAR(h(2), 0.0, 1e-12);
  EXPECT_NEAR(tf.threshold, 1.5 / 5, 1e-15);
  EXPECT_TRUE(tf.decide(stream));
  EXPECT_TRUE(eval_explicit(tf, g));
}

TEST(Length2, FamilyMembersAndSizes) {
  auto g = length2_family_member(4, 0b0110);
  EXPECT_EQ(*g.source(), 3);
  EXPECT_EQ(*g.destination(), 4);
  EXPECT_TRUE(g.has_edge(3, 2));
  EXPECT_TRUE(g.has_edge(1, 4));
  EXPECT_EQ(g.edges().size(), 2u);
  EXPECT_FALSE(tasks::has_length2_path(g));
}

TEST(Length2, ExhaustiveCheckPassesAndCountsTheFamily) {
  auto r = verify_length2_exhaustive();
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.instance_count, 1u + 4 + 16 + 64 + 256);
}

TEST(Length2, WrongThresholdsFail) {
  Length2Options high;
  high.threshold_scale = 2.5;
  EXPECT_FALSE(verify_length2_exhaustive(high).passed());
  Length2Options low;
  low.threshold_scale = 0.5;
  EXPECT_FALSE(verify_length2_exhaustive(low).passed());
}

TEST(Length2, RandomGraphsWithMiddleEdges) {
  auto r = verify_length2_random(8, 0.3, 300, 4);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.instance_count, 300u);
}

TEST(Length2, MalformedStreamIsRejected) {
  auto tf = build_length2_dense(4);
  Graph g(5);
  g.set_endpoints(4, 5);
  EXPECT_THROW(eval_explicit(tf, g), ContractError);
  Graph no_endpoints(4);
  EXPECT_THROW(eval_explicit(tf, no_endpoints), ContractError);
  EXPECT_THROW(build_length2_dense(1), ContractError);
}

TEST(Disjointness, AllPairsAgreeUpToFour) {
  for (int r = 1; r <= 4; ++r) {
    auto rep = verify_disjointness(r);
    EXPECT_TRUE(rep.passed()) << r;
    EXPECT_EQ(rep.instance_count, std::size_t{1} << (2 * r));
  }
}

TEST(Quantize, StepAndErrorBound) {
  std::vector<double> v{1.0, -0.5, 0.26, 0.0};
  auto q = quantize_tensor(v, 3);  // 3 positive levels, step 1/3
  EXPECT_DOUBLE_EQ(q[0], 1.0);
  EXPECT_DOUBLE_EQ(q[1], -2.0 / 3.0);
  EXPECT_DOUBLE_EQ(q[2], 1.0 / 3.0);
  EXPECT_EQ(q[3], 0.0);
  for (int bits = 2; bits <= 20; ++bits) {
    const double step = 1.0 / (std::ldexp(1.0, bits - 1) - 1.0);
    auto qb = quantize_tensor(v, bits);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(std::abs(qb[i] - v[i]), step / 2 + 1e-15);
  }
  EXPECT_THROW(quantize_tensor(v, 1), ContractError);
  EXPECT_THROW(quantize_tensor(v, 63), ContractError);
}

TEST(Quantize, Length2SurvivesLogBits) {
  EXPECT_EQ(length2_bits(12), 8);
  EXPECT_EQ(length2_bits(16), 8);
  EXPECT_EQ(length2_bits(17), 9);
  Length2Options o;
  o.bits = 0;
  auto r = verify_length2_exhaustive(o);
  EXPECT_TRUE(r.passed());
  EXPECT_TRUE(r.bits.has_value());
}

TEST(SignRouter, PatternsAndRouting) {
  auto r = SignRouter::make(8, 5);
  EXPECT_EQ(r.sign_bits(), 3);
  // expert 5 = 101b: -, +, -
  EXPECT_EQ(r.vectors(5, 0), -1.0);
  EXPECT_EQ(r.vectors(5, 1), 1.0);
  EXPECT_EQ(r.vectors(5, 2), -1.0);
  EXPECT_EQ(r.vectors(5, 3), 0.0);
  std::vector<double> x{-0.3, 2.0, -1.0, 9.0, 9.0};
  EXPECT_EQ(r.route(x), 5u);
  std::vector<double> zero(5, 0.0);
  EXPECT_EQ(r.route(zero), 0u);
  EXPECT_THROW(SignRouter::make(3, 5), ContractError);
  EXPECT_THROW(SignRouter::make(8, 2), ContractError);
  EXPECT_TRUE(is_power_of_two(1));
  EXPECT_FALSE(is_power_of_two(6));
  EXPECT_EQ(log2_exact(16), 4);
}

TEST(SignRouter, GaussianBalanceHoldsAndIdenticalInputBreaksIt) {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto ok = verify_routing_balance(4096, 16, 8, seeds);
  EXPECT_TRUE(ok.precondition_met);
  EXPECT_TRUE(ok.bound_2n_over_K_satisfied());
  std::size_t total = 0;
  for (auto c : ok.load_histogram) total += c;
  EXPECT_EQ(total, 5u * 4096);
  auto bad = verify_routing_balance(4096, 16, 8, seeds, 0.01, BalanceInput::identical);
  EXPECT_FALSE(bad.bound_2n_over_K_satisfied());
  EXPECT_EQ(bad.max_load, 4096u);
  auto small = verify_routing_balance(64, 16, 8, seeds);
  EXPECT_FALSE(small.precondition_met);
  auto rep = balance_report(bad);
  EXPECT_FALSE(rep.passed());
}

TEST(Memorizer, WidthBound) {
  // 8 * 2048 * ln(61)^4 / (64 * 8)
  EXPECT_EQ(memorizer_width_bound(2048, 64, 8), 9139);
  EXPECT_EQ(memorizer_width_bound(2048, 64, 8),
            static_cast<int>(std::ceil(8.0 * 2048 * std::pow(std::log(61.0), 4) / (64.0 * 8))));
}

TEST(Memorizer, SmallInstanceFitsAndRespectsStructure) {
  auto data = tasks::gen_memorization_set(256, 4, 16, 3);
  MemorizerOptions o;
  o.seed = 1;
  auto m = build_moe_memorizer(data, 4, memorizer_width_bound(256, 16, 4), o);
  auto check = check_memorizer(m, data);
  EXPECT_TRUE(check.all_correct());
  ASSERT_EQ(m.experts.size(), 4u);
  std::int64_t largest = 0;
  for (const auto& e : m.experts) {
    EXPECT_EQ(e.skip, 2);
    EXPECT_EQ(e.w.leftCols(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(e.param_count(), static_cast<std::int64_t>(e.width()) * (16 - 2) + 2 * e.width());
    largest = std::max(largest, e.param_count());
  }
  auto p = memorizer_params(m);
  EXPECT_EQ(p.router, 4 * 16);
  EXPECT_EQ(p.active, p.router + largest);
  EXPECT_GE(p.total, p.active);
  // pooled and sequence paths agree
  for (std::size_t i = 0; i < 10; ++i) {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.pooled(i).data(), 16);
    EXPECT_NEAR(m.output(data.sequence(i), 4), m.output_pooled(x), 1e-12);
  }
}

TEST(Memorizer, TooNarrowBudgetRaisesFitError) {
  auto data = tasks::gen_memorization_set(512, 1, 8, 4);
  MemorizerOptions o;
  o.max_iterations = 50;
  o.restarts = 1;
  try {
    build_moe_memorizer(data, 2, 1, o);
    FAIL() << "width 1 memorized 256 random labels";
  } catch (const FitError& e) {
    EXPECT_LT(e.expert(), 2u);
    EXPECT_GT(e.subset_size(), 100u);
  }
}

TEST(Memorizer, QuantizedModelKeepsSigns) {
  auto data = tasks::gen_memorization_set(256, 4, 16, 5);
  MemorizerOptions o;
  auto m = build_moe_memorizer(data, 4, memorizer_width_bound(256, 16, 4), o);
  EXPECT_TRUE(check_memorizer(quantize_params(m, 16), data).all_correct());
}
