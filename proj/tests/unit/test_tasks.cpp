#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "moelab/errors.hpp"
#include "moelab/tasks/dataset_io.hpp"
#include "moelab/tasks/graph.hpp"
#include "moelab/tasks/memorization.hpp"
#include "moelab/tasks/phonebook.hpp"
#include "moelab/tasks/rng.hpp"
#include "moelab/tasks/shortest_path.hpp"
#include "moelab/tasks/vocab.hpp"

using namespace moelab;
using namespace moelab::tasks;

namespace {

Graph diamond() {
  // 1 -> 2 -> 4, 1 -> 3 -> 4, 4 -> 5, 3 -> 5
  Graph g(5);
  g.add_edge(1, 3);
  g.add_edge(1, 2);
  g.add_edge(2, 4);
  g.add_edge(3, 4);
  g.add_edge(4, 5);
  g.add_edge(3, 5);
  return g;
}

std::vector<std::string> words(const Vocabulary& v, std::span<const TokenId> ids) { return v.decode(ids); }

}  // namespace

TEST(Rng, SeedsAreDeterministicAndMixIsInjective) {
  Rng a(7), b(7);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) EXPECT_TRUE(seen.insert(mix_seed(42, i)).second);
  EXPECT_THROW(Rng(1).below(0), ContractError);
}

TEST(Rng, NormalMomentsAreStandard) {
  Rng rng(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Graph, RejectsSelfLoopsDuplicatesAndRange) {
  Graph g(3);
  g.add_edge(1, 2);
  EXPECT_THROW(g.add_edge(1, 2), ContractError);
  EXPECT_THROW(g.add_edge(2, 2), ContractError);
  EXPECT_THROW(g.add_edge(0, 1), ContractError);
  EXPECT_THROW(g.add_edge(1, 4), ContractError);
  EXPECT_THROW(Graph(0), ContractError);
  EXPECT_THROW(g.set_endpoints(1, 1), ContractError);
}

TEST(Graph, BfsPicksLexicographicallySmallestShortestPath) {
  Graph g = diamond();
  EXPECT_EQ(*bfs_shortest_path(g, 1, 4), (std::vector<Vertex>{1, 2, 4}));
  EXPECT_EQ(*bfs_shortest_path(g, 1, 5), (std::vector<Vertex>{1, 3, 5}));
  EXPECT_FALSE(bfs_shortest_path(g, 5, 1).has_value());
  EXPECT_EQ(bfs_distances(g, 1), (std::vector<int>{0, 1, 1, 2, 2}));
  EXPECT_EQ(bfs_distances(g, 4), (std::vector<int>{-1, -1, -1, 0, 1}));
}

TEST(Graph, ValidPathChecksEveryHop) {
  Graph g = diamond();
  std::vector<Vertex> ok{1, 2, 4, 5}, gap{1, 4, 5}, wrong_end{1, 2, 4};
  EXPECT_TRUE(is_valid_path(g, ok, 1, 5));
  EXPECT_FALSE(is_valid_path(g, gap, 1, 5));
  EXPECT_FALSE(is_valid_path(g, wrong_end, 1, 5));
  std::vector<Vertex> out_of_range{1, 9};
  EXPECT_FALSE(is_valid_path(g, out_of_range, 1, 9));
}

TEST(Graph, ErdosRenyiExtremesAndDensity) {
  EXPECT_TRUE(gen_er_graph(6, 0.0, 1).edges().empty());
  EXPECT_EQ(gen_er_graph(6, 1.0, 1).edges().size(), 30u);
  EXPECT_THROW(gen_er_graph(6, 1.5, 1), ContractError);
  EXPECT_THROW(gen_er_graph(1, 0.5, 1), ContractError);
  std::size_t edges = 0;
  const int graphs = 400, n = 12;
  for (int s = 0; s < graphs; ++s) edges += gen_er_graph(n, 0.2, static_cast<std::uint64_t>(s)).edges().size();
  const double pairs = static_cast<double>(graphs) * n * (n - 1);
  const double sigma = std::sqrt(0.2 * 0.8 / pairs);
  EXPECT_NEAR(static_cast<double>(edges) / pairs, 0.2, 4 * sigma);
  EXPECT_EQ(gen_er_graph(8, 0.3, 9).edges(), gen_er_graph(8, 0.3, 9).edges());
}

TEST(Graph, MeanPathLengthOfCompleteGraphIsOne) {
  EXPECT_DOUBLE_EQ(mean_query_path_length(6, 1.0, 3, 0), 1.0);
}

TEST(Graph, MeanPathLengthOfAPathGraph) {
  // An oracle by hand: on the directed path 1->2->3->4 the connected pairs
  // have distances 1,1,1,2,2,3, mean 10/6.
  Graph g(4);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  g.add_edge(3, 4);
  double sum = 0;
  int pairs = 0;
  for (Vertex u = 1; u <= 4; ++u) {
    auto d = bfs_distances(g, u);
    for (int x : d) {
      if (x > 0) {
        sum += x;
        ++pairs;
      }
    }
  }
  EXPECT_DOUBLE_EQ(sum / pairs, 10.0 / 6.0);
}

TEST(Graph, CalibrationHitsReachableTargetsAndRejectsOthers) {
  auto c = calibrate_p(8, 1.5, 60, 1);
  EXPECT_NEAR(c.estimate, 1.5, 0.1);
  EXPECT_NEAR(mean_query_path_length(8, c.p, 60, 1), c.estimate, 1e-12);
  EXPECT_THROW(calibrate_p(8, 3.5, 30, 1), CalibrationError);
  EXPECT_THROW(calibrate_p(8, 0.5, 30, 1), CalibrationError);
}

TEST(Length2, ReductionGraphEncodesBitvectors) {
  std::vector<std::uint8_t> a{1, 0, 1, 0}, b{0, 0, 1, 1};
  Graph g = gen_length2_instance(a, b);
  EXPECT_EQ(g.num_vertices(), 6);
  EXPECT_EQ(*g.source(), 5);
  EXPECT_EQ(*g.destination(), 6);
  EXPECT_EQ(g.edges().size(), 4u);
  EXPECT_TRUE(has_length2_path(g));
  std::vector<std::uint8_t> b2{0, 1, 0, 1};
  EXPECT_FALSE(has_length2_path(gen_length2_instance(a, b2)));
  std::vector<std::uint8_t> short_b{1};
  EXPECT_THROW(gen_length2_instance(a, short_b), ContractError);
}

TEST(Vocabulary, LayoutsAndRoundTrip) {
  auto g = Vocabulary::graph(12);
  EXPECT_EQ(g.size(), 18u);
  EXPECT_EQ(g.id("1"), 0);
  EXPECT_EQ(g.id("12"), 11);
  EXPECT_EQ(g.token(12), std::string(kEdge));
  EXPECT_THROW(g.id("13"), IndexError);
  EXPECT_THROW(g.token(18), IndexError);
  auto p = Vocabulary::phonebook();
  EXPECT_EQ(p.size(), 39u);
  const auto path = std::filesystem::temp_directory_path() / "moelab_vocab.txt";
  g.save(path);
  EXPECT_EQ(Vocabulary::load(path), g);
  std::filesystem::remove(path);
  EXPECT_THROW(Vocabulary({"a", "a"}), ContractError);
}

TEST(ShortestPath, WireFormatAndMask) {
  auto vocab = Vocabulary::graph(5);
  Graph g(5);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  auto s = shortest_path_sample(g, {1, 3}, vocab, 0);
  s.validate();
  auto w = words(vocab, s.tokens);
  // two edges in some order, one separator between them
  ASSERT_EQ(w.size(), 1u + 7u + 4u + 4u);
  EXPECT_EQ(w.front(), "<BOS>");
  EXPECT_EQ(w[4], "/");
  std::vector<std::string> tail(w.end() - 8, w.end());
  EXPECT_EQ(tail, (std::vector<std::string>{"<SEP>", "1", "3", "<SEP>", "1", "2", "3", "<EOS>"}));
  for (std::size_t i = 0; i < s.tokens.size(); ++i) EXPECT_EQ(s.loss_mask[i], i >= s.answer_begin ? 1 : 0);
  EXPECT_EQ(s.answer_end, s.tokens.size());
  EXPECT_THROW(shortest_path_sample(g, {3, 1}, vocab, 0), ContractError);
}

TEST(ShortestPath, PromptParsesBackToTheGraph) {
  auto vocab = Vocabulary::graph(9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = gen_shortest_path_instance(9, 0.3, seed, vocab);
    auto parsed = parse_shortest_path_prompt(s.prompt(), vocab);
    EXPECT_EQ(parsed.source, s.meta["source"].get<int>());
    EXPECT_EQ(parsed.target, s.meta["target"].get<int>());
    auto path = decode_path(s.answer(), vocab);
    ASSERT_TRUE(path.has_value());
    EXPECT_EQ(*path, *bfs_shortest_path(parsed.graph, parsed.source, parsed.target));
    std::set<Edge> a(parsed.graph.edges().begin(), parsed.graph.edges().end());
    Graph orig = gen_er_graph(9, 0.3, s.meta["graph_seed"].get<std::uint64_t>());
    std::set<Edge> b(orig.edges().begin(), orig.edges().end());
    EXPECT_EQ(a, b);
  }
}

TEST(ShortestPath, DecodePathRejectsJunk) {
  auto vocab = Vocabulary::graph(4);
  std::vector<TokenId> no_eos{vocab.id("1"), vocab.id("2")};
  EXPECT_FALSE(decode_path(no_eos, vocab).has_value());
  std::vector<TokenId> junk{vocab.id("1"), vocab.id("<SEP>"), vocab.id("<EOS>")};
  EXPECT_FALSE(decode_path(junk, vocab).has_value());
  std::vector<TokenId> ok{vocab.id("1"), vocab.id("4"), vocab.id("<EOS>")};
  EXPECT_EQ(*decode_path(ok, vocab), (std::vector<Vertex>{1, 4}));
}

TEST(ShortestPath, DatasetIsDeterministicWithDisjointGraphSeeds) {
  auto a = gen_shortest_path_dataset(8, 0.25, 30, 10, 7);
  auto b = gen_shortest_path_dataset(8, 0.25, 30, 10, 7);
  ASSERT_EQ(a.train.size(), 30u);
  ASSERT_EQ(a.test.size(), 10u);
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(a.train[i].tokens, b.train[i].tokens);
    seeds.insert(a.train[i].meta["graph_seed"].get<std::uint64_t>());
  }
  for (const auto& s : a.test) EXPECT_FALSE(seeds.count(s.meta["graph_seed"].get<std::uint64_t>()));
  EXPECT_THROW(gen_shortest_path_dataset(8, 0.25, 0, 10, 7), ContractError);
}

TEST(Phonebook, EntriesAreUniqueAndWellFormed) {
  auto book = gen_phonebook(100000, 3);
  ASSERT_EQ(book.entries.size(), 100000u);
  std::set<std::string> names, numbers;
  for (const auto& e : book.entries) {
    ASSERT_EQ(e.name.size(), kNameLength);
    ASSERT_EQ(e.number.size(), kNumberLength);
    names.insert(e.name);
    numbers.insert(e.number);
  }
  EXPECT_EQ(names.size(), 100000u);
  EXPECT_EQ(numbers.size(), 100000u);
  EXPECT_THROW(gen_phonebook(kNameSpace + 1, 0), ContractError);
}

TEST(Phonebook, SampleLayoutAndQueries) {
  auto vocab = Vocabulary::phonebook();
  auto book = gen_phonebook(50, 1);
  auto s = phonebook_sample(book.entries[0], vocab);
  s.validate();
  ASSERT_EQ(s.tokens.size(), 16u);
  auto w = vocab.decode(s.tokens);
  EXPECT_EQ(w[0], "<BOS>");
  EXPECT_EQ(w[6], "<SEP>");
  EXPECT_EQ(w[15], "<EOS>");
  EXPECT_EQ(s.answer_begin, 7u);
  EXPECT_EQ(s.answer_end, 16u);
  auto data = phonebook_samples(book, vocab, 20, 2);
  EXPECT_EQ(data.train.size(), 50u);
  EXPECT_EQ(data.queries.size(), 20u);
  std::set<std::size_t> idx;
  for (const auto& q : data.queries) idx.insert(q.meta["entry"].get<std::size_t>());
  EXPECT_EQ(idx.size(), 20u);
  EXPECT_EQ(phonebook_samples(book, vocab, 1000, 2).queries.size(), 50u);
}

TEST(Memorization, ShapesLabelsAndPooling) {
  auto set = gen_memorization_set(64, 4, 3, 5);
  ASSERT_EQ(set.values.size(), 64u * 4 * 3);
  for (int y : set.labels) EXPECT_TRUE(y == 1 || y == -1);
  auto pooled = set.pooled(2);
  auto seq = set.sequence(2);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0;
    for (std::size_t t = 0; t < 4; ++t) m += seq[t * 3 + c];
    EXPECT_NEAR(pooled[c], m / 4, 1e-15);
  }
  EXPECT_THROW(gen_memorization_set(0, 4, 3, 5), ContractError);
}

TEST(DatasetIo, RoundTripAndSchemaErrors) {
  auto vocab = Vocabulary::graph(6);
  auto ds = gen_shortest_path_dataset(6, 0.4, 5, 2, 1);
  const auto path = std::filesystem::temp_directory_path() / "moelab_ds.jsonl";
  write_samples(path, ds.train);
  auto back = read_samples(path);
  ASSERT_EQ(back.size(), ds.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].tokens, ds.train[i].tokens);
    EXPECT_EQ(back[i].loss_mask, ds.train[i].loss_mask);
    EXPECT_EQ(back[i].answer_begin, ds.train[i].answer_begin);
    EXPECT_EQ(back[i].meta, ds.train[i].meta);
  }
  EXPECT_THROW(sample_from_line("{not json"), SchemaError);
  EXPECT_THROW(sample_from_line("{\"tokens\": [1]}"), SchemaError);
  std::filesystem::remove(path);
}
