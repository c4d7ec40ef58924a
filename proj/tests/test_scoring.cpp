#include <gtest/gtest.h>

#include <random>

#include "ptrag/scoring.hpp"
#include "support.hpp"

using namespace ptrag;
using ptrag::fixture::at_cosine;
using ptrag::fixture::make_tree;

namespace {

const Embedding kQuery{1.0, 0.0};

PaperTree one_section(double embedding_cosine) {
  auto tree = make_tree("T", {{1, "Method", {10}}});
  tree.leaves[0].raw_embedding = at_cosine(embedding_cosine);
  return tree;
}

FunctionGenerator constant_reply(std::string reply) {
  return FunctionGenerator([reply](std::string_view) { return reply; });
}

}  // namespace

TEST(Cosine, Fixtures) {
  std::vector<double> v{0.3, -2.0, 5.0};
  EXPECT_NEAR(cosine(v, v), 1.0, 1e-12);
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_NEAR(cosine(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.70710678, 1e-8);
  EXPECT_EQ(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}), 0.0);
  EXPECT_THROW(cosine(std::vector<double>{1}, std::vector<double>{1, 0}), std::invalid_argument);
}

TEST(Cosine, ScaleInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> k(0.01, 100.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> u(8), v(8);
    for (auto& x : u) x = n(rng);
    for (auto& x : v) x = n(rng);
    double a = k(rng);
    std::vector<double> su = u;
    for (auto& x : su) x *= a;
    EXPECT_NEAR(cosine(su, v), cosine(u, v), 1e-12);
  }
}

TEST(SectionScore, FusesAlignmentAndEmbedding) {
  auto tree = one_section(0.6);
  auto f = constant_reply("1.0");
  auto s = score_section("q", kQuery, tree, 1, &f, 0.5);
  EXPECT_NEAR(s.fused, 0.8, 1e-9);
  EXPECT_FALSE(s.fallback);
  EXPECT_EQ(score_section("q", kQuery, tree, 1, &f, 1.0).fused, 1.0);
}

TEST(SectionScore, BackendDownUsesEmbeddingAlone) {
  auto tree = one_section(0.42);
  FailingGenerator down;
  auto s = score_section("q", kQuery, tree, 1, &down, 0.5);
  EXPECT_NEAR(s.fused, 0.42, 1e-12);
  EXPECT_TRUE(s.fallback);
  auto garbled = constant_reply("very relevant");
  EXPECT_TRUE(score_section("q", kQuery, tree, 1, &garbled, 0.5).fallback);
  auto out_of_range = constant_reply("1.5");
  EXPECT_TRUE(score_section("q", kQuery, tree, 1, &out_of_range, 0.5).fallback);
}

TEST(SectionScore, SectionVectorIsMeanOfSubtreeLeaves) {
  auto tree = make_tree("T", {{1, "A", {1}}, {2, "A.1", {1}}});
  tree.leaves[0].raw_embedding = Embedding{1.0, 0.0};
  tree.leaves[1].raw_embedding = Embedding{0.0, 1.0};
  EXPECT_EQ(section_vector(tree, 1), (Embedding{0.5, 0.5}));
  EXPECT_EQ(section_vector(tree, 2), (Embedding{0.0, 1.0}));
}

// R is non-decreasing in both F and E for every alpha.
TEST(SectionScore, FusionIsMonotone) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), f1 = u(rng), f2 = u(rng), e1 = u(rng), e2 = u(rng);
    if (f1 > f2) std::swap(f1, f2);
    if (e1 > e2) std::swap(e1, e2);
    EXPECT_LE(blend(a, f1, e1), blend(a, f2, e1) + 1e-15);
    EXPECT_LE(blend(a, f1, e1), blend(a, f1, e2) + 1e-15);
  }
}

TEST(SegmentScore, FusesChannels) {
  LeafSegment leaf;
  leaf.raw_embedding = at_cosine(0.5);
  leaf.summary_embedding = at_cosine(0.9);
  EXPECT_NEAR(score_segment(kQuery, leaf, 0.8).score, 0.58, 1e-9);
  EXPECT_NEAR(score_segment(kQuery, leaf, 1.0).score, 0.5, 1e-12);
  leaf.summary_embedding.reset();
  EXPECT_NEAR(score_segment(kQuery, leaf, 0.8).score, 0.5, 1e-12);
  EXPECT_THROW(score_segment(kQuery, leaf, 1.2), std::invalid_argument);
}

namespace {

struct Reverser : Reranker {
  std::vector<double> score(std::string_view, const std::vector<std::string>& texts) override {
    std::vector<double> s;
    for (std::size_t i = 0; i < texts.size(); ++i) s.push_back(static_cast<double>(i));
    return s;
  }
};

struct BrokenReranker : Reranker {
  std::vector<double> score(std::string_view, const std::vector<std::string>&) override { throw BackendError("x"); }
};

std::vector<ScoredSegment> three() { return {{0, 0, 0, 0.9, false}, {1, 0, 0, 0.5, false}, {2, 0, 0, 0.1, false}}; }

}  // namespace

TEST(Rerank, IdentityCases) {
  auto tree = make_tree("T", {{1, "A", {1, 1, 1}}});
  Reverser rev;
  BrokenReranker broken;
  EXPECT_EQ(rerank("q", three(), 2, nullptr, tree), three());
  EXPECT_EQ(rerank("q", three(), 0, &rev, tree), three());
  EXPECT_EQ(rerank("q", three(), 2, &broken, tree), three());
}

TEST(Rerank, ReversingTopTwoSwapsThem) {
  auto tree = make_tree("T", {{1, "A", {1, 1, 1}}});
  Reverser rev;
  auto out = rerank("q", three(), 2, &rev, tree);
  EXPECT_DOUBLE_EQ(out[0].score, 0.5);
  EXPECT_DOUBLE_EQ(out[1].score, 0.9);
  EXPECT_TRUE(out[0].reranked);
  EXPECT_TRUE(out[1].reranked);
  EXPECT_FALSE(out[2].reranked);
  EXPECT_DOUBLE_EQ(out[2].score, 0.1);
}
