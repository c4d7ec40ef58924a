#include <gtest/gtest.h>

#include <random>

#include "ptrag/outline.hpp"
#include "ptrag/prompts.hpp"
#include "support.hpp"

using namespace ptrag;

namespace {

HeadingCandidate cand(std::string text, int hashes, std::size_t line) { return {std::move(text), hashes, line, 1.0}; }

std::vector<std::string> titles_of(const OutlineTree& t) {
  std::vector<std::string> out;
  for (const auto& n : t.nodes) out.push_back(n.title);
  return out;
}

}  // namespace

TEST(Extraction, SimpleHeadings) {
  auto c = extract_heading_candidates("# A\nbody\n## B");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], cand("A", 1, 0));
  EXPECT_EQ(c[1], cand("B", 2, 2));
}

TEST(Extraction, EmptyInput) { EXPECT_TRUE(extract_heading_candidates("").empty()); }

TEST(Extraction, SkipsFencedCode) {
  auto c = extract_heading_candidates("```\n# not a heading\n```\n# C");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], cand("C", 1, 3));
}

TEST(Extraction, ClosingHashesAndBareHashes) {
  auto c = extract_heading_candidates("## Title ##\n###\n#C#");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].text, "Title");
  EXPECT_EQ(c[1].text, "C#");
}

// Rendering candidates back to heading lines and extracting again is a fixed
// point.
TEST(Extraction, RenderThenExtractIsIdempotent) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 200; ++round) {
    std::string doc;
    std::size_t n = rng() % 12;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 3 == 0) doc += "```\n# fenced " + std::to_string(i) + "\n```\n";
      doc += std::string(1 + rng() % 6, '#') + " H" + std::to_string(i) + "\n";
      doc += fixture::words(rng, rng() % 8, fixture::filler_vocab()) + "\n";
    }
    auto first = extract_heading_candidates(doc);
    std::string rendered;
    for (const auto& c : first) rendered += std::string(static_cast<std::size_t>(c.hash_depth), '#') + " " + c.text + "\n";
    auto second = extract_heading_candidates(rendered);
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
      EXPECT_EQ(first[i].text, second[i].text);
      EXPECT_EQ(first[i].hash_depth, second[i].hash_depth);
      EXPECT_EQ(second[i].line_index, i);
    }
  }
}

TEST(Numbering, Depths) {
  EXPECT_EQ(numbering_depth("3.2.1 Details"), 3);
  EXPECT_EQ(numbering_depth("1 Introduction"), 1);
  EXPECT_EQ(numbering_depth("2. Method"), 1);
  EXPECT_EQ(numbering_depth("A.1 Proofs"), 2);
  EXPECT_EQ(numbering_depth("A Study of Things"), 0);
  EXPECT_EQ(numbering_depth("Introduction"), 0);
  EXPECT_EQ(numbering_depth("2023 Results"), 0);
}

TEST(RuleLadder, ConventionalNameIsTopLevel) {
  EXPECT_EQ(rule_fallback_level(cand("Introduction", 4, 1), 3), 1);
  EXPECT_EQ(rule_fallback_level(cand("5. Related Work", 3, 1), 2), 1);
}

TEST(RuleLadder, NumberingPrefixGivesDepth) { EXPECT_EQ(rule_fallback_level(cand("3.2.1 Details", 1, 1), 0), 3); }

TEST(RuleLadder, HashDepthIsClampedBelowOpenDepth) {
  EXPECT_EQ(rule_fallback_level(cand("Odd Title", 7, 1), 1), 2);
  EXPECT_EQ(rule_fallback_level(cand("Odd Title", 1, 3), 3), 1);
}

TEST(Classification, StubNumberingRelations) {
  RuleStubGenerator stub;
  HeadingCandidate a = cand("1 Introduction", 2, 0);
  HeadingCandidate b = cand("1.1 Background", 3, 4);
  auto child = classify_adjacent_pair(a, b, {}, stub);
  EXPECT_EQ(child.selected, Relation::Child);
  EXPECT_DOUBLE_EQ(b.confidence, child.confidence);
  EXPECT_GE(child.confidence, 0.6);

  HeadingCandidate c = cand("2 Method", 2, 0);
  HeadingCandidate d = cand("3 Experiments", 2, 9);
  EXPECT_EQ(classify_adjacent_pair(c, d, {}, stub).selected, Relation::Sibling);
}

TEST(Classification, MalformedReplyHasZeroConfidence) {
  FunctionGenerator garbled([](std::string_view) { return std::string("NotAHeading, definitely"); });
  HeadingCandidate a = cand("A", 1, 0);
  HeadingCandidate b = cand("B", 2, 3);
  auto label = classify_adjacent_pair(a, b, {}, garbled);
  EXPECT_EQ(label.confidence, 0.0);
  EXPECT_EQ(b.confidence, 0.0);

  FailingGenerator down;
  EXPECT_EQ(classify_adjacent_pair(a, b, {}, down).confidence, 0.0);
}

TEST(Classification, ArgmaxTieOrder) {
  EXPECT_EQ(RelationLabel::from_probabilities({0.4, 0.4, 0.1, 0.1}).selected, Relation::Child);
  EXPECT_EQ(RelationLabel::from_probabilities({0.1, 0.4, 0.4, 0.1}).selected, Relation::Sibling);
  EXPECT_EQ(RelationLabel::from_probabilities({0.1, 0.1, 0.4, 0.4}).selected, Relation::AncestorDescendant);
}

TEST(RelationReply, Parsing) {
  auto p = parse_relation_reply("[2, 1, 1, 0]");
  ASSERT_TRUE(p);
  EXPECT_DOUBLE_EQ((*p)[0], 0.5);
  EXPECT_FALSE(parse_relation_reply("0.5 0.5 0"));
  EXPECT_FALSE(parse_relation_reply("0.5 0.5 0 0 0"));
  EXPECT_FALSE(parse_relation_reply("0.5 -0.5 0 1"));
  EXPECT_FALSE(parse_relation_reply("0 0 0 0"));
  EXPECT_FALSE(parse_relation_reply("child"));
}

TEST(Reconcile, ChildSiblingDemotion) {
  std::vector<HeadingCandidate> c{cand("A", 1, 0), cand("B", 2, 2), cand("C", 2, 4), cand("D", 2, 6)};
  std::vector<RelationLabel> l{RelationLabel::certain(Relation::Child), RelationLabel::certain(Relation::Sibling),
                               RelationLabel::certain(Relation::NotAHeading)};
  auto t = reconcile_hierarchy(c, l, 8);
  EXPECT_TRUE(validate_outline(t).empty());
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].children, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(t.demoted_lines, (std::vector<std::size_t>{6}));
  // The demoted line stays inside C's span.
  EXPECT_EQ(t.nodes[2].line_end, 8u);
}

TEST(Reconcile, SingleCandidate) {
  auto t = reconcile_hierarchy({cand("A", 1, 0)}, {}, 5);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.root().title, "A");
  EXPECT_TRUE(t.root().children.empty());
  EXPECT_FALSE(t.synthetic_root);
}

TEST(Reconcile, AncestorDescendantPopsOneLevel) {
  std::vector<HeadingCandidate> c{cand("A", 1, 0), cand("B", 2, 1), cand("C", 3, 2), cand("D", 2, 3)};
  std::vector<RelationLabel> l{RelationLabel::certain(Relation::Child), RelationLabel::certain(Relation::Child),
                               RelationLabel::certain(Relation::AncestorDescendant)};
  auto t = reconcile_hierarchy(c, l, 4);
  EXPECT_TRUE(validate_outline(t).empty());
  ASSERT_EQ(t.nodes.size(), 4u);
  EXPECT_EQ(t.nodes[2].parent, 1u);
  EXPECT_EQ(t.nodes[3].parent, 0u);
  EXPECT_EQ(t.nodes[3].depth, 1);
}

TEST(Reconcile, NoCandidatesGivesSyntheticRoot) {
  auto t = reconcile_hierarchy({}, {}, 12);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.root().title, "Document");
  EXPECT_TRUE(t.synthetic_root);
  EXPECT_EQ(t.root().line_end, 12u);
}

TEST(Reconcile, RejectsUnorderedLines) {
  EXPECT_THROW(reconcile_hierarchy({cand("A", 1, 3), cand("B", 2, 3)}, {RelationLabel::certain(Relation::Child)}, 5),
               std::invalid_argument);
}

TEST(Reconcile, LowConfidenceUsesRulesOrFlat) {
  std::vector<HeadingCandidate> c{cand("Paper", 1, 0), cand("1 Intro", 2, 1), cand("1.1 Detail", 3, 2),
                                  cand("Results", 2, 3)};
  std::vector<RelationLabel> l(3, RelationLabel::failed());
  auto rules = reconcile_hierarchy(c, l, 4);
  EXPECT_EQ(rules.nodes[1].depth, 1);
  EXPECT_EQ(rules.nodes[2].depth, 2);
  EXPECT_EQ(rules.nodes[3].depth, 1);

  OutlineOptions flat;
  flat.fallback = OutlineFallback::Flat;
  auto f = reconcile_hierarchy(c, l, 4, flat);
  for (std::size_t i = 1; i < f.nodes.size(); ++i) EXPECT_EQ(f.nodes[i].depth, 1);
}

// Independent model of the rule ladder for headings without conventional
// names: numbering depth if present, otherwise relative hash depth, always
// clamped to one below the open depth.
TEST(Reconcile, FallbackLadderMatchesOracle) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 500; ++round) {
    int title_hashes = 1 + static_cast<int>(rng() % 2);
    std::vector<HeadingCandidate> c{cand("Paper", title_hashes, 0)};
    std::size_t n = 1 + rng() % 10;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      if (rng() % 2) {
        int parts = 1 + static_cast<int>(rng() % 3);
        for (int p = 0; p < parts; ++p) text += (p ? "." : "") + std::to_string(1 + rng() % 4);
        text += " Part";
      } else {
        text = "Topic " + std::to_string(i);
      }
      c.push_back(cand(text, 1 + static_cast<int>(rng() % 5), i + 1));
    }
    auto t = reconcile_hierarchy(c, std::vector<RelationLabel>(n, RelationLabel::failed()), n + 1);
    ASSERT_TRUE(validate_outline(t).empty());
    int open = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      int want = numbering_depth(c[i].text);
      if (want == 0) want = std::max(1, c[i].hash_depth - title_hashes);
      want = std::clamp(want, 1, open + 1);
      EXPECT_EQ(t.nodes[i].depth, want) << c[i].text;
      open = want;
    }
  }
}

TEST(Reconcile, FuzzedLabelsAlwaysValid) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 1000; ++round) {
    std::size_t n = 1 + rng() % 15;
    std::vector<HeadingCandidate> c;
    std::size_t line = rng() % 3;
    for (std::size_t i = 0; i < n; ++i) {
      c.push_back(cand("H" + std::to_string(i), 1 + static_cast<int>(rng() % 6), line));
      line += 1 + rng() % 4;
    }
    std::vector<RelationLabel> l;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::array<double, 4> p{};
      for (double& x : p) x = static_cast<double>(rng() % 100);
      p[rng() % 4] += 1.0;
      double s = p[0] + p[1] + p[2] + p[3];
      for (double& x : p) x /= s;
      l.push_back(rng() % 4 == 0 ? RelationLabel::failed() : RelationLabel::from_probabilities(p));
    }
    auto t = reconcile_hierarchy(c, l, line);
    auto errors = validate_outline(t);
    ASSERT_TRUE(errors.empty()) << errors.front();
    // Every candidate is either a node or demoted, never both.
    EXPECT_EQ(t.nodes.size() + t.demoted_lines.size(), n);
  }
}

TEST(ValidateOutline, DetectsBrokenTrees) {
  auto t = reconcile_hierarchy({cand("A", 1, 0), cand("B", 2, 1)}, {RelationLabel::certain(Relation::Child)}, 3);
  auto bad_depth = t;
  bad_depth.nodes[1].depth = 3;
  EXPECT_FALSE(validate_outline(bad_depth).empty());
  auto bad_lines = t;
  bad_lines.nodes[1].line_begin = 0;
  EXPECT_FALSE(validate_outline(bad_lines).empty());
  auto orphan = t;
  orphan.nodes[0].children.clear();
  EXPECT_FALSE(validate_outline(orphan).empty());
}

TEST(InferOutline, StubOnNumberedPaper) {
  RuleStubGenerator stub;
  auto r = infer_outline("# Paper\n## 1 Introduction\ntext\n### 1.1 Background\ntext\n## 2 Method\ntext\n", stub);
  EXPECT_EQ(titles_of(r.tree),
            (std::vector<std::string>{"Paper", "1 Introduction", "1.1 Background", "2 Method"}));
  EXPECT_EQ(r.tree.nodes[2].parent, 1u);
  EXPECT_EQ(r.tree.nodes[3].parent, 0u);
  EXPECT_EQ(r.fallback_pairs, 1u);  // title vs "1 Introduction" has no numbering on the title
}

TEST(InferOutline, FailingBackendStillBuildsTree) {
  FailingGenerator down;
  auto r = infer_outline("# Paper\n## Introduction\n## Method\n### Setup\n", down);
  EXPECT_TRUE(validate_outline(r.tree).empty());
  EXPECT_EQ(r.fallback_pairs, 3u);
  EXPECT_EQ(r.tree.nodes[3].depth, 2);
}

TEST(Reconcile, UnnumberedSiblingsUnderTitleStayAtDepthOne) {
  std::vector<HeadingCandidate> c{cand("Paper", 1, 0), cand("Overview", 2, 1), cand("Sites", 2, 2),
                                  cand("Imaging", 2, 3)};
  auto t = reconcile_hierarchy(c, std::vector<RelationLabel>(3, RelationLabel::failed()), 4);
  for (std::size_t i = 1; i < t.nodes.size(); ++i) EXPECT_EQ(t.nodes[i].depth, 1) << t.nodes[i].title;
}
