#include "gsn/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace gsn;

namespace {

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

EvalPair pair_of(const std::string& hyp, const std::string& ref) {
  return EvalPair{words(hyp), words(ref)};
}

WordVectorTable toy_table() {
  WordVectorTable t(3);
  t.add("a", {1.0, 0.0, 0.0});
  t.add("b", {0.0, 1.0, 0.0});
  t.add("c", {0.0, 0.0, 1.0});
  t.add("d", {1.0, 1.0, 0.0});
  return t;
}

TEST(Bleu, IdenticalCorpusScoresFull) {
  const std::vector<EvalPair> pairs = {pair_of("the cat sat down", "the cat sat down"),
                                       pair_of("hello there", "hello there")};
  for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu_n(pairs, n), 100.0, 1e-9);
}

TEST(Bleu, DisjointCorpusScoresZero) {
  const std::vector<EvalPair> pairs = {pair_of("x y z", "a b c")};
  for (int n = 1; n <= 4; ++n) EXPECT_DOUBLE_EQ(bleu_n(pairs, n), 0.0);
}

TEST(Bleu, ClippingLimitsRepeatedTokens) {
  // "the" appears once in the reference, so only one of three copies counts.
  const std::vector<EvalPair> pairs = {pair_of("the the the", "the cat")};
  EXPECT_NEAR(bleu_n(pairs, 1), 100.0 / 3.0, 0.01);
}

TEST(Bleu, BrevityPenaltyForShortHypothesis) {
  // Unigram precision 1, but the hypothesis has half the reference length.
  const std::vector<EvalPair> pairs = {pair_of("a b", "a b c d")};
  EXPECT_NEAR(bleu_n(pairs, 1), 100.0 * std::exp(-1.0), 1e-6);
}

TEST(Bleu, BigramHandValue) {
  const std::vector<EvalPair> pairs = {pair_of("a b c", "a b c d")};
  EXPECT_NEAR(bleu_n(pairs, 2), 100.0 * std::exp(1.0 - 4.0 / 3.0), 1e-6);
}

TEST(Bleu, NoSmoothingZeroesMissingOrders) {
  // Unigrams overlap but no bigram does, so every order above 1 is zero.
  const std::vector<EvalPair> pairs = {pair_of("a x b", "a b")};
  EXPECT_GT(bleu_n(pairs, 1), 0.0);
  EXPECT_DOUBLE_EQ(bleu_n(pairs, 2), 0.0);
  EXPECT_DOUBLE_EQ(bleu_n(pairs, 3), 0.0);
}

TEST(Bleu, CumulativeOrdersDoNotIncrease) {
  const std::vector<EvalPair> pairs = {pair_of("the cat sat on the mat", "the cat sat on a mat"),
                                       pair_of("good morning all", "good morning everyone")};
  double prev = 100.0;
  for (int n = 1; n <= 4; ++n) {
    const double score = bleu_n(pairs, n);
    EXPECT_LE(score, prev + 1e-9);
    prev = score;
  }
}

TEST(Bleu, PairOrderDoesNotMatter) {
  std::vector<EvalPair> pairs = {pair_of("a b c", "a b d"), pair_of("x y", "x y z"),
                                 pair_of("p q r s", "q r s")};
  const double before = bleu_n(pairs, 2);
  std::reverse(pairs.begin(), pairs.end());
  EXPECT_DOUBLE_EQ(bleu_n(pairs, 2), before);
}

TEST(Bleu, RejectsBadInput) {
  const std::vector<EvalPair> pairs = {pair_of("a", "a")};
  EXPECT_THROW(bleu_n(pairs, 0), ConfigError);
  EXPECT_THROW(bleu_n(pairs, 5), ConfigError);
  EXPECT_THROW(bleu_n({}, 1), ConfigError);
  EXPECT_THROW(bleu_n({pair_of("a", "")}, 1), ConfigError);
}

TEST(RougeL, IdenticalScoresFullAndDisjointScoresZero) {
  EXPECT_NEAR(rouge_l({pair_of("a b c", "a b c")}), 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(rouge_l({pair_of("x y", "a b")}), 0.0);
}

TEST(RougeL, HandValueWithRecallWeighting) {
  // LCS("a b c d", "a c d") = 3, precision 0.75, recall 1.0, beta = 1.2.
  const double f = (1.0 + 1.44) * 1.0 * 0.75 / (1.0 + 1.44 * 0.75);
  EXPECT_NEAR(rouge_l({pair_of("a b c d", "a c d")}), 100.0 * f, 1e-4);
  EXPECT_NEAR(rouge_l({pair_of("a b c d", "a c d")}), 87.9808, 1e-3);
}

TEST(RougeL, SubsequenceNeedNotBeContiguous) {
  // LCS("a x b y c", "a b c") = 3: recall 1, precision 3/5.
  const double f = (1.0 + 1.44) * 1.0 * 0.6 / (1.0 + 1.44 * 0.6);
  EXPECT_NEAR(rouge_l({pair_of("a x b y c", "a b c")}), 100.0 * f, 1e-4);
}

TEST(RougeL, MeanOverPairs) {
  const double one = rouge_l({pair_of("a b", "a b")});
  const double mixed = rouge_l({pair_of("a b", "a b"), pair_of("x", "y")});
  EXPECT_NEAR(mixed, one / 2.0, 1e-9);
}

TEST(WordVectors, LoadInfersWidthAndZeroFillsUnknowns) {
  std::istringstream in("a 1 0 0\nb 0 1 0\n\nc 0 0 1\n");
  const WordVectorTable t = WordVectorTable::load(in);
  EXPECT_EQ(t.dim(), 3);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(t.lookup("a"), (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(t.lookup("zebra"), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(WordVectors, LoadRejectsRaggedOrEmptyInput) {
  std::istringstream ragged("a 1 0 0\nb 0 1\n");
  EXPECT_THROW(WordVectorTable::load(ragged), ConfigError);
  std::istringstream empty("");
  EXPECT_THROW(WordVectorTable::load(empty), ConfigError);
}

TEST(Embedding, IdenticalSentencesScoreOne) {
  const WordVectorTable t = toy_table();
  const EmbeddingScores s = embedding_scores({pair_of("a b c", "a b c")}, t);
  EXPECT_NEAR(s.average, 1.0, 1e-9);
  EXPECT_NEAR(s.greedy, 1.0, 1e-9);
  EXPECT_NEAR(s.extrema, 1.0, 1e-9);
}

TEST(Embedding, HandComputedToyValues) {
  // hyp {a, b} against ref {d} with d = a + b.
  const WordVectorTable t = toy_table();
  const EmbeddingScores s = embedding_scores({pair_of("a b", "d")}, t);
  EXPECT_NEAR(s.average, 1.0, 1e-9);
  // Directed hyp->ref: two best-matches of 1/sqrt(2) over |ref| = 1 gives
  // sqrt(2); the reverse direction gives 1/(2 sqrt(2)); the mean is their
  // average. The first leg exceeding 1 is intentional.
  const double expected = 0.5 * (std::sqrt(2.0) + 1.0 / (2.0 * std::sqrt(2.0)));
  EXPECT_NEAR(s.greedy, expected, 1e-9);
  EXPECT_NEAR(s.greedy, 0.883883, 1e-4);
  EXPECT_NEAR(s.extrema, 1.0, 1e-9);
}

TEST(Embedding, OrthogonalSentencesScoreZero) {
  const WordVectorTable t = toy_table();
  const EmbeddingScores s = embedding_scores({pair_of("a", "c")}, t);
  EXPECT_DOUBLE_EQ(s.average, 0.0);
  EXPECT_DOUBLE_EQ(s.greedy, 0.0);
  EXPECT_DOUBLE_EQ(s.extrema, 0.0);
}

TEST(Embedding, AllUnknownSentenceContributesZero) {
  const WordVectorTable t = toy_table();
  const EmbeddingScores lone = embedding_scores({pair_of("zebra yak", "a")}, t);
  EXPECT_DOUBLE_EQ(lone.average, 0.0);
  EXPECT_DOUBLE_EQ(lone.greedy, 0.0);
  EXPECT_DOUBLE_EQ(lone.extrema, 0.0);
  // Averaging still divides by the full pair count.
  const EmbeddingScores mixed = embedding_scores({pair_of("a", "a"), pair_of("zebra", "a")}, t);
  EXPECT_NEAR(mixed.average, 0.5, 1e-9);
}

TEST(Embedding, ExtremaPicksLargestMagnitudePerDimension) {
  WordVectorTable t(2);
  t.add("p", {3.0, -1.0});
  t.add("q", {-4.0, 0.5});
  // extrema(p q) = (-4, -1); cosine with itself is 1.
  const EmbeddingScores s = embedding_scores({pair_of("p q", "p q")}, t);
  EXPECT_NEAR(s.extrema, 1.0, 1e-9);
  // Against p alone: cos((-4,-1), (3,-1)) = -11 / (sqrt(17) sqrt(10)).
  const EmbeddingScores vs = embedding_scores({pair_of("p q", "p")}, t);
  EXPECT_NEAR(vs.extrema, -11.0 / std::sqrt(170.0), 1e-9);
}

TEST(Report, FourDecimalTabSeparatedLines) {
  const std::vector<EvalPair> pairs = {pair_of("a b c", "a b c")};
  const WordVectorTable t = toy_table();
  const std::string report = metrics_report(pairs, &t);
  std::istringstream in(report);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos) << line;
    const std::string value = line.substr(tab + 1);
    const auto dot = value.find('.');
    ASSERT_NE(dot, std::string::npos) << line;
    EXPECT_EQ(value.size() - dot - 1, 4u) << line;
  }
  EXPECT_EQ(lines, 8);
  EXPECT_NE(report.find("bleu-1\t100.0000"), std::string::npos);
  EXPECT_NE(report.find("rouge-l\t100.0000"), std::string::npos);
  EXPECT_NE(report.find("embed-greedy\t1.0000"), std::string::npos);
  // Without a table only the overlap metrics appear.
  std::istringstream bare(metrics_report(pairs, nullptr));
  lines = 0;
  while (std::getline(bare, line)) ++lines;
  EXPECT_EQ(lines, 5);
}

}  // namespace
