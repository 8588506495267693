#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mner/crf.hpp"
#include "mner/errors.hpp"
#include "mner/labels.hpp"
#include "mner/ops.hpp"
#include "mner/verify/oracles.hpp"

namespace mner {
namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-spread, spread);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

TEST(LabelSchemaTest, DefaultOrderAndLookups) {
  const LabelSchema s;
  ASSERT_EQ(s.size(), 9u);
  EXPECT_EQ(s.tag(0), "O");
  EXPECT_EQ(s.tag(1), "B-PER");
  EXPECT_EQ(s.tag(2), "I-PER");
  EXPECT_EQ(s.index("I-MISC"), 8u);
  EXPECT_FALSE(s.find("B-DATE").has_value());
  EXPECT_THROW(s.index("B-DATE"), ParseError);
  EXPECT_EQ(s.transition_size(), 11u);
}

TEST(LabelSchemaTest, Iob2Moves) {
  const LabelSchema s;
  EXPECT_FALSE(s.allows(s.index("O"), s.index("I-LOC")));
  EXPECT_FALSE(s.allows(s.begin_index(), s.index("I-PER")));
  EXPECT_FALSE(s.allows(s.index("B-PER"), s.index("I-LOC")));
  EXPECT_TRUE(s.allows(s.index("B-PER"), s.index("I-PER")));
  EXPECT_TRUE(s.allows(s.index("I-PER"), s.index("I-PER")));
  EXPECT_TRUE(s.allows(s.index("O"), s.index("B-ORG")));
}

TEST(CrfScoreTest, SingleTokenAndZeroMatrices) {
  const Tensor e = Tensor::from({1, 2}, {0.5, 2.0});
  Tensor t = Tensor::zeros({4, 4});
  t.mutable_data()[2 * 4 + 1] = 0.25;  // BEGIN -> 1
  t.mutable_data()[1 * 4 + 3] = -1.0;  // 1 -> END
  const std::size_t path[] = {1};
  EXPECT_DOUBLE_EQ(crf_score(e, t, path).item(), 2.0 + 0.25 - 1.0);

  const std::size_t longer[] = {0, 1, 1};
  EXPECT_EQ(crf_score(Tensor::zeros({3, 2}), Tensor::zeros({4, 4}), longer).item(), 0.0);
}

TEST(CrfScoreTest, PathValidation) {
  const std::size_t wrong_length[] = {0, 1};
  EXPECT_THROW(crf_score(Tensor::zeros({3, 2}), Tensor::zeros({4, 4}), wrong_length), ContractError);
  const std::size_t out_of_range[] = {2};
  EXPECT_THROW(crf_score(Tensor::zeros({1, 2}), Tensor::zeros({4, 4}), out_of_range), ContractError);
  EXPECT_THROW(crf_log_partition(Tensor::zeros({3, 2}), Tensor::zeros({3, 3})), ShapeError);
}

TEST(CrfPartitionTest, SingleTokenIsLogSumExp) {
  const Tensor e = Tensor::from({1, 3}, {0.1, -0.4, 1.3});
  const double expected = std::log(std::exp(0.1) + std::exp(-0.4) + std::exp(1.3));
  EXPECT_NEAR(crf_log_partition(e, Tensor::zeros({5, 5})).item(), expected, 1e-14);
}

TEST(CrfPartitionTest, ConstantShiftAtOnePositionAddsConstant) {
  const Tensor e = random_matrix(4, 3, 1), t = random_matrix(5, 5, 2);
  std::vector<double> shifted(e.data().begin(), e.data().end());
  for (std::size_t j = 0; j < 3; ++j) shifted[2 * 3 + j] += 1.75;
  const double a = crf_log_partition(e, t).item();
  const double b = crf_log_partition(Tensor::from({4, 3}, shifted), t).item();
  EXPECT_NEAR(b - a, 1.75, 1e-12);
}

TEST(CrfPartitionTest, MatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 1 + seed % 5, labels = 2 + seed % 3;
    const Tensor e = random_matrix(n, labels, 10 + seed, 2.0), t = random_matrix(labels + 2, labels + 2, 20 + seed);
    const auto ref = verify::crf_enumerate(e, t);
    EXPECT_NEAR(crf_log_partition(e, t).item(), ref.log_partition, 1e-10);
    EXPECT_NEAR(ref.probability_sum, 1.0, 1e-10);
  }
}

TEST(CrfNllTest, SingleLabelHasZeroLoss) {
  const std::size_t gold[] = {0, 0, 0};
  EXPECT_NEAR(crf_nll(random_matrix(3, 1, 3), random_matrix(3, 3, 4), gold).item(), 0.0, 1e-12);
}

TEST(CrfNllTest, NonNegativeAndConsistentWithEnumeration) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor e = random_matrix(4, 3, 30 + seed, 2.0), t = random_matrix(5, 5, 40 + seed);
    std::vector<std::size_t> gold(4);
    for (auto& y : gold) y = rng() % 3;
    const double nll = crf_nll(e, t, gold).item();
    EXPECT_GE(nll, 0.0);
    EXPECT_NEAR(nll, verify::crf_enumerate(e, t).log_partition - crf_score(e, t, gold).item(), 1e-12);
  }
}

TEST(CrfNllTest, EmissionGradientIsMarginalsMinusGold) {
  Tensor e = random_matrix(4, 3, 50);
  e.set_requires_grad(true);
  const Tensor t = random_matrix(5, 5, 51);
  const std::size_t gold[] = {2, 0, 1, 1};
  GradientTape tape;
  {
    TapeScope scope(tape);
    tape.backward(crf_nll(e, t, gold));
  }
  const auto marginals = crf_marginals(e, t);
  for (std::size_t i = 0; i < 4; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      row += marginals[i * 3 + j];
      EXPECT_NEAR(e.grad()[i * 3 + j], marginals[i * 3 + j] - (gold[i] == j ? 1.0 : 0.0), 1e-12);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
}

TEST(ViterbiTest, ZeroTransitionsGivePerPositionArgmax) {
  const Tensor e = Tensor::from({3, 3}, {0.1, 0.9, 0.2, 1.5, -1.0, 0.0, 0.0, 0.3, 0.7});
  const auto r = viterbi(e, Tensor::zeros({5, 5}));
  EXPECT_EQ(r.path, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_NEAR(r.score, 0.9 + 1.5 + 0.7, 1e-12);
}

TEST(ViterbiTest, BeatsOrMatchesEveryGoldPath) {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor e = random_matrix(5, 4, 60 + seed, 2.0), t = random_matrix(6, 6, 80 + seed);
    std::vector<std::size_t> gold(5);
    for (auto& y : gold) y = rng() % 4;
    const auto best = viterbi(e, t);
    EXPECT_GE(best.score + 1e-12, crf_score(e, t, gold).item());
    EXPECT_NEAR(best.score, crf_score(e, t, best.path).item(), 1e-12);
    const auto ref = verify::crf_enumerate(e, t);
    EXPECT_EQ(best.path, ref.best_path);
  }
}

TEST(ViterbiTest, TiesGoToLowestIndex) {
  const auto r = viterbi(Tensor::zeros({3, 3}), Tensor::zeros({5, 5}));
  EXPECT_EQ(r.path, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(CrfDecoderTest, MaskedDecodingNeverEntersInsideFromOutside) {
  const LabelSchema schema;
  Initializer init(7);
  CrfDecoder masked(schema, 8, true, init);
  // Emissions that strongly prefer I-LOC after O would tempt an unmasked decoder.
  const std::size_t o = schema.index("O"), iloc = schema.index("I-LOC");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor e = random_matrix(6, schema.size(), 100 + seed, 3.0);
    auto d = e.mutable_data();
    for (std::size_t i = 0; i < 6; ++i) d[i * schema.size() + (i % 2 == 0 ? o : iloc)] += 5.0;
    const auto path = viterbi(e, masked.transitions).path;
    EXPECT_NE(path.front(), iloc);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      EXPECT_TRUE(schema.allows(path[i], path[i + 1])) << schema.tag(path[i]) << " -> " << schema.tag(path[i + 1]);
    }
  }
}

TEST(CrfDecoderTest, UnmaskedDecoderOnlyPinsBoundaries) {
  const LabelSchema schema;
  Initializer init(8);
  CrfDecoder decoder(schema, 8, false, init);
  const std::size_t S = schema.transition_size();
  const auto t = decoder.transitions.data();
  EXPECT_EQ(t[schema.index("O") * S + schema.index("I-LOC")], 0.0);
  EXPECT_EQ(t[schema.index("O") * S + schema.begin_index()], kForbiddenTransition);
  EXPECT_EQ(t[schema.end_index() * S + schema.index("O")], kForbiddenTransition);
  EXPECT_EQ(decoder.emissions(random_matrix(3, 8, 9)).shape(), (Shape{3, 9}));
}

}  // namespace
}  // namespace mner
