#include <gtest/gtest.h>

#include "mner/errors.hpp"
#include "mner/metrics.hpp"

namespace mner {
namespace {

using Labels = std::vector<std::vector<std::string>>;

TEST(ScoreCountsTest, HandComputedExample) {
  const PrfScore s = score_counts(3, 1, 2);
  EXPECT_NEAR(s.precision, 0.75, 1e-12);
  EXPECT_NEAR(s.recall, 0.6, 1e-12);
  EXPECT_NEAR(s.f1, 2.0 * 0.75 * 0.6 / 1.35, 1e-12);
  EXPECT_NEAR(s.f1, 0.66667, 1e-5);
  EXPECT_FALSE(s.precision_undefined || s.recall_undefined || s.f1_undefined);
}

TEST(ScoreCountsTest, ZeroDenominators) {
  const PrfScore none_predicted = score_counts(0, 0, 4);
  EXPECT_EQ(none_predicted.precision, 0.0);
  EXPECT_TRUE(none_predicted.precision_undefined);
  EXPECT_EQ(none_predicted.recall, 0.0);
  EXPECT_FALSE(none_predicted.recall_undefined);
  EXPECT_EQ(none_predicted.f1, 0.0);
  EXPECT_TRUE(none_predicted.f1_undefined);

  const PrfScore empty = score_counts(0, 0, 0);
  EXPECT_TRUE(empty.precision_undefined && empty.recall_undefined && empty.f1_undefined);
}

TEST(ScoreCountsTest, F1BetweenPrecisionAndRecall) {
  for (std::size_t tp = 1; tp < 6; ++tp) {
    for (std::size_t fp = 0; fp < 6; ++fp) {
      for (std::size_t fn = 0; fn < 6; ++fn) {
        const PrfScore s = score_counts(tp, fp, fn);
        EXPECT_LE(std::min(s.precision, s.recall), s.f1 + 1e-15);
        EXPECT_GE(std::max(s.precision, s.recall) + 1e-15, s.f1);
      }
    }
  }
}

TEST(EvaluateTest, FixtureWithThreeHitsOneFalseAlarmTwoMisses) {
  const Labels gold = {
      {"B-PER", "I-PER", "O", "B-LOC"},
      {"B-ORG", "O", "B-MISC"},
      {"O", "B-PER", "O"},
  };
  const Labels pred = {
      {"B-PER", "I-PER", "O", "B-LOC"},   // 2 TP
      {"B-ORG", "O", "O"},                // 1 TP, MISC missed
      {"O", "B-PER", "I-PER"},            // wrong boundary: 1 FP, 1 FN
  };
  const EvalReport r = evaluate(gold, pred);
  EXPECT_EQ(r.overall.tp, 3u);
  EXPECT_EQ(r.overall.fp, 1u);
  EXPECT_EQ(r.overall.fn, 2u);
  EXPECT_NEAR(r.overall.precision, 0.75, 1e-12);
  EXPECT_NEAR(r.overall.recall, 0.6, 1e-12);
  EXPECT_NEAR(r.overall.f1, 2.0 * 0.75 * 0.6 / 1.35, 1e-12);
  EXPECT_EQ(r.per_type[0].tp, 1u);  // PER
  EXPECT_EQ(r.per_type[0].fp, 1u);
  EXPECT_EQ(r.per_type[3].fn, 1u);  // MISC
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& s : r.per_type) {
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
  }
  EXPECT_EQ(tp, r.overall.tp);
  EXPECT_EQ(fp, r.overall.fp);
  EXPECT_EQ(fn, r.overall.fn);
  EXPECT_EQ(r.sentences, 3u);
  EXPECT_EQ(r.tokens, 10u);
}

TEST(EvaluateTest, GoldAgainstGoldIsPerfect) {
  const Labels gold = {{"B-PER", "I-PER"}, {"O", "B-LOC", "I-LOC", "B-MISC"}};
  const EvalReport r = evaluate(gold, gold);
  EXPECT_EQ(r.overall.precision, 1.0);
  EXPECT_EQ(r.overall.recall, 1.0);
  EXPECT_EQ(r.overall.f1, 1.0);
  EXPECT_EQ(r.token_accuracy(), 1.0);
}

TEST(EvaluateTest, NoPredictionsScoreZero) {
  const EvalReport r = evaluate({{"B-PER", "O"}}, {{"O", "O"}});
  EXPECT_EQ(r.overall.precision, 0.0);
  EXPECT_EQ(r.overall.recall, 0.0);
  EXPECT_EQ(r.overall.f1, 0.0);
  EXPECT_TRUE(r.overall.precision_undefined);
}

TEST(EvaluateTest, MicroAverageDiffersFromMacro) {
  // PER: 1 TP. LOC: 0 TP, 3 FN. Micro F1 uses pooled counts.
  const Labels gold = {{"B-PER", "B-LOC", "B-LOC", "B-LOC"}};
  const Labels pred = {{"B-PER", "O", "O", "O"}};
  const EvalReport r = evaluate(gold, pred);
  EXPECT_NEAR(r.overall.f1, 2.0 * 1.0 * 0.25 / 1.25, 1e-12);
  EXPECT_NE(r.overall.f1, (r.per_type[0].f1 + r.per_type[1].f1) / 2.0);
}

TEST(EvaluateTest, LengthMismatchIsContractError) {
  EXPECT_THROW(evaluate({{"O", "O"}}, {{"O"}}), ContractError);
  EXPECT_THROW(evaluate({{"O"}}, {}), ContractError);
}

TEST(EvaluateTest, Formatting) {
  const EvalReport r = evaluate({{"B-PER"}}, {{"B-PER"}});
  const std::string table = format_eval_table(r);
  EXPECT_NE(table.find("PER"), std::string::npos);
  EXPECT_NE(format_eval_kv(r).find("overall.f1=1"), std::string::npos);
}

}  // namespace
}  // namespace mner
