#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "mner/cli.hpp"
#include "mner/verify/fixtures.hpp"
#include "test_util.hpp"

namespace mner {
namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "mner");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(CliTest, UnknownFlagIsUsageError) {
  const auto r = run({"stats", "--frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE((r.out + r.err).find("Usage"), std::string::npos);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"train", "x", "--preset", "huge"}).code, 2);
}

TEST(CliTest, StatsOnEmptyCorpus) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "train.iob2", "");
  const auto r = run({"stats", (dir / "train.iob2").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PER"), std::string::npos);
}

TEST(CliTest, KappaOnDiagonalTable) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "table.txt", "4 0\n0 6\n");
  const auto r = run({"kappa", (dir / "table.txt").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1.0\n");
  testing::write_file(dir / "half.txt", "20 5\n10 15\n");
  EXPECT_NEAR(std::stod(run({"kappa", (dir / "half.txt").string()}).out), 0.4, 1e-12);
}

TEST(CliTest, EvalGoldAgainstItself) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "gold.iob2", "IMGID:1\nAlbert\tB-PER\nPujols\tI-PER\nin\tO\nParis\tB-LOC\n\n");
  const auto gold = (dir / "gold.iob2").string();
  const auto r = run({"eval", gold, "--pred", gold});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("overall.f1=1"), std::string::npos) << r.out;
}

TEST(CliTest, RuntimeFailuresExitOne) {
  const auto dir = testing::scratch_dir();
  const auto missing = run({"kappa", (dir / "absent.txt").string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_FALSE(missing.err.empty());
  testing::write_file(dir / "bad.iob2", "IMGID:1\nBerlin\tI-LOC\n\n");
  EXPECT_EQ(run({"stats", (dir / "bad.iob2").string()}).code, 1);
  EXPECT_EQ(run({"stats", (dir / "bad.iob2").string(), "--repair"}).code, 0);
  testing::write_file(dir / "constant.txt", "3 0\n0 0\n");
  EXPECT_EQ(run({"kappa", (dir / "constant.txt").string()}).code, 1);
}

TEST(CliTest, TrainPredictEvalRoundTrip) {
  const auto dir = testing::scratch_dir();
  verify::write_overfit_fixture(dir);
  testing::write_file(dir / "run.cfg",
                      "epochs = 1\nbatch = 8\nmodel.dim = 16\nmodel.heads = 2\nmodel.vit_embed_dim = 16\n"
                      "model.text_layers = 1\nmodel.vit_layers = 1\n");
  const auto run_dir = (dir / "run").string();
  const auto trained = run({"train", dir.string(), "--config", (dir / "run.cfg").string(), "--lr", "0.005",
                            "--no-resnet", "--out", run_dir});
  ASSERT_EQ(trained.code, 0) << trained.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "model.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "report.txt"));

  const auto train_file = (dir / "train.iob2").string();
  const auto predicted = run({"predict", train_file, "--run", run_dir, "--out", (dir / "pred.iob2").string()});
  ASSERT_EQ(predicted.code, 0) << predicted.err;
  const auto scored = run({"eval", train_file, "--pred", (dir / "pred.iob2").string()});
  const auto direct = run({"eval", train_file, "--run", run_dir});
  ASSERT_EQ(scored.code, 0) << scored.err;
  ASSERT_EQ(direct.code, 0) << direct.err;
  EXPECT_EQ(scored.out, direct.out);
}

TEST(CliTest, PredictRawSentences) {
  const auto dir = testing::scratch_dir();
  verify::write_overfit_fixture(dir);
  testing::write_file(dir / "run.cfg", "epochs = 1\nbatch = 8\nmodel.dim = 16\nmodel.heads = 2\n"
                                       "model.vit_embed_dim = 16\nuse_vit = false\nuse_resnet = false\n");
  ASSERT_EQ(run({"train", dir.string(), "--config", (dir / "run.cfg").string(), "--out", (dir / "run").string()})
                .code,
            0);
  testing::write_file(dir / "raw.txt", "hello there\nsome words here\n");
  const auto r = run({"predict", (dir / "raw.txt").string(), "--raw", "--run", (dir / "run").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("hello\t"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace mner
