#include <gtest/gtest.h>

#include <sstream>

#include "mner/batching.hpp"
#include "mner/config_file.hpp"
#include "mner/corpus.hpp"
#include "mner/corpus_stats.hpp"
#include "mner/encoders.hpp"
#include "mner/errors.hpp"
#include "mner/image.hpp"
#include "mner/metrics.hpp"
#include "test_util.hpp"

namespace mner {
namespace {

Corpus parse_text(const std::string& text, ParseOptions options = {}) {
  std::istringstream in(text);
  return parse_iob2(in, options, "test.iob2");
}

RgbImage solid(std::size_t w, std::size_t h, std::uint8_t value) {
  return RgbImage{w, h, std::vector<std::uint8_t>(w * h * 3, value)};
}

TEST(ParseIob2Test, TwoTokenPerson) {
  const Corpus c = parse_text("IMGID:1\nAlbert\tB-PER\nPujols\tI-PER\n\n");
  ASSERT_EQ(c.examples.size(), 1u);
  const auto& ex = c.examples[0];
  EXPECT_EQ(ex.tokens, (std::vector<std::string>{"Albert", "Pujols"}));
  EXPECT_EQ(ex.image_ref, "1");
  EXPECT_EQ(ex.language, "unk");
  const auto spans = extract_spans(ex.labels);
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0], (EntitySpan{0, 1, "PER"}));
}

TEST(ParseIob2Test, EmptyInputGivesEmptyCorpus) {
  EXPECT_TRUE(parse_text("").examples.empty());
}

TEST(ParseIob2Test, LanguageAndMissingTrailingBlank) {
  const Corpus c = parse_text("LANG:fr\nIMGID:a\nParis\tB-LOC\n\nIMGID:b\nx\tO");
  ASSERT_EQ(c.examples.size(), 2u);
  EXPECT_EQ(c.examples[0].language, "fr");
  EXPECT_EQ(c.examples[1].language, "unk");
}

TEST(ParseIob2Test, DanglingInsideFailsWithLineNumber) {
  try {
    parse_text("IMGID:1\nin\tO\n\nIMGID:2\nBerlin\tI-LOC\n\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":5"), std::string::npos) << e.what();
  }
}

TEST(ParseIob2Test, RepairRewritesDanglingInside) {
  ParseOptions options;
  options.repair = true;
  const Corpus c = parse_text("IMGID:2\nBerlin\tI-LOC\nis\tO\n\n", options);
  EXPECT_EQ(c.examples[0].labels[0], "B-LOC");
  EXPECT_TRUE(c.examples[0].repaired);
  EXPECT_EQ(c.repaired_labels, 1u);
}

TEST(ParseIob2Test, MalformedInputs) {
  EXPECT_THROW(parse_text("Albert\tB-PER\n\n"), ParseError);           // no IMGID
  EXPECT_THROW(parse_text("IMGID:1\nAlbert\tB-DATE\n\n"), ParseError);  // unknown label
  EXPECT_THROW(parse_text("IMGID:1\nAlbert\n\n"), ParseError);          // no label column
}

TEST(ParseIob2Test, SerializeRoundTrip) {
  const std::string text =
      "LANG:en\nIMGID:7\nAlbert\tB-PER\nPujols\tI-PER\nhit\tO\n\nLANG:de\nIMGID:8\nin\tO\nBerlin\tB-LOC\n\n";
  const Corpus a = parse_text(text);
  const Corpus b = parse_text(serialize_iob2(a));
  EXPECT_EQ(a.examples, b.examples);
}

TEST(ParseIob2Test, RawSentences) {
  std::istringstream in("the cat\n\n  sat down here \n");
  const Corpus c = parse_raw_sentences(in, "img");
  ASSERT_EQ(c.examples.size(), 2u);
  EXPECT_EQ(c.examples[1].tokens.size(), 3u);
  EXPECT_EQ(c.examples[1].labels, (std::vector<std::string>(3, "O")));
  EXPECT_FALSE(c.labeled);
}

TEST(ExtractSpansTest, Cases) {
  EXPECT_TRUE(extract_spans({"O", "O"}).empty());
  const auto two = extract_spans({"B-LOC", "B-LOC"});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1], (EntitySpan{1, 1, "LOC"}));
  const auto lenient = extract_spans({"O", "I-ORG", "I-ORG", "B-PER", "I-LOC"});
  ASSERT_EQ(lenient.size(), 3u);
  EXPECT_EQ(lenient[0], (EntitySpan{1, 2, "ORG"}));
  EXPECT_EQ(lenient[2], (EntitySpan{4, 4, "LOC"}));
  EXPECT_THROW(extract_spans({"X-PER"}), ParseError);
}

TEST(VocabularyTest, ReservedIdsAndRoundTrip) {
  const Corpus c = parse_text("IMGID:1\nthe\tO\nThe\tO\nthe\tO\n\n");
  const Vocabulary v = Vocabulary::build(c);
  EXPECT_EQ(v.size(), kReservedIds + 2);
  EXPECT_EQ(v.id("the"), kReservedIds);
  EXPECT_EQ(v.id("The"), kReservedIds + 1);
  EXPECT_EQ(v.id("missing"), kUnkId);
  const auto path = testing::scratch_dir() / "vocab.txt";
  v.save(path);
  const Vocabulary back = Vocabulary::load(path);
  EXPECT_EQ(back.tokens(), v.tokens());
}

TEST(ImageTest, WhitePpmIsAllOnes) {
  const auto dir = testing::scratch_dir();
  write_ppm(dir / "white.ppm", solid(2, 2, 255));
  const Tensor t = image_to_tensor(read_ppm(dir / "white.ppm"), 2);
  EXPECT_EQ(t.shape(), (Shape{3, 2, 2}));
  for (double v : t.data()) EXPECT_EQ(v, 1.0);
}

TEST(ImageTest, CheckerboardBilinearDownsample) {
  // Half-pixel centres: output (i, j) samples source (2i + 0.5, 2j + 0.5), the
  // equal-weight average of one 2x2 block. Every block of a one-pixel
  // checkerboard holds two black and two white pixels.
  RgbImage board{4, 4, std::vector<std::uint8_t>(48)};
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t c = 0; c < 3; ++c) board.pixels[(y * 4 + x) * 3 + c] = (x + y) % 2 ? 255 : 0;
    }
  }
  const Tensor small = image_to_tensor(board, 2);
  for (double v : small.data()) EXPECT_NEAR(v, 0.0, 1e-6);

  // Brightness ramp along x: columns 0, 60, 120, 180 -> output columns 30 and 150.
  RgbImage ramp{4, 4, std::vector<std::uint8_t>(48)};
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t c = 0; c < 3; ++c) ramp.pixels[(y * 4 + x) * 3 + c] = static_cast<std::uint8_t>(60 * x);
    }
  }
  const Tensor r = image_to_tensor(ramp, 2);
  EXPECT_NEAR(r.data()[0], (30.0 / 255.0 - 0.5) / 0.5, 1e-6);
  EXPECT_NEAR(r.data()[1], (150.0 / 255.0 - 0.5) / 0.5, 1e-6);
}

TEST(ImageTest, UpsampleClampsAtEdges) {
  RgbImage two{2, 1, {0, 0, 0, 255, 255, 255}};
  const Tensor t = image_to_tensor(two, 4);
  // source x for output columns: -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1)
  const double expected[] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(t.data()[x], (expected[x] - 0.5) / 0.5, 1e-6);
}

TEST(ImageTest, MissingStemUsesDefaultAndCounts) {
  const auto dir = testing::scratch_dir();
  ImageStore store(dir, 8);
  const Tensor t = store.load("nope");
  EXPECT_EQ(t.shape(), (Shape{3, 8, 8}));
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(store.missing(), 1u);
  store.load("nope");
  EXPECT_EQ(store.missing(), 1u);  // counted once per stem
}

TEST(ImageTest, CorruptHeaderNamesFile) {
  const auto dir = testing::scratch_dir();
  testing::write_file(dir / "bad.ppm", "P3\n2 2\n255\n");
  ImageStore store(dir, 4);
  try {
    store.load("bad");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.ppm"), std::string::npos);
  }
}

Corpus five_sentences() {
  std::string text;
  for (int i = 0; i < 5; ++i) {
    text += "IMGID:s" + std::to_string(i) + "\n";
    for (int k = 0; k <= i; ++k) text += "w" + std::to_string(k) + (k == 0 ? "\tB-PER\n" : "\tO\n");
    text += "\n";
  }
  return parse_text(text);
}

TEST(BatchingTest, SizesAndPadding) {
  const Corpus c = five_sentences();
  const Vocabulary v = Vocabulary::build(c);
  ImageStore images(testing::scratch_dir(), 4);
  const auto batches = make_batches(c, v, LabelSchema{}, images, 2, 1, false);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 2u);
  EXPECT_EQ(batches[1].size(), 2u);
  EXPECT_EQ(batches[2].size(), 1u);
  EXPECT_EQ(batches[0].example_indices, (std::vector<std::size_t>{0, 1}));
  for (const auto& b : batches) {
    EXPECT_EQ(b.images.shape(), (Shape{b.size(), 3, 4, 4}));
    for (std::size_t r = 0; r < b.size(); ++r) {
      for (std::size_t i = 0; i < b.max_length; ++i) {
        const bool real = i < b.lengths[r];
        EXPECT_EQ(real, b.token_ids[r * b.max_length + i] != kPadId);
        EXPECT_EQ(real, b.label_ids[r * b.max_length + i] != kIgnoreLabel);
      }
      EXPECT_EQ(b.gold(r).size(), b.lengths[r]);
    }
  }
}

TEST(BatchingTest, ShuffleIsSeededPermutation) {
  EXPECT_EQ(epoch_order(6, 9, false), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  const auto a = epoch_order(50, 9, true), b = epoch_order(50, 9, true), c = epoch_order(50, 10, true);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, epoch_order(50, 0, false));
}

TEST(StatsTest, HandCountedFixture) {
  Corpus c = parse_text(
      "LANG:en\nIMGID:1\nAlbert\tB-PER\nPujols\tI-PER\n\n"
      "LANG:en\nIMGID:2\nin\tO\nParis\tB-LOC\n\n"
      "LANG:en\nIMGID:3\nAnna\tB-PER\nand\tO\n\n");
  c.split = "train";
  const StatsReport r = dataset_stats(std::span<const Corpus>(&c, 1));
  const SplitCounts& cell = r.cells.at("en").at("train");
  EXPECT_EQ(cell.sentences, 3u);
  EXPECT_EQ(cell.entities, (std::array<std::size_t, 4>{2, 1, 0, 0}));
  EXPECT_EQ(r.grand_total(), cell);
  EXPECT_NE(format_stats_table(r).find("PER"), std::string::npos);
}

TEST(StatsTest, TotalsSumLanguageParts) {
  Corpus train = parse_text("LANG:en\nIMGID:1\nA\tB-ORG\n\nLANG:de\nIMGID:2\nB\tB-MISC\nC\tB-LOC\n\n");
  train.split = "train";
  Corpus dev = parse_text("LANG:de\nIMGID:3\nD\tB-PER\n\n");
  dev.split = "dev";
  const Corpus parts[] = {train, dev};
  const StatsReport r = dataset_stats(parts);
  const SplitCounts de = r.language_total("de");
  EXPECT_EQ(de.sentences, 2u);
  EXPECT_EQ(de.total(), 3u);
  EXPECT_EQ(r.grand_total().total(), de.total() + r.language_total("en").total());
}

TEST(StatsTest, EmptyCorpusIsAllZero) {
  const Corpus empty;
  const StatsReport r = dataset_stats(std::span<const Corpus>(&empty, 1));
  EXPECT_EQ(r.grand_total(), SplitCounts{});
  EXPECT_FALSE(format_stats_table(r).empty());
}

TEST(StatsTest, CountsIgnoreOrder) {
  Corpus c = five_sentences();
  const StatsReport a = dataset_stats(std::span<const Corpus>(&c, 1));
  std::reverse(c.examples.begin(), c.examples.end());
  const StatsReport b = dataset_stats(std::span<const Corpus>(&c, 1));
  EXPECT_EQ(a.grand_total(), b.grand_total());
}

AgreementTable table_of(const std::string& text) {
  std::istringstream in(text);
  return parse_agreement_table(in);
}

TEST(KappaTest, KnownTables) {
  EXPECT_EQ(cohens_kappa(table_of("5 0 0\n0 7 0\n0 0 3\n")), 1.0);
  EXPECT_NEAR(cohens_kappa(table_of("20 5\n10 15\n")), 0.4, 1e-12);
  EXPECT_NEAR(cohens_kappa(table_of("25 25\n25 25\n")), 0.0, 1e-12);
}

TEST(KappaTest, DegenerateAndMalformedTables) {
  EXPECT_THROW(cohens_kappa(table_of("9 0\n0 0\n")), NumericError);
  EXPECT_THROW(table_of("1 2\n3\n"), ParseError);
  EXPECT_THROW(table_of("1 -2\n3 4\n"), ParseError);
}

TEST(ConfigFileTest, ParsesCommentsAndTypes) {
  std::istringstream in("# run\nlr = 0.001\n\nuse_vit=false  # inline\nstages = 8, 16\n");
  const KeyValues kv = parse_key_values(in);
  EXPECT_EQ(kv_double("lr", kv.at("lr")), 0.001);
  EXPECT_FALSE(kv_bool("use_vit", kv.at("use_vit")));
  EXPECT_EQ(kv_size_list("stages", kv.at("stages")), (std::vector<std::size_t>{8, 16}));
  EXPECT_THROW(kv_size("batch", "-3"), ConfigError);
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(parse_key_values(bad), ConfigError);
}

}  // namespace
}  // namespace mner
