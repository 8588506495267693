#include <gtest/gtest.h>

#include <random>

#include "mner/encoders.hpp"
#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {
namespace {

Tensor random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(c * h * w);
  for (double& x : v) x = dist(rng);
  return Tensor::from({c, h, w}, std::move(v));
}

void zero(Tensor t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

TEST(TextEncoderTest, OutputHasClsAndSepRows) {
  Initializer init(1);
  TextEncoderConfig cfg;
  cfg.vocab_size = 20;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.mlp_hidden = 32;
  const TextEncoder enc(cfg, init);
  const std::size_t tokens[] = {5, 6, 7};
  EXPECT_EQ(enc.encode(tokens, {}).shape(), (Shape{5, 16}));
}

TEST(TextEncoderTest, NoLayersGivesEmbeddingPlusPosition) {
  Initializer init(2);
  TextEncoderConfig cfg;
  cfg.vocab_size = 10;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 0;
  const TextEncoder enc(cfg, init);
  const std::size_t tokens[] = {7, 4};
  const Tensor out = enc.encode(tokens, {});
  const std::size_t ids[] = {kClsId, 7, 4, kSepId};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_EQ(out.data()[r * 8 + c], enc.token_table.data()[ids[r] * 8 + c] + enc.position_table.data()[r * 8 + c]);
    }
  }
}

TEST(TextEncoderTest, TruncatesAndMapsUnknownIds) {
  Initializer init(3);
  TextEncoderConfig cfg;
  cfg.vocab_size = 10;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 0;
  cfg.max_len = 5;
  const TextEncoder enc(cfg, init);
  const std::size_t tokens[] = {4, 99, 5, 6, 7};
  const Tensor out = enc.encode(tokens, {});
  EXPECT_EQ(out.dim(0), 5u);
  EXPECT_EQ(enc.truncations(), 1u);
  EXPECT_EQ(enc.unknown_ids(), 1u);
  // row 2 holds the unknown token, embedded as UNK
  EXPECT_EQ(out.data()[2 * 8], enc.token_table.data()[kUnkId * 8] + enc.position_table.data()[2 * 8]);
}

TEST(TextEncoderTest, EmptySentenceIsRejected) {
  Initializer init(4);
  const TextEncoder enc(TextEncoderConfig{}, init);
  EXPECT_THROW(enc.encode(std::vector<std::size_t>{}, {}), ContractError);
}

TEST(TextEncoderTest, ShapesOverRandomLengths) {
  Initializer init(5);
  TextEncoderConfig cfg;
  cfg.vocab_size = 30;
  cfg.dim = 12;
  cfg.heads = 3;
  cfg.mlp_hidden = 24;
  cfg.layers = 1;
  const TextEncoder enc(cfg, init);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<std::size_t> tokens(n);
    for (auto& t : tokens) t = rng() % 30;
    EXPECT_EQ(enc.encode(tokens, {}).shape(), (Shape{n + 2, 12}));
  }
}

TEST(TextEncoderTest, HeadsMustDivideWidth) {
  Initializer init(6);
  TextEncoderConfig cfg;
  cfg.dim = 10;
  cfg.heads = 4;
  EXPECT_THROW(TextEncoder(cfg, init), ConfigError);
}

TEST(VitEncoderTest, PatchCounts) {
  VitConfig big;
  big.height = big.width = 224;
  big.patch = 32;
  EXPECT_EQ(big.patch_count(), 49u);

  Initializer init(7);
  VitConfig cfg;
  cfg.embed_dim = 16;
  cfg.out_dim = 16;
  cfg.heads = 2;
  cfg.mlp_hidden = 32;
  cfg.layers = 1;
  const VitEncoder enc(cfg, init);
  EXPECT_EQ(enc.encode(random_image(3, 32, 32, 1), {}).shape(), (Shape{16, 16}));
}

TEST(VitEncoderTest, ClassTokenAddsARow) {
  Initializer init(8);
  VitConfig cfg;
  cfg.embed_dim = 16;
  cfg.out_dim = 24;
  cfg.heads = 2;
  cfg.mlp_hidden = 32;
  cfg.layers = 1;
  cfg.class_token = true;
  const VitEncoder enc(cfg, init);
  EXPECT_EQ(enc.encode(random_image(3, 32, 32, 2), {}).shape(), (Shape{17, 24}));
}

TEST(VitEncoderTest, ZeroImageZeroPositionsNoLayersIsZero) {
  Initializer init(9);
  VitConfig cfg;
  cfg.embed_dim = 16;
  cfg.out_dim = 16;
  cfg.heads = 2;
  cfg.layers = 0;
  VitEncoder enc(cfg, init);
  zero(enc.position_table);
  const Tensor out = enc.encode(Tensor::zeros({3, 32, 32}), {});
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(VitEncoderTest, PreNormLayerWithZeroOutputsIsIdentity) {
  Initializer init(10);
  TransformerLayer layer(8, 2, 16, NormPlacement::kPreNorm, init);
  zero(layer.attention.output.weight);
  zero(layer.attention.output.bias);
  zero(layer.mlp.second.weight);
  zero(layer.mlp.second.bias);
  const Tensor x = random_image(1, 5, 8, 3);
  const Tensor rows = reshape(x, {5, 8});
  const Tensor y = layer(rows, {});
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(y.data()[i], rows.data()[i]);
}

TEST(VitEncoderTest, PatchPermutationWithoutPositionsPermutesOutput) {
  Initializer init(11);
  VitConfig cfg;
  cfg.height = cfg.width = 16;
  cfg.embed_dim = 8;
  cfg.out_dim = 8;
  cfg.heads = 2;
  cfg.mlp_hidden = 16;
  cfg.layers = 2;
  VitEncoder enc(cfg, init);
  zero(enc.position_table);
  // Swap the top-left and bottom-right 8x8 quadrants: patches 0 and 3.
  const Tensor img = random_image(3, 16, 16, 4);
  std::vector<double> swapped(img.data().begin(), img.data().end());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        std::swap(swapped[c * 256 + i * 16 + j], swapped[c * 256 + (i + 8) * 16 + j + 8]);
      }
    }
  }
  const Tensor a = enc.encode(img, {});
  const Tensor b = enc.encode(Tensor::from({3, 16, 16}, swapped), {});
  const std::size_t perm[] = {3, 1, 2, 0};
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(b.data()[r * 8 + c], a.data()[perm[r] * 8 + c], 1e-12);
  }
}

TEST(VitEncoderTest, WrongImageShapeThrows) {
  Initializer init(12);
  const VitEncoder enc(VitConfig{}, init);
  EXPECT_THROW(enc.encode(Tensor::zeros({3, 16, 16}), {}), ShapeError);
}

TEST(VitEncoderTest, IndivisiblePatchIsConfigError) {
  VitConfig cfg;
  cfg.patch = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ConvEncoderTest, GridSizes) {
  EXPECT_EQ(ConvEncoderConfig{}.grid(), 4u);
  ConvEncoderConfig big;
  big.resolution = 224;
  big.stem_stride = 4;
  EXPECT_EQ(big.grid(), 7u);
}

TEST(ConvEncoderTest, DeskAndLargeOutputs) {
  Initializer init(13);
  const ConvEncoder desk(ConvEncoderConfig{}, init);
  EXPECT_EQ(desk.encode(random_image(3, 32, 32, 5), {}).shape(), (Shape{16, 64}));

  ConvEncoderConfig big;
  big.resolution = 224;
  big.stem_stride = 4;
  big.stem_channels = 4;
  big.stage_channels = {4, 4, 8};
  big.blocks_per_stage = 1;
  big.out_dim = 16;
  const ConvEncoder large(big, init);
  EXPECT_EQ(large.encode(random_image(3, 224, 224, 6), {}).shape(), (Shape{49, 16}));
}

TEST(ConvEncoderTest, ZeroProjectionGivesBiasRows) {
  Initializer init(14);
  ConvEncoder enc(ConvEncoderConfig{}, init);
  zero(enc.projection.weight);
  auto bias = enc.projection.bias.mutable_data();
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 0.25 * static_cast<double>(i);
  const Tensor out = enc.encode(random_image(3, 32, 32, 7), {});
  for (std::size_t r = 0; r < out.dim(0); ++r) {
    for (std::size_t c = 0; c < out.dim(1); ++c) EXPECT_EQ(out.data()[r * out.dim(1) + c], bias[c]);
  }
}

TEST(ConvEncoderTest, FeaturesAreRowMajorCells) {
  Initializer init(15);
  const ConvEncoder enc(ConvEncoderConfig{}, init);
  const Tensor f = enc.features(random_image(3, 32, 32, 8));
  EXPECT_EQ(f.shape(), (Shape{16, 32}));
  for (double v : f.data()) EXPECT_GE(v, 0.0);  // post-ReLU
}

}  // namespace
}  // namespace mner
