#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mner/corpus.hpp"
#include "mner/image.hpp"

// Synthetic corpora with generated PPM images for end-to-end runs.

namespace mner::verify {

struct Fixture {
  std::filesystem::path root;  // train.iob2, optional dev.iob2, images/
  Corpus train;
  Corpus heldout;  // empty for the overfit fixture
  std::string ambiguous_token;
};

// Uniform colour field with per-pixel noise of +-noise.
RgbImage color_field(std::size_t size, int r, int g, int b, int noise, std::mt19937_64& rng);

// 32 sentences over a ~50-token vocabulary with PER and LOC mentions. The
// image colour follows the entity content (red: PER, blue: LOC, green: both,
// grey: none).
Fixture write_overfit_fixture(const std::filesystem::path& root, std::uint64_t seed = 7);

// Short sentences around one ambiguous token tagged B-PER when the paired
// image is red-dominant and O otherwise. Every text template occurs with
// both kinds of image, so the text alone decides the tag at chance.
Fixture write_multimodal_fixture(const std::filesystem::path& root, std::uint64_t seed = 11);

struct TokenAccuracy {
  double overall = 0.0;
  double ambiguous = 0.0;
  std::size_t ambiguous_count = 0;
};

TokenAccuracy token_accuracy(const Corpus& gold, const std::vector<std::vector<std::string>>& predicted,
                             const std::string& ambiguous_token);

}  // namespace mner::verify
