#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mner/corpus.hpp"
#include "mner/image.hpp"
#include "mner/labels.hpp"
#include "mner/tensor.hpp"

namespace mner {

// Label id written to padding positions; never scored.
inline constexpr int kIgnoreLabel = -1;

struct Batch {
  std::vector<std::size_t> example_indices;  // positions in the source corpus
  std::size_t max_length = 0;
  std::vector<std::size_t> token_ids;  // [B x max_length], kPadId in padding
  std::vector<int> label_ids;          // [B x max_length], kIgnoreLabel in padding
  std::vector<std::size_t> lengths;
  Tensor images;                       // [B x 3 x R x R]
  std::size_t unknown_tokens = 0;      // tokens mapped to UNK

  std::size_t size() const { return lengths.size(); }
  std::span<const std::size_t> tokens(std::size_t row) const;
  std::vector<std::size_t> gold(std::size_t row) const;
  Tensor image(std::size_t row) const;
};

// Example order for one pass: file order, or a seeded shuffle.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, bool shuffle);

// Consecutive batches over `order`; the last one may be short.
std::vector<Batch> make_batches(const Corpus& corpus, const Vocabulary& vocab, const LabelSchema& schema,
                                ImageStore& images, std::size_t batch_size, std::uint64_t seed, bool shuffle);

}  // namespace mner
