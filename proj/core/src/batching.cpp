#include "mner/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "mner/encoders.hpp"
#include "mner/errors.hpp"

namespace mner {

std::span<const std::size_t> Batch::tokens(std::size_t row) const {
  return std::span<const std::size_t>(token_ids).subspan(row * max_length, lengths.at(row));
}

std::vector<std::size_t> Batch::gold(std::size_t row) const {
  std::vector<std::size_t> out;
  out.reserve(lengths.at(row));
  for (std::size_t i = 0; i < lengths[row]; ++i) out.push_back(static_cast<std::size_t>(label_ids[row * max_length + i]));
  return out;
}

Tensor Batch::image(std::size_t row) const {
  const Shape& s = images.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  const auto all = images.data();
  return Tensor::from({s[1], s[2], s[3]}, std::vector<double>(all.begin() + row * per, all.begin() + (row + 1) * per));
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, bool shuffle) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

std::vector<Batch> make_batches(const Corpus& corpus, const Vocabulary& vocab, const LabelSchema& schema,
                                ImageStore& images, std::size_t batch_size, std::uint64_t seed, bool shuffle) {
  if (batch_size == 0) throw ContractError("make_batches: batch size must be at least 1");
  const auto order = epoch_order(corpus.examples.size(), seed, shuffle);
  const std::size_t r = images.resolution();
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    Batch b;
    for (std::size_t k = 0; k < count; ++k) {
      const auto& ex = corpus.examples[order[start + k]];
      b.example_indices.push_back(order[start + k]);
      b.lengths.push_back(ex.tokens.size());
      b.max_length = std::max(b.max_length, ex.tokens.size());
    }
    b.token_ids.assign(count * b.max_length, kPadId);
    b.label_ids.assign(count * b.max_length, kIgnoreLabel);
    std::vector<double> pixels;
    pixels.reserve(count * 3 * r * r);
    for (std::size_t k = 0; k < count; ++k) {
      const auto& ex = corpus.examples[b.example_indices[k]];
      for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
        const std::size_t id = vocab.id(ex.tokens[i]);
        b.unknown_tokens += id == kUnkId;
        b.token_ids[k * b.max_length + i] = id;
        b.label_ids[k * b.max_length + i] = static_cast<int>(schema.index(ex.labels[i]));
      }
      const auto img = images.load(ex.image_ref).data();
      pixels.insert(pixels.end(), img.begin(), img.end());
    }
    b.images = Tensor::from({count, 3, r, r}, std::move(pixels));
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace mner
