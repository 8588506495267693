#pragma once

#include <cstddef>
#include <string>

#include "mner/nn.hpp"
#include "mner/tensor.hpp"

namespace mner {

enum class Pooling { kClsToken, kMean };

// Reduces an encoder output [k x d] to one vector [d].
// kClsToken requires `has_class_row` (row 0 is a class/[CLS] token).
Tensor pool(const Tensor& sequence, Pooling mode, bool has_class_row);

// MLP -> ReLU -> MLP, resizing text and image summaries to a shared width.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Initializer& init);

  // Accepts one vector [d_in] or a batch [N x d_in].
  Tensor operator()(const Tensor& h) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t out_dim() const { return second.out_dim(); }

  Linear first;
  Linear second;
};

struct ContrastiveConfig {
  double temperature = 0.07;
  Pooling text_pooling = Pooling::kClsToken;
  Pooling image_pooling = Pooling::kMean;
};

// Symmetric InfoNCE over cosine similarities. Row t of each batch is the
// positive partner of row t of the other; every other row of the opposite
// modality is a negative, so each of the 2N anchors sees N-1 negatives
// (2N-2 in total per pair). The positive stays in the denominator and the
// result is the mean of the 2N anchor terms, -log p(positive | anchor).
Tensor contrastive_loss(const Tensor& text_batch, const Tensor& image_batch, double temperature);

}  // namespace mner
