#include "mner/alignment.hpp"

#include <vector>

#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

Tensor pool(const Tensor& sequence, Pooling mode, bool has_class_row) {
  if (sequence.rank() != 2) throw ShapeError("pool: expected [k x d], got " + shape_to_string(sequence.shape()));
  if (mode == Pooling::kClsToken) {
    if (!has_class_row) throw ContractError("pool: cls_token pooling on an encoder without a class row");
    return reshape(slice_rows(sequence, 0, 1), {sequence.dim(1)});
  }
  return mean(sequence, 0);
}

ProjectionHead::ProjectionHead(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Initializer& init)
    : first(in_dim, hidden_dim, init), second(hidden_dim, out_dim, init) {}

Tensor ProjectionHead::operator()(const Tensor& h) const { return second(relu(first(h))); }

void ProjectionHead::collect(const std::string& prefix, ParameterList& out) const {
  first.collect(prefix + ".fc1", out);
  second.collect(prefix + ".fc2", out);
}

Tensor contrastive_loss(const Tensor& text_batch, const Tensor& image_batch, double temperature) {
  if (text_batch.rank() != 2 || text_batch.shape() != image_batch.shape()) {
    throw ShapeError("contrastive_loss: text batch " + shape_to_string(text_batch.shape()) + " vs image batch " +
                     shape_to_string(image_batch.shape()));
  }
  if (!(temperature > 0.0)) throw ContractError("contrastive_loss: temperature must be positive");
  const std::size_t n = text_batch.dim(0);
  if (n < 2) throw ContractError("contrastive_loss: batch of " + std::to_string(n) + " has no negatives");

  Tensor t = l2_normalize_rows(text_batch);
  Tensor v = l2_normalize_rows(image_batch);
  Tensor logits = scale(matmul(t, transpose(v)), 1.0 / temperature);  // [text x image]
  std::vector<std::size_t> diagonal(n);
  for (std::size_t i = 0; i < n; ++i) diagonal[i] = i * n + i;
  Tensor text_anchor = take(log_softmax(logits, 1), diagonal);   // over images
  Tensor image_anchor = take(log_softmax(logits, 0), diagonal);  // over texts
  return scale(add(sum(text_anchor), sum(image_anchor)), -1.0 / static_cast<double>(2 * n));
}

}  // namespace mner
