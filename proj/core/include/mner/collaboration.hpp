#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mner/nn.hpp"
#include "mner/tensor.hpp"

namespace mner {

// Text-to-image cross attention followed by residual/LN and an MLP:
//   IA = concat_i softmax(Q_i K_i^T / sqrt(d/m)) V_i  W'
//   T~ = LN(IA + T)
//   R  = LN(T~ + MLP(T~))
// with Q_i = T W_q_i, K_i = V W_k_i, V_i = V W_v_i (no biases).
class CrossAttentionBlock {
 public:
  CrossAttentionBlock() = default;
  CrossAttentionBlock(std::size_t dim, std::size_t heads, std::size_t mlp_hidden, Initializer& init);

  struct Output {
    Tensor fused;                 // R [n x d]
    std::vector<Tensor> weights;  // one [n x v] matrix per head
  };

  // text [n x d] queries, visual [v x d] keys/values.
  Tensor operator()(const Tensor& text, const Tensor& visual, const ForwardContext& ctx) const;
  Output forward(const Tensor& text, const Tensor& visual, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t heads = 1;
  Tensor query;   // [d x d], head i uses columns [i*d/m, (i+1)*d/m)
  Tensor key;     // [d x d]
  Tensor value;   // [d x d]
  Tensor output;  // W' [d x d]
  LayerNorm attention_norm;
  FeedForward mlp;
  LayerNorm output_norm;
};

// Stacked blocks for one image path; every block reuses the same visual tokens.
class CollaborationModule {
 public:
  CollaborationModule() = default;
  CollaborationModule(std::size_t dim, std::size_t heads, std::size_t mlp_hidden, std::size_t depth,
                      Initializer& init);

  Tensor operator()(const Tensor& text, const Tensor& visual, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::vector<CrossAttentionBlock> blocks;
};

}  // namespace mner
