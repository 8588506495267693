#include "mner/collaboration.hpp"

#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

CrossAttentionBlock::CrossAttentionBlock(std::size_t dim, std::size_t heads_, std::size_t mlp_hidden,
                                         Initializer& init)
    : heads(heads_) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("cross attention: width " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  query = init.normal({dim, dim});
  key = init.normal({dim, dim});
  value = init.normal({dim, dim});
  output = init.normal({dim, dim});
  attention_norm = LayerNorm(dim, init);
  mlp = FeedForward(dim, mlp_hidden, dim, Activation::kGelu, init);
  output_norm = LayerNorm(dim, init);
}

CrossAttentionBlock::Output CrossAttentionBlock::forward(const Tensor& text, const Tensor& visual,
                                                         const ForwardContext& ctx) const {
  const std::size_t d = query.dim(0);
  if (text.rank() != 2 || visual.rank() != 2 || text.dim(1) != d || visual.dim(1) != d) {
    throw ShapeError("cross_attend: text " + shape_to_string(text.shape()) + " and visual " +
                     shape_to_string(visual.shape()) + " must both have width " + std::to_string(d));
  }
  Output out;
  Tensor mixed = multi_head_attention(matmul(text, query), matmul(visual, key), matmul(visual, value), heads,
                                      &out.weights);
  Tensor ia = apply_dropout(matmul(mixed, output), ctx);
  Tensor t = attention_norm(add(ia, text));
  out.fused = output_norm(add(t, apply_dropout(mlp(t, ctx), ctx)));
  return out;
}

Tensor CrossAttentionBlock::operator()(const Tensor& text, const Tensor& visual, const ForwardContext& ctx) const {
  return forward(text, visual, ctx).fused;
}

void CrossAttentionBlock::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".query", query});
  out.push_back({prefix + ".key", key});
  out.push_back({prefix + ".value", value});
  out.push_back({prefix + ".output", output});
  attention_norm.collect(prefix + ".attn_norm", out);
  mlp.collect(prefix + ".mlp", out);
  output_norm.collect(prefix + ".out_norm", out);
}

CollaborationModule::CollaborationModule(std::size_t dim, std::size_t heads, std::size_t mlp_hidden,
                                         std::size_t depth, Initializer& init) {
  if (depth == 0) throw ConfigError("collaboration: depth must be at least 1");
  for (std::size_t i = 0; i < depth; ++i) blocks.emplace_back(dim, heads, mlp_hidden, init);
}

Tensor CollaborationModule::operator()(const Tensor& text, const Tensor& visual, const ForwardContext& ctx) const {
  Tensor x = text;
  for (const auto& block : blocks) x = block(x, visual, ctx);
  return x;
}

void CollaborationModule::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace mner
