#include "mner/nn.hpp"

#include <cmath>

#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

Tensor apply_dropout(const Tensor& x, const ForwardContext& ctx) {
  if (!ctx.train || ctx.dropout == 0.0) return x;
  if (ctx.rng == nullptr) throw ContractError("training-mode forward pass without an RNG");
  return dropout(x, ctx.dropout, true, *ctx.rng);
}

Tensor Initializer::normal(Shape shape) { return normal(std::move(shape), stddev_); }

Tensor Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = static_cast<double>(static_cast<float>(dist(rng_)));
  return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor Initializer::constant(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, value));
}

Linear::Linear(std::size_t in, std::size_t out, Initializer& init)
    : weight(init.normal({in, out})), bias(init.constant({out}, 0.0)) {}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t dim, Initializer& init, double eps_)
    : gamma(init.constant({dim}, 1.0)), beta(init.constant({dim}, 0.0)), eps(eps_) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

FeedForward::FeedForward(std::size_t dim, std::size_t hidden, std::size_t out, Activation act, Initializer& init)
    : first(dim, hidden, init), second(hidden, out, init), activation(act) {}

Tensor FeedForward::operator()(const Tensor& x, const ForwardContext& ctx) const {
  Tensor h = first(x);
  h = activation == Activation::kRelu ? relu(h) : gelu(h);
  return second(apply_dropout(h, ctx));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  first.collect(prefix + ".fc1", out);
  second.collect(prefix + ".fc2", out);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            std::vector<Tensor>* weights) {
  const std::size_t d = q.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (k.dim(1) != d || v.dim(1) != d || k.dim(0) != v.dim(0)) {
    throw ShapeError("attention: query " + shape_to_string(q.shape()) + ", key " + shape_to_string(k.shape()) +
                     ", value " + shape_to_string(v.shape()));
  }
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), -1);
    if (weights != nullptr) weights->push_back(attn);
    outputs.push_back(matmul(attn, vh));
  }
  return heads == 1 ? outputs.front() : concat(outputs, 1);
}

SelfAttention::SelfAttention(std::size_t dim, std::size_t heads_, Initializer& init)
    : heads(heads_),
      query(dim, dim, init),
      key(dim, dim, init),
      value(dim, dim, init),
      output(dim, dim, init) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("self-attention: width " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Tensor SelfAttention::operator()(const Tensor& x, const ForwardContext& ctx) const {
  Tensor mixed = multi_head_attention(query(x), key(x), value(x), heads);
  return apply_dropout(output(mixed), ctx);
}

void SelfAttention::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

TransformerLayer::TransformerLayer(std::size_t dim, std::size_t heads, std::size_t mlp_hidden,
                                   NormPlacement placement_, Initializer& init)
    : placement(placement_),
      attention(dim, heads, init),
      mlp(dim, mlp_hidden, dim, Activation::kGelu, init),
      attention_norm(dim, init),
      mlp_norm(dim, init) {}

Tensor TransformerLayer::operator()(const Tensor& x, const ForwardContext& ctx) const {
  auto sublayer = [&](const Tensor& in, const LayerNorm& norm, auto&& f) {
    switch (placement) {
      case NormPlacement::kSublayerOutput:
        return add(norm(f(in)), in);
      case NormPlacement::kPreNorm:
        return add(f(norm(in)), in);
      case NormPlacement::kPostNorm:
        break;
    }
    return norm(add(in, f(in)));
  };
  Tensor h = sublayer(x, attention_norm, [&](const Tensor& t) { return attention(t, ctx); });
  return sublayer(h, mlp_norm, [&](const Tensor& t) { return apply_dropout(mlp(t, ctx), ctx); });
}

void TransformerLayer::collect(const std::string& prefix, ParameterList& out) const {
  attention.collect(prefix + ".attn", out);
  attention_norm.collect(prefix + ".attn_norm", out);
  mlp.collect(prefix + ".mlp", out);
  mlp_norm.collect(prefix + ".mlp_norm", out);
}

}  // namespace mner
