#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mner/tensor.hpp"

namespace mner {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

// Per-call state for stochastic layers.
struct ForwardContext {
  bool train = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

Tensor apply_dropout(const Tensor& x, const ForwardContext& ctx);

// Scaled random initialization: normal(0, 0.02) weights, zero biases,
// unit LN gain. Values are rounded to float32 so checkpoints (float32 on
// disk) reproduce parameters exactly.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed, double stddev = 0.02) : rng_(seed), stddev_(stddev) {}
  Tensor normal(Shape shape);
  Tensor normal(Shape shape, double stddev);
  Tensor constant(Shape shape, double value);

 private:
  std::mt19937_64 rng_;
  double stddev_;
};

struct Linear {
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Initializer& init);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }

  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(std::size_t dim, Initializer& init, double eps = 1e-5);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;
};

enum class Activation { kRelu, kGelu };

// Linear -> activation -> dropout -> Linear
struct FeedForward {
  FeedForward() = default;
  FeedForward(std::size_t dim, std::size_t hidden, std::size_t out, Activation act, Initializer& init);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Linear first;
  Linear second;
  Activation activation = Activation::kGelu;
};

// softmax(Q_i K_i^T / sqrt(d_h)) V_i for each head i, heads concatenated
// column-wise. q [n x d], k and v [m x d]. When `weights` is non-null it
// receives one [n x m] attention matrix per head.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                            std::vector<Tensor>* weights = nullptr);

struct SelfAttention {
  SelfAttention() = default;
  SelfAttention(std::size_t dim, std::size_t heads, Initializer& init);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  std::size_t heads = 1;
  Linear query, key, value, output;
};

// Where layer normalization sits relative to each residual sublayer.
enum class NormPlacement {
  kSublayerOutput,  // x + LN(f(x))
  kPreNorm,         // x + f(LN(x))
  kPostNorm,        // LN(x + f(x))
};

struct TransformerLayer {
  TransformerLayer() = default;
  TransformerLayer(std::size_t dim, std::size_t heads, std::size_t mlp_hidden, NormPlacement placement,
                   Initializer& init);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  NormPlacement placement = NormPlacement::kPostNorm;
  SelfAttention attention;
  FeedForward mlp;
  LayerNorm attention_norm;
  LayerNorm mlp_norm;
};

}  // namespace mner
