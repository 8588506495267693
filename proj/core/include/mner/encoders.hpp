#pragma once

#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mner/nn.hpp"
#include "mner/tensor.hpp"

namespace mner {

// Reserved vocabulary ids shared by the text encoder and the vocabulary.
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kClsId = 2;
inline constexpr std::size_t kSepId = 3;
inline constexpr std::size_t kReservedIds = 4;

struct TextEncoderConfig {
  std::size_t vocab_size = kReservedIds;
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 256;
  std::size_t max_len = 66;  // includes [CLS] and [SEP]
  NormPlacement placement = NormPlacement::kSublayerOutput;

  void validate() const;
};

// Token + position embeddings followed by a transformer stack. Output row 0
// is [CLS], rows 1..n the tokens, row n+1 [SEP].
class TextEncoder {
 public:
  TextEncoder(const TextEncoderConfig& config, Initializer& init);

  Tensor encode(std::span<const std::size_t> tokens, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  const TextEncoderConfig& config() const { return config_; }
  std::size_t unknown_ids() const { return unknown_ids_.load(); }
  std::size_t truncations() const { return truncations_.load(); }

  Tensor token_table;     // [vocab x d]
  Tensor position_table;  // [max_len x d]
  std::vector<TransformerLayer> layers;

 private:
  TextEncoderConfig config_;
  mutable std::atomic<std::size_t> unknown_ids_{0};
  mutable std::atomic<std::size_t> truncations_{0};
};

struct VitConfig {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch = 8;
  std::size_t embed_dim = 64;  // D_v
  std::size_t out_dim = 64;    // d; a projection is added when it differs from embed_dim
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 256;
  bool class_token = false;
  NormPlacement placement = NormPlacement::kPreNorm;

  std::size_t patch_count() const { return (height / patch) * (width / patch); }
  void validate() const;
};

// Patch projection + absolute position embeddings + transformer stack.
class VitEncoder {
 public:
  VitEncoder(const VitConfig& config, Initializer& init);

  // [N x d], or [(N+1) x d] with the class row first when class_token is set.
  Tensor encode(const Tensor& image, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  const VitConfig& config() const { return config_; }

  Tensor patch_projection;  // [C*P*P x D_v]
  Tensor position_table;    // [N x D_v] (N+1 rows with a class token)
  Tensor class_embedding;   // [1 x D_v], only with class_token
  std::vector<TransformerLayer> layers;
  bool has_output_projection = false;
  Linear output_projection;

 private:
  VitConfig config_;
};

struct ConvEncoderConfig {
  std::size_t channels = 3;
  std::size_t resolution = 32;
  std::size_t stem_channels = 8;
  std::size_t stem_stride = 1;
  // One entry per stage; each stage halves the grid in its first block.
  std::vector<std::size_t> stage_channels = {8, 16, 32};
  std::size_t blocks_per_stage = 2;
  std::size_t out_dim = 64;  // d

  std::size_t grid() const;
  std::size_t feature_dim() const { return stage_channels.back(); }  // c_out
  void validate() const;
};

// Residual convolution stack. Its g x g feature map is read out as g^2
// visual tokens of width c_out and mapped to d with R' = R W_r + b.
class ConvEncoder {
 public:
  ConvEncoder(const ConvEncoderConfig& config, Initializer& init);

  Tensor encode(const Tensor& image, const ForwardContext& ctx) const;
  // Feature map before the projection, [g^2 x c_out].
  Tensor features(const Tensor& image) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  const ConvEncoderConfig& config() const { return config_; }

  struct Conv {
    Tensor weight;  // [Co x Ci x k x k]
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 1;
    Tensor operator()(const Tensor& x) const;
  };
  struct Block {
    Conv first;
    Conv second;
    bool has_shortcut = false;
    Conv shortcut;  // 1x1 when the block changes width or stride
    Tensor operator()(const Tensor& x) const;
  };

  Conv stem;
  std::vector<Block> blocks;
  Linear projection;  // W_r [c_out x d], b [d]

 private:
  ConvEncoderConfig config_;
};

}  // namespace mner
