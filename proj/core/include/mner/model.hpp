#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mner/alignment.hpp"
#include "mner/batching.hpp"
#include "mner/collaboration.hpp"
#include "mner/crf.hpp"
#include "mner/encoders.hpp"
#include "mner/labels.hpp"
#include "mner/nn.hpp"

namespace mner {

struct ModelConfig {
  std::size_t vocab_size = kReservedIds;
  std::size_t dim = 64;  // d
  std::size_t heads = 4;
  std::size_t mlp_hidden = 256;
  std::size_t text_layers = 2;  // M
  std::size_t max_len = 66;

  std::size_t image_size = 32;
  std::size_t patch = 8;
  std::size_t vit_embed_dim = 64;  // D_v
  std::size_t vit_layers = 2;      // K
  bool vit_class_token = false;

  std::size_t conv_stem_channels = 8;
  std::size_t conv_stem_stride = 1;
  std::vector<std::size_t> conv_stage_channels = {8, 16, 32};
  std::size_t conv_blocks_per_stage = 2;

  std::size_t projection_hidden = 64;
  std::size_t projection_dim = 64;
  std::size_t fusion_depth = 1;

  double dropout = 0.1;
  bool use_vit = true;
  bool use_resnet = true;
  bool mask_invalid_transitions = false;
  NormPlacement text_placement = NormPlacement::kSublayerOutput;
  NormPlacement vit_placement = NormPlacement::kPreNorm;
  Pooling text_pooling = Pooling::kClsToken;
  Pooling image_pooling = Pooling::kMean;
  LabelSchema labels;

  // d=64, M=K=2, 4 heads, 32px images, 8px patches, 4x4 conv grid.
  static ModelConfig desk();
  // d=768, M=K=12, 224px images, 32px patches, 7x7 conv grid of 2048-d blocks.
  static ModelConfig paper();

  // Width of the per-token features the CRF sees.
  std::size_t fused_dim() const;
  TextEncoderConfig text_config() const;
  VitConfig vit_config() const;
  ConvEncoderConfig conv_config() const;

  std::map<std::string, std::string> to_map() const;
  // Applies `values` on top of `base`; unknown keys throw ConfigError.
  static ModelConfig from_map(const std::map<std::string, std::string>& values, ModelConfig base);
  static ModelConfig from_map(const std::map<std::string, std::string>& values);
};

struct LossWeights {
  double alpha = 0.8;
  double temperature = 0.07;
  bool use_contrastive = true;
};

// L = alpha * L_crf + (1 - alpha) * (L_cl_vit + L_cl_conv)
Tensor total_loss(const Tensor& crf_nll, const Tensor& cl_vit, const Tensor& cl_conv, double alpha);

struct LossBreakdown {
  Tensor total;
  Tensor crf;      // mean sentence NLL
  Tensor cl_vit;   // scalar zero when the path or the term is off
  Tensor cl_conv;
};

// Text encoder, ViT and conv image encoders, one alignment pair and one
// collaboration module per image path, and a CRF over the fused tokens.
class MultimodalNer {
 public:
  MultimodalNer(const ModelConfig& config, std::uint64_t seed);

  struct TokenOutput {
    Tensor text;       // text encoder output [(n+2) x d]
    Tensor vit;        // [N x d], undefined when the ViT path is off
    Tensor conv;       // [g^2 x d], undefined when the conv path is off
    Tensor features;   // [n x fused_dim]
    Tensor emissions;  // [n x L]
  };

  TokenOutput forward(std::span<const std::size_t> tokens, const Tensor& image, const ForwardContext& ctx) const;
  LossBreakdown loss(const Batch& batch, const LossWeights& weights, const ForwardContext& ctx) const;
  std::vector<std::size_t> predict(std::span<const std::size_t> tokens, const Tensor& image) const;

  ParameterList parameters() const;
  // Call after every optimizer step.
  void after_update();

  const ModelConfig& config() const { return config_; }
  const TextEncoder& text_encoder() const { return *text_; }
  const CrfDecoder& crf() const { return crf_; }

 private:
  ModelConfig config_;
  std::unique_ptr<TextEncoder> text_;
  std::unique_ptr<VitEncoder> vit_;
  std::unique_ptr<ConvEncoder> conv_;
  ProjectionHead vit_text_head_, vit_image_head_;
  ProjectionHead conv_text_head_, conv_image_head_;
  CollaborationModule vit_fusion_, conv_fusion_;
  CrfDecoder crf_;
};

}  // namespace mner
