#include "mner/model.hpp"

#include <sstream>

#include "mner/config_file.hpp"
#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

namespace {

std::string placement_name(NormPlacement p) {
  switch (p) {
    case NormPlacement::kSublayerOutput:
      return "sublayer";
    case NormPlacement::kPreNorm:
      return "pre";
    case NormPlacement::kPostNorm:
      return "post";
  }
  return "post";
}

NormPlacement parse_placement(const std::string& key, const std::string& v) {
  if (v == "sublayer") return NormPlacement::kSublayerOutput;
  if (v == "pre") return NormPlacement::kPreNorm;
  if (v == "post") return NormPlacement::kPostNorm;
  throw ConfigError(key + ": expected sublayer, pre or post, got '" + v + "'");
}

std::string pooling_name(Pooling p) { return p == Pooling::kClsToken ? "cls" : "mean"; }

Pooling parse_pooling(const std::string& key, const std::string& v) {
  if (v == "cls") return Pooling::kClsToken;
  if (v == "mean") return Pooling::kMean;
  throw ConfigError(key + ": expected cls or mean, got '" + v + "'");
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& vectors) {
  std::vector<Tensor> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) rows.push_back(reshape(v, {1, v.numel()}));
  return concat(rows, 0);
}

}  // namespace

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.dim = 768;
  c.heads = 12;
  c.mlp_hidden = 3072;
  c.text_layers = 12;
  c.max_len = 512;
  c.image_size = 224;
  c.patch = 32;
  c.vit_embed_dim = 768;
  c.vit_layers = 12;
  c.conv_stem_channels = 64;
  c.conv_stem_stride = 4;
  c.conv_stage_channels = {256, 512, 2048};
  c.projection_hidden = 768;
  c.projection_dim = 768;
  return c;
}

std::size_t ModelConfig::fused_dim() const {
  const std::size_t paths = (use_vit ? 1 : 0) + (use_resnet ? 1 : 0);
  return paths == 0 ? dim : paths * dim;
}

TextEncoderConfig ModelConfig::text_config() const {
  TextEncoderConfig t;
  t.vocab_size = vocab_size;
  t.dim = dim;
  t.layers = text_layers;
  t.heads = heads;
  t.mlp_hidden = mlp_hidden;
  t.max_len = max_len;
  t.placement = text_placement;
  return t;
}

VitConfig ModelConfig::vit_config() const {
  VitConfig v;
  v.height = v.width = image_size;
  v.patch = patch;
  v.embed_dim = vit_embed_dim;
  v.out_dim = dim;
  v.layers = vit_layers;
  v.heads = heads;
  v.mlp_hidden = vit_embed_dim * 4;
  v.class_token = vit_class_token;
  v.placement = vit_placement;
  return v;
}

ConvEncoderConfig ModelConfig::conv_config() const {
  ConvEncoderConfig c;
  c.resolution = image_size;
  c.stem_channels = conv_stem_channels;
  c.stem_stride = conv_stem_stride;
  c.stage_channels = conv_stage_channels;
  c.blocks_per_stage = conv_blocks_per_stage;
  c.out_dim = dim;
  return c;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"vocab_size", str(vocab_size)},
      {"dim", str(dim)},
      {"heads", str(heads)},
      {"mlp_hidden", str(mlp_hidden)},
      {"text_layers", str(text_layers)},
      {"max_len", str(max_len)},
      {"image_size", str(image_size)},
      {"patch", str(patch)},
      {"vit_embed_dim", str(vit_embed_dim)},
      {"vit_layers", str(vit_layers)},
      {"vit_class_token", vit_class_token ? "true" : "false"},
      {"conv_stem_channels", str(conv_stem_channels)},
      {"conv_stem_stride", str(conv_stem_stride)},
      {"conv_stage_channels", join(conv_stage_channels)},
      {"conv_blocks_per_stage", str(conv_blocks_per_stage)},
      {"projection_hidden", str(projection_hidden)},
      {"projection_dim", str(projection_dim)},
      {"fusion_depth", str(fusion_depth)},
      {"dropout", str(dropout)},
      {"use_vit", use_vit ? "true" : "false"},
      {"use_resnet", use_resnet ? "true" : "false"},
      {"mask_invalid_transitions", mask_invalid_transitions ? "true" : "false"},
      {"text_placement", placement_name(text_placement)},
      {"vit_placement", placement_name(vit_placement)},
      {"text_pooling", pooling_name(text_pooling)},
      {"image_pooling", pooling_name(image_pooling)},
      {"labels", join(labels.tags())},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values, ModelConfig base) {
  ModelConfig c = std::move(base);
  for (const auto& [k, v] : values) {
    if (k == "vocab_size") c.vocab_size = kv_size(k, v);
    else if (k == "dim") c.dim = kv_size(k, v);
    else if (k == "heads") c.heads = kv_size(k, v);
    else if (k == "mlp_hidden") c.mlp_hidden = kv_size(k, v);
    else if (k == "text_layers") c.text_layers = kv_size(k, v);
    else if (k == "max_len") c.max_len = kv_size(k, v);
    else if (k == "image_size") c.image_size = kv_size(k, v);
    else if (k == "patch") c.patch = kv_size(k, v);
    else if (k == "vit_embed_dim") c.vit_embed_dim = kv_size(k, v);
    else if (k == "vit_layers") c.vit_layers = kv_size(k, v);
    else if (k == "vit_class_token") c.vit_class_token = kv_bool(k, v);
    else if (k == "conv_stem_channels") c.conv_stem_channels = kv_size(k, v);
    else if (k == "conv_stem_stride") c.conv_stem_stride = kv_size(k, v);
    else if (k == "conv_stage_channels") c.conv_stage_channels = kv_size_list(k, v);
    else if (k == "conv_blocks_per_stage") c.conv_blocks_per_stage = kv_size(k, v);
    else if (k == "projection_hidden") c.projection_hidden = kv_size(k, v);
    else if (k == "projection_dim") c.projection_dim = kv_size(k, v);
    else if (k == "fusion_depth") c.fusion_depth = kv_size(k, v);
    else if (k == "dropout") c.dropout = kv_double(k, v);
    else if (k == "use_vit") c.use_vit = kv_bool(k, v);
    else if (k == "use_resnet") c.use_resnet = kv_bool(k, v);
    else if (k == "mask_invalid_transitions") c.mask_invalid_transitions = kv_bool(k, v);
    else if (k == "text_placement") c.text_placement = parse_placement(k, v);
    else if (k == "vit_placement") c.vit_placement = parse_placement(k, v);
    else if (k == "text_pooling") c.text_pooling = parse_pooling(k, v);
    else if (k == "image_pooling") c.image_pooling = parse_pooling(k, v);
    else if (k == "labels") c.labels = LabelSchema(kv_string_list(v));
    else throw ConfigError("unknown model setting '" + k + "'");
  }
  return c;
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
  return from_map(values, ModelConfig{});
}

Tensor total_loss(const Tensor& crf_nll, const Tensor& cl_vit, const Tensor& cl_conv, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw ContractError("total_loss: alpha must lie in [0, 1]");
  return add(scale(crf_nll, alpha), scale(add(cl_vit, cl_conv), 1.0 - alpha));
}

MultimodalNer::MultimodalNer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  Initializer init(seed);
  text_ = std::make_unique<TextEncoder>(config_.text_config(), init);
  const std::size_t d = config_.dim;
  if (config_.use_vit) {
    vit_ = std::make_unique<VitEncoder>(config_.vit_config(), init);
    vit_text_head_ = ProjectionHead(d, config_.projection_hidden, config_.projection_dim, init);
    vit_image_head_ = ProjectionHead(d, config_.projection_hidden, config_.projection_dim, init);
    vit_fusion_ = CollaborationModule(d, config_.heads, config_.mlp_hidden, config_.fusion_depth, init);
  }
  if (config_.use_resnet) {
    conv_ = std::make_unique<ConvEncoder>(config_.conv_config(), init);
    conv_text_head_ = ProjectionHead(d, config_.projection_hidden, config_.projection_dim, init);
    conv_image_head_ = ProjectionHead(d, config_.projection_hidden, config_.projection_dim, init);
    conv_fusion_ = CollaborationModule(d, config_.heads, config_.mlp_hidden, config_.fusion_depth, init);
  }
  crf_ = CrfDecoder(config_.labels, config_.fused_dim(), config_.mask_invalid_transitions, init);
}

MultimodalNer::TokenOutput MultimodalNer::forward(std::span<const std::size_t> tokens, const Tensor& image,
                                                  const ForwardContext& ctx) const {
  TokenOutput out;
  out.text = text_->encode(tokens, ctx);
  const std::size_t n = out.text.dim(0) - 2;
  Tensor words = slice_rows(out.text, 1, n);
  std::vector<Tensor> fused;
  if (vit_) {
    out.vit = vit_->encode(image, ctx);
    fused.push_back(vit_fusion_(words, out.vit, ctx));
  }
  if (conv_) {
    out.conv = conv_->encode(image, ctx);
    fused.push_back(conv_fusion_(words, out.conv, ctx));
  }
  if (fused.empty()) {
    out.features = words;
  } else if (fused.size() == 1) {
    out.features = fused.front();
  } else {
    out.features = concat(fused, 1);
  }
  out.emissions = crf_.emissions(out.features);
  return out;
}

LossBreakdown MultimodalNer::loss(const Batch& batch, const LossWeights& weights, const ForwardContext& ctx) const {
  if (batch.size() == 0) throw ContractError("loss: empty batch");
  std::vector<Tensor> nlls;
  std::vector<Tensor> text_summary, vit_summary, conv_summary;
  for (std::size_t row = 0; row < batch.size(); ++row) {
    const auto tokens = batch.tokens(row);
    const TokenOutput out = forward(tokens, batch.image(row), ctx);
    auto gold = batch.gold(row);
    gold.resize(out.emissions.dim(0));  // encoder-side truncation
    nlls.push_back(crf_nll(out.emissions, crf_.transitions, gold));
    text_summary.push_back(pool(out.text, config_.text_pooling, true));
    if (vit_) vit_summary.push_back(pool(out.vit, config_.image_pooling, config_.vit_class_token));
    if (conv_) conv_summary.push_back(pool(out.conv, config_.image_pooling, false));
  }
  LossBreakdown result;
  result.crf = scale(sum(concat(nlls, 0)), 1.0 / static_cast<double>(nlls.size()));
  result.cl_vit = Tensor::scalar(0.0);
  result.cl_conv = Tensor::scalar(0.0);
  // A single-example batch has no negatives; its contrastive terms stay zero.
  if (weights.use_contrastive && batch.size() >= 2) {
    const Tensor texts = stack_rows(text_summary);
    if (vit_) {
      result.cl_vit =
          contrastive_loss(vit_text_head_(texts), vit_image_head_(stack_rows(vit_summary)), weights.temperature);
    }
    if (conv_) {
      result.cl_conv =
          contrastive_loss(conv_text_head_(texts), conv_image_head_(stack_rows(conv_summary)), weights.temperature);
    }
  }
  result.total = total_loss(result.crf, result.cl_vit, result.cl_conv, weights.alpha);
  return result;
}

std::vector<std::size_t> MultimodalNer::predict(std::span<const std::size_t> tokens, const Tensor& image) const {
  const TokenOutput out = forward(tokens, image, ForwardContext{});
  return viterbi(out.emissions, crf_.transitions).path;
}

ParameterList MultimodalNer::parameters() const {
  ParameterList out;
  text_->collect("text", out);
  if (vit_) {
    vit_->collect("vit", out);
    vit_text_head_.collect("align_vit.text_head", out);
    vit_image_head_.collect("align_vit.image_head", out);
    vit_fusion_.collect("fusion_vit", out);
  }
  if (conv_) {
    conv_->collect("conv", out);
    conv_text_head_.collect("align_conv.text_head", out);
    conv_image_head_.collect("align_conv.image_head", out);
    conv_fusion_.collect("fusion_conv", out);
  }
  crf_.collect("crf", out);
  return out;
}

void MultimodalNer::after_update() { crf_.apply_mask(); }

}  // namespace mner
