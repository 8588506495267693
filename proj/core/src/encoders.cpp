#include "mner/encoders.hpp"

#include <cmath>
#include <numeric>

#include "mner/errors.hpp"
#include "mner/ops.hpp"

namespace mner {

namespace {

Tensor run_layers(Tensor x, const std::vector<TransformerLayer>& layers, const ForwardContext& ctx) {
  for (const auto& layer : layers) x = layer(x, ctx);
  return x;
}

void collect_layers(const std::string& prefix, const std::vector<TransformerLayer>& layers, ParameterList& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + ".layer" + std::to_string(i), out);
}

}  // namespace

void TextEncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw ConfigError("text encoder: hidden size " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (vocab_size < kReservedIds) throw ConfigError("text encoder: vocabulary smaller than the reserved ids");
  if (max_len < 3) throw ConfigError("text encoder: max_len must leave room for [CLS], one token and [SEP]");
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, Initializer& init) : config_(config) {
  config_.validate();
  token_table = init.normal({config_.vocab_size, config_.dim});
  position_table = init.normal({config_.max_len, config_.dim});
  for (std::size_t i = 0; i < config_.layers; ++i) {
    layers.emplace_back(config_.dim, config_.heads, config_.mlp_hidden, config_.placement, init);
  }
}

Tensor TextEncoder::encode(std::span<const std::size_t> tokens, const ForwardContext& ctx) const {
  if (tokens.empty()) throw ContractError("text_encode: empty sentence");
  std::size_t n = tokens.size();
  if (n + 2 > config_.max_len) {
    n = config_.max_len - 2;
    truncations_.fetch_add(1);
  }
  std::vector<std::size_t> ids;
  ids.reserve(n + 2);
  ids.push_back(kClsId);
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] >= config_.vocab_size) {
      unknown_ids_.fetch_add(1);
      ids.push_back(kUnkId);
    } else {
      ids.push_back(tokens[i]);
    }
  }
  ids.push_back(kSepId);
  Tensor s = add(embedding_gather(token_table, ids), slice_rows(position_table, 0, ids.size()));
  s = apply_dropout(s, ctx);
  return run_layers(std::move(s), layers, ctx);
}

void TextEncoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".token_table", token_table});
  out.push_back({prefix + ".position_table", position_table});
  collect_layers(prefix, layers, out);
}

void VitConfig::validate() const {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ConfigError("vit: image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible into " + std::to_string(patch) + "-pixel patches");
  }
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("vit: embedding width " + std::to_string(embed_dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (out_dim == 0) throw ConfigError("vit: output width must be positive");
}

VitEncoder::VitEncoder(const VitConfig& config, Initializer& init) : config_(config) {
  config_.validate();
  const std::size_t rows = config_.patch_count() + (config_.class_token ? 1 : 0);
  patch_projection = init.normal({config_.channels * config_.patch * config_.patch, config_.embed_dim});
  position_table = init.normal({rows, config_.embed_dim});
  if (config_.class_token) class_embedding = init.normal({1, config_.embed_dim});
  for (std::size_t i = 0; i < config_.layers; ++i) {
    layers.emplace_back(config_.embed_dim, config_.heads, config_.mlp_hidden, config_.placement, init);
  }
  has_output_projection = config_.embed_dim != config_.out_dim;
  if (has_output_projection) output_projection = Linear(config_.embed_dim, config_.out_dim, init);
}

Tensor VitEncoder::encode(const Tensor& image, const ForwardContext& ctx) const {
  const Shape expected{config_.channels, config_.height, config_.width};
  if (image.shape() != expected) {
    throw ShapeError("vit_encode: image " + shape_to_string(image.shape()) + ", configured for " +
                     shape_to_string(expected));
  }
  Tensor v = matmul(patchify(image, config_.patch), patch_projection);
  if (config_.class_token) {
    const Tensor parts[] = {class_embedding, v};
    v = concat(parts, 0);
  }
  v = apply_dropout(add(v, position_table), ctx);
  v = run_layers(std::move(v), layers, ctx);
  return has_output_projection ? output_projection(v) : v;
}

void VitEncoder::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".patch_projection", patch_projection});
  out.push_back({prefix + ".position_table", position_table});
  if (config_.class_token) out.push_back({prefix + ".class_embedding", class_embedding});
  collect_layers(prefix, layers, out);
  if (has_output_projection) output_projection.collect(prefix + ".output_projection", out);
}

std::size_t ConvEncoderConfig::grid() const {
  // 3x3, padding 1: out = (in - 1) / stride + 1
  std::size_t g = (resolution - 1) / stem_stride + 1;
  for (std::size_t i = 0; i < stage_channels.size(); ++i) g = (g - 1) / 2 + 1;
  return g;
}

void ConvEncoderConfig::validate() const {
  if (stage_channels.empty() || blocks_per_stage == 0) throw ConfigError("conv encoder: needs at least one stage");
  if (stem_stride == 0 || resolution == 0) throw ConfigError("conv encoder: invalid resolution or stem stride");
  if (out_dim == 0) throw ConfigError("conv encoder: output width must be positive");
}

Tensor ConvEncoder::Conv::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

Tensor ConvEncoder::Block::operator()(const Tensor& x) const {
  Tensor h = second(relu(first(x)));
  return relu(add(h, has_shortcut ? shortcut(x) : x));
}

ConvEncoder::ConvEncoder(const ConvEncoderConfig& config, Initializer& init) : config_(config) {
  config_.validate();
  // He-scaled kernels; the 0.02 rule is for embeddings and projections.
  auto make_conv = [&init](std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    Conv c;
    c.weight = init.normal({out, in, k, k}, std::sqrt(2.0 / static_cast<double>(in * k * k)));
    c.bias = init.constant({out}, 0.0);
    c.stride = stride;
    c.padding = k / 2;
    return c;
  };
  stem = make_conv(config_.channels, config_.stem_channels, 3, config_.stem_stride);
  std::size_t width = config_.stem_channels;
  for (std::size_t stage_width : config_.stage_channels) {
    for (std::size_t b = 0; b < config_.blocks_per_stage; ++b) {
      const std::size_t stride = b == 0 ? 2 : 1;
      Block block;
      block.first = make_conv(width, stage_width, 3, stride);
      block.second = make_conv(stage_width, stage_width, 3, 1);
      block.has_shortcut = stride != 1 || width != stage_width;
      if (block.has_shortcut) block.shortcut = make_conv(width, stage_width, 1, stride);
      blocks.push_back(std::move(block));
      width = stage_width;
    }
  }
  projection = Linear(config_.feature_dim(), config_.out_dim, init);
}

Tensor ConvEncoder::features(const Tensor& image) const {
  const Shape expected{config_.channels, config_.resolution, config_.resolution};
  if (image.shape() != expected) {
    throw ShapeError("conv_encode: image " + shape_to_string(image.shape()) + ", configured for " +
                     shape_to_string(expected));
  }
  Tensor x = relu(stem(image));
  for (const auto& block : blocks) x = block(x);
  const std::size_t c = x.dim(0), cells = x.dim(1) * x.dim(2);
  return transpose(reshape(x, {c, cells}));
}

Tensor ConvEncoder::encode(const Tensor& image, const ForwardContext& ctx) const {
  return apply_dropout(projection(features(image)), ctx);
}

void ConvEncoder::collect(const std::string& prefix, ParameterList& out) const {
  auto add_conv = [&](const std::string& name, const Conv& c) {
    out.push_back({name + ".weight", c.weight});
    out.push_back({name + ".bias", c.bias});
  };
  add_conv(prefix + ".stem", stem);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string name = prefix + ".block" + std::to_string(i);
    add_conv(name + ".conv1", blocks[i].first);
    add_conv(name + ".conv2", blocks[i].second);
    if (blocks[i].has_shortcut) add_conv(name + ".shortcut", blocks[i].shortcut);
  }
  projection.collect(prefix + ".projection", out);
}

}  // namespace mner
