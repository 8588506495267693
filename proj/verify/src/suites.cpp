#include "mner/verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "mner/alignment.hpp"
#include "mner/collaboration.hpp"
#include "mner/crf.hpp"
#include "mner/encoders.hpp"
#include "mner/model.hpp"
#include "mner/nn.hpp"
#include "mner/ops.hpp"
#include "mner/verify/gradcheck.hpp"
#include "mner/verify/oracles.hpp"

namespace mner::verify {

namespace {

// Numerator floor of the relative error: coordinates whose gradients are
// both below it are compared in absolute terms.
constexpr double kRelativeFloor = 1e-3;

// Standard deviation of block weights in the gradient cases, well above the
// 0.02 training init so gradients are not vanishingly small. The text layer
// normalizes each sublayer output, which is sharply curved when that output
// is small, so it gets larger weights.
constexpr double kBlockWeightScale = 0.25;
constexpr double kTextLayerWeightScale = 0.5;

std::vector<double> normal_values(std::size_t n, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

std::vector<double> uniform_values(std::size_t n, std::mt19937_64& rng, double half_width) {
  std::uniform_real_distribution<double> dist(-half_width, half_width);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Op inputs are uniform in [-half_width, half_width].
Tensor random_param(Shape shape, std::mt19937_64& rng, double half_width = 1.0) {
  const std::size_t n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), uniform_values(n, rng, half_width));
}

Tensor random_const(Shape shape, std::mt19937_64& rng) {
  const std::size_t n = shape_numel(shape);
  return Tensor::from(std::move(shape), normal_values(n, rng));
}

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.vocab_size = 10;
  c.dim = 8;
  c.heads = 2;
  c.mlp_hidden = 12;
  c.text_layers = 1;
  c.max_len = 8;
  c.image_size = 8;
  c.patch = 4;
  c.vit_embed_dim = 8;
  c.vit_layers = 1;
  c.conv_stem_channels = 2;
  c.conv_stage_channels = {2, 4};
  c.conv_blocks_per_stage = 1;
  c.projection_hidden = 16;
  c.projection_dim = 4;
  c.dropout = 0.0;
  return c;
}

Batch tiny_batch(std::mt19937_64& rng) {
  Batch b;
  b.example_indices = {0, 1};
  b.lengths = {3, 2};
  b.max_length = 3;
  b.token_ids = {4, 5, 9, 6, 4, kPadId};
  b.label_ids = {1, 2, 0, 3, 0, kIgnoreLabel};
  b.images = Tensor::from({2, 3, 8, 8}, uniform_values(2 * 3 * 8 * 8, rng, 1.0));
  return b;
}

// Scalar probe sum(out * R) with a fixed random R, so no output direction
// cancels the way a plain sum does under softmax or layer norm.
struct Probe {
  std::mt19937_64* rng;
  Tensor weights;
  Tensor operator()(const Tensor& out) {
    if (!weights.defined() || weights.shape() != out.shape()) weights = random_const(out.shape(), *rng);
    return sum(mul(out, weights));
  }
};

struct Case {
  std::string name;
  std::function<void(std::mt19937_64&, std::vector<Tensor>&, std::function<Tensor()>&)> build;
};

std::vector<Tensor> params_of(const std::function<void(const std::string&, ParameterList&)>& collect) {
  ParameterList list;
  collect("p", list);
  std::vector<Tensor> out;
  for (auto& p : list) out.push_back(p.tensor);
  return out;
}

std::vector<Case> gradient_cases() {
  std::vector<Case> cases;
  auto unary = [&cases](std::string name, Shape shape, std::function<Tensor(const Tensor&)> op) {
    cases.push_back({std::move(name), [shape, op](std::mt19937_64& rng, std::vector<Tensor>& in,
                                                  std::function<Tensor()>& f) {
                       Tensor x = random_param(shape, rng);
                       in = {x};
                       auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                       (*probe)(op(x));
                       f = [x, op, probe] { return (*probe)(op(x)); };
                     }});
  };
  auto binary = [&cases](std::string name, Shape a_shape, Shape b_shape,
                         std::function<Tensor(const Tensor&, const Tensor&)> op) {
    cases.push_back({std::move(name), [a_shape, b_shape, op](std::mt19937_64& rng, std::vector<Tensor>& in,
                                                             std::function<Tensor()>& f) {
                       Tensor a = random_param(a_shape, rng);
                       Tensor b = random_param(b_shape, rng);
                       in = {a, b};
                       auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                       (*probe)(op(a, b));
                       f = [a, b, op, probe] { return (*probe)(op(a, b)); };
                     }});
  };

  binary("add", {3, 4}, {3, 4}, add);
  binary("add_broadcast", {3, 4}, {4}, add);
  binary("sub_broadcast", {2, 3, 4}, {3, 4}, sub);
  binary("mul", {3, 4}, {3, 4}, mul);
  binary("mul_broadcast", {3, 4}, {4}, mul);
  unary("scale", {3, 4}, [](const Tensor& x) { return scale(x, -1.7); });
  unary("add_scalar", {3, 4}, [](const Tensor& x) { return add_scalar(x, 0.3); });
  binary("matmul", {3, 5}, {5, 2}, matmul);
  unary("transpose", {3, 4}, transpose);
  cases.push_back({"linear", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Tensor x = random_param({3, 4}, rng), w = random_param({4, 5}, rng), b = random_param({5}, rng);
                     Tensor v = random_param({4}, rng);
                     in = {x, w, b, v};
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     auto probe_v = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)(linear(x, w, b));
                     (*probe_v)(linear(v, w, b));
                     f = [=] { return add((*probe)(linear(x, w, b)), (*probe_v)(linear(v, w, b))); };
                   }});
  unary("relu", {4, 5}, relu);
  unary("gelu", {4, 5}, gelu);
  unary("softmax_rows", {3, 5}, [](const Tensor& x) { return softmax(x, -1); });
  unary("softmax_cols", {3, 5}, [](const Tensor& x) { return softmax(x, 0); });
  unary("log_softmax_rows", {3, 5}, [](const Tensor& x) { return log_softmax(x, 1); });
  unary("log_softmax_cols", {3, 5}, [](const Tensor& x) { return log_softmax(x, 0); });
  unary("log_sum_exp", {3, 5}, [](const Tensor& x) { return log_sum_exp(x, 1); });
  unary("log_sum_exp_vector", {6}, [](const Tensor& x) { return log_sum_exp(x, 0); });
  unary("mean_axis0", {3, 5}, [](const Tensor& x) { return mean(x, 0); });
  unary("mean_axis1", {3, 5}, [](const Tensor& x) { return mean(x, 1); });
  unary("sum", {3, 5}, sum);
  unary("mean_all", {3, 5}, mean_all);
  cases.push_back({"layer_norm", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Tensor x = random_param({3, 6}, rng), g = random_param({6}, rng), b = random_param({6}, rng);
                     in = {x, g, b};
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)(layer_norm(x, g, b));
                     f = [=] { return (*probe)(layer_norm(x, g, b)); };
                   }});
  cases.push_back({"dropout", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Tensor x = random_param({4, 5}, rng);
                     in = {x};
                     const std::uint64_t mask_seed = rng();
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     auto run = [x, mask_seed, probe] {
                       std::mt19937_64 r(mask_seed);
                       return (*probe)(dropout(x, 0.3, true, r));
                     };
                     run();
                     f = run;
                   }});
  binary("concat_rows", {2, 4}, {3, 4}, [](const Tensor& a, const Tensor& b) {
    const Tensor parts[] = {a, b};
    return concat(parts, 0);
  });
  binary("concat_cols", {3, 2}, {3, 4}, [](const Tensor& a, const Tensor& b) {
    const Tensor parts[] = {a, b};
    return concat(parts, 1);
  });
  unary("reshape", {3, 4}, [](const Tensor& x) { return reshape(x, {2, 6}); });
  unary("slice_rows", {5, 3}, [](const Tensor& x) { return slice_rows(x, 1, 3); });
  unary("slice_cols", {3, 5}, [](const Tensor& x) { return slice_cols(x, 2, 2); });
  unary("embedding_gather", {5, 3}, [](const Tensor& x) {
    const std::size_t ids[] = {4, 0, 4, 2};
    return embedding_gather(x, ids);
  });
  unary("take", {3, 4}, [](const Tensor& x) {
    const std::size_t ids[] = {0, 5, 5, 11, 7};
    return take(x, ids);
  });
  unary("l2_normalize_rows", {3, 5}, [](const Tensor& x) { return l2_normalize_rows(x); });
  cases.push_back({"conv2d", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Tensor x = random_param({2, 5, 5}, rng), w = random_param({3, 2, 3, 3}, rng);
                     Tensor b = random_param({3}, rng);
                     in = {x, w, b};
                     auto p1 = std::make_shared<Probe>(Probe{&rng, {}});
                     auto p2 = std::make_shared<Probe>(Probe{&rng, {}});
                     (*p1)(conv2d(x, w, b, 1, 1));
                     (*p2)(conv2d(x, w, b, 2, 1));
                     f = [=] { return add((*p1)(conv2d(x, w, b, 1, 1)), (*p2)(conv2d(x, w, b, 2, 1))); };
                   }});
  unary("patchify", {2, 4, 4}, [](const Tensor& x) { return patchify(x, 2); });
  cases.push_back({"multi_head_attention", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                              std::function<Tensor()>& f) {
                     Tensor q = random_param({3, 4}, rng), k = random_param({5, 4}, rng), v = random_param({5, 4}, rng);
                     in = {q, k, v};
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)(multi_head_attention(q, k, v, 2));
                     f = [=] { return (*probe)(multi_head_attention(q, k, v, 2)); };
                   }});
  cases.push_back({"crf_score", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Tensor e = random_param({4, 3}, rng), t = random_param({5, 5}, rng);
                     in = {e, t};
                     const std::vector<std::size_t> path = {2, 0, 0, 1};
                     f = [=] { return crf_score(e, t, path); };
                   }});
  cases.push_back({"crf_log_partition", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                           std::function<Tensor()>& f) {
                     Tensor e = random_param({4, 3}, rng), t = random_param({5, 5}, rng);
                     in = {e, t};
                     f = [=] { return crf_log_partition(e, t); };
                   }});

  // Composite blocks, with weights at unit-order scale.
  cases.push_back({"text_layer", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Initializer init(rng(), kTextLayerWeightScale);
                     auto layer = std::make_shared<TransformerLayer>(8, 2, 12, NormPlacement::kSublayerOutput, init);
                     Tensor x = random_param({4, 8}, rng);
                     in = params_of([&](const std::string& p, ParameterList& o) { layer->collect(p, o); });
                     in.push_back(x);
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)((*layer)(x, {}));
                     f = [=] { return (*probe)((*layer)(x, {})); };
                   }});
  cases.push_back({"vit_layer", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Initializer init(rng(), kBlockWeightScale);
                     auto layer = std::make_shared<TransformerLayer>(8, 2, 12, NormPlacement::kPreNorm, init);
                     Tensor x = random_param({5, 8}, rng);
                     in = params_of([&](const std::string& p, ParameterList& o) { layer->collect(p, o); });
                     in.push_back(x);
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)((*layer)(x, {}));
                     f = [=] { return (*probe)((*layer)(x, {})); };
                   }});
  cases.push_back({"conv_block", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     auto block = std::make_shared<ConvEncoder::Block>();
                     auto conv = [&rng](std::size_t ci, std::size_t co, std::size_t k, std::size_t stride) {
                       ConvEncoder::Conv c;
                       c.weight = random_param({co, ci, k, k}, rng, 0.5);
                       c.bias = random_param({co}, rng, 0.5);
                       c.stride = stride;
                       c.padding = k / 2;
                       return c;
                     };
                     block->first = conv(2, 3, 3, 2);
                     block->second = conv(3, 3, 3, 1);
                     block->has_shortcut = true;
                     block->shortcut = conv(2, 3, 1, 2);
                     Tensor x = random_param({2, 6, 6}, rng);
                     in = {block->first.weight,  block->first.bias,  block->second.weight, block->second.bias,
                           block->shortcut.weight, block->shortcut.bias, x};
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)((*block)(x));
                     f = [=] { return (*probe)((*block)(x)); };
                   }});
  cases.push_back({"projection_head", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                         std::function<Tensor()>& f) {
                     Initializer init(rng(), kBlockWeightScale);
                     auto head = std::make_shared<ProjectionHead>(6, 10, 5, init);
                     Tensor x = random_param({3, 6}, rng);
                     in = params_of([&](const std::string& p, ParameterList& o) { head->collect(p, o); });
                     in.push_back(x);
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)((*head)(x));
                     f = [=] { return (*probe)((*head)(x)); };
                   }});
  cases.push_back({"contrastive_loss", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                          std::function<Tensor()>& f) {
                     Tensor t = random_param({4, 6}, rng), v = random_param({4, 6}, rng);
                     in = {t, v};
                     f = [=] { return contrastive_loss(t, v, 0.07); };
                   }});
  cases.push_back({"cross_attention_block", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                               std::function<Tensor()>& f) {
                     Initializer init(rng(), kBlockWeightScale);
                     auto block = std::make_shared<CrossAttentionBlock>(8, 2, 12, init);
                     Tensor text = random_param({3, 8}, rng), visual = random_param({5, 8}, rng);
                     in = params_of([&](const std::string& p, ParameterList& o) { block->collect(p, o); });
                     in.push_back(text);
                     in.push_back(visual);
                     auto probe = std::make_shared<Probe>(Probe{&rng, {}});
                     (*probe)((*block)(text, visual, {}));
                     f = [=] { return (*probe)((*block)(text, visual, {})); };
                   }});
  cases.push_back({"crf_nll", [](std::mt19937_64& rng, std::vector<Tensor>& in, std::function<Tensor()>& f) {
                     Initializer init(rng(), kBlockWeightScale);
                     auto decoder = std::make_shared<CrfDecoder>(LabelSchema(), 6, false, init);
                     Tensor t = decoder->transitions;
                     auto data = t.mutable_data();
                     const auto noise = normal_values(data.size(), rng, 0.5);
                     for (std::size_t i = 0; i < data.size(); ++i) data[i] += noise[i];
                     Tensor features = random_param({4, 6}, rng);
                     in = params_of([&](const std::string& p, ParameterList& o) { decoder->collect(p, o); });
                     in.push_back(features);
                     const std::vector<std::size_t> gold = {1, 2, 0, 3};
                     f = [=] { return crf_nll(decoder->emissions(features), decoder->transitions, gold); };
                   }});
  cases.push_back({"full_model_loss", [](std::mt19937_64& rng, std::vector<Tensor>& in,
                                         std::function<Tensor()>& f) {
                     auto model = std::make_shared<MultimodalNer>(tiny_model_config(), rng());
                     auto batch = std::make_shared<Batch>(tiny_batch(rng));
                     // At the 0.02 init the text layer normalizes near-constant sublayer
                     // outputs, where h=1e-4 is far outside the linear regime; spread the
                     // parameters first.
                     for (const auto& p : model->parameters()) {
                       Tensor t = p.tensor;
                       const auto noise = uniform_values(t.numel(), rng, 0.3);
                       auto data = t.mutable_data();
                       for (std::size_t i = 0; i < data.size(); ++i) data[i] += noise[i];
                       in.push_back(t);
                     }
                     f = [model, batch] { return model->loss(*batch, LossWeights{}, ForwardContext{}).total; };
                   }});
  return cases;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

std::vector<CheckOutcome> gradient_suite(std::size_t seeds, double h, double tolerance) {
  std::vector<CheckOutcome> out;
  for (const auto& c : gradient_cases()) {
    CheckOutcome o;
    o.name = "grad " + c.name;
    o.tolerance = tolerance;
    std::size_t coords = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(1000 + 17 * s);
      std::vector<Tensor> inputs;
      std::function<Tensor()> f;
      c.build(rng, inputs, f);
      const GradCheckResult r = gradcheck(f, inputs, h, kRelativeFloor);
      coords += r.checked;
      if (r.max_relative_error >= o.value) {
        o.value = r.max_relative_error;
        o.detail = "seed " + std::to_string(s) + " " + r.worst;
      }
    }
    o.passed = o.value < tolerance;
    o.detail += ", " + std::to_string(coords) + " coordinates";
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<CheckOutcome> crf_oracle_suite(std::size_t instances) {
  CheckOutcome partition{"crf log-partition vs enumeration", true, 0.0, 1e-8, ""};
  CheckOutcome path{"crf viterbi vs enumeration argmax", true, 0.0, 0.0, ""};
  CheckOutcome mass{"crf path probabilities sum to 1", true, 0.0, 1e-8, ""};
  std::size_t count = 0, ties = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t labels = 2; labels <= 5; ++labels) {
      for (std::size_t k = 0; k < instances; ++k) {
        std::mt19937_64 rng(n * 1000 + labels * 100 + k);
        const std::size_t width = labels + 2;
        std::vector<double> e(n * labels), t(width * width);
        if (k % 2 == 0) {
          std::normal_distribution<double> dist(0.0, 2.0);
          for (double& v : e) v = dist(rng);
          for (double& v : t) v = dist(rng);
        } else {
          // Small integers make exact score ties common.
          std::uniform_int_distribution<int> dist(-1, 1);
          for (double& v : e) v = dist(rng);
          for (double& v : t) v = dist(rng);
        }
        for (std::size_t i = 0; i < width; ++i) {
          t[i * width + labels] = kForbiddenTransition;            // into BEGIN
          t[(labels + 1) * width + i] = kForbiddenTransition;      // out of END
        }
        const Tensor em = Tensor::from({n, labels}, e);
        const Tensor tr = Tensor::from({width, width}, t);
        const CrfEnumeration ref = crf_enumerate(em, tr);
        const double z = crf_log_partition(em, tr).item();
        partition.value = std::max(partition.value, std::abs(z - ref.log_partition));
        const auto vit = viterbi(em, tr);
        if (vit.path != ref.best_path) {
          path.passed = false;
          path.value += 1;
          if (path.detail.empty()) path.detail = "first mismatch n=" + std::to_string(n) + " L=" + std::to_string(labels);
        }
        if (k % 2 == 1) ++ties;
        const auto marg = crf_marginals(em, tr);
        double row_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < labels; ++j) s += marg[i * labels + j];
          row_err = std::max(row_err, std::abs(s - 1.0));
        }
        mass.value = std::max({mass.value, std::abs(ref.probability_sum - 1.0), row_err});
        ++count;
      }
    }
  }
  partition.passed = partition.value < partition.tolerance;
  mass.passed = mass.value < mass.tolerance;
  partition.detail = std::to_string(count) + " instances";
  if (path.detail.empty()) path.detail = std::to_string(count) + " instances, " + std::to_string(ties) + " integer-valued";
  mass.detail = "enumerated mass and per-position marginals";
  return {partition, path, mass};
}

std::vector<CheckOutcome> contrastive_oracle_suite(std::size_t seeds) {
  CheckOutcome direct{"contrastive vs direct sum", true, 0.0, 1e-10, ""};
  CheckOutcome invariance{"contrastive row-scale invariance", true, 0.0, 1e-10, ""};
  CheckOutcome closed{"contrastive N=2 orthonormal closed form", true, 0.0, 1e-5, ""};
  for (std::size_t n : {2u, 4u, 8u}) {
    for (std::size_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(n * 97 + s);
      const Tensor t = random_const({n, 16}, rng), v = random_const({n, 16}, rng);
      const double loss = contrastive_loss(t, v, 0.07).item();
      direct.value = std::max(direct.value, std::abs(loss - contrastive_direct(t, v, 0.07)));
      std::uniform_real_distribution<double> c(0.1, 10.0);
      std::vector<double> ts(t.data().begin(), t.data().end()), vs(v.data().begin(), v.data().end());
      for (std::size_t i = 0; i < n; ++i) {
        const double a = c(rng), b = c(rng);
        for (std::size_t j = 0; j < 16; ++j) {
          ts[i * 16 + j] *= a;
          vs[i * 16 + j] *= b;
        }
      }
      const double scaled = contrastive_loss(Tensor::from({n, 16}, ts), Tensor::from({n, 16}, vs), 0.07).item();
      invariance.value = std::max(invariance.value, std::abs(scaled - loss));
    }
  }
  const Tensor basis = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  const double got = contrastive_loss(basis, basis, 1.0).item();
  closed.value = std::abs(got - expected);
  direct.passed = direct.value < direct.tolerance;
  invariance.passed = invariance.value < invariance.tolerance;
  closed.passed = closed.value < closed.tolerance;
  std::ostringstream os;
  os << std::setprecision(8) << "loss " << got << ", expected " << expected;
  closed.detail = os.str();
  direct.detail = invariance.detail = "N in {2,4,8}, " + std::to_string(seeds) + " seeds, 16-d";
  return {direct, invariance, closed};
}

std::vector<CheckOutcome> cross_attention_suite(std::size_t seeds) {
  CheckOutcome loop{"cross-attention vs per-head loop", true, 0.0, 1e-10, ""};
  CheckOutcome perm{"cross-attention key permutation invariance", true, 0.0, 1e-10, ""};
  for (std::size_t heads : {1u, 2u, 4u}) {
    for (std::size_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(heads * 31 + s);
      Initializer init(rng(), 0.3);
      const CrossAttentionBlock block(8, heads, 16, init);
      const Tensor text = random_const({5, 8}, rng), visual = random_const({7, 8}, rng);
      const Tensor fused_tensor = block(text, visual, {});
      const auto fused = fused_tensor.data();
      const auto ref = cross_attention_loop(block, text, visual);
      for (std::size_t i = 0; i < ref.size(); ++i) loop.value = std::max(loop.value, std::abs(fused[i] - ref[i]));

      std::vector<std::size_t> order(7);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      const Tensor permuted = embedding_gather(visual, order);
      const Tensor moved_tensor = block(text, permuted, {});
      const auto moved = moved_tensor.data();
      for (std::size_t i = 0; i < moved.size(); ++i) perm.value = std::max(perm.value, std::abs(moved[i] - fused[i]));
    }
  }
  loop.passed = loop.value < loop.tolerance;
  perm.passed = perm.value < perm.tolerance;
  loop.detail = perm.detail = "m in {1,2,4}, " + std::to_string(seeds) + " seeds";
  return {loop, perm};
}

bool all_passed(const std::vector<CheckOutcome>& outcomes) {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const CheckOutcome& o) { return o.passed; });
}

std::string format_outcome(const CheckOutcome& o) {
  std::ostringstream os;
  os << (o.passed ? "PASS " : "FAIL ") << o.name << "  (" << fmt(o.value) << " vs " << fmt(o.tolerance) << ")";
  if (!o.detail.empty()) os << "  " << o.detail;
  return os.str();
}

}  // namespace mner::verify
