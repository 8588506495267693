#include "mner/train.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "mner/batching.hpp"
#include "mner/checkpoint.hpp"
#include "mner/errors.hpp"

namespace mner {

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Shortest text that reads back to the same value.
template <typename T>
std::string str(const T& v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const char* flag(bool b) { return b ? "true" : "false"; }

constexpr std::string_view kModelPrefix = "model.";

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1], got " + str(alpha));
  if (!(lr > 0.0)) throw ConfigError("lr must be positive, got " + str(lr));
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1), got " + str(dropout));
  if (!(temperature > 0.0)) throw ConfigError("tau must be positive, got " + str(temperature));
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (preset != "desk" && preset != "paper") throw ConfigError("preset must be desk or paper, got '" + preset + "'");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
}

ModelConfig TrainConfig::model_config(const LabelSchema& labels, std::size_t vocab_size) const {
  ModelConfig base = preset == "paper" ? ModelConfig::paper() : ModelConfig::desk();
  base.dropout = dropout;
  base.use_vit = use_vit;
  base.use_resnet = use_resnet;
  base.mask_invalid_transitions = mask_invalid_transitions;
  ModelConfig c = ModelConfig::from_map(model_overrides, std::move(base));
  c.labels = labels;
  c.vocab_size = vocab_size;
  return c;
}

KeyValues TrainConfig::to_map() const {
  KeyValues out = {
      {"alpha", str(alpha)},
      {"lr", str(lr)},
      {"batch", str(batch_size)},
      {"dropout", str(dropout)},
      {"tau", str(temperature)},
      {"epochs", str(epochs)},
      {"seed", str(seed)},
      {"use_vit", flag(use_vit)},
      {"use_resnet", flag(use_resnet)},
      {"use_contrastive", flag(use_contrastive)},
      {"preset", preset},
      {"mask_invalid_transitions", flag(mask_invalid_transitions)},
      {"repair", flag(repair)},
      {"clip_norm", str(clip_norm)},
      {"eval_train", flag(eval_train)},
      {"stop_at_train_f1", flag(stop_at_train_f1)},
  };
  for (const auto& [k, v] : model_overrides) out[std::string(kModelPrefix) + k] = v;
  return out;
}

TrainConfig TrainConfig::from_map(const KeyValues& values, TrainConfig base) {
  TrainConfig c = std::move(base);
  for (const auto& [k, v] : values) {
    if (k == "alpha") c.alpha = kv_double(k, v);
    else if (k == "lr") c.lr = kv_double(k, v);
    else if (k == "batch") c.batch_size = kv_size(k, v);
    else if (k == "dropout") c.dropout = kv_double(k, v);
    else if (k == "tau") c.temperature = kv_double(k, v);
    else if (k == "epochs") c.epochs = kv_size(k, v);
    else if (k == "seed") c.seed = kv_size(k, v);
    else if (k == "use_vit") c.use_vit = kv_bool(k, v);
    else if (k == "use_resnet") c.use_resnet = kv_bool(k, v);
    else if (k == "use_contrastive") c.use_contrastive = kv_bool(k, v);
    else if (k == "preset") c.preset = v;
    else if (k == "mask_invalid_transitions") c.mask_invalid_transitions = kv_bool(k, v);
    else if (k == "repair") c.repair = kv_bool(k, v);
    else if (k == "clip_norm") c.clip_norm = kv_double(k, v);
    else if (k == "eval_train") c.eval_train = kv_bool(k, v);
    else if (k == "stop_at_train_f1") c.stop_at_train_f1 = kv_bool(k, v);
    else if (k.starts_with(kModelPrefix)) c.model_overrides[k.substr(kModelPrefix.size())] = v;
    else throw ConfigError("unknown setting '" + k + "'");
  }
  return c;
}

TrainConfig TrainConfig::from_map(const KeyValues& values) { return from_map(values, TrainConfig{}); }

double lr_at(std::size_t step, std::size_t total_steps, double base_lr, std::ostream* warn) {
  if (total_steps == 0) throw ContractError("lr_at: total_steps must be at least 1");
  if (step > total_steps) {
    if (warn != nullptr) {
      *warn << "warning: step " << step << " is past the schedule end " << total_steps << "; lr clamped to 0\n";
    }
    return 0.0;
  }
  return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(ParameterList params, AdamHyper hyper, bool round_to_float32)
    : params_(std::move(params)), moments_(params_.size()), hyper_(hyper), round_(round_to_float32) {}

void AdamOptimizer::step(double lr) {
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    auto data = t.mutable_data();
    std::span<const double> g;
    if (t.has_grad()) {
      g = t.grad();
    } else {
      zeros.assign(data.size(), 0.0);
      g = zeros;
    }
    adam_step(data, g, moments_[i], lr, hyper_);
    if (round_) {
      for (double& v : data) v = static_cast<double>(static_cast<float>(v));
    }
  }
  ++steps_;
}

void AdamOptimizer::zero_grad() {
  for (auto& p : params_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("clip_grad_norm: non-finite gradient norm");
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      Tensor t = p.tensor;
      for (double& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

void check_label_schema(const Corpus& corpus, const LabelSchema& labels) {
  for (const auto& ex : corpus.examples) {
    for (const auto& tag : ex.labels) {
      if (!labels.find(tag)) {
        throw ConfigError("corpus" + (corpus.split.empty() ? std::string() : " '" + corpus.split + "'") +
                          " uses tag '" + tag + "' outside the model label set");
      }
    }
  }
}

std::vector<std::vector<std::string>> predict_labels(const MultimodalNer& model, const Vocabulary& vocab,
                                                     const Corpus& corpus, ImageStore& images,
                                                     RunCounters* counters) {
  const LabelSchema& schema = model.config().labels;
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.examples.size());
  std::vector<std::size_t> ids;
  for (const auto& ex : corpus.examples) {
    ids.clear();
    for (const auto& token : ex.tokens) {
      ids.push_back(vocab.id(token));
      if (counters != nullptr && ids.back() == kUnkId) ++counters->unknown_tokens;
    }
    std::vector<std::string> tags(ex.tokens.size(), "O");
    if (!ids.empty()) {
      const auto path = model.predict(ids, images.load(ex.image_ref));
      for (std::size_t i = 0; i < path.size(); ++i) tags[i] = schema.tag(path[i]);
    }
    out.push_back(std::move(tags));
  }
  return out;
}

EvalReport evaluate_model(const MultimodalNer& model, const Vocabulary& vocab, const Corpus& corpus,
                          ImageStore& images, RunCounters* counters) {
  std::vector<std::vector<std::string>> gold;
  gold.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples) gold.push_back(ex.labels);
  return evaluate(gold, predict_labels(model, vocab, corpus, images, counters));
}

TrainResult train_model(const TrainConfig& config, const Corpus& train, const Corpus* dev,
                        const std::filesystem::path& image_dir, std::ostream* log) {
  config.validate();
  if (train.examples.empty()) throw ConfigError("training corpus is empty");
  TrainResult result;
  RunReport& report = result.report;
  report.config = config;

  const LabelSchema schema;
  check_label_schema(train, schema);
  if (dev != nullptr) check_label_schema(*dev, schema);

  result.trained.vocab = Vocabulary::build(train);
  const ModelConfig model_config = config.model_config(schema, result.trained.vocab.size());
  result.trained.model = std::make_unique<MultimodalNer>(model_config, config.seed);
  MultimodalNer& model = *result.trained.model;
  const Vocabulary& vocab = result.trained.vocab;
  ImageStore images(image_dir, model_config.image_size);

  const ParameterList params = model.parameters();
  for (const auto& p : params) report.parameter_count += p.tensor.numel();
  AdamOptimizer optimizer(params);
  const LossWeights weights{config.alpha, config.temperature, config.use_contrastive};

  const std::size_t batches_per_epoch = (train.examples.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  const bool eval_train = config.eval_train || config.stop_at_train_f1;

  std::vector<char> best_weights;
  double best_f1 = -1.0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix(config.seed, epoch);
    std::mt19937_64 dropout_rng(mix(epoch_seed, 0));
    const ForwardContext ctx{true, model_config.dropout, &dropout_rng};
    const auto batches = make_batches(train, vocab, schema, images, config.batch_size, epoch_seed, true);

    EpochLog entry;
    entry.epoch = epoch;
    for (const Batch& batch : batches) {
      const double lr = lr_at(step, total_steps, config.lr, log);
      GradientTape tape;
      LossBreakdown loss;
      {
        TapeScope scope(tape);
        loss = model.loss(batch, weights, ctx);
        tape.backward(loss.total);
      }
      if (!std::isfinite(loss.total.item())) throw NumericError("non-finite loss at step " + std::to_string(step));
      if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
      optimizer.step(lr);
      optimizer.zero_grad();
      model.after_update();
      ++step;

      const double w = static_cast<double>(batch.size()) / static_cast<double>(train.examples.size());
      entry.loss += w * loss.total.item();
      entry.crf += w * loss.crf.item();
      entry.cl_vit += w * loss.cl_vit.item();
      entry.cl_conv += w * loss.cl_conv.item();
      entry.lr = lr;
    }

    if (eval_train) entry.train_eval = evaluate_model(model, vocab, train, images);
    if (dev != nullptr) entry.dev_eval = evaluate_model(model, vocab, *dev, images);

    const bool selects = dev != nullptr ? entry.dev_eval->overall.f1 > best_f1 : true;
    if (selects) {
      best_f1 = dev != nullptr ? entry.dev_eval->overall.f1 : 0.0;
      best_weights = encode_checkpoint(params);
      report.best_epoch = epoch;
      report.best_dev = entry.dev_eval;
    }

    if (log != nullptr) {
      *log << "epoch " << epoch << "/" << config.epochs << std::fixed << std::setprecision(6)
           << " loss=" << entry.loss << " crf=" << entry.crf << " cl_vit=" << entry.cl_vit
           << " cl_conv=" << entry.cl_conv << std::scientific << std::setprecision(3) << " lr=" << entry.lr
           << std::fixed << std::setprecision(4);
      if (entry.train_eval) *log << " train_f1=" << entry.train_eval->overall.f1;
      if (entry.dev_eval) *log << " dev_f1=" << entry.dev_eval->overall.f1;
      *log << std::defaultfloat << '\n';
    }
    const bool done = config.stop_at_train_f1 && entry.train_eval && entry.train_eval->overall.f1 == 1.0;
    report.epochs.push_back(std::move(entry));
    if (done) break;
  }
  report.steps = step;

  // Without a dev set the final epoch wins.
  if (dev == nullptr) report.best_epoch = report.epochs.back().epoch;
  apply_checkpoint(decode_checkpoint(best_weights), params);

  RunCounters& counters = report.counters;
  if (dev != nullptr) {
    for (const auto& ex : dev->examples) {
      for (const auto& token : ex.tokens) counters.unknown_tokens += vocab.id(token) == kUnkId;
    }
  }
  counters.truncated_sentences = train.truncated_sentences + (dev != nullptr ? dev->truncated_sentences : 0) +
                                 model.text_encoder().truncations();
  counters.missing_images = images.missing();
  counters.repaired_labels = train.repaired_labels + (dev != nullptr ? dev->repaired_labels : 0);
  return result;
}

std::string format_run_report(const RunReport& r) {
  std::ostringstream os;
  os << "epochs run: " << r.epochs.size() << " of " << r.config.epochs << ", steps: " << r.steps
     << ", parameters: " << r.parameter_count << '\n';
  os << std::fixed << std::setprecision(6);
  for (const auto& e : r.epochs) {
    os << "epoch " << e.epoch << "  loss " << e.loss << "  crf " << e.crf << "  cl_vit " << e.cl_vit << "  cl_conv "
       << e.cl_conv;
    if (e.train_eval) os << "  train_f1 " << e.train_eval->overall.f1;
    if (e.dev_eval) os << "  dev_f1 " << e.dev_eval->overall.f1;
    os << '\n';
  }
  os << "selected epoch: " << r.best_epoch << '\n';
  if (r.best_dev) os << '\n' << format_eval_table(*r.best_dev, "dev");
  os << "\n[metrics]\n";
  for (const auto& [k, v] : r.config.to_map()) os << "config." << k << '=' << v << '\n';
  os << "epochs_run=" << r.epochs.size() << '\n';
  os << "steps=" << r.steps << '\n';
  os << "parameters=" << r.parameter_count << '\n';
  os << "best_epoch=" << r.best_epoch << '\n';
  os << std::setprecision(17);
  for (const auto& e : r.epochs) {
    const std::string p = "epoch" + std::to_string(e.epoch) + ".";
    os << p << "loss=" << e.loss << '\n' << p << "crf=" << e.crf << '\n';
    os << p << "cl_vit=" << e.cl_vit << '\n' << p << "cl_conv=" << e.cl_conv << '\n';
    if (e.train_eval) os << p << "train_f1=" << e.train_eval->overall.f1 << '\n';
    if (e.dev_eval) os << p << "dev_f1=" << e.dev_eval->overall.f1 << '\n';
  }
  if (r.best_dev) {
    std::istringstream kv(format_eval_kv(*r.best_dev));
    for (std::string line; std::getline(kv, line);) os << "dev." << line << '\n';
  }
  os << "unknown_tokens=" << r.counters.unknown_tokens << '\n';
  os << "truncated_sentences=" << r.counters.truncated_sentences << '\n';
  os << "missing_images=" << r.counters.missing_images << '\n';
  os << "repaired_labels=" << r.counters.repaired_labels << '\n';
  return os.str();
}

void save_run(const std::filesystem::path& dir, const TrainedModel& run, const std::string& report_text) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.ckpt", run.model->parameters());
  write_key_values(dir / "model.cfg", run.model->config().to_map());
  run.vocab.save(dir / "vocab.txt");
  if (!report_text.empty()) {
    std::ofstream out(dir / "report.txt");
    out << report_text;
    if (!out) throw ConfigError("failed writing " + (dir / "report.txt").string());
  }
}

TrainedModel load_run(const std::filesystem::path& dir) {
  TrainedModel run;
  const ModelConfig config = ModelConfig::from_map(read_key_values(dir / "model.cfg"));
  run.vocab = Vocabulary::load(dir / "vocab.txt");
  if (run.vocab.size() != config.vocab_size) {
    throw ConfigError(dir.string() + ": vocabulary has " + std::to_string(run.vocab.size()) +
                      " entries, model expects " + std::to_string(config.vocab_size));
  }
  run.model = std::make_unique<MultimodalNer>(config, 0);
  apply_checkpoint(load_checkpoint(dir / "model.ckpt"), run.model->parameters());
  run.model->after_update();
  return run;
}

}  // namespace mner
