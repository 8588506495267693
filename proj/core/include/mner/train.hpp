#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mner/config_file.hpp"
#include "mner/corpus.hpp"
#include "mner/image.hpp"
#include "mner/metrics.hpp"
#include "mner/model.hpp"

namespace mner {

struct TrainConfig {
  double alpha = 0.8;
  double lr = 5e-5;
  std::size_t batch_size = 16;
  double dropout = 0.1;
  double temperature = 0.07;
  std::size_t epochs = 10;
  std::uint64_t seed = 13;
  bool use_vit = true;
  bool use_resnet = true;
  bool use_contrastive = true;
  std::string preset = "desk";
  bool mask_invalid_transitions = false;
  bool repair = false;
  double clip_norm = 1.0;  // 0 disables clipping
  bool eval_train = false;          // score the training set after each epoch
  bool stop_at_train_f1 = false;    // stop once training F1 reaches 1.0 (implies eval_train)
  KeyValues model_overrides;        // `model.<key>` entries layered over the preset

  void validate() const;
  ModelConfig model_config(const LabelSchema& labels, std::size_t vocab_size) const;

  KeyValues to_map() const;
  // Applies `values` on top of `base`; unknown keys throw ConfigError.
  static TrainConfig from_map(const KeyValues& values, TrainConfig base);
  static TrainConfig from_map(const KeyValues& values);
};

// Linear decay from base_lr at step 0 to zero at total_steps, no warmup.
// Steps past the end clamp to 0 and print a warning to `warn` when given.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr, std::ostream* warn = nullptr);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, double lr,
               const AdamHyper& hyper = {});

// Adam over a parameter list, reading each tensor's gradient buffer. With
// `round_to_float32` parameters stay exactly representable on disk.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(ParameterList params, AdamHyper hyper = {}, bool round_to_float32 = true);
  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return steps_; }

 private:
  ParameterList params_;
  std::vector<AdamMoments> moments_;
  AdamHyper hyper_;
  bool round_;
  std::size_t steps_ = 0;
};

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);

struct RunCounters {
  std::size_t unknown_tokens = 0;
  std::size_t truncated_sentences = 0;
  std::size_t missing_images = 0;
  std::size_t repaired_labels = 0;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double crf = 0.0;
  double cl_vit = 0.0;
  double cl_conv = 0.0;
  double lr = 0.0;  // rate used by the epoch's last step
  std::optional<EvalReport> train_eval;
  std::optional<EvalReport> dev_eval;
};

struct RunReport {
  TrainConfig config;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0 when nothing was selected
  std::size_t steps = 0;
  std::size_t parameter_count = 0;
  RunCounters counters;
  std::optional<EvalReport> best_dev;
};

// Human-readable summary followed by a `[metrics]` block of key=value lines.
std::string format_run_report(const RunReport& report);

struct TrainedModel {
  Vocabulary vocab;
  std::unique_ptr<MultimodalNer> model;
};

struct TrainResult {
  TrainedModel trained;
  RunReport report;
};

// Trains on `train`, scoring `dev` after each epoch when given. The returned
// model carries the weights of the best dev epoch (ties to the earlier
// epoch), or of the last epoch without a dev set. Logs go to `log`.
TrainResult train_model(const TrainConfig& config, const Corpus& train, const Corpus* dev,
                        const std::filesystem::path& image_dir, std::ostream* log = nullptr);

// Throws ConfigError naming the first tag outside `labels`.
void check_label_schema(const Corpus& corpus, const LabelSchema& labels);

// Viterbi tags for every sentence. Adds UNK counts to `counters` when given.
std::vector<std::vector<std::string>> predict_labels(const MultimodalNer& model, const Vocabulary& vocab,
                                                     const Corpus& corpus, ImageStore& images,
                                                     RunCounters* counters = nullptr);
EvalReport evaluate_model(const MultimodalNer& model, const Vocabulary& vocab, const Corpus& corpus,
                          ImageStore& images, RunCounters* counters = nullptr);

// Run directory: model.ckpt, model.cfg, vocab.txt and, when non-empty, report.txt.
void save_run(const std::filesystem::path& dir, const TrainedModel& run, const std::string& report_text = "");
TrainedModel load_run(const std::filesystem::path& dir);

}  // namespace mner
