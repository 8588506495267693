#include "mner/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mner/corpus.hpp"
#include "mner/corpus_stats.hpp"
#include "mner/errors.hpp"
#include "mner/metrics.hpp"
#include "mner/train.hpp"
#include "mner/verify/suites.hpp"

namespace fs = std::filesystem;

namespace mner {

namespace {

struct TrainArgs {
  std::string root;
  std::string config_file;
  std::string images;
  std::string out = "run";
  std::uint64_t seed = 0;
  double alpha = 0, tau = 0, lr = 0;
  std::size_t batch = 0, epochs = 0;
  std::string preset;
  bool no_vit = false, no_resnet = false, no_contrastive = false, mask = false, repair = false;
};

struct EvalArgs {
  std::string gold;
  std::string run;
  std::string pred;
  std::string images;
  std::string out;
  bool repair = false;
};

struct PredictArgs {
  std::string input;
  std::string run;
  std::string images;
  std::string out;
  std::string image;
  bool raw = false;
};

struct StatsArgs {
  std::vector<std::string> files;
  bool repair = false;
};

fs::path images_dir(const std::string& flag, const fs::path& near) {
  return flag.empty() ? near.parent_path() / "images" : fs::path(flag);
}

Corpus read_corpus(const fs::path& path, bool repair, bool labels_optional = false) {
  ParseOptions options;
  options.repair = repair;
  options.labels_optional = labels_optional;
  return parse_iob2_file(path, options);
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path);
  file << text;
  if (!file) throw ConfigError("cannot write " + path);
}

int cmd_train(const TrainArgs& a, CLI::App& cmd, std::ostream& out) {
  TrainConfig config;
  if (!a.config_file.empty()) config = TrainConfig::from_map(read_key_values(a.config_file), config);
  auto given = [&cmd](const char* name) { return cmd.get_option(name)->count() > 0; };
  if (given("--seed")) config.seed = a.seed;
  if (given("--alpha")) config.alpha = a.alpha;
  if (given("--tau")) config.temperature = a.tau;
  if (given("--lr")) config.lr = a.lr;
  if (given("--batch")) config.batch_size = a.batch;
  if (given("--epochs")) config.epochs = a.epochs;
  if (given("--preset")) config.preset = a.preset;
  if (a.no_vit) config.use_vit = false;
  if (a.no_resnet) config.use_resnet = false;
  if (a.no_contrastive) config.use_contrastive = false;
  if (a.mask) config.mask_invalid_transitions = true;
  if (a.repair) config.repair = true;
  config.validate();

  const fs::path root(a.root);
  const Corpus train = read_corpus(root / "train.iob2", config.repair);
  std::optional<Corpus> dev, test;
  if (fs::exists(root / "dev.iob2")) dev = read_corpus(root / "dev.iob2", config.repair);
  if (fs::exists(root / "test.iob2")) test = read_corpus(root / "test.iob2", config.repair);
  const fs::path image_root = a.images.empty() ? root / "images" : fs::path(a.images);

  TrainResult result = train_model(config, train, dev ? &*dev : nullptr, image_root, &out);
  std::string report = format_run_report(result.report);
  if (test) {
    ImageStore images(image_root, result.trained.model->config().image_size);
    const EvalReport scored = evaluate_model(*result.trained.model, result.trained.vocab, *test, images);
    report += "\n[test]\n" + format_eval_table(scored, "test") + format_eval_kv(scored);
  }
  save_run(a.out, result.trained, report);
  out << report << "saved run to " << a.out << '\n';
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.run.empty() == a.pred.empty()) throw ConfigError("eval needs exactly one of --run or --pred");
  const Corpus gold = read_corpus(a.gold, a.repair);
  std::vector<std::vector<std::string>> gold_labels, predicted;
  for (const auto& ex : gold.examples) gold_labels.push_back(ex.labels);
  if (!a.pred.empty()) {
    const Corpus pred = read_corpus(a.pred, a.repair);
    if (pred.examples.size() != gold.examples.size()) {
      throw ContractError("eval: " + std::to_string(pred.examples.size()) + " predicted sentences for " +
                          std::to_string(gold.examples.size()) + " gold sentences");
    }
    for (const auto& ex : pred.examples) predicted.push_back(ex.labels);
  } else {
    TrainedModel run = load_run(a.run);
    check_label_schema(gold, run.model->config().labels);
    ImageStore images(images_dir(a.images, a.gold), run.model->config().image_size);
    predicted = predict_labels(*run.model, run.vocab, gold, images);
  }
  const EvalReport report = evaluate(gold_labels, predicted);
  write_text(a.out, format_eval_table(report, fs::path(a.gold).stem().string()) + "\n[metrics]\n" +
                        format_eval_kv(report),
             out);
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  TrainedModel run = load_run(a.run);
  Corpus corpus;
  if (a.raw) {
    std::ifstream in(a.input);
    if (!in) throw ConfigError("cannot open " + a.input);
    corpus = parse_raw_sentences(in, a.image);
  } else {
    corpus = read_corpus(a.input, false, true);
  }
  ImageStore images(images_dir(a.images, a.input), run.model->config().image_size);
  const auto predicted = predict_labels(*run.model, run.vocab, corpus, images);
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) corpus.examples[i].labels = predicted[i];
  write_text(a.out, serialize_iob2(corpus), out);
  return 0;
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  std::vector<Corpus> corpora;
  for (const auto& f : a.files) corpora.push_back(read_corpus(f, a.repair));
  out << format_stats_table(dataset_stats(corpora));
  return 0;
}

int cmd_kappa(const std::string& path, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  const double kappa = cohens_kappa(parse_agreement_table(in));
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, kappa).ptr;
  std::string text(buf, end);
  if (text.find_first_of(".en") == std::string::npos) text += ".0";
  out << text << '\n';
  return 0;
}

int report_outcomes(const std::vector<verify::CheckOutcome>& outcomes, std::ostream& out) {
  for (const auto& o : outcomes) out << verify::format_outcome(o) << '\n';
  const bool ok = verify::all_passed(outcomes);
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal named entity recognition: training, evaluation and corpus tools", "mner"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train on <root>/{train,dev,test}.iob2 with images in <root>/images");
  train_cmd->add_option("root", train.root, "corpus directory")->required();
  train_cmd->add_option("--config", train.config_file, "key = value file; flags override it");
  train_cmd->add_option("--seed", train.seed, "random seed");
  train_cmd->add_option("--alpha", train.alpha, "CRF loss weight in [0, 1]");
  train_cmd->add_option("--tau", train.tau, "contrastive temperature");
  train_cmd->add_option("--lr", train.lr, "base learning rate");
  train_cmd->add_option("--batch", train.batch, "batch size");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--preset", train.preset, "model size")->check(CLI::IsMember({"paper", "desk"}));
  train_cmd->add_flag("--no-vit", train.no_vit, "drop the ViT image path");
  train_cmd->add_flag("--no-resnet", train.no_resnet, "drop the convolutional image path");
  train_cmd->add_flag("--no-contrastive", train.no_contrastive, "drop the contrastive loss terms");
  train_cmd->add_flag("--mask-invalid-transitions", train.mask, "forbid invalid IOB2 transitions in the CRF");
  train_cmd->add_flag("--repair", train.repair, "rewrite a dangling I-X to B-X instead of failing");
  train_cmd->add_option("--images", train.images, "image directory (default <root>/images)");
  train_cmd->add_option("--out", train.out, "run directory to write")->capture_default_str();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score a trained run, or a predicted file, against gold labels");
  eval_cmd->add_option("gold", eval.gold, "gold IOB2 file")->required();
  eval_cmd->add_option("--run", eval.run, "run directory written by train");
  eval_cmd->add_option("--pred", eval.pred, "predicted IOB2 file, scored without a model");
  eval_cmd->add_option("--images", eval.images, "image directory (default next to the gold file)");
  eval_cmd->add_option("--out", eval.out, "write the report here instead of stdout");
  eval_cmd->add_flag("--repair", eval.repair, "rewrite a dangling I-X to B-X instead of failing");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "tag an unlabeled IOB2 file or raw sentences");
  predict_cmd->add_option("input", predict.input, "IOB2 file (labels optional) or raw text")->required();
  predict_cmd->add_option("--run", predict.run, "run directory written by train")->required();
  predict_cmd->add_flag("--raw", predict.raw, "input holds one whitespace-tokenised sentence per line");
  predict_cmd->add_option("--image", predict.image, "image stem paired with every raw sentence");
  predict_cmd->add_option("--images", predict.images, "image directory (default next to the input)");
  predict_cmd->add_option("--out", predict.out, "write labeled IOB2 here instead of stdout");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "entity and sentence counts per language and split");
  stats_cmd->add_option("files", stats.files, "IOB2 files; the split comes from each file name");
  stats_cmd->add_flag("--repair", stats.repair, "rewrite a dangling I-X to B-X instead of failing");

  std::string kappa_file;
  auto* kappa_cmd = app.add_subcommand("kappa", "Cohen's kappa of an agreement table");
  kappa_cmd->add_option("table", kappa_file, "whitespace-separated square count matrix")->required();

  std::size_t grad_seeds = 5;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks of every op and block");
  grad_cmd->add_option("--seeds", grad_seeds, "random instances per check")->capture_default_str();

  auto* self_cmd = app.add_subcommand("selftest", "CRF, contrastive and cross-attention enumeration oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub != nullptr ? sub->help() : app.help());
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(train, *train_cmd, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*predict_cmd) return cmd_predict(predict, out);
    if (*stats_cmd) return cmd_stats(stats, out);
    if (*kappa_cmd) return cmd_kappa(kappa_file, out);
    if (*grad_cmd) return report_outcomes(verify::gradient_suite(grad_seeds), out);
    if (*self_cmd) {
      auto outcomes = verify::crf_oracle_suite();
      for (auto& o : verify::contrastive_oracle_suite()) outcomes.push_back(std::move(o));
      for (auto& o : verify::cross_attention_suite()) outcomes.push_back(std::move(o));
      return report_outcomes(outcomes, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace mner
