// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Usage: mner_acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mner/batching.hpp"
#include "mner/checkpoint.hpp"
#include "mner/corpus_stats.hpp"
#include "mner/errors.hpp"
#include "mner/metrics.hpp"
#include "mner/model.hpp"
#include "mner/train.hpp"
#include "mner/verify/fixtures.hpp"
#include "mner/verify/suites.hpp"

namespace fs = std::filesystem;
using namespace mner;

namespace {

struct Verdict {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

Verdict from_outcomes(const std::vector<verify::CheckOutcome>& outcomes) {
  Verdict v{verify::all_passed(outcomes), ""};
  std::size_t failed = 0;
  double worst_ratio = 0.0;
  std::string worst;
  for (const auto& o : outcomes) {
    if (!o.passed) {
      ++failed;
      std::cout << "    " << verify::format_outcome(o) << '\n';
    }
    const double ratio = o.tolerance > 0 ? o.value / o.tolerance : 0.0;
    if (ratio >= worst_ratio) {
      worst_ratio = ratio;
      worst = o.name + " " + fmt(o.value) + " vs " + fmt(o.tolerance);
    }
  }
  v.detail = std::to_string(outcomes.size() - failed) + "/" + std::to_string(outcomes.size()) +
             " checks; tightest: " + worst;
  return v;
}

TrainConfig fixture_config(std::size_t epochs) {
  TrainConfig c;
  c.preset = "desk";
  c.batch_size = 8;
  c.lr = 5e-3;
  c.epochs = epochs;
  return c;
}

Verdict overfit_run(const fs::path& work) {
  const auto fixture = verify::write_overfit_fixture(work / "overfit");
  TrainConfig config = fixture_config(300);
  config.stop_at_train_f1 = true;
  const auto run = train_model(config, fixture.train, nullptr, fixture.root / "images");
  const auto& last = run.report.epochs.back();
  const double f1 = last.train_eval ? last.train_eval->overall.f1 : 0.0;
  return {f1 == 1.0, "train F1 " + fmt(f1) + " after " + std::to_string(last.epoch) + " epochs"};
}

// Training never sees the held-out sentences and no checkpoint is selected
// on them: the model after the final epoch is scored once.
verify::TokenAccuracy multimodal_accuracy(const verify::Fixture& fixture, bool images) {
  TrainConfig config = fixture_config(60);
  config.use_vit = images;
  config.use_resnet = images;
  const auto run = train_model(config, fixture.train, nullptr, fixture.root / "images");
  ImageStore store(fixture.root / "images", run.trained.model->config().image_size);
  const auto predicted = predict_labels(*run.trained.model, run.trained.vocab, fixture.heldout, store);
  return verify::token_accuracy(fixture.heldout, predicted, fixture.ambiguous_token);
}

Verdict multimodal_run(const fs::path& work) {
  const auto fixture = verify::write_multimodal_fixture(work / "multimodal");
  const auto full = multimodal_accuracy(fixture, true);
  const auto text_only = multimodal_accuracy(fixture, false);
  const bool ok = full.overall >= 0.95 && text_only.ambiguous <= 0.60;
  return {ok, "full model token accuracy " + fmt(full.overall) + " (>= 0.95); text-only accuracy on '" +
                  fixture.ambiguous_token + "' " + fmt(text_only.ambiguous) + " over " +
                  std::to_string(text_only.ambiguous_count) + " tokens (<= 0.60)"};
}

// First batch of the overfit fixture under the desk preset.
struct DeskSetup {
  verify::Fixture fixture;
  Vocabulary vocab;
  ModelConfig config;
  Batch batch;
};

DeskSetup desk_setup(const fs::path& root) {
  DeskSetup s;
  s.fixture = verify::write_overfit_fixture(root);
  s.vocab = Vocabulary::build(s.fixture.train);
  s.config = fixture_config(1).model_config(LabelSchema{}, s.vocab.size());
  ImageStore images(root / "images", s.config.image_size);
  s.batch = make_batches(s.fixture.train, s.vocab, s.config.labels, images, 8, 0, false).front();
  return s;
}

Verdict loss_identities(const fs::path& work) {
  const DeskSetup s = desk_setup(work / "loss");
  const MultimodalNer model(s.config, 21);
  const auto crf_only = model.loss(s.batch, {1.0, 0.07, true}, {});
  const auto cl_only = model.loss(s.batch, {0.0, 0.07, true}, {});
  const double cl_sum = cl_only.cl_vit.item() + cl_only.cl_conv.item();
  const bool ok = crf_only.total.item() == crf_only.crf.item() && cl_only.total.item() == cl_sum &&
                  std::fabs(total_loss(Tensor::scalar(2.0), Tensor::scalar(0.5), Tensor::scalar(0.25), 0.8).item() -
                            1.75) < 1e-12;
  return {ok, "alpha=1 " + fmt(crf_only.total.item()) + " == crf " + fmt(crf_only.crf.item()) + "; alpha=0 " +
                  fmt(cl_only.total.item()) + " == cl " + fmt(cl_sum) + " (bitwise)"};
}

Verdict metrics_fixture() {
  const std::vector<std::vector<std::string>> gold = {
      {"B-PER", "I-PER", "O", "B-LOC"}, {"B-ORG", "O", "B-MISC"}, {"O", "B-PER", "O"}};
  const std::vector<std::vector<std::string>> pred = {
      {"B-PER", "I-PER", "O", "B-LOC"}, {"B-ORG", "O", "O"}, {"O", "B-PER", "I-PER"}};
  const EvalReport r = evaluate(gold, pred);
  const double f1_ref = 2.0 * 0.75 * 0.6 / 1.35;
  const bool counts = r.overall.tp == 3 && r.overall.fp == 1 && r.overall.fn == 2;
  const bool values = std::fabs(r.overall.precision - 0.75) <= 1e-12 && std::fabs(r.overall.recall - 0.6) <= 1e-12 &&
                      std::fabs(r.overall.f1 - f1_ref) <= 1e-12;
  const EvalReport self = evaluate(gold, gold);
  const bool perfect = self.overall.f1 == 1.0;
  return {counts && values && perfect, "TP/FP/FN " + std::to_string(r.overall.tp) + "/" +
                                           std::to_string(r.overall.fp) + "/" + std::to_string(r.overall.fn) +
                                           ", P " + fmt(r.overall.precision) + " R " + fmt(r.overall.recall) +
                                           " F1 " + fmt(r.overall.f1) + "; gold vs gold F1 " + fmt(self.overall.f1)};
}

Verdict kappa_check() {
  const AgreementTable diagonal{3, {7, 0, 0, 0, 4, 0, 0, 0, 9}};
  const AgreementTable table{2, {20, 5, 10, 15}};
  const double k1 = cohens_kappa(diagonal), k2 = cohens_kappa(table);
  return {k1 == 1.0 && std::fabs(k2 - 0.4) <= 1e-12, "diagonal " + fmt(k1) + ", [[20,5],[10,15]] " + fmt(k2)};
}

Verdict schedule_check() {
  const double base = 5e-5;
  const std::size_t total = 1000;
  const double start = lr_at(0, total, base), end = lr_at(total, total, base), mid = lr_at(total / 2, total, base);
  const bool ok = start == base && end == 0.0 && std::fabs(mid - base / 2.0) <= 1e-12;
  return {ok, "lr(0)=" + fmt(start) + " lr(T)=" + fmt(end) + " lr(T/2)=" + fmt(mid)};
}

Verdict checkpoint_check(const fs::path& work) {
  const DeskSetup s = desk_setup(work / "checkpoint");
  const MultimodalNer original(s.config, 31);
  const fs::path path = work / "checkpoint" / "model.ckpt";
  save_checkpoint(path, original.parameters());
  MultimodalNer restored(s.config, 32);
  apply_checkpoint(load_checkpoint(path), restored.parameters());

  bool identical = true;
  for (std::size_t row = 0; row < s.batch.size(); ++row) {
    const auto a = original.forward(s.batch.tokens(row), s.batch.image(row), {}).emissions;
    const auto b = restored.forward(s.batch.tokens(row), s.batch.image(row), {}).emissions;
    identical = identical && a.numel() == b.numel() &&
                std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
  }

  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[bytes.size() - 1] ^= 0x5a;  // last checksum byte
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::string error;
  try {
    load_checkpoint(path);
  } catch (const ParseError& e) {
    error = e.what();
  }
  return {identical && !error.empty(), std::string(identical ? "bitwise identical emissions" : "emissions differ") +
                                           "; corrupted file: " + (error.empty() ? "loaded without error" : error)};
}

Verdict determinism_check(const fs::path& work) {
  const auto fixture = verify::write_overfit_fixture(work / "determinism");
  const TrainConfig config = fixture_config(20);
  const auto a = train_model(config, fixture.train, &fixture.train, fixture.root / "images");
  const auto b = train_model(config, fixture.train, &fixture.train, fixture.root / "images");
  bool same = a.report.epochs.size() == b.report.epochs.size();
  for (std::size_t e = 0; same && e < a.report.epochs.size(); ++e) {
    const auto &x = a.report.epochs[e], &y = b.report.epochs[e];
    same = x.loss == y.loss && x.crf == y.crf && x.cl_vit == y.cl_vit && x.cl_conv == y.cl_conv;
  }
  ImageStore images(fixture.root / "images", a.trained.model->config().image_size);
  const EvalReport ea = evaluate_model(*a.trained.model, a.trained.vocab, fixture.train, images);
  const EvalReport eb = evaluate_model(*b.trained.model, b.trained.vocab, fixture.train, images);
  same = same && ea == eb;
  return {same, std::to_string(a.report.epochs.size()) + " epochs, final loss " + fmt(a.report.epochs.back().loss) +
                    " vs " + fmt(b.report.epochs.back().loss) + ", F1 " + fmt(ea.overall.f1) + " vs " +
                    fmt(eb.overall.f1)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mner_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  struct Criterion {
    std::string name;
    double budget_seconds;  // 0: no stated limit
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient suite", 120, [] { return from_outcomes(verify::gradient_suite(5, 1e-4, 1e-5)); }},
      {"crf oracle", 60, [] { return from_outcomes(verify::crf_oracle_suite(20)); }},
      {"contrastive oracle", 0, [] { return from_outcomes(verify::contrastive_oracle_suite(10)); }},
      {"cross-attention oracle", 0, [] { return from_outcomes(verify::cross_attention_suite(5)); }},
      {"overfit run", 300, [&] { return overfit_run(work); }},
      {"multimodal signal run", 600, [&] { return multimodal_run(work); }},
      {"loss identities", 0, [&] { return loss_identities(work); }},
      {"metrics fixture", 0, [] { return metrics_fixture(); }},
      {"kappa", 0, [] { return kappa_check(); }},
      {"schedule", 0, [] { return schedule_check(); }},
      {"checkpoint round-trip", 0, [&] { return checkpoint_check(work); }},
      {"determinism", 0, [&] { return determinism_check(work); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream timing;
    timing << std::fixed << std::setprecision(1) << seconds << "s";
    if (c.budget_seconds > 0) {
      timing << " of " << c.budget_seconds << "s";
      if (seconds > c.budget_seconds) {
        v.passed = false;
        v.detail += "; over time budget";
      }
    }
    failures += !v.passed;
    std::cout << (v.passed ? "PASS" : "FAIL") << " [" << std::setw(2) << i + 1 << "] " << c.name << ": " << v.detail
              << " (" << timing.str() << ")" << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << '\n';
  return failures ? 1 : 0;
}
