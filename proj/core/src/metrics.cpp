#include "mner/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "mner/errors.hpp"
#include "mner/labels.hpp"

namespace mner {

namespace {

std::size_t type_slot(const std::string& type) {
  for (std::size_t i = 0; i < kEntityTypes.size(); ++i) {
    if (kEntityTypes[i] == type) return i;
  }
  throw ParseError("unknown entity type '" + type + "'");
}

}  // namespace

std::vector<EntitySpan> extract_spans(const std::vector<std::string>& labels) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan current;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto parts = split_tag(labels[i]);
    if (!parts) throw ParseError("unknown tag '" + labels[i] + "' at position " + std::to_string(i));
    if (parts->prefix != 'O') type_slot(parts->type);
    const bool continues = parts->prefix == 'I' && open && current.type == parts->type;
    if (continues) {
      current.end = i;
      continue;
    }
    if (open) spans.push_back(current);
    open = parts->prefix != 'O';
    if (open) current = EntitySpan{i, i, parts->type};
  }
  if (open) spans.push_back(current);
  return spans;
}

PrfScore score_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfScore s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  if (tp + fp == 0) {
    s.precision_undefined = true;
  } else {
    s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    s.recall_undefined = true;
  } else {
    s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  if (s.precision + s.recall == 0.0) {
    s.f1_undefined = true;
  } else {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

bool EvalReport::operator==(const EvalReport& other) const {
  auto same = [](const PrfScore& a, const PrfScore& b) {
    return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.precision == b.precision && a.recall == b.recall &&
           a.f1 == b.f1;
  };
  for (std::size_t i = 0; i < per_type.size(); ++i) {
    if (!same(per_type[i], other.per_type[i])) return false;
  }
  return same(overall, other.overall) && sentences == other.sentences && tokens == other.tokens &&
         correct_tokens == other.correct_tokens;
}

EvalReport evaluate(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& pred) {
  if (gold.size() != pred.size()) {
    throw ContractError("evaluate: " + std::to_string(gold.size()) + " gold sentences vs " +
                        std::to_string(pred.size()) + " predicted");
  }
  std::array<std::size_t, 4> tp{}, fp{}, fn{};
  EvalReport report;
  report.sentences = gold.size();
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw ContractError("evaluate: sentence " + std::to_string(s) + " has " + std::to_string(gold[s].size()) +
                          " gold labels but " + std::to_string(pred[s].size()) + " predicted");
    }
    report.tokens += gold[s].size();
    for (std::size_t i = 0; i < gold[s].size(); ++i) report.correct_tokens += gold[s][i] == pred[s][i];
    const auto g = extract_spans(gold[s]);
    const auto p = extract_spans(pred[s]);
    const std::set<EntitySpan> gold_set(g.begin(), g.end());
    const std::set<EntitySpan> pred_set(p.begin(), p.end());
    for (const auto& span : pred_set) {
      (gold_set.contains(span) ? tp : fp)[type_slot(span.type)]++;
    }
    for (const auto& span : gold_set) {
      if (!pred_set.contains(span)) fn[type_slot(span.type)]++;
    }
  }
  std::size_t all_tp = 0, all_fp = 0, all_fn = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    report.per_type[t] = score_counts(tp[t], fp[t], fn[t]);
    all_tp += tp[t];
    all_fp += fp[t];
    all_fn += fn[t];
  }
  report.overall = score_counts(all_tp, all_fp, all_fn);
  return report;
}

std::string format_eval_table(const EvalReport& report, const std::string& row_name) {
  std::ostringstream os;
  const int w = 9;
  os << std::left << std::setw(12) << "" << std::right;
  for (auto type : kEntityTypes) os << std::setw(w) << (std::string(type) + " F1");
  os << std::setw(w) << "P" << std::setw(w) << "R" << std::setw(w) << "F1" << '\n';
  os << std::left << std::setw(12) << row_name << std::right << std::fixed << std::setprecision(2);
  for (const auto& s : report.per_type) os << std::setw(w) << 100.0 * s.f1;
  os << std::setw(w) << 100.0 * report.overall.precision << std::setw(w) << 100.0 * report.overall.recall
     << std::setw(w) << 100.0 * report.overall.f1 << '\n';
  return os.str();
}

std::string format_eval_kv(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto emit = [&os](const std::string& prefix, const PrfScore& s) {
    os << prefix << ".tp=" << s.tp << '\n'
       << prefix << ".fp=" << s.fp << '\n'
       << prefix << ".fn=" << s.fn << '\n'
       << prefix << ".precision=" << s.precision << '\n'
       << prefix << ".recall=" << s.recall << '\n'
       << prefix << ".f1=" << s.f1 << '\n';
    if (s.precision_undefined || s.recall_undefined || s.f1_undefined) {
      os << prefix << ".undefined=" << (s.precision_undefined ? "p" : "") << (s.recall_undefined ? "r" : "")
         << (s.f1_undefined ? "f" : "") << '\n';
    }
  };
  for (std::size_t t = 0; t < kEntityTypes.size(); ++t) emit(std::string(kEntityTypes[t]), report.per_type[t]);
  emit("overall", report.overall);
  os << "sentences=" << report.sentences << '\n'
     << "tokens=" << report.tokens << '\n'
     << "token_accuracy=" << report.token_accuracy() << '\n';
  return os.str();
}

}  // namespace mner
