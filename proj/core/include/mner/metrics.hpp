#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace mner {

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string type;

  bool operator==(const EntitySpan&) const = default;
  auto operator<=>(const EntitySpan&) const = default;
};

// Maximal B-X (I-X)* runs. An I-X that does not continue an open X span
// opens a new one (conlleval-style). Unknown tags throw ParseError.
std::vector<EntitySpan> extract_spans(const std::vector<std::string>& labels);

struct PrfScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

// Fills precision/recall/F1 from counts. F1 is the harmonic mean 2PR/(P+R).
PrfScore score_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct EvalReport {
  std::array<PrfScore, 4> per_type;  // PER, LOC, ORG, MISC
  PrfScore overall;                  // micro-averaged
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t correct_tokens = 0;    // diagnostic only

  double token_accuracy() const { return tokens ? static_cast<double>(correct_tokens) / tokens : 0.0; }
  bool operator==(const EvalReport& other) const;
};

// Exact span matching (same start, end, type). gold[i] and pred[i] must be
// the same length; throws ContractError otherwise.
EvalReport evaluate(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& pred);

// Aligned table: one F1 column per entity type, then overall P / R / F1.
std::string format_eval_table(const EvalReport& report, const std::string& row_name = "model");
// `key=value` lines for scripts.
std::string format_eval_kv(const EvalReport& report);

}  // namespace mner
