#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mner/corpus.hpp"

namespace mner {

struct SplitCounts {
  std::size_t sentences = 0;
  std::array<std::size_t, 4> entities{};  // PER, LOC, ORG, MISC

  std::size_t total() const { return entities[0] + entities[1] + entities[2] + entities[3]; }
  bool operator==(const SplitCounts&) const = default;
};

// Entity and sentence counts per (language, split) cell.
struct StatsReport {
  std::map<std::string, std::map<std::string, SplitCounts>> cells;  // language -> split -> counts

  SplitCounts language_total(const std::string& language) const;
  SplitCounts grand_total() const;
};

// Each corpus contributes to the split named by Corpus::split ("train" when
// empty); each sentence goes to the column of its own language.
StatsReport dataset_stats(std::span<const Corpus> corpora);

// Rows PER/LOC/ORG/MISC/Total/Sent Num; one column per language x split,
// then an overall total.
std::string format_stats_table(const StatsReport& report);

// Square count matrix; rows are annotator A's category, columns annotator B's.
struct AgreementTable {
  std::size_t categories = 0;
  std::vector<double> counts;  // row-major

  double at(std::size_t row, std::size_t col) const { return counts[row * categories + col]; }
};

// Whitespace-separated rows of non-negative counts, one row per line.
AgreementTable parse_agreement_table(std::istream& in);

// (p_o - p_e) / (1 - p_e); throws NumericError when p_e == 1.
double cohens_kappa(const AgreementTable& table);

}  // namespace mner
