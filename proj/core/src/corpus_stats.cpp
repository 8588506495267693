#include "mner/corpus_stats.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "mner/errors.hpp"
#include "mner/labels.hpp"
#include "mner/metrics.hpp"

namespace mner {

namespace {

void accumulate(SplitCounts& into, const SplitCounts& part) {
  into.sentences += part.sentences;
  for (std::size_t t = 0; t < 4; ++t) into.entities[t] += part.entities[t];
}

const std::array<std::string, 3> kSplits = {"train", "dev", "test"};

std::vector<std::string> ordered_languages(const StatsReport& report) {
  std::vector<std::string> out;
  for (auto lang : kLanguages) {
    if (report.cells.contains(std::string(lang))) out.emplace_back(lang);
  }
  for (const auto& [lang, _] : report.cells) {
    if (std::find(out.begin(), out.end(), lang) == out.end()) out.push_back(lang);
  }
  return out;
}

std::vector<std::string> ordered_splits(const std::map<std::string, SplitCounts>& by_split) {
  std::vector<std::string> out;
  for (const auto& s : kSplits) {
    if (by_split.contains(s)) out.push_back(s);
  }
  for (const auto& [s, _] : by_split) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  return out;
}

}  // namespace

SplitCounts StatsReport::language_total(const std::string& language) const {
  SplitCounts total;
  if (auto it = cells.find(language); it != cells.end()) {
    for (const auto& [_, c] : it->second) accumulate(total, c);
  }
  return total;
}

SplitCounts StatsReport::grand_total() const {
  SplitCounts total;
  for (const auto& [lang, _] : cells) accumulate(total, language_total(lang));
  return total;
}

StatsReport dataset_stats(std::span<const Corpus> corpora) {
  StatsReport report;
  for (const auto& corpus : corpora) {
    const std::string split = corpus.split.empty() ? "train" : corpus.split;
    for (const auto& ex : corpus.examples) {
      SplitCounts& cell = report.cells[ex.language][split];
      ++cell.sentences;
      for (const auto& span : extract_spans(ex.labels)) {
        for (std::size_t t = 0; t < kEntityTypes.size(); ++t) {
          if (kEntityTypes[t] == span.type) ++cell.entities[t];
        }
      }
    }
  }
  return report;
}

std::string format_stats_table(const StatsReport& report) {
  struct Column {
    std::string header;
    SplitCounts counts;
  };
  std::vector<Column> columns;
  for (const auto& lang : ordered_languages(report)) {
    const auto& by_split = report.cells.at(lang);
    for (const auto& split : ordered_splits(by_split)) columns.push_back({lang + "/" + split, by_split.at(split)});
  }
  columns.push_back({"Total", report.grand_total()});

  std::ostringstream os;
  const int label_w = 10;
  const int w = 12;
  os << std::left << std::setw(label_w) << "Class" << std::right;
  for (const auto& c : columns) os << std::setw(w) << c.header;
  os << '\n';
  auto row = [&](const std::string& name, auto value) {
    os << std::left << std::setw(label_w) << name << std::right;
    for (const auto& c : columns) os << std::setw(w) << value(c.counts);
    os << '\n';
  };
  for (std::size_t t = 0; t < kEntityTypes.size(); ++t) {
    row(std::string(kEntityTypes[t]) + ".", [t](const SplitCounts& c) { return c.entities[t]; });
  }
  row("Total", [](const SplitCounts& c) { return c.total(); });
  row("Sent Num", [](const SplitCounts& c) { return c.sentences; });
  return os.str();
}

AgreementTable parse_agreement_table(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<double> row;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("agreement table line " + std::to_string(line_no) + ": '" + field + "' is not a number");
      }
      if (v < 0.0) throw ParseError("agreement table line " + std::to_string(line_no) + ": negative count");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  AgreementTable table;
  table.categories = rows.size();
  for (const auto& r : rows) {
    if (r.size() != rows.size()) {
      throw ParseError("agreement table must be square, got a row of " + std::to_string(r.size()) + " in a " +
                       std::to_string(rows.size()) + "-row table");
    }
    table.counts.insert(table.counts.end(), r.begin(), r.end());
  }
  if (table.categories == 0) throw ParseError("agreement table is empty");
  return table;
}

double cohens_kappa(const AgreementTable& table) {
  const std::size_t k = table.categories;
  if (k == 0 || table.counts.size() != k * k) throw ContractError("cohens_kappa: malformed table");
  double total = 0.0, trace = 0.0;
  std::vector<double> row_sum(k, 0.0), col_sum(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = table.at(i, j);
      if (v < 0.0) throw ContractError("cohens_kappa: negative count");
      total += v;
      row_sum[i] += v;
      col_sum[j] += v;
      if (i == j) trace += v;
    }
  }
  if (total <= 0.0) throw ContractError("cohens_kappa: table total must be positive");
  const double p_o = trace / total;
  double p_e = 0.0;
  for (std::size_t i = 0; i < k; ++i) p_e += row_sum[i] * col_sum[i];
  p_e /= total * total;
  if (p_e == 1.0) throw NumericError("cohens_kappa: chance agreement is 1, kappa undefined");
  return (p_o - p_e) / (1.0 - p_e);
}

}  // namespace mner
