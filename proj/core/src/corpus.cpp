#include "mner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mner/encoders.hpp"
#include "mner/errors.hpp"

namespace mner {

namespace {

std::string located(const std::string& source, std::size_t line, const std::string& message) {
  return source + ":" + std::to_string(line) + ": " + message;
}

std::string normalize_language(const std::string& code) {
  for (auto lang : kLanguages) {
    if (lang == code) return code;
  }
  return "unk";
}

struct PendingSentence {
  SentenceExample example;
  std::vector<std::size_t> token_lines;
  bool has_image = false;
  bool has_language = false;
  std::size_t first_line = 0;

  bool empty() const { return example.tokens.empty() && !has_image && !has_language; }
};

void finish(PendingSentence& pending, Corpus& corpus, const ParseOptions& options, const std::string& source) {
  if (pending.empty()) return;
  auto& ex = pending.example;
  if (ex.tokens.empty()) {
    throw ParseError(located(source, pending.first_line, "sentence block without tokens"));
  }
  const std::size_t sentence_index = corpus.examples.size();
  for (std::size_t i = 0; i < ex.labels.size(); ++i) {
    const auto parts = split_tag(ex.labels[i]);
    if (parts->prefix != 'I') continue;
    bool continues = false;
    if (i > 0) {
      const auto prev = split_tag(ex.labels[i - 1]);
      continues = prev->prefix != 'O' && prev->type == parts->type;
    }
    if (continues) continue;
    if (!options.repair) {
      throw ParseError(located(source, pending.token_lines[i],
                               "sentence " + std::to_string(sentence_index) + ": " + ex.labels[i] +
                                   " does not continue a " + parts->type + " entity"));
    }
    ex.labels[i] = "B-" + parts->type;
    ex.repaired = true;
    ++corpus.repaired_labels;
  }
  if (ex.tokens.size() > options.max_tokens) {
    ex.tokens.resize(options.max_tokens);
    ex.labels.resize(options.max_tokens);
    ++corpus.truncated_sentences;
  }
  corpus.examples.push_back(std::move(ex));
  pending = PendingSentence{};
}

}  // namespace

Corpus parse_iob2(std::istream& in, const ParseOptions& options, const std::string& source) {
  const LabelSchema schema;
  Corpus corpus;
  corpus.labeled = !options.labels_optional;
  PendingSentence pending;
  std::string line;
  std::size_t line_no = 0;
  bool saw_bare_token = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish(pending, corpus, options, source);
      continue;
    }
    if (pending.empty()) pending.first_line = line_no;
    if (line.starts_with("LANG:")) {
      if (pending.has_language || pending.has_image || !pending.example.tokens.empty()) {
        throw ParseError(located(source, line_no, "LANG must be the first line of a sentence block"));
      }
      pending.example.language = normalize_language(line.substr(5));
      pending.has_language = true;
      continue;
    }
    if (line.starts_with("IMGID:")) {
      if (pending.has_image || !pending.example.tokens.empty()) {
        throw ParseError(located(source, line_no, "IMGID must precede the tokens of a sentence block"));
      }
      pending.example.image_ref = line.substr(6);
      pending.has_image = true;
      continue;
    }
    if (!pending.has_image) throw ParseError(located(source, line_no, "missing IMGID before tokens"));
    const auto tab = line.find('\t');
    std::string token = line.substr(0, tab);
    std::string label;
    if (tab == std::string::npos) {
      if (!options.labels_optional) throw ParseError(located(source, line_no, "expected <token>\\t<label>"));
      label = "O";
      saw_bare_token = true;
    } else {
      label = line.substr(tab + 1);
      if (!schema.find(label)) throw ParseError(located(source, line_no, "malformed label '" + label + "'"));
    }
    if (token.empty()) throw ParseError(located(source, line_no, "empty token"));
    pending.example.tokens.push_back(std::move(token));
    pending.example.labels.push_back(std::move(label));
    pending.token_lines.push_back(line_no);
  }
  finish(pending, corpus, options, source);
  if (options.labels_optional && !saw_bare_token) corpus.labeled = true;
  return corpus;
}

Corpus parse_iob2_file(const std::filesystem::path& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  Corpus corpus = parse_iob2(in, options, path.string());
  corpus.split = path.stem().string();
  return corpus;
}

Corpus parse_raw_sentences(std::istream& in, const std::string& image_ref) {
  Corpus corpus;
  corpus.labeled = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    SentenceExample ex;
    ex.image_ref = image_ref;
    for (std::string w; words >> w;) {
      ex.tokens.push_back(w);
      ex.labels.emplace_back("O");
    }
    if (!ex.tokens.empty()) corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

std::string serialize_iob2(const Corpus& corpus) {
  std::ostringstream os;
  for (const auto& ex : corpus.examples) {
    if (ex.language != "unk") os << "LANG:" << ex.language << '\n';
    os << "IMGID:" << ex.image_ref << '\n';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) os << ex.tokens[i] << '\t' << ex.labels[i] << '\n';
    os << '\n';
  }
  return os.str();
}

Corpus merge_corpora(std::span<const Corpus> parts) {
  Corpus merged;
  for (const auto& c : parts) {
    if (merged.split.empty()) merged.split = c.split;
    merged.examples.insert(merged.examples.end(), c.examples.begin(), c.examples.end());
    merged.labeled = merged.labeled && c.labeled;
    merged.repaired_labels += c.repaired_labels;
    merged.truncated_sentences += c.truncated_sentences;
  }
  return merged;
}

Vocabulary Vocabulary::build(const Corpus& train) {
  Vocabulary v;
  for (const auto& ex : train.examples)
    for (const auto& tok : ex.tokens) v.add(tok);
  return v;
}

void Vocabulary::add(const std::string& token) {
  if (ids_.contains(token)) return;
  ids_.emplace(token, tokens_.size() + kReservedIds);
  tokens_.push_back(token);
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnkId : it->second;
}

std::size_t Vocabulary::size() const { return tokens_.size() + kReservedIds; }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  Vocabulary v;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) v.add(line);
  }
  return v;
}

}  // namespace mner
