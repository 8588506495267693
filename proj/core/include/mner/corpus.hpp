#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mner/labels.hpp"
#include "mner/tensor.hpp"

namespace mner {

inline constexpr std::array<std::string_view, 4> kLanguages = {"en", "fr", "es", "de"};

struct SentenceExample {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;  // same length as tokens
  std::string image_ref;            // file stem, without ".ppm"
  std::string language = "unk";
  bool repaired = false;

  bool operator==(const SentenceExample&) const = default;
};

struct ParseOptions {
  bool repair = false;            // rewrite a dangling I-X to B-X instead of failing
  bool labels_optional = false;   // accept bare token lines (filled with "O")
  std::size_t max_tokens = 64;    // longer sentences are truncated and counted
};

struct Corpus {
  std::vector<SentenceExample> examples;
  std::string split;  // train / dev / test, or empty
  bool labeled = true;
  std::size_t repaired_labels = 0;
  std::size_t truncated_sentences = 0;
};

// Grammar, one block per sentence:
//   [LANG:<code>]
//   IMGID:<stem>
//   <token>\t<label>      (one per token)
//   <blank line>
// Errors carry the 1-based line number.
Corpus parse_iob2(std::istream& in, const ParseOptions& options = {}, const std::string& source = "<input>");
Corpus parse_iob2_file(const std::filesystem::path& path, const ParseOptions& options = {});
// Raw whitespace-tokenised sentences, one per line; every token labelled "O".
Corpus parse_raw_sentences(std::istream& in, const std::string& image_ref = "");

std::string serialize_iob2(const Corpus& corpus);

// Concatenates corpora in order, e.g. to train on several languages at once.
Corpus merge_corpora(std::span<const Corpus> parts);

// Token -> id map. Ids 0..3 are PAD, UNK, CLS, SEP; corpus tokens follow in
// first-occurrence order. Case is preserved.
class Vocabulary {
 public:
  Vocabulary() = default;
  static Vocabulary build(const Corpus& train);

  std::size_t id(const std::string& token) const;  // UNK when absent
  bool contains(const std::string& token) const { return ids_.contains(token); }
  std::size_t size() const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;  // corpus tokens only, id = index + reserved
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace mner
