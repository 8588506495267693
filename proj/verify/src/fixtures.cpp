#include "mner/verify/fixtures.hpp"

#include <algorithm>
#include <fstream>

#include "mner/errors.hpp"

namespace mner::verify {

namespace {

constexpr std::size_t kImageSize = 32;

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  out << serialize_iob2(corpus);
  if (!out) throw ConfigError("cannot write " + path.string());
}

void append(SentenceExample& ex, const std::string& phrase, const std::string& type) {
  std::size_t start = 0;
  bool first = true;
  while (start <= phrase.size()) {
    const std::size_t space = std::min(phrase.find(' ', start), phrase.size());
    ex.tokens.push_back(phrase.substr(start, space - start));
    ex.labels.push_back(type.empty() ? "O" : (first ? "B-" : "I-") + type);
    first = false;
    start = space + 1;
  }
}

}  // namespace

RgbImage color_field(std::size_t size, int r, int g, int b, int noise, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> jitter(-noise, noise);
  RgbImage img;
  img.width = img.height = size;
  img.pixels.resize(size * size * 3);
  const int base[3] = {r, g, b};
  for (std::size_t p = 0; p < size * size; ++p) {
    for (int c = 0; c < 3; ++c) img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(base[c] + jitter(rng), 0, 255));
  }
  return img;
}

Fixture write_overfit_fixture(const std::filesystem::path& root, std::uint64_t seed) {
  const std::vector<std::string> people = {"Alice Moreau", "Bruno", "Chen Wei", "Dara", "Elena Ruiz",
                                           "Farid",        "Greta", "Hugo",     "Ines", "Jonas Berg"};
  const std::vector<std::string> places = {"Paris", "Berlin", "New York", "Lima",      "Oslo",
                                           "Cairo", "Quito",  "Rome",     "Hong Kong", "Dakar"};
  const std::vector<std::string> openers = {"today", "yesterday", "finally", "again", "here"};
  const std::vector<std::string> verbs = {"visited", "left", "praised", "reached", "toured", "described"};
  const std::vector<std::string> tails = {"with friends", "in spring", "last week", "for work", "at night",
                                          "on foot"};
  const std::vector<std::string> plain = {"the market opened early", "a storm hit the coast",
                                          "prices rose sharply", "the match ended late"};

  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  std::filesystem::create_directories(root / "images");

  Fixture f;
  f.root = root;
  f.train.split = "train";
  for (std::size_t i = 0; i < 32; ++i) {
    SentenceExample ex;
    ex.language = "en";
    ex.image_ref = "ovf" + std::to_string(i);
    int r = 128, g = 128, b = 128;
    switch (i % 4) {
      case 0:  // PER
        append(ex, pick(openers), "");
        append(ex, pick(people), "PER");
        append(ex, pick(verbs), "");
        append(ex, pick(tails), "");
        r = 220, g = 40, b = 40;
        break;
      case 1:  // LOC
        append(ex, pick(openers), "");
        append(ex, pick(verbs), "");
        append(ex, pick(places), "LOC");
        append(ex, pick(tails), "");
        r = 40, g = 40, b = 220;
        break;
      case 2:  // PER and LOC
        append(ex, pick(people), "PER");
        append(ex, pick(verbs), "");
        append(ex, pick(places), "LOC");
        append(ex, pick(tails), "");
        r = 40, g = 220, b = 40;
        break;
      default:
        append(ex, pick(plain), "");
        append(ex, pick(openers), "");
        break;
    }
    write_ppm(root / "images" / (ex.image_ref + ".ppm"), color_field(kImageSize, r, g, b, 20, rng));
    f.train.examples.push_back(std::move(ex));
  }
  write_corpus(root / "train.iob2", f.train);
  return f;
}

Fixture write_multimodal_fixture(const std::filesystem::path& root, std::uint64_t seed) {
  // Each template has one slot for the ambiguous token.
  const std::vector<std::vector<std::string>> templates = {
      {"_", "scored", "twice"}, {"saw", "_", "today"},       {"_", "won", "again"},
      {"about", "_", "now"},    {"_", "looked", "calm"},     {"near", "_", "again"},
      {"_", "was", "quiet", "today"}, {"photos", "of", "_", "tonight"},
  };
  const std::string ambiguous = "Jordan";
  std::mt19937_64 rng(seed);
  std::filesystem::create_directories(root / "images");

  auto image_for = [&rng](bool red) {
    std::uniform_int_distribution<int> hi(170, 240), lo(20, 90);
    if (red) return color_field(kImageSize, hi(rng), lo(rng), lo(rng), 25, rng);
    const bool green = rng() % 2 == 0;
    return green ? color_field(kImageSize, lo(rng), hi(rng), lo(rng), 25, rng)
                 : color_field(kImageSize, lo(rng), lo(rng), hi(rng), 25, rng);
  };
  auto build = [&](Corpus& corpus, const std::string& split, std::size_t repeats) {
    corpus.split = split;
    std::size_t k = 0;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      for (const auto& tpl : templates) {
        for (bool red : {true, false}) {
          SentenceExample ex;
          ex.language = "en";
          ex.image_ref = split + std::to_string(k++);
          for (const auto& w : tpl) {
            const bool slot = w == "_";
            ex.tokens.push_back(slot ? ambiguous : w);
            ex.labels.push_back(slot && red ? "B-PER" : "O");
          }
          write_ppm(root / "images" / (ex.image_ref + ".ppm"), image_for(red));
          corpus.examples.push_back(std::move(ex));
        }
      }
    }
  };
  Fixture f;
  f.root = root;
  f.ambiguous_token = ambiguous;
  build(f.train, "train", 3);    // 48 sentences
  build(f.heldout, "dev", 2);    // 32 sentences
  write_corpus(root / "train.iob2", f.train);
  write_corpus(root / "dev.iob2", f.heldout);
  return f;
}

TokenAccuracy token_accuracy(const Corpus& gold, const std::vector<std::vector<std::string>>& predicted,
                             const std::string& ambiguous_token) {
  if (gold.examples.size() != predicted.size()) throw ContractError("token_accuracy: sentence count mismatch");
  std::size_t total = 0, correct = 0, amb_correct = 0;
  TokenAccuracy acc;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    const auto& ex = gold.examples[s];
    if (ex.labels.size() != predicted[s].size()) throw ContractError("token_accuracy: sentence length mismatch");
    for (std::size_t i = 0; i < ex.labels.size(); ++i) {
      const bool ok = ex.labels[i] == predicted[s][i];
      ++total;
      correct += ok;
      if (ex.tokens[i] == ambiguous_token) {
        ++acc.ambiguous_count;
        amb_correct += ok;
      }
    }
  }
  acc.overall = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  acc.ambiguous = acc.ambiguous_count ? static_cast<double>(amb_correct) / static_cast<double>(acc.ambiguous_count) : 0.0;
  return acc;
}

}  // namespace mner::verify
