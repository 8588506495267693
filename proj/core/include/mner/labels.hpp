#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mner {

inline constexpr std::array<std::string_view, 4> kEntityTypes = {"PER", "LOC", "ORG", "MISC"};

// Ordered IOB2 tag set: O, then B-X / I-X for each entity type. Two extra
// indices (begin(), end()) exist only as CRF transition boundaries.
class LabelSchema {
 public:
  LabelSchema();
  explicit LabelSchema(std::vector<std::string> tags);

  std::size_t size() const { return tags_.size(); }
  std::size_t begin_index() const { return tags_.size(); }
  std::size_t end_index() const { return tags_.size() + 1; }
  std::size_t transition_size() const { return tags_.size() + 2; }

  const std::string& tag(std::size_t index) const { return tags_.at(index); }
  const std::vector<std::string>& tags() const { return tags_; }
  std::optional<std::size_t> find(std::string_view tag) const;
  // Throws ParseError on unknown tags.
  std::size_t index(std::string_view tag) const;

  // Whether `next` may follow `prev` under IOB2 (prev may be begin_index()).
  bool allows(std::size_t prev, std::size_t next) const;

  bool operator==(const LabelSchema&) const = default;

 private:
  std::vector<std::string> tags_;
};

// Splits "B-PER" into ('B', "PER"); "O" gives ('O', "").
struct TagParts {
  char prefix = 'O';
  std::string type;
};
std::optional<TagParts> split_tag(std::string_view tag);

}  // namespace mner
