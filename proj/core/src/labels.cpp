#include "mner/labels.hpp"

#include <algorithm>

#include "mner/errors.hpp"

namespace mner {

std::optional<TagParts> split_tag(std::string_view tag) {
  if (tag == "O") return TagParts{};
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return std::nullopt;
  return TagParts{tag[0], std::string(tag.substr(2))};
}

LabelSchema::LabelSchema() {
  tags_.emplace_back("O");
  for (auto type : kEntityTypes) {
    tags_.push_back("B-" + std::string(type));
    tags_.push_back("I-" + std::string(type));
  }
}

LabelSchema::LabelSchema(std::vector<std::string> tags) : tags_(std::move(tags)) {
  if (tags_.empty()) throw ConfigError("label schema: no tags");
  for (const auto& t : tags_) {
    if (!split_tag(t)) throw ConfigError("label schema: '" + t + "' is not an IOB2 tag");
  }
}

std::optional<std::size_t> LabelSchema::find(std::string_view tag) const {
  auto it = std::find(tags_.begin(), tags_.end(), tag);
  if (it == tags_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - tags_.begin());
}

std::size_t LabelSchema::index(std::string_view tag) const {
  if (auto i = find(tag)) return *i;
  throw ParseError("unknown tag '" + std::string(tag) + "'");
}

bool LabelSchema::allows(std::size_t prev, std::size_t next) const {
  if (next >= tags_.size()) return next == end_index() && prev != begin_index();
  const auto to = split_tag(tags_[next]);
  if (to->prefix != 'I') return true;
  if (prev >= tags_.size()) return false;
  const auto from = split_tag(tags_[prev]);
  return from->prefix != 'O' && from->type == to->type;
}

}  // namespace mner
