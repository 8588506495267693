#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace mner {

using KeyValues = std::map<std::string, std::string>;

// Line-oriented `key = value`; '#' starts a comment, blank lines ignored.
KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& values);

// Typed lookups; throw ConfigError naming the key on malformed values.
double kv_double(const std::string& key, const std::string& value);
std::size_t kv_size(const std::string& key, const std::string& value);
bool kv_bool(const std::string& key, const std::string& value);
std::vector<std::size_t> kv_size_list(const std::string& key, const std::string& value);
std::vector<std::string> kv_string_list(const std::string& value);

}  // namespace mner
