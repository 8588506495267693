#include "mner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "mner/errors.hpp"

namespace mner {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "2MNER1\n";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

template <typename T>
void put(std::vector<char>& out, T value) {
  const char* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::size_t end, const std::string& source)
      : bytes_(bytes), end_(end), source_(source) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(float* out, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(out, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  std::size_t position() const { return pos_; }
  void seek(std::size_t pos) { pos_ = pos; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw ParseError(source_ + ": checkpoint truncated");
  }
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<char> encode_checkpoint(const ParameterList& params) {
  std::vector<char> out(kMagic, kMagic + kMagicSize);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::size_t payload_start = out.size();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const Shape& shape = p.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint64_t>(out, d);
    for (double v : p.tensor.data()) put<float>(out, static_cast<float>(v));
  }
  put<std::uint64_t>(out, fnv1a64(out.data() + payload_start, out.size() - payload_start));
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  if (bytes.size() < kMagicSize + 4 + 4 + 8 || std::memcmp(bytes.data(), kMagic, kMagicSize) != 0) {
    throw ParseError(source + ": not a checkpoint file");
  }
  const std::size_t end = bytes.size() - sizeof(std::uint64_t);
  Reader in(bytes, end, source);
  in.seek(kMagicSize);
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ParseError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t payload_start = in.position();
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + end, sizeof(stored));
  if (fnv1a64(bytes.data() + payload_start, end - payload_start) != stored) {
    throw ParseError(source + ": checkpoint checksum mismatch");
  }
  const auto count = in.get<std::uint32_t>();
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
    const std::size_t n = shape_numel(e.shape);
    if (n > (end - in.position()) / sizeof(float)) throw ParseError(source + ": checkpoint truncated");
    e.values.resize(n);
    in.get_floats(e.values.data(), n);
    entries.push_back(std::move(e));
  }
  if (in.position() != end) throw ParseError(source + ": trailing bytes in checkpoint");
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

void apply_checkpoint(const std::vector<CheckpointEntry>& entries, const ParameterList& params) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  if (by_name.size() != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(by_name.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("checkpoint lacks parameter " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw ConfigError("checkpoint parameter " + p.name + " has shape " + shape_to_string(it->second->shape) +
                        ", model expects " + shape_to_string(p.tensor.shape()));
    }
  }
  for (const auto& p : params) {
    const auto& values = by_name.at(p.name)->values;
    Tensor t = p.tensor;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) data[i] = static_cast<double>(values[i]);
  }
}

}  // namespace mner
