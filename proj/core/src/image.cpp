#include "mner/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "mner/errors.hpp"

namespace mner {

namespace {

// Next whitespace-delimited header field, skipping '#' comments.
std::string header_field(std::istream& in, const std::filesystem::path& path) {
  std::string field;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!field.empty()) return field;
      continue;
    }
    field.push_back(static_cast<char>(c));
  }
  if (field.empty()) throw ParseError(path.string() + ": truncated PPM header");
  return field;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string f = header_field(in, path);
  if (f.empty() || !std::all_of(f.begin(), f.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    throw ParseError(path.string() + ": bad PPM header field '" + f + "'");
  }
  return std::stoul(f);
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  if (header_field(in, path) != "P6") throw ParseError(path.string() + ": not a binary PPM (P6)");
  RgbImage img;
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);  // consumes the single separator byte
  if (img.width == 0 || img.height == 0) throw ParseError(path.string() + ": empty PPM raster");
  if (maxval != 255) throw ParseError(path.string() + ": PPM maxval must be 255");
  img.pixels.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw ParseError(path.string() + ": truncated PPM raster");
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

Tensor image_to_tensor(const RgbImage& image, std::size_t size) {
  if (size == 0) throw ContractError("image_to_tensor: target size must be positive");
  const std::size_t w = image.width, h = image.height;
  const double sx = static_cast<double>(w) / static_cast<double>(size);
  const double sy = static_cast<double>(h) / static_cast<double>(size);
  std::vector<double> out(3 * size * size);
  auto px = [&](std::size_t c, std::size_t y, std::size_t x) {
    return static_cast<double>(image.pixels[(y * w + x) * 3 + c]) / 255.0;
  };
  for (std::size_t oy = 0; oy < size; ++oy) {
    const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < size; ++ox) {
      const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (1 - wy) * ((1 - wx) * px(c, y0, x0) + wx * px(c, y0, x1)) +
                         wy * ((1 - wx) * px(c, y1, x0) + wx * px(c, y1, x1));
        out[(c * size + oy) * size + ox] = (v - 0.5) / 0.5;
      }
    }
  }
  return Tensor::from({3, size, size}, std::move(out));
}

ImageStore::ImageStore(std::filesystem::path directory, std::size_t resolution)
    : directory_(std::move(directory)),
      resolution_(resolution),
      default_image_(Tensor::zeros({3, resolution, resolution})) {}

void ImageStore::set_default_image(const RgbImage& image) {
  std::lock_guard lock(mutex_);
  default_image_ = image_to_tensor(image, resolution_);
}

Tensor ImageStore::load(const std::string& stem) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(stem); it != cache_.end()) return it->second;
  }
  const auto path = directory_ / (stem + ".ppm");
  Tensor t;
  if (stem.empty() || !std::filesystem::exists(path)) {
    missing_.fetch_add(1);
    std::lock_guard lock(mutex_);
    t = default_image_;
  } else {
    t = image_to_tensor(read_ppm(path), resolution_);
  }
  std::lock_guard lock(mutex_);
  cache_.emplace(stem, t);
  return t;
}

}  // namespace mner
