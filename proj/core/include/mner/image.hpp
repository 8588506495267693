#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "mner/tensor.hpp"

namespace mner {

// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3
};

// Binary PPM (P6, maxval 255). Throws ParseError naming the file.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);

// Bilinear resize (half-pixel centres, edge clamp) to size x size, scaled to
// [0, 1] and normalised per channel as (x - 0.5) / 0.5. Returns [3 x R x R].
Tensor image_to_tensor(const RgbImage& image, std::size_t size);

// Loads `<dir>/<stem>.ppm`, caching by stem. A missing file is replaced by
// the default image and counted; a corrupt one throws.
class ImageStore {
 public:
  ImageStore(std::filesystem::path directory, std::size_t resolution);

  Tensor load(const std::string& stem);
  // Replaces the all-zero (mid-grey) substitute for missing files.
  void set_default_image(const RgbImage& image);

  std::size_t resolution() const { return resolution_; }
  std::size_t missing() const { return missing_.load(); }

 private:
  std::filesystem::path directory_;
  std::size_t resolution_;
  Tensor default_image_;
  std::mutex mutex_;
  std::map<std::string, Tensor> cache_;
  std::atomic<std::size_t> missing_{0};
};

}  // namespace mner
