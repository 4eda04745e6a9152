#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace culgen {

// Interleaved 8-bit raster, row-major. channels is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(static_cast<size_t>(w) * h * c, fill) {}

  uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size_bytes() const { return pixels.size(); }
};

// Dispatches on magic bytes. Supports PPM/PGM (P2/P3/P5/P6) and the PNG
// subset this project writes and reads back (8-bit gray/RGB/RGBA,
// non-interlaced; RGBA alpha is dropped).
Image read_image(const std::string& path);

void write_ppm(const std::string& path, const Image& img);
void write_png(const std::string& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);

uint32_t crc32_of(const void* data, size_t len);
uint32_t crc32_of_file(const std::string& path);

}  // namespace culgen
