#include "culgen/chart.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

#include "culgen/errors.hpp"

namespace culgen {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used, MSB-side = left pixel.
const std::map<char, std::array<uint8_t, 7>>& font() {
  static const std::map<char, std::array<uint8_t, 7>> glyphs = {
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x0E, 0x00, 0x00, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return glyphs;
}

void put_pixel(Image& img, int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(x, y, 0) = r;
  img.at(x, y, 1) = g;
  img.at(x, y, 2) = b;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) put_pixel(img, x, y, r, g, b);
}

}  // namespace

void draw_text(Image& img, int x, int y, const std::string& text, int scale, uint8_t r,
               uint8_t g, uint8_t b) {
  int cx = x;
  for (char raw : text) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    auto it = font().find(c);
    const auto& glyph = it != font().end() ? it->second : font().at('.');
    for (int row = 0; row < 7; ++row)
      for (int col = 0; col < 5; ++col)
        if (glyph[static_cast<size_t>(row)] & (0x10 >> col))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              put_pixel(img, cx + col * scale + sx, y + row * scale + sy, r, g, b);
    cx += 6 * scale;
  }
}

Image render_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                       const std::string& title, int width, int height) {
  if (bars.empty()) throw InvalidInputError("render_bar_chart: no bars");
  Image img(width, height, 3, 255);

  const int margin_left = 40, margin_right = 12, margin_top = title.empty() ? 16 : 32;
  const int margin_bottom = 56;
  const int plot_w = width - margin_left - margin_right;
  const int plot_h = height - margin_top - margin_bottom;

  double max_v = 0.0;
  for (const auto& [label, v] : bars) max_v = std::max(max_v, v);
  if (max_v <= 0.0) max_v = 1.0;

  // Axes.
  fill_rect(img, margin_left - 1, margin_top, margin_left, margin_top + plot_h + 1, 60, 60, 60);
  fill_rect(img, margin_left - 1, margin_top + plot_h, margin_left + plot_w,
            margin_top + plot_h + 1, 60, 60, 60);

  const int n = static_cast<int>(bars.size());
  const int slot = plot_w / n;
  const int bar_w = std::max(2, slot * 7 / 10);
  for (int i = 0; i < n; ++i) {
    const auto& [label, v] = bars[static_cast<size_t>(i)];
    const int h = static_cast<int>(std::lround(plot_h * (v / max_v)));
    const int x0 = margin_left + i * slot + (slot - bar_w) / 2;
    fill_rect(img, x0, margin_top + plot_h - h, x0 + bar_w, margin_top + plot_h, 70, 110, 180);

    // Vertical-ish label: truncate to the slot.
    std::string shown = label;
    const size_t max_chars = static_cast<size_t>(std::max(1, slot / 6));
    if (shown.size() > max_chars) shown = shown.substr(0, max_chars);
    draw_text(img, margin_left + i * slot + std::max(0, (slot - 6 * static_cast<int>(shown.size())) / 2),
              margin_top + plot_h + 6, shown);

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    draw_text(img, x0, margin_top + plot_h - h - 10, buf);
  }
  if (!title.empty()) draw_text(img, margin_left, 10, title, 2);
  return img;
}

}  // namespace culgen
