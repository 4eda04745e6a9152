#pragma once

#include <string>
#include <utility>
#include <vector>

#include "culgen/image.hpp"

namespace culgen {

// Simple RGB bar chart with a built-in 5x7 glyph set for labels (letters,
// digits, a little punctuation; labels render uppercased).
Image render_bar_chart(const std::vector<std::pair<std::string, double>>& bars,
                       const std::string& title = "", int width = 640, int height = 360);

void draw_text(Image& img, int x, int y, const std::string& text, int scale = 1,
               uint8_t r = 32, uint8_t g = 32, uint8_t b = 32);

}  // namespace culgen
