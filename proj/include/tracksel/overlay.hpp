#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "tracksel/core.hpp"
#include "tracksel/image.hpp"

namespace tracksel {

inline Rgb id_color(std::int64_t id) {
  static constexpr std::array<Rgb, 8> palette{{{230, 25, 75},
                                               {60, 180, 75},
                                               {255, 225, 25},
                                               {0, 130, 200},
                                               {245, 130, 48},
                                               {145, 30, 180},
                                               {70, 240, 240},
                                               {240, 50, 230}}};
  return palette[static_cast<std::size_t>(id < 0 ? -id : id) % palette.size()];
}

inline void draw_rect(ColorFrame& img, const BoundingBox& b, Rgb color) {
  const int x0 = static_cast<int>(std::lround(b.x)), y0 = static_cast<int>(std::lround(b.y));
  const int x1 = static_cast<int>(std::lround(b.right())) - 1, y1 = static_cast<int>(std::lround(b.bottom())) - 1;
  for (int x = x0; x <= x1; ++x) {
    if (img.inside(x, y0)) img.at(x, y0) = color;
    if (img.inside(x, y1)) img.at(x, y1) = color;
  }
  for (int y = y0; y <= y1; ++y) {
    if (img.inside(x0, y)) img.at(x0, y) = color;
    if (img.inside(x1, y)) img.at(x1, y) = color;
  }
}

/// Writes `text` (digits and '-') with a 3x5 bitmap font, top-left at (x, y).
inline void draw_label(ColorFrame& img, int x, int y, const std::string& text, Rgb color) {
  // rows of each glyph, 3 bits per row, MSB = left column
  static constexpr std::array<std::array<std::uint8_t, 5>, 11> glyphs{{{7, 5, 5, 5, 7},
                                                                       {2, 6, 2, 2, 7},
                                                                       {7, 1, 7, 4, 7},
                                                                       {7, 1, 7, 1, 7},
                                                                       {5, 5, 7, 1, 1},
                                                                       {7, 4, 7, 1, 7},
                                                                       {7, 4, 7, 5, 7},
                                                                       {7, 1, 1, 1, 1},
                                                                       {7, 5, 7, 5, 7},
                                                                       {7, 5, 7, 1, 7},
                                                                       {0, 0, 7, 0, 0}}};
  for (const char ch : text) {
    const int g = ch == '-' ? 10 : (ch >= '0' && ch <= '9' ? ch - '0' : -1);
    if (g >= 0)
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c)
          if (glyphs[g][r] & (4 >> c) && img.inside(x + c, y + r)) img.at(x + c, y + r) = color;
    x += 4;
  }
}

}  // namespace tracksel
