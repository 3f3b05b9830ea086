#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracksel/core.hpp"

namespace tracksel {

using Rgb = std::array<std::uint8_t, 3>;

struct ColorFrame {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  ColorFrame() = default;
  ColorFrame(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  const Rgb& at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  Rgb& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool empty() const { return pixels.empty(); }
};

struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, double fill = 0.0) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  double at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  double& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }

  /// Clamp-to-edge lookup.
  double clamped(int x, int y) const {
    return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }

  /// Bilinear sample with clamp-to-edge border.
  double sample(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    const double top = (1 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0);
    const double bot = (1 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1);
    return (1 - ay) * top + ay * bot;
  }

  bool empty() const { return pixels.empty(); }
};

inline double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

inline GrayFrame to_gray(const ColorFrame& f) {
  GrayFrame g(f.width, f.height);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) g.pixels[i] = luminance(f.pixels[i]);
  return g;
}

/// Integer pixel range covered by a box: pixels whose centres fall inside it, clipped to the frame.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
  int width() const { return std::max(0, x1 - x0); }
  int height() const { return std::max(0, y1 - y0); }
  std::size_t count() const { return std::size_t(width()) * std::size_t(height()); }
  bool empty() const { return width() == 0 || height() == 0; }
};

inline PixelRect pixel_rect(const BoundingBox& b, int frame_w, int frame_h) {
  PixelRect r;
  r.x0 = std::clamp(static_cast<int>(std::ceil(b.x - 0.5)), 0, frame_w);
  r.y0 = std::clamp(static_cast<int>(std::ceil(b.y - 0.5)), 0, frame_h);
  r.x1 = std::clamp(static_cast<int>(std::ceil(b.right() - 0.5)), 0, frame_w);
  r.y1 = std::clamp(static_cast<int>(std::ceil(b.bottom() - 0.5)), 0, frame_h);
  return r;
}

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& in, const std::filesystem::path& path) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v) || v < 0) throw ImageIoError("malformed PNM header: " + path.string());
  return v;
}

inline std::vector<std::uint8_t> read_pnm(const std::filesystem::path& path, const char* magic, int channels,
                                          int& w, int& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  std::string m(2, '\0');
  in.read(m.data(), 2);
  if (m != magic) throw ImageIoError("expected " + std::string(magic) + " image: " + path.string());
  w = read_pnm_int(in, path);
  h = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (maxval != 255) throw ImageIoError("only 8-bit PNM supported: " + path.string());
  in.get();  // single whitespace before the raster
  std::vector<std::uint8_t> data(std::size_t(w) * h * channels);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size()))
    throw ImageIoError("truncated raster: " + path.string());
  return data;
}

inline void write_pnm(const std::filesystem::path& path, const char* magic, int w, int h,
                      std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out << magic << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw ImageIoError("write failed: " + path.string());
}

}  // namespace detail

inline ColorFrame read_ppm(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto data = detail::read_pnm(path, "P6", 3, w, h);
  ColorFrame f(w, h);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = {data[3 * i], data[3 * i + 1], data[3 * i + 2]};
  return f;
}

inline void write_ppm(const std::filesystem::path& path, const ColorFrame& f) {
  std::vector<std::uint8_t> data(f.pixels.size() * 3);
  for (std::size_t i = 0; i < f.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) data[3 * i + c] = f.pixels[i][c];
  detail::write_pnm(path, "P6", f.width, f.height, data);
}

inline GrayFrame read_pgm(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto data = detail::read_pnm(path, "P5", 1, w, h);
  GrayFrame g(w, h);
  for (std::size_t i = 0; i < data.size(); ++i) g.pixels[i] = data[i];
  return g;
}

inline void write_pgm(const std::filesystem::path& path, const GrayFrame& g) {
  std::vector<std::uint8_t> data(g.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(g.pixels[i]), 0L, 255L));
  detail::write_pnm(path, "P5", g.width, g.height, data);
}

}  // namespace tracksel
