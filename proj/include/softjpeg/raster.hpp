#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "softjpeg/util.hpp"

namespace softjpeg {

struct PgmError : Error {
  using Error::Error;
};

/// Row-major grayscale raster.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RasterU8 = Raster<std::uint8_t>;
using RasterF64 = Raster<double>;

inline RasterU8 quantize_to_u8(const RasterF64& f) {
  RasterU8 out(f.width(), f.height());
  for (std::size_t i = 0; i < f.size(); ++i) {
    double v = std::nearbyint(f.data()[i]);
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

inline RasterF64 to_f64(const RasterU8& u) {
  RasterF64 out(u.width(), u.height());
  for (std::size_t i = 0; i < u.size(); ++i) out.data()[i] = u.data()[i];
  return out;
}

/// Binary 8-bit PGM (P5).
inline void write_pgm(const std::string& path, const RasterU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PgmError("cannot open for writing: " + path);
  f << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data().data()),
          static_cast<std::streamsize>(img.size()));
  if (!f) throw PgmError("write failed: " + path);
}

inline RasterU8 read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PgmError("cannot open: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw PgmError("not a binary PGM (P5): " + path);
  auto next_token = [&f, &path]() -> long {
    // Skips whitespace and '#' comment lines between header fields.
    while (f) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    long v = -1;
    f >> v;
    if (!f || v < 0) throw PgmError("bad PGM header: " + path);
    return v;
  };
  long w = next_token();
  long h = next_token();
  long maxval = next_token();
  if (w <= 0 || h <= 0 || maxval != 255) throw PgmError("unsupported PGM geometry: " + path);
  f.get();  // single whitespace byte after maxval
  RasterU8 img(static_cast<int>(w), static_cast<int>(h));
  f.read(reinterpret_cast<char*>(img.data().data()), static_cast<std::streamsize>(img.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.size()))
    throw PgmError("truncated PGM payload: " + path);
  return img;
}

}  // namespace softjpeg
