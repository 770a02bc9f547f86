#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "softjpeg/raster.hpp"
#include "softjpeg/util.hpp"

namespace softjpeg {

inline double mse(const RasterU8& a, const RasterU8& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error("metric inputs must have equal dimensions");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    double d = double(a.data()[i]) - double(b.data()[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.data().size());
}

/// Peak signal-to-noise ratio against peak 255; identical inputs give +inf.
inline double psnr(const RasterU8& ref, const RasterU8& test) {
  double m = mse(ref, test);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

/// Mean SSIM over all 8x8 windows at stride 1 with a uniform window,
/// C1 = (0.01*255)^2, C2 = (0.03*255)^2.
inline double ssim(const RasterU8& ref, const RasterU8& test) {
  if (ref.width() != test.width() || ref.height() != test.height())
    throw Error("metric inputs must have equal dimensions");
  const int w = ref.width(), h = ref.height(), win = 8;
  if (w < win || h < win) throw Error("image smaller than the SSIM window");
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

  double total = 0.0;
  long count = 0;
  for (int y = 0; y + win <= h; ++y)
    for (int x = 0; x + win <= w; ++x) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int r = 0; r < win; ++r)
        for (int c = 0; c < win; ++c) {
          double a = ref.at(x + c, y + r), b = test.at(x + c, y + r);
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      const double n = win * win;
      double mx = sx / n, my = sy / n;
      double vx = sxx / n - mx * mx;
      double vy = syy / n - my * my;
      double cov = sxy / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

/// Fixed-precision CSV field for PSNR with the documented "inf" sentinel.
inline std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace softjpeg
