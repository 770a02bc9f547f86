#include <gtest/gtest.h>

#include <cmath>

#include "softjpeg/metrics.hpp"
#include "support/synthimg.hpp"

using namespace softjpeg;

TEST(Psnr, HandComputedCases) {
  RasterU8 a(16, 16, 100);
  RasterU8 b = a;
  EXPECT_TRUE(std::isinf(psnr(a, b)));
  EXPECT_EQ(format_psnr(psnr(a, b)), "inf");

  for (auto& v : b.data()) v = 105;  // uniform error of 5: mse 25
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(255.0 * 255.0 / 25.0), 1e-12);
  EXPECT_EQ(format_psnr(psnr(a, b)), "34.1514");

  RasterU8 black(8, 8, 0), white(8, 8, 255);
  EXPECT_NEAR(psnr(black, white), 0.0, 1e-12);  // worst case: mse = 255^2

  RasterU8 wrong(8, 9, 0);
  EXPECT_THROW(mse(black, wrong), Error);
  EXPECT_NEAR(mse(a, b), 25.0, 1e-12);
}

TEST(Ssim, IdenticalAndShifted) {
  RasterU8 img = testsupport::synth_scene(32, 32, 2);
  EXPECT_NEAR(ssim(img, img), 1.0, 1e-12);

  // constant offset: variance terms match, luminance term is the scalar
  // (2 m1 m2 + c1) / (m1^2 + m2^2 + c1) on every (flat) window
  RasterU8 a(16, 16, 100), b(16, 16, 150);
  double c1 = (0.01 * 255) * (0.01 * 255);
  double c2 = (0.03 * 255) * (0.03 * 255);
  double lum = (2.0 * 100 * 150 + c1) / (100.0 * 100 + 150.0 * 150 + c1);
  EXPECT_NEAR(ssim(a, b), lum, 1e-12);

  // anti-correlated structure scores poorly
  RasterU8 pos(16, 16), neg(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      int wave = ((x + y) % 2) ? 40 : -40;
      pos.at(x, y) = std::uint8_t(128 + wave);
      neg.at(x, y) = std::uint8_t(128 - wave);
    }
  double cov = -40.0 * 40.0;
  double var = 40.0 * 40.0;
  double want = (2.0 * 128 * 128 + c1) / (128.0 * 128 * 2 + c1) * (2 * cov + c2) /
                (2 * var + c2);
  EXPECT_NEAR(ssim(pos, neg), want, 1e-12);
  EXPECT_LT(ssim(pos, neg), 0.0);

  RasterU8 tiny(4, 4, 0);
  EXPECT_THROW(ssim(tiny, tiny), Error);
}

TEST(Ssim, DegradationOrdersSensibly) {
  RasterU8 img = testsupport::synth_scene(64, 64, 10);
  RasterU8 mild = img, harsh = img;
  Rng rng(6);
  for (auto& v : mild.data()) v = std::uint8_t(std::clamp(int(v) + int(rng.below(7)) - 3, 0, 255));
  for (auto& v : harsh.data())
    v = std::uint8_t(std::clamp(int(v) + int(rng.below(61)) - 30, 0, 255));
  EXPECT_GT(ssim(img, mild), ssim(img, harsh));
  EXPECT_GT(psnr(img, mild), psnr(img, harsh));
  EXPECT_LE(ssim(img, mild), 1.0);
}

TEST(Formatting, FixedWidthFields) {
  EXPECT_EQ(format_psnr(31.24567891), "31.2457");
  EXPECT_EQ(format_fixed(0.9997531, 6), "0.999753");
  EXPECT_EQ(format_fixed(0.0, 3), "0.000");
  EXPECT_EQ(format_fixed(12.5, 3), "12.500");
}
