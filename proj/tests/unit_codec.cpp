#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "softjpeg/jpeg_codec.hpp"
#include "softjpeg/laplacian_prior.hpp"
#include "support/synthimg.hpp"

using namespace softjpeg;

namespace {

// Independent reference: direct cosine-sum DCT (no shared code with the
// library transform) followed by round quantization.
std::array<double, 64> ref_dct8(const std::array<double, 64>& g) {
  std::array<double, 64> y{};
  const double pi = 3.14159265358979323846;
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double au = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      double av = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      double acc = 0;
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
          acc += g[r * 8 + c] * std::cos((2 * r + 1) * u * pi / 16.0) *
                 std::cos((2 * c + 1) * v * pi / 16.0);
      y[u * 8 + v] = au * av * acc;
    }
  return y;
}

std::string temp_path(const std::string& name) { return ::testing::TempDir() + name; }

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  ASSERT_TRUE(out.good());
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

bool pil_available() {
  return std::system("python3 -c 'import PIL.Image' >/dev/null 2>&1") == 0;
}

int max_abs_diff(const RasterU8& a, const RasterU8& b) {
  EXPECT_EQ(a.width(), b.width());
  EXPECT_EQ(a.height(), b.height());
  int worst = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(int(a.data()[i]) - int(b.data()[i])));
  return worst;
}

}  // namespace

TEST(QuantTable, Qf50IsBaseTable) {
  QuantTable t = make_luma_qtable(50);
  const auto& base = ijg_luma_base();
  for (int n = 0; n < 64; ++n) EXPECT_EQ(t.at_natural(n), base[n]);
}

TEST(QuantTable, QualityScaling) {
  // qf=5 -> scale 1000: entry = (base*1000+50)/100 clamped to 255
  QuantTable t5 = make_luma_qtable(5);
  EXPECT_EQ(t5.at_natural(0), 160);   // base 16
  EXPECT_EQ(t5.at_natural(1), 110);   // base 11
  EXPECT_EQ(t5.at_natural(63), 255);  // base 99 -> 990, clamped
  // qf=80 -> scale 40
  QuantTable t80 = make_luma_qtable(80);
  EXPECT_EQ(t80.at_natural(0), 6);  // (16*40+50)/100
  // qf=100 -> all ones
  QuantTable t100 = make_luma_qtable(100);
  for (int n = 0; n < 64; ++n) EXPECT_EQ(t100.at_natural(n), 1);
  EXPECT_THROW(make_luma_qtable(0), Error);
  EXPECT_THROW(make_luma_qtable(101), Error);
}

TEST(Quantize, MatchesDirectCosineReference) {
  RasterU8 img = testsupport::noise_image(8, 8, 31);
  for (int qf : {5, 40, 80}) {
    QuantizedImage q = quantize_image(img, qf);
    std::array<double, 64> g{};
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) g[r * 8 + c] = double(img.at(c, r)) - 128.0;
    std::array<double, 64> y = ref_dct8(g);
    for (int i = 0; i < 64; ++i) {
      int expect = int(std::lround(y[i] / q.luma_qtable.at_natural(i)));
      EXPECT_EQ(q.blocks[0][i], expect) << "qf=" << qf << " i=" << i;
    }
  }
}

TEST(Quantize, EdgePaddingReplicates) {
  // a 9x9 image has 4 blocks; the bottom-right block is mostly replicated
  // edge pixels, so padding must not inject zeros
  RasterU8 img(9, 9);
  for (auto& px : img.data()) px = 200;
  QuantizedImage q = quantize_image(img, 50);
  ASSERT_EQ(q.blocks_x, 2);
  ASSERT_EQ(q.blocks_y, 2);
  for (const QIndexBlock& blk : q.blocks) {
    EXPECT_EQ(blk[0], std::lround(8.0 * (200.0 - 128.0) / 16.0));
    for (int i = 1; i < 64; ++i) EXPECT_EQ(blk[i], 0);
  }
}

TEST(EntropyCoding, RoundTripExact) {
  Rng seeds(404);
  for (auto [w, h] : std::vector<std::pair<int, int>>{{8, 8}, {16, 16}, {17, 23}, {64, 64}}) {
    for (int qf : {5, 40, 80}) {
      RasterU8 noise = testsupport::noise_image(w, h, seeds.next_u64());
      QuantizedImage q = quantize_image(noise, qf);
      QuantizedImage back = parse_jpeg(entropy_encode(q));
      EXPECT_TRUE(back == q) << w << "x" << h << " qf=" << qf;

      RasterU8 scene = testsupport::synth_scene(w, h, seeds.next_u64());
      QuantizedImage qs = quantize_image(scene, qf);
      EXPECT_TRUE(parse_jpeg(entropy_encode(qs)) == qs) << w << "x" << h << " qf=" << qf;
    }
  }
}

TEST(HardDecode, UniformImageIsExact) {
  RasterU8 img(24, 16);
  for (auto& px : img.data()) px = 128;
  RasterU8 out = hard_decode(quantize_image(img, 50));
  EXPECT_EQ(max_abs_diff(img, out), 0);
}

TEST(HardDecode, HighQualityIsNearLossless) {
  RasterU8 img = testsupport::synth_scene(48, 32, 12);
  RasterU8 out = hard_decode(quantize_image(img, 100));
  EXPECT_LE(max_abs_diff(img, out), 1);
}

TEST(PilInterop, PilDecodesOurStream) {
  if (!pil_available()) GTEST_SKIP() << "python3/PIL not available";
  RasterU8 img = testsupport::synth_scene(40, 56, 77);
  std::string jpg = temp_path("ours.jpg"), pgm = temp_path("ours_pil.pgm");
  write_bytes(jpg, encode_jpeg(img, 40));
  std::string cmd = "python3 -c \"from PIL import Image; Image.open('" + jpg +
                    "').convert('L').save('" + pgm + "')\" >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0) << "PIL failed to decode our stream";
  RasterU8 pil = read_pgm(pgm);
  RasterU8 ours = hard_decode(parse_jpeg(read_bytes(jpg)));
  EXPECT_LE(max_abs_diff(pil, ours), 2);  // PIL uses an integer-approximate IDCT
  std::remove(jpg.c_str());
  std::remove(pgm.c_str());
}

TEST(PilInterop, WeParseForeignStream) {
  if (!pil_available()) GTEST_SKIP() << "python3/PIL not available";
  RasterU8 img = testsupport::synth_scene(33, 49, 123);
  std::string src = temp_path("src.pgm"), jpg = temp_path("pil.jpg"), pgm = temp_path("pil.pgm");
  write_pgm(src, img);
  std::string cmd = "python3 -c \"from PIL import Image; im = Image.open('" + src +
                    "'); im.save('" + jpg + "', quality=75); Image.open('" + jpg +
                    "').convert('L').save('" + pgm + "')\" >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0) << "PIL failed to encode";
  QuantizedImage q = parse_jpeg(read_bytes(jpg));
  EXPECT_EQ(q.width, 33);
  EXPECT_EQ(q.height, 49);
  EXPECT_LE(max_abs_diff(read_pgm(pgm), hard_decode(q)), 2);
  std::remove(src.c_str());
  std::remove(jpg.c_str());
  std::remove(pgm.c_str());
}

TEST(ParseErrors, UnsupportedFeatures) {
  RasterU8 img = testsupport::synth_scene(16, 16, 9);
  std::vector<std::uint8_t> good = encode_jpeg(img, 50);

  auto find_marker = [&](std::uint8_t m) {
    for (std::size_t i = 0; i + 1 < good.size(); ++i)
      if (good[i] == 0xff && good[i + 1] == m) return i;
    ADD_FAILURE() << "marker not found";
    return std::size_t(0);
  };

  {  // SOF0 -> SOF2: progressive
    auto bad = good;
    bad[find_marker(0xc0) + 1] = 0xc2;
    EXPECT_THROW(parse_jpeg(bad), UnsupportedFeature);
  }
  {  // SOF0 -> SOF9: arithmetic coding
    auto bad = good;
    bad[find_marker(0xc0) + 1] = 0xc9;
    EXPECT_THROW(parse_jpeg(bad), UnsupportedFeature);
  }
  {  // three components
    auto bad = good;
    std::size_t sof = find_marker(0xc0);
    bad[sof + 9] = 3;
    EXPECT_THROW(parse_jpeg(bad), UnsupportedFeature);
  }
  {  // restart interval definition
    auto bad = good;
    std::size_t sos = find_marker(0xda);
    std::vector<std::uint8_t> dri = {0xff, 0xdd, 0x00, 0x04, 0x00, 0x08};
    bad.insert(bad.begin() + static_cast<std::ptrdiff_t>(sos), dri.begin(), dri.end());
    EXPECT_THROW(parse_jpeg(bad), UnsupportedFeature);
  }
  {  // 16-bit quantization table
    auto bad = good;
    std::size_t dqt = find_marker(0xdb);
    bad[dqt + 4] = 0x10;
    EXPECT_THROW(parse_jpeg(bad), Error);  // pq=1 with wrong length either way
  }
}

TEST(ParseErrors, MalformedAndTruncated) {
  RasterU8 img = testsupport::synth_scene(16, 16, 9);
  std::vector<std::uint8_t> good = encode_jpeg(img, 50);

  EXPECT_THROW(parse_jpeg({}), Error);
  EXPECT_THROW(parse_jpeg({0x00, 0x01}), MalformedMarker);
  EXPECT_THROW(parse_jpeg({0xff, 0xd8}), TruncatedStream);

  // every proper prefix must fail with a typed error, never succeed silently
  for (std::size_t cut : {std::size_t(3), std::size_t(10), good.size() / 2, good.size() - 2}) {
    std::vector<std::uint8_t> prefix(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(parse_jpeg(prefix), Error) << "cut=" << cut;
  }
}

TEST(ParseErrors, ByteFlipFuzzNeverEscapesTypedErrors) {
  RasterU8 img = testsupport::synth_scene(24, 24, 55);
  std::vector<std::uint8_t> good = encode_jpeg(img, 40);
  Rng rng(0xf22d);
  int parsed_ok = 0, typed_errors = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto mutated = good;
    int flips = 1 + int(rng.below(3));
    for (int f = 0; f < flips; ++f) {
      std::size_t pos = rng.below(mutated.size());
      mutated[pos] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    }
    try {
      QuantizedImage q = parse_jpeg(mutated);
      hard_decode(q);  // decoding the survivor must not crash either
      ++parsed_ok;
    } catch (const Error&) {
      ++typed_errors;
    }
    // anything else (std::bad_alloc, segfault, ...) fails the test by escaping
  }
  EXPECT_EQ(parsed_ok + typed_errors, 300);
  EXPECT_GT(typed_errors, 0);
}

TEST(Mmse, ShrinksTowardZeroInsideBins) {
  RasterU8 img = testsupport::synth_scene(64, 64, 21);
  QuantizedImage q = quantize_image(img, 10);
  LaplacianModel m = fit_laplacian(q);
  for (int i = 1; i < 64; ++i) {
    double Q = q.luma_qtable.at_natural(i);
    double v = mmse_bin_value(3, Q, m.scale[i]);
    EXPECT_GT(v, 2.5 * Q);  // stays in bin
    EXPECT_LT(v, 3.0 * Q);  // pulled below center toward zero
    EXPECT_DOUBLE_EQ(mmse_bin_value(-3, Q, m.scale[i]), -v);
  }
  EXPECT_EQ(mmse_bin_value(0, 16.0, 5.0), 0.0);
  EXPECT_EQ(mmse_bin_value(4, 16.0, 5.0, /*uniform=*/true), 64.0);
}

TEST(Mmse, FitRequiresEnoughBlocks) {
  RasterU8 tiny(16, 16);  // 4 blocks
  for (auto& px : tiny.data()) px = 100;
  EXPECT_THROW(fit_laplacian(quantize_image(tiny, 50)), TooFewBlocks);
}

TEST(Mmse, DecodeBeatsHardDecodeAtLowQuality) {
  RasterU8 img = testsupport::synth_scene(96, 96, 3);
  QuantizedImage q = quantize_image(img, 5);
  RasterU8 hard = hard_decode(q);
  RasterU8 soft = mmse_decode(q);
  auto mse = [&](const RasterU8& a) {
    double acc = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
      double d = double(a.data()[i]) - double(img.data()[i]);
      acc += d * d;
    }
    return acc / double(a.data().size());
  };
  EXPECT_LT(mse(soft), mse(hard));
}
