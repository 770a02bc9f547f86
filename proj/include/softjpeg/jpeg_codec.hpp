#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "softjpeg/dct.hpp"
#include "softjpeg/raster.hpp"
#include "softjpeg/util.hpp"

namespace softjpeg {

struct MalformedMarker : Error {
  using Error::Error;
};
struct UnsupportedFeature : Error {
  using Error::Error;
};
struct TruncatedStream : Error {
  using Error::Error;
};
struct HuffmanDecodeError : Error {
  using Error::Error;
};

/// 64 quantization parameters in zig-zag order, 1..255 each.
struct QuantTable {
  std::array<std::uint16_t, 64> entries{};
  std::optional<int> quality_factor;

  /// Q for the coefficient at natural (row-major) index n.
  std::uint16_t at_natural(int n) const { return entries[natural_to_zigzag()[n]]; }
};

/// ITU T.81 Annex K.1 luminance table, row-major.
inline const std::array<int, 64>& ijg_luma_base() {
  static const std::array<int, 64> base = {
      16, 11, 10, 16, 24,  40,  51,  61,   //
      12, 12, 14, 19, 26,  58,  60,  55,   //
      14, 13, 16, 24, 40,  57,  69,  56,   //
      14, 17, 22, 29, 51,  87,  80,  62,   //
      18, 22, 37, 56, 68,  109, 103, 77,   //
      24, 35, 55, 64, 81,  104, 113, 92,   //
      49, 64, 78, 87, 103, 121, 120, 101,  //
      72, 92, 95, 98, 112, 100, 103, 99};
  return base;
}

/// IJG quality scaling: qf in 1..100, qf=50 reproduces the base table.
inline QuantTable make_luma_qtable(int qf) {
  if (qf < 1 || qf > 100) throw Error("quality factor must be in 1..100");
  int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
  QuantTable t;
  t.quality_factor = qf;
  const auto& base = ijg_luma_base();
  const auto& zz = zigzag_order();
  for (int k = 0; k < 64; ++k) {
    int v = (base[zz[k]] * scale + 50) / 100;
    t.entries[k] = static_cast<std::uint16_t>(std::clamp(v, 1, 255));
  }
  return t;
}

using QIndexBlock = std::array<std::int16_t, 64>;  // natural (row-major) order

/// Entropy-layer view of a baseline grayscale JPEG: q-indices per 8x8 code
/// block plus the quantization table. No inverse DCT has been applied.
struct QuantizedImage {
  int width = 0;
  int height = 0;
  int blocks_x = 0;
  int blocks_y = 0;
  std::vector<QIndexBlock> blocks;  // row-major block grid
  QuantTable luma_qtable;

  const QIndexBlock& block(int bx, int by) const { return blocks[by * blocks_x + bx]; }
  QIndexBlock& block(int bx, int by) { return blocks[by * blocks_x + bx]; }

  bool operator==(const QuantizedImage& o) const {
    return width == o.width && height == o.height && blocks_x == o.blocks_x &&
           blocks_y == o.blocks_y && blocks == o.blocks &&
           luma_qtable.entries == o.luma_qtable.entries;
  }
};

namespace detail {

// Annex K.3.1 / K.3.2 luminance Huffman tables: bits[i] = number of codes of
// length i+1, followed by the symbol values in code order.
struct HuffSpec {
  std::array<std::uint8_t, 16> bits;
  std::vector<std::uint8_t> vals;
};

inline const HuffSpec& annexk_dc_luma() {
  static const HuffSpec spec{
      {0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
      {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
  return spec;
}

inline const HuffSpec& annexk_ac_luma() {
  static const HuffSpec spec{
      {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
      {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51,
       0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1,
       0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18,
       0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
       0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57,
       0x58, 0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
       0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92,
       0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
       0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
       0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8,
       0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2,
       0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};
  return spec;
}

// Canonical code assignment per T.81 C.2.
struct HuffEncoder {
  std::array<std::uint16_t, 256> code{};
  std::array<std::uint8_t, 256> length{};

  explicit HuffEncoder(const HuffSpec& spec) {
    std::uint16_t c = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      for (int i = 0; i < spec.bits[len - 1]; ++i, ++k) {
        code[spec.vals[k]] = c++;
        length[spec.vals[k]] = static_cast<std::uint8_t>(len);
      }
      c = static_cast<std::uint16_t>(c << 1);
    }
  }
};

// Decode tables per T.81 F.2.2.3 (MINCODE/MAXCODE/VALPTR).
struct HuffDecoder {
  std::array<std::int32_t, 17> mincode{};
  std::array<std::int32_t, 17> maxcode{};  // -1 when no codes of that length
  std::array<std::int32_t, 17> valptr{};
  std::vector<std::uint8_t> vals;

  HuffDecoder() = default;
  explicit HuffDecoder(const HuffSpec& spec) : vals(spec.vals) {
    std::int32_t c = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      maxcode[len] = -1;
      if (spec.bits[len - 1] > 0) {
        valptr[len] = static_cast<std::int32_t>(k);
        mincode[len] = c;
        k += spec.bits[len - 1];
        c += spec.bits[len - 1];
        maxcode[len] = c - 1;
      }
      c <<= 1;
    }
  }
};

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put_bits(std::uint32_t bits, int count) {
    for (int i = count - 1; i >= 0; --i) put_bit((bits >> i) & 1);
  }

  void flush() {
    while (nbits_ != 0) put_bit(1);  // pad with 1s per T.81 F.1.2.3
  }

 private:
  void put_bit(std::uint32_t b) {
    acc_ = static_cast<std::uint8_t>((acc_ << 1) | b);
    if (++nbits_ == 8) {
      out_.push_back(acc_);
      if (acc_ == 0xff) out_.push_back(0x00);  // byte stuffing
      acc_ = 0;
      nbits_ = 0;
    }
  }

  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int nbits_ = 0;
};

class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size, std::size_t pos)
      : data_(data), size_(size), pos_(pos) {}

  int next_bit() {
    if (nbits_ == 0) {
      if (pos_ >= size_) throw TruncatedStream("entropy-coded segment ends mid-block");
      std::uint8_t b = data_[pos_++];
      if (b == 0xff) {
        if (pos_ >= size_) throw TruncatedStream("dangling 0xFF at end of scan");
        std::uint8_t m = data_[pos_++];
        if (m != 0x00)
          throw TruncatedStream("marker inside entropy-coded segment before all blocks decoded");
      }
      acc_ = b;
      nbits_ = 8;
    }
    --nbits_;
    return (acc_ >> nbits_) & 1;
  }

  std::uint32_t read_bits(int count) {
    std::uint32_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<std::uint32_t>(next_bit());
    return v;
  }

  std::size_t byte_pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_;
  std::uint8_t acc_ = 0;
  int nbits_ = 0;
};

inline int magnitude_category(int v) {
  int a = std::abs(v);
  int cat = 0;
  while (a) {
    ++cat;
    a >>= 1;
  }
  return cat;
}

// T.81 F.12: EXTEND of the raw category bits to a signed value.
inline int extend_value(std::uint32_t bits, int cat) {
  if (cat == 0) return 0;
  std::int32_t v = static_cast<std::int32_t>(bits);
  if (v < (1 << (cat - 1))) v -= (1 << cat) - 1;
  return v;
}

inline int decode_symbol(BitReader& br, const HuffDecoder& tbl) {
  std::int32_t code = br.next_bit();
  for (int len = 1; len <= 16; ++len) {
    if (tbl.maxcode[len] >= 0 && code <= tbl.maxcode[len])
      return tbl.vals[tbl.valptr[len] + (code - tbl.mincode[len])];
    code = (code << 1) | br.next_bit();
  }
  throw HuffmanDecodeError("code longer than 16 bits");
}

}  // namespace detail

/// Level shift, 8x8 DCT and round-quantization of every block. Right/bottom
/// edge blocks are padded by edge replication. This is the encoder's view of
/// the q-indices; entropy_encode below serializes it losslessly.
inline QuantizedImage quantize_image(const RasterU8& img, int qf) {
  if (img.width() < 1 || img.height() < 1) throw Error("empty image");
  QuantizedImage q;
  q.width = img.width();
  q.height = img.height();
  q.blocks_x = (img.width() + 7) / 8;
  q.blocks_y = (img.height() + 7) / 8;
  q.luma_qtable = make_luma_qtable(qf);
  q.blocks.resize(static_cast<std::size_t>(q.blocks_x) * q.blocks_y);

  const Dct8x8& dct = Dct8x8::instance();
  Eigen::VectorXd block(64), coeffs(64);
  for (int by = 0; by < q.blocks_y; ++by) {
    for (int bx = 0; bx < q.blocks_x; ++bx) {
      for (int r = 0; r < 8; ++r) {
        int y = std::min(by * 8 + r, img.height() - 1);
        for (int c = 0; c < 8; ++c) {
          int x = std::min(bx * 8 + c, img.width() - 1);
          block[r * 8 + c] = static_cast<double>(img.at(x, y)) - 128.0;
        }
      }
      coeffs = dct.forward(block);
      QIndexBlock& out = q.block(bx, by);
      for (int i = 0; i < 64; ++i) {
        long qi = std::lround(coeffs[i] / q.luma_qtable.at_natural(i));
        // keep magnitude categories encodable (<= 11 for DC, <= 10 for AC);
        // 8-bit input never reaches these bounds
        long cap = i == 0 ? 1024 : 1023;
        out[i] = static_cast<std::int16_t>(std::clamp(qi, -cap, cap));
      }
    }
  }
  return q;
}

/// Serializes a QuantizedImage as a baseline sequential JFIF stream with the
/// Annex K luminance Huffman tables. Lossless with respect to the q-indices.
inline std::vector<std::uint8_t> entropy_encode(const QuantizedImage& q) {
  std::vector<std::uint8_t> out;
  auto marker = [&out](std::uint8_t m) {
    out.push_back(0xff);
    out.push_back(m);
  };
  auto be16 = [&out](int v) {
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  };

  marker(0xd8);  // SOI

  marker(0xe0);  // APP0 / JFIF
  be16(16);
  const char* jfif = "JFIF";
  for (int i = 0; i < 5; ++i) out.push_back(static_cast<std::uint8_t>(jfif[i]));
  out.push_back(1);  // version 1.1
  out.push_back(1);
  out.push_back(0);  // no density units
  be16(1);
  be16(1);
  out.push_back(0);  // no thumbnail
  out.push_back(0);

  marker(0xdb);  // DQT, 8-bit, id 0, zig-zag order
  be16(2 + 1 + 64);
  out.push_back(0x00);
  for (int k = 0; k < 64; ++k) out.push_back(static_cast<std::uint8_t>(q.luma_qtable.entries[k]));

  marker(0xc0);  // SOF0: 8-bit, one component, 1x1 sampling
  be16(2 + 6 + 3);
  out.push_back(8);
  be16(q.height);
  be16(q.width);
  out.push_back(1);
  out.push_back(1);     // component id
  out.push_back(0x11);  // sampling 1x1
  out.push_back(0);     // qtable id

  auto emit_dht = [&](int cls, const detail::HuffSpec& spec) {
    marker(0xc4);
    be16(static_cast<int>(2 + 1 + 16 + spec.vals.size()));
    out.push_back(static_cast<std::uint8_t>(cls << 4));  // class, id 0
    for (int i = 0; i < 16; ++i) out.push_back(spec.bits[i]);
    for (std::uint8_t v : spec.vals) out.push_back(v);
  };
  emit_dht(0, detail::annexk_dc_luma());
  emit_dht(1, detail::annexk_ac_luma());

  marker(0xda);  // SOS
  be16(2 + 1 + 2 + 3);
  out.push_back(1);
  out.push_back(1);     // component id
  out.push_back(0x00);  // DC table 0, AC table 0
  out.push_back(0);     // spectral start
  out.push_back(63);    // spectral end
  out.push_back(0);     // successive approximation

  const detail::HuffEncoder dc_enc(detail::annexk_dc_luma());
  const detail::HuffEncoder ac_enc(detail::annexk_ac_luma());
  detail::BitWriter bw(out);
  const auto& zz = zigzag_order();

  int pred = 0;
  for (const QIndexBlock& blk : q.blocks) {
    int diff = blk[0] - pred;
    pred = blk[0];
    int cat = detail::magnitude_category(diff);
    bw.put_bits(dc_enc.code[cat], dc_enc.length[cat]);
    if (cat > 0) {
      std::uint32_t bits = diff >= 0 ? static_cast<std::uint32_t>(diff)
                                     : static_cast<std::uint32_t>(diff + (1 << cat) - 1);
      bw.put_bits(bits, cat);
    }

    int run = 0;
    for (int k = 1; k < 64; ++k) {
      int v = blk[zz[k]];
      if (v == 0) {
        ++run;
        continue;
      }
      while (run > 15) {
        bw.put_bits(ac_enc.code[0xf0], ac_enc.length[0xf0]);  // ZRL
        run -= 16;
      }
      int acat = detail::magnitude_category(v);
      int sym = (run << 4) | acat;
      bw.put_bits(ac_enc.code[sym], ac_enc.length[sym]);
      std::uint32_t bits = v >= 0 ? static_cast<std::uint32_t>(v)
                                  : static_cast<std::uint32_t>(v + (1 << acat) - 1);
      bw.put_bits(bits, acat);
      run = 0;
    }
    if (run > 0) bw.put_bits(ac_enc.code[0x00], ac_enc.length[0x00]);  // EOB
  }
  bw.flush();

  marker(0xd9);  // EOI
  return out;
}

/// One-call encoder: quantize then serialize.
inline std::vector<std::uint8_t> encode_jpeg(const RasterU8& img, int qf) {
  return entropy_encode(quantize_image(img, qf));
}

/// Parses a baseline sequential grayscale JFIF stream back to q-indices and
/// the quantization table. DC is differentially decoded, AC run-length
/// decoded, both de-zig-zagged; no dequantization or inverse DCT is applied.
inline QuantizedImage parse_jpeg(const std::vector<std::uint8_t>& bytes) {
  const std::uint8_t* p = bytes.data();
  const std::size_t n = bytes.size();
  std::size_t pos = 0;

  auto need = [&](std::size_t count) {
    if (pos + count > n) throw TruncatedStream("unexpected end of stream");
  };
  auto u8 = [&]() {
    need(1);
    return p[pos++];
  };
  auto u16 = [&]() {
    need(2);
    int v = (p[pos] << 8) | p[pos + 1];
    pos += 2;
    return v;
  };

  need(2);
  if (p[0] != 0xff || p[1] != 0xd8) throw MalformedMarker("missing SOI");
  pos = 2;

  std::optional<QuantTable> qtable;
  std::optional<detail::HuffDecoder> dc_tbl, ac_tbl;
  int width = -1, height = -1;
  bool seen_sof = false;

  for (;;) {
    need(2);
    if (p[pos] != 0xff) throw MalformedMarker("expected marker, found raw byte");
    ++pos;
    while (pos < n && p[pos] == 0xff) ++pos;  // fill bytes
    need(1);
    std::uint8_t m = p[pos++];

    if (m == 0xd9) throw TruncatedStream("EOI before scan data");

    if (m == 0x01 || (m >= 0xd0 && m <= 0xd7))
      throw MalformedMarker("standalone marker outside scan");

    if (m == 0xc2) throw UnsupportedFeature("progressive DCT (SOF2)");
    if (m >= 0xc9 && m <= 0xcb) throw UnsupportedFeature("arithmetic coding");
    if ((m >= 0xc1 && m <= 0xc3) || (m >= 0xc5 && m <= 0xc7) || (m >= 0xcd && m <= 0xcf))
      throw UnsupportedFeature("non-baseline SOF");
    if (m == 0xdd) throw UnsupportedFeature("restart interval");

    int seglen = u16();
    if (seglen < 2) throw MalformedMarker("segment length < 2");
    std::size_t segend = pos + static_cast<std::size_t>(seglen) - 2;
    if (segend > n) throw TruncatedStream("segment extends past end of stream");

    if (m == 0xdb) {  // DQT
      while (pos < segend) {
        std::uint8_t pq_tq = u8();
        if ((pq_tq >> 4) != 0) throw UnsupportedFeature("16-bit quantization table");
        QuantTable t;
        for (int k = 0; k < 64; ++k) {
          need(1);
          std::uint8_t e = p[pos++];
          if (e == 0) throw MalformedMarker("zero quantization entry");
          t.entries[k] = e;
        }
        if ((pq_tq & 0x0f) == 0) qtable = t;
      }
    } else if (m == 0xc0) {  // SOF0
      if (seen_sof) throw MalformedMarker("duplicate SOF");
      seen_sof = true;
      int precision = u8();
      if (precision != 8) throw UnsupportedFeature("sample precision != 8");
      height = u16();
      width = u16();
      int ncomp = u8();
      if (ncomp != 1) throw UnsupportedFeature("multi-component image");
      if (width < 1 || height < 1) throw MalformedMarker("zero frame dimensions");
      u8();  // component id
      u8();  // sampling factors (single component: non-interleaved either way)
      u8();  // qtable id
    } else if (m == 0xc4) {  // DHT
      while (pos < segend) {
        std::uint8_t tc_th = u8();
        detail::HuffSpec spec;
        std::size_t total = 0;
        for (int i = 0; i < 16; ++i) {
          need(1);
          spec.bits[i] = p[pos++];
          total += spec.bits[i];
        }
        if (total > 256) throw MalformedMarker("Huffman table with >256 codes");
        need(total);
        spec.vals.assign(p + pos, p + pos + total);
        pos += total;
        int cls = tc_th >> 4;
        if (cls > 1) throw MalformedMarker("bad Huffman table class");
        if ((tc_th & 0x0f) == 0) {
          if (cls == 0)
            dc_tbl.emplace(spec);
          else
            ac_tbl.emplace(spec);
        }
      }
    } else if (m == 0xda) {  // SOS
      if (!seen_sof) throw MalformedMarker("SOS before SOF");
      if (!qtable) throw MalformedMarker("SOS without quantization table");
      if (!dc_tbl || !ac_tbl) throw MalformedMarker("SOS without Huffman tables");
      int ncomp = u8();
      if (ncomp != 1) throw UnsupportedFeature("multi-component scan");
      u8();  // component selector
      u8();  // table ids
      u8();  // spectral start
      u8();  // spectral end
      u8();  // successive approximation
      pos = segend;

      QuantizedImage q;
      q.width = width;
      q.height = height;
      q.blocks_x = (width + 7) / 8;
      q.blocks_y = (height + 7) / 8;
      q.luma_qtable = *qtable;
      const std::size_t total_blocks = static_cast<std::size_t>(q.blocks_x) * q.blocks_y;
      // Grow as blocks decode: each costs at least two bits of scan data, so a
      // truncated stream throws long before a bogus frame header can force a
      // huge allocation.
      q.blocks.reserve(std::min(total_blocks, (n - pos) * 4 + 64));

      detail::BitReader br(p, n, pos);
      const auto& zz = zigzag_order();
      int pred = 0;
      for (std::size_t bi = 0; bi < total_blocks; ++bi) {
        QIndexBlock blk;
        blk.fill(0);
        int cat = detail::decode_symbol(br, *dc_tbl);
        if (cat > 11) throw HuffmanDecodeError("DC category out of range");
        int diff = detail::extend_value(br.read_bits(cat), cat);
        pred += diff;
        if (pred < -2047 || pred > 2047) throw HuffmanDecodeError("DC value out of range");
        blk[0] = static_cast<std::int16_t>(pred);

        int k = 1;
        while (k < 64) {
          int sym = detail::decode_symbol(br, *ac_tbl);
          int run = sym >> 4;
          int acat = sym & 0x0f;
          if (acat == 0) {
            if (run == 0) break;  // EOB
            if (run != 15) throw HuffmanDecodeError("bad zero-run symbol");
            k += 16;  // ZRL
            if (k > 64) throw HuffmanDecodeError("zero run past end of block");
            continue;
          }
          if (acat > 10) throw HuffmanDecodeError("AC category out of range");
          k += run;
          if (k > 63) throw HuffmanDecodeError("coefficient index past end of block");
          blk[zz[k]] = static_cast<std::int16_t>(detail::extend_value(br.read_bits(acat), acat));
          ++k;
        }
        q.blocks.push_back(blk);
      }

      // After the last block: pad bits, then optional 0xFF fill, then EOI.
      pos = br.byte_pos();
      while (pos < n && p[pos] == 0xff && pos + 1 < n && p[pos + 1] == 0xff) ++pos;
      need(2);
      if (p[pos] != 0xff || p[pos + 1] != 0xd9)
        throw MalformedMarker("expected EOI after scan data");
      return q;
    } else if ((m >= 0xe0 && m <= 0xef) || m == 0xfe) {  // APPn / COM
      pos = segend;
    } else {
      throw MalformedMarker("unexpected marker in header");
    }
    if (pos != segend) pos = segend;
  }
}

/// Dequantized (bin-center) DCT coefficients of one block, natural order.
inline Eigen::VectorXd bin_center_coeffs(const QuantizedImage& q, int bx, int by) {
  Eigen::VectorXd y(64);
  const QIndexBlock& blk = q.block(bx, by);
  for (int i = 0; i < 64; ++i)
    y[i] = static_cast<double>(blk[i]) * q.luma_qtable.at_natural(i);
  return y;
}

/// Rebuilds the padded, level-shifted pixel field (values around [-128,127])
/// from per-block coefficient vectors produced by `coeffs_of_block`.
template <typename CoeffFn>
RasterF64 reconstruct_shifted(const QuantizedImage& q, CoeffFn&& coeffs_of_block) {
  RasterF64 out(q.blocks_x * 8, q.blocks_y * 8);
  const Dct8x8& dct = Dct8x8::instance();
  for (int by = 0; by < q.blocks_y; ++by) {
    for (int bx = 0; bx < q.blocks_x; ++bx) {
      Eigen::VectorXd pix = dct.inverse(coeffs_of_block(bx, by));
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) out.at(bx * 8 + c, by * 8 + r) = pix[r * 8 + c];
    }
  }
  return out;
}

/// Crops the padded field, undoes the level shift and clamps to 8 bits.
inline RasterU8 finalize_raster(const RasterF64& shifted, int width, int height) {
  RasterU8 out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double v = std::nearbyint(shifted.at(x, y) + 128.0);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  return out;
}

/// Standard JPEG reconstruction: coefficients at bin centers q*Q.
inline RasterU8 hard_decode(const QuantizedImage& q) {
  RasterF64 field =
      reconstruct_shifted(q, [&q](int bx, int by) { return bin_center_coeffs(q, bx, by); });
  return finalize_raster(field, q.width, q.height);
}

}  // namespace softjpeg
