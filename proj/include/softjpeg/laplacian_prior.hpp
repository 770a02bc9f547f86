#pragma once

#include <array>
#include <cmath>

#include "softjpeg/jpeg_codec.hpp"

namespace softjpeg {

struct TooFewBlocks : Error {
  using Error::Error;
};

/// Per-frequency Laplacian model of DCT coefficients, p(y) ~ exp(-|y|/scale).
/// Frequencies flagged `uniform` (always the DC term) fall back to a flat
/// in-bin prior, whose posterior mean is the bin center.
struct LaplacianModel {
  std::array<double, 64> scale{};   // natural (row-major) frequency order
  std::array<bool, 64> uniform{};
};

/// Maximum-likelihood fit of the per-frequency scales from the dequantized
/// coefficients: scale_i = mean |y_i|, floored to keep the density proper
/// when a frequency is entirely zero.
inline LaplacianModel fit_laplacian(const QuantizedImage& q) {
  if (q.blocks.size() < 16)
    throw TooFewBlocks("need at least 16 blocks to fit coefficient statistics");
  LaplacianModel m;
  m.uniform[0] = true;  // DC: shifted means, not peaked at zero
  m.scale[0] = 0.0;
  for (int i = 1; i < 64; ++i) {
    double acc = 0.0;
    for (const QIndexBlock& blk : q.blocks)
      acc += std::abs(static_cast<double>(blk[i])) * q.luma_qtable.at_natural(i);
    m.scale[i] = std::max(acc / static_cast<double>(q.blocks.size()), 1e-4);
    m.uniform[i] = false;
  }
  return m;
}

/// Posterior mean of a coefficient known to lie in the quantization bin
/// [(q-1/2)Q, (q+1/2)Q) under a centered Laplacian with the given scale.
/// Closed form on the positive side (the bin then sits inside y >= 0):
///   E[y | y in [a,b)] = ((a+s) - (b+s) e^{-Q/s}) / (1 - e^{-Q/s})
///                     = a + s - Q / (e^{Q/s} - 1)
/// extended to q < 0 by symmetry; the q = 0 bin is symmetric around zero.
/// The second form avoids cancellation when s >> Q (value -> bin center)
/// and degrades gracefully to a + s when s << Q (expm1 overflows to inf).
inline double mmse_bin_value(int q, double Q, double scale, bool uniform = false) {
  if (q == 0) return 0.0;
  if (uniform) return q * Q;
  if (q < 0) return -mmse_bin_value(-q, Q, scale, uniform);
  double a = (q - 0.5) * Q;
  return a + scale - Q / std::expm1(Q / scale);
}

/// Per-block posterior-mean coefficients, natural order.
inline Eigen::VectorXd mmse_coeffs(const QuantizedImage& q, const LaplacianModel& m, int bx,
                                   int by) {
  Eigen::VectorXd y(64);
  const QIndexBlock& blk = q.block(bx, by);
  for (int i = 0; i < 64; ++i)
    y[i] = mmse_bin_value(blk[i], q.luma_qtable.at_natural(i), m.scale[i], m.uniform[i]);
  return y;
}

/// Padded, level-shifted pixel field reconstructed from posterior-mean
/// coefficients; every block is feasible for its quantization bins.
inline RasterF64 mmse_field(const QuantizedImage& q, const LaplacianModel& m) {
  return reconstruct_shifted(q, [&](int bx, int by) { return mmse_coeffs(q, m, bx, by); });
}

/// One-call MMSE reconstruction to an 8-bit raster.
inline RasterU8 mmse_decode(const QuantizedImage& q) {
  LaplacianModel m = fit_laplacian(q);
  return finalize_raster(mmse_field(q, m), q.width, q.height);
}

}  // namespace softjpeg
