#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace softjpeg {

/// Orthonormal type-II DCT basis for an N-point signal, one basis vector per
/// row. The transform is C * x, the inverse is C^T * X.
inline Eigen::MatrixXd dct_basis(int n) {
  Eigen::MatrixXd c(n, n);
  const double pi = 3.14159265358979323846264338327950288;
  for (int u = 0; u < n; ++u) {
    double scale = std::sqrt((u == 0 ? 1.0 : 2.0) / n);
    for (int x = 0; x < n; ++x)
      c(u, x) = scale * std::cos((2 * x + 1) * u * pi / (2.0 * n));
  }
  return c;
}

/// Separable 2-D orthonormal DCT on a p*p patch held as a row-major vector.
/// Output index (u,v) maps to u*p+v.
class Dct2d {
 public:
  explicit Dct2d(int p) : p_(p), basis_(dct_basis(p)) {}

  int size() const { return p_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& pixels) const {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        pixels.data(), p_, p_);
    Eigen::MatrixXd y = basis_ * m * basis_.transpose();
    return flatten(y);
  }

  Eigen::VectorXd inverse(const Eigen::VectorXd& coeffs) const {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        coeffs.data(), p_, p_);
    Eigen::MatrixXd y = basis_.transpose() * m * basis_;
    return flatten(y);
  }

 private:
  Eigen::VectorXd flatten(const Eigen::MatrixXd& m) const {
    Eigen::VectorXd out(p_ * p_);
    for (int r = 0; r < p_; ++r)
      for (int c = 0; c < p_; ++c) out[r * p_ + c] = m(r, c);
    return out;
  }

  int p_;
  Eigen::MatrixXd basis_;
};

/// The 8x8 transform pair used by the codec and the q-bin constraint map.
/// Orthonormal scaling: a constant block of value c has DC = 8c and zero AC.
class Dct8x8 {
 public:
  Dct8x8() : impl_(8) {}

  Eigen::VectorXd forward(const Eigen::VectorXd& block) const { return impl_.forward(block); }
  Eigen::VectorXd inverse(const Eigen::VectorXd& coeffs) const { return impl_.inverse(coeffs); }

  void forward64(const double* in, double* out) const {
    Eigen::Map<const Eigen::VectorXd> x(in, 64);
    Eigen::VectorXd y = impl_.forward(x);
    Eigen::Map<Eigen::VectorXd>(out, 64) = y;
  }

  void inverse64(const double* in, double* out) const {
    Eigen::Map<const Eigen::VectorXd> x(in, 64);
    Eigen::VectorXd y = impl_.inverse(x);
    Eigen::Map<Eigen::VectorXd>(out, 64) = y;
  }

  static const Dct8x8& instance() {
    static const Dct8x8 dct;
    return dct;
  }

 private:
  Dct2d impl_;
};

/// zigzag_order[k] = natural (row-major) index of the k-th coefficient in
/// zig-zag scan order. Fixed permutation shared by the DQT and entropy layers.
inline const std::array<int, 64>& zigzag_order() {
  static const std::array<int, 64> order = [] {
    std::array<int, 64> z{};
    int k = 0, r = 0, c = 0;
    bool up = true;
    while (k < 64) {
      z[k++] = r * 8 + c;
      if (up) {
        if (c == 7) { ++r; up = false; }
        else if (r == 0) { ++c; up = false; }
        else { --r; ++c; }
      } else {
        if (r == 7) { ++c; up = true; }
        else if (c == 0) { ++r; up = true; }
        else { ++r; --c; }
      }
    }
    return z;
  }();
  return order;
}

/// natural_to_zigzag[n] = position of natural index n in the zig-zag scan.
inline const std::array<int, 64>& natural_to_zigzag() {
  static const std::array<int, 64> inv = [] {
    std::array<int, 64> v{};
    const auto& z = zigzag_order();
    for (int k = 0; k < 64; ++k) v[z[k]] = k;
    return v;
  }();
  return inv;
}

}  // namespace softjpeg
