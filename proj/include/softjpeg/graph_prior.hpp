#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "softjpeg/dct.hpp"
#include "softjpeg/util.hpp"

namespace softjpeg {

struct BadSigma : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};

/// Fully connected similarity graph over the pixels of one patch. Weights
/// combine an intensity kernel and a spatial kernel; degrees are floored so
/// D stays invertible even on pathological inputs.
struct PatchGraph {
  int n = 0;
  Eigen::MatrixXd w;    // symmetric, zero diagonal, entries in [0,1]
  Eigen::VectorXd deg;  // row sums, floored at 1e-8
  double d_min = 0.0;
  double d_max = 0.0;
};

/// `width` is the pixel-row length of the (row-major) signal; a 1-D signal
/// is just width == x.size().
inline PatchGraph build_graph(const Eigen::VectorXd& x, int width, double sigma1, double sigma2) {
  if (sigma1 <= 0.0 || sigma2 <= 0.0) throw BadSigma("sigma1 and sigma2 must be positive");
  const int n = static_cast<int>(x.size());
  if (n < 2 || width < 1 || n % width != 0) throw Error("bad signal geometry");

  PatchGraph g;
  g.n = n;
  g.w = Eigen::MatrixXd::Zero(n, n);
  const double inv_s1 = 1.0 / (sigma1 * sigma1);
  const double inv_s2 = 1.0 / (sigma2 * sigma2);
  for (int i = 0; i < n; ++i) {
    int ri = i / width, ci = i % width;
    for (int j = i + 1; j < n; ++j) {
      int rj = j / width, cj = j % width;
      double dx = x[i] - x[j];
      double dl2 = double(ri - rj) * (ri - rj) + double(ci - cj) * (ci - cj);
      double wij = std::exp(-dx * dx * inv_s1) * std::exp(-dl2 * inv_s2);
      g.w(i, j) = wij;
      g.w(j, i) = wij;
    }
  }
  g.deg = g.w.rowwise().sum().cwiseMax(1e-8);
  g.d_min = g.deg.minCoeff();
  g.d_max = g.deg.maxCoeff();
  return g;
}

inline double default_sigma1(const Eigen::VectorXd& x) {
  double mean = x.mean();
  double var = (x.array() - mean).square().sum() / static_cast<double>(x.size());
  return std::max(5.0, std::sqrt(var));
}

inline Eigen::MatrixXd laplacian(const PatchGraph& g) {
  Eigen::MatrixXd l = -g.w;
  l.diagonal() += g.deg;
  return l;
}

inline Eigen::MatrixXd normalized_laplacian(const PatchGraph& g) {
  Eigen::VectorXd dis = g.deg.cwiseSqrt().cwiseInverse();
  return dis.asDiagonal() * laplacian(g) * dis.asDiagonal();
}

inline Eigen::MatrixXd random_walk_laplacian(const PatchGraph& g) {
  return g.deg.cwiseInverse().asDiagonal() * laplacian(g);
}

/// (1/d_min) x' L D^{-1} L x by two matrix-vector products and a diagonal
/// scaling; the spectral decomposition never enters the solver path.
inline double lerag_value(const Eigen::VectorXd& x, const PatchGraph& g) {
  Eigen::VectorXd lx = g.deg.cwiseProduct(x) - g.w * x;
  return lx.dot(lx.cwiseQuotient(g.deg)) / g.d_min;
}

enum class RegularizerKind { combinatorial, normalized, lerag };

inline RegularizerKind regularizer_kind_from_name(const std::string& name) {
  if (name == "combinatorial") return RegularizerKind::combinatorial;
  if (name == "normalized") return RegularizerKind::normalized;
  if (name == "lerag") return RegularizerKind::lerag;
  throw Error("unknown regularizer kind: " + name);
}

inline double regularizer_value(const Eigen::VectorXd& x, const PatchGraph& g,
                                RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::combinatorial: {
      Eigen::VectorXd lx = g.deg.cwiseProduct(x) - g.w * x;
      return x.dot(lx);
    }
    case RegularizerKind::normalized: {
      Eigen::VectorXd y = x.cwiseQuotient(g.deg.cwiseSqrt());
      Eigen::VectorXd ly = g.deg.cwiseProduct(y) - g.w * y;
      return y.dot(ly);
    }
    case RegularizerKind::lerag:
      return lerag_value(x, g);
  }
  throw Error("unreachable");
}

/// Dense quadratic kernel for the QP step: penalty = scale * x' G x.
inline std::pair<Eigen::MatrixXd, double> regularizer_matrix(const PatchGraph& g,
                                                             RegularizerKind kind) {
  Eigen::MatrixXd l = laplacian(g);
  switch (kind) {
    case RegularizerKind::combinatorial:
      return {std::move(l), 1.0};
    case RegularizerKind::normalized: {
      Eigen::VectorXd dis = g.deg.cwiseSqrt().cwiseInverse();
      return {dis.asDiagonal() * l * dis.asDiagonal(), 1.0};
    }
    case RegularizerKind::lerag:
      return {l * g.deg.cwiseInverse().asDiagonal() * l, 1.0 / g.d_min};
  }
  throw Error("unreachable");
}

/// Eigen-decomposition of the combinatorial or normalized Laplacian
/// (symmetric cases); eigenvalues ascending, eigenvectors orthonormal.
struct SpectralDecomp {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

inline SpectralDecomp spectral_decompose(const PatchGraph& g, RegularizerKind kind) {
  if (kind == RegularizerKind::lerag)
    throw Error("decompose the normalized Laplacian for LERaG analysis");
  Eigen::MatrixXd m =
      kind == RegularizerKind::combinatorial ? laplacian(g) : normalized_laplacian(g);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("Laplacian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Eigen::VectorXd gft(const SpectralDecomp& d, const Eigen::VectorXd& x) {
  return d.eigenvectors.transpose() * x;
}

/// Right eigenvectors of the random-walk Laplacian via the similarity
/// L_r = D^{-1/2} L_n D^{1/2}: columns D^{-1/2} v_k, same eigenvalues as L_n.
/// Not orthonormal; the first column is constant.
inline Eigen::MatrixXd random_walk_right_eigenvectors(const PatchGraph& g,
                                                      const SpectralDecomp& normalized) {
  return g.deg.cwiseSqrt().cwiseInverse().asDiagonal() * normalized.eigenvectors;
}

/// Two smooth ramps separated by a jump: in-piece variation exactly delta,
/// cross-piece gap strictly greater than Delta.
inline Eigen::VectorXd make_pws_signal(int n, int split, double delta, double big_delta) {
  if (n < 4 || split < 2 || split > n - 2) throw Error("bad piecewise signal geometry");
  Eigen::VectorXd x(n);
  for (int i = 0; i < split; ++i)
    x[i] = delta * static_cast<double>(i) / std::max(split - 1, 1);
  double base = delta + big_delta + delta;  // keeps every cross-piece gap > Delta
  for (int i = split; i < n; ++i)
    x[i] = base + delta * static_cast<double>(i - split) / std::max(n - split - 1, 1);
  return x;
}

struct NcutReport {
  double fiedler = 0.0;        // second-smallest eigenvalue of L_n
  Eigen::VectorXd v2;          // second eigenvector, 0-eigenspace disambiguated
  double pwc_error = 0.0;      // scale-optimal deviation of D^{-1/2} v2 from two-level form
  bool degenerate = false;     // v2 direction not unique (eta3 - eta2 below tolerance)
  double recon_graph_err = 0.0;  // rel. l2 error, first two right eigenvectors of L_r
  double recon_dct_err = 0.0;    // rel. l2 error, first two DCT basis vectors
};

/// Spectral-clustering view of a 1-D signal: how well do the first two graph
/// frequencies explain it, and how close is the relaxed Ncut solution to the
/// ideal two-level indicator.
inline NcutReport ncut_demo(const Eigen::VectorXd& signal, double sigma1, double sigma2) {
  const int n = static_cast<int>(signal.size());
  PatchGraph g = build_graph(signal, n, sigma1, sigma2);
  SpectralDecomp sd = spectral_decompose(g, RegularizerKind::normalized);

  NcutReport rep;
  rep.fiedler = sd.eigenvalues[1];
  rep.degenerate = n > 2 && sd.eigenvalues[2] - sd.eigenvalues[1] <= 1e-9;

  Eigen::VectorXd v1_ideal = g.deg.cwiseSqrt();
  v1_ideal.normalize();
  rep.v2 = sd.eigenvectors.col(1);
  if (sd.eigenvalues[1] - sd.eigenvalues[0] <= 1e-9) {
    // 0-eigenspace of dimension 2 (two disconnected pieces): the solver's
    // basis for it is arbitrary, so take the direction orthogonal to the
    // theoretical first eigenvector D^{1/2} 1 within that span.
    Eigen::VectorXd a = sd.eigenvectors.col(0), b = sd.eigenvectors.col(1);
    Eigen::VectorXd cand = b - v1_ideal * v1_ideal.dot(b);
    Eigen::VectorXd alt = a - v1_ideal * v1_ideal.dot(a);
    if (alt.norm() > cand.norm()) cand = alt;
    if (cand.norm() > 1e-12) rep.v2 = cand.normalized();
  }

  // deviation from the ideal two-level form f_i = 1/vol(A), -1/vol(B),
  // with the partition read off the sign pattern and scale fitted
  Eigen::VectorXd f = g.deg.cwiseSqrt().cwiseInverse().cwiseProduct(rep.v2);
  double vol_a = 0.0, vol_b = 0.0;
  for (int i = 0; i < n; ++i) (f[i] >= 0 ? vol_a : vol_b) += g.deg[i];
  Eigen::VectorXd ideal(n);
  for (int i = 0; i < n; ++i) ideal[i] = f[i] >= 0 ? 1.0 / std::max(vol_a, 1e-300)
                                                   : -1.0 / std::max(vol_b, 1e-300);
  double c = ideal.squaredNorm() > 0 ? f.dot(ideal) / ideal.squaredNorm() : 0.0;
  rep.pwc_error = (f - c * ideal).norm() / std::max(f.norm(), 1e-300);

  // least-squares reconstruction from the first two right eigenvectors of
  // L_r versus the first two DCT basis vectors
  Eigen::MatrixXd u = random_walk_right_eigenvectors(g, sd).leftCols(2);
  Eigen::VectorXd fit = u * (u.transpose() * u).ldlt().solve(u.transpose() * signal);
  rep.recon_graph_err = (signal - fit).norm() / std::max(signal.norm(), 1e-300);

  Eigen::MatrixXd dct2 = dct_basis(n).topRows(2).transpose();
  Eigen::VectorXd dfit = dct2 * (dct2.transpose() * signal);
  rep.recon_dct_err = (signal - dfit).norm() / std::max(signal.norm(), 1e-300);
  return rep;
}

}  // namespace softjpeg
