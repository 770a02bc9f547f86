#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "softjpeg/dct.hpp"
#include "softjpeg/util.hpp"

namespace softjpeg {

struct BadMagic : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptPayload : Error {
  using Error::Error;
};

/// Learned overcomplete dictionary: unit-norm atom columns plus the training
/// hyperparameters it was produced with.
struct Dictionary {
  Eigen::MatrixXd atoms;  // n x M, columns unit norm
  int sparsity = 0;       // per-patch atom budget used in training
  int iters = 0;          // training sweeps performed
};

struct SparseCode {
  std::vector<int> support;  // atom indices in selection order
  Eigen::VectorXd coeffs;    // aligned with support
  double residual_norm = 0.0;
};

/// Orthogonal matching pursuit against a fixed dictionary. The Gram matrix
/// is computed once, so coding many vectors against the same dictionary only
/// touches the full data vector at entry and at the final residual check.
class OmpSolver {
 public:
  explicit OmpSolver(const Eigen::MatrixXd& dict) : d_(dict), gram_(dict.transpose() * dict) {}

  const Eigen::MatrixXd& dict() const { return d_; }

  /// Greedy pursuit: pick the atom most correlated with the residual (ties
  /// resolved to the lowest index), refit by least squares on the support,
  /// stop at `max_atoms`, at residual norm <= `eps`, or when no atom sees
  /// the residual any more.
  SparseCode code(const Eigen::VectorXd& x, int max_atoms, double eps) const {
    const int m = static_cast<int>(d_.cols());
    max_atoms = std::min(max_atoms, std::min<int>(m, static_cast<int>(d_.rows())));

    SparseCode out;
    const double x2 = x.squaredNorm();
    double res2 = x2;
    if (max_atoms <= 0 || std::sqrt(res2) <= eps) {
      out.residual_norm = std::sqrt(std::max(res2, 0.0));
      return out;
    }

    Eigen::VectorXd b = d_.transpose() * x;
    Eigen::VectorXd corr = b;
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    Eigen::VectorXd alpha;

    while (static_cast<int>(out.support.size()) < max_atoms) {
      int best = -1;
      double best_abs = 0.0;
      for (int j = 0; j < m; ++j) {
        if (used[j]) continue;
        double a = std::abs(corr[j]);
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best < 0 || best_abs <= 1e-10 * std::sqrt(x2)) break;

      out.support.push_back(best);
      used[best] = 1;
      const int k = static_cast<int>(out.support.size());

      Eigen::MatrixXd gss(k, k);
      Eigen::VectorXd bs(k);
      for (int i = 0; i < k; ++i) {
        bs[i] = b[out.support[i]];
        for (int j = 0; j < k; ++j) gss(i, j) = gram_(out.support[i], out.support[j]);
      }
      alpha = gss.ldlt().solve(bs);

      res2 = std::max(x2 - bs.dot(alpha), 0.0);
      if (std::sqrt(res2) <= eps) break;

      corr = b;
      for (int i = 0; i < k; ++i) corr -= gram_.col(out.support[i]) * alpha[i];
    }

    out.coeffs = alpha;
    if (out.support.empty()) out.coeffs.resize(0);

    Eigen::VectorXd r = x;
    for (std::size_t i = 0; i < out.support.size(); ++i)
      r -= d_.col(out.support[i]) * out.coeffs[static_cast<int>(i)];
    out.residual_norm = r.norm();
    return out;
  }

 private:
  Eigen::MatrixXd d_;
  Eigen::MatrixXd gram_;
};

inline Eigen::VectorXd densify(const SparseCode& code, int m) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < code.support.size(); ++i)
    a[code.support[i]] = code.coeffs[static_cast<int>(i)];
  return a;
}

struct KsvdResult {
  Dictionary dict;
  std::vector<double> objective;  // sum of squared residuals after each coding stage
};

namespace detail {

// Top singular pair of e (n x u) through the smaller Gram matrix; exact up
// to the symmetric eigensolver, deterministic, and cheap for tall-or-wide e.
inline void top_singular_pair(const Eigen::MatrixXd& e, Eigen::VectorXd& d_out,
                              Eigen::VectorXd& alpha_out) {
  const int n = static_cast<int>(e.rows());
  const int u = static_cast<int>(e.cols());
  if (n <= u) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e * e.transpose());
    d_out = es.eigenvectors().col(n - 1);
    alpha_out = e.transpose() * d_out;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.transpose() * e);
    Eigen::VectorXd v = es.eigenvectors().col(u - 1);
    Eigen::VectorXd ev = e * v;
    double sigma = ev.norm();
    if (sigma <= 1e-14) {
      d_out = Eigen::VectorXd::Zero(n);
      d_out[0] = 1.0;
      alpha_out = Eigen::VectorXd::Zero(u);
      return;
    }
    d_out = ev / sigma;
    alpha_out = v * sigma;
  }
  int imax = 0;
  d_out.cwiseAbs().maxCoeff(&imax);
  if (d_out[imax] < 0) {
    d_out = -d_out;
    alpha_out = -alpha_out;
  }
}

}  // namespace detail

/// K-SVD with a monotone coding stage: a patch keeps its previous support
/// (refit by least squares under the updated dictionary) whenever the fresh
/// pursuit would represent it worse, so the recorded objective can only go
/// down. Dead atoms are reseeded from the currently worst-represented patch.
inline KsvdResult train_ksvd(const Eigen::MatrixXd& data, int natoms, int sparsity, int iters,
                             std::uint64_t seed) {
  const int n = static_cast<int>(data.rows());
  const int nsamples = static_cast<int>(data.cols());
  if (natoms < 1 || sparsity < 1 || iters < 1) throw Error("bad K-SVD hyperparameters");
  if (nsamples < natoms) throw Error("need at least as many training patches as atoms");

  Rng rng(seed);
  Eigen::MatrixXd dict(n, natoms);
  {
    std::vector<char> taken(static_cast<std::size_t>(nsamples), 0);
    for (int j = 0; j < natoms; ++j) {
      int pick = -1;
      for (int attempt = 0; attempt < 64; ++attempt) {
        int cand = static_cast<int>(rng.below(static_cast<std::uint64_t>(nsamples)));
        if (!taken[cand] && data.col(cand).norm() > 1e-8) {
          pick = cand;
          break;
        }
      }
      if (pick >= 0) {
        taken[pick] = 1;
        dict.col(j) = data.col(pick) / data.col(pick).norm();
      } else {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = rng.normal();
        dict.col(j) = v / v.norm();
      }
    }
  }

  KsvdResult result;
  result.objective.reserve(static_cast<std::size_t>(iters));
  std::vector<SparseCode> codes(static_cast<std::size_t>(nsamples));
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(natoms, nsamples);

  for (int it = 0; it < iters; ++it) {
    OmpSolver omp(dict);
    double objective = 0.0;
    for (int s = 0; s < nsamples; ++s) {
      SparseCode fresh = omp.code(data.col(s), sparsity, 0.0);
      if (it > 0 && !codes[s].support.empty()) {
        // refit the old support under the updated dictionary
        const auto& sup = codes[s].support;
        const int k = static_cast<int>(sup.size());
        Eigen::MatrixXd ds(n, k);
        for (int i = 0; i < k; ++i) ds.col(i) = dict.col(sup[i]);
        Eigen::VectorXd refit = (ds.transpose() * ds).ldlt().solve(ds.transpose() * data.col(s));
        double old_res = (data.col(s) - ds * refit).norm();
        if (old_res < fresh.residual_norm) {
          fresh.support = sup;
          fresh.coeffs = refit;
          fresh.residual_norm = old_res;
        }
      }
      codes[s] = std::move(fresh);
      objective += codes[s].residual_norm * codes[s].residual_norm;
    }
    result.objective.push_back(objective);

    alpha.setZero();
    for (int s = 0; s < nsamples; ++s)
      for (std::size_t i = 0; i < codes[s].support.size(); ++i)
        alpha(codes[s].support[i], s) = codes[s].coeffs[static_cast<int>(i)];

    Eigen::MatrixXd residual = data - dict * alpha;  // kept in sync per atom update
    std::vector<char> reseeded(static_cast<std::size_t>(nsamples), 0);

    for (int j = 0; j < natoms; ++j) {
      std::vector<int> users;
      for (int s = 0; s < nsamples; ++s)
        if (alpha(j, s) != 0.0) users.push_back(s);

      if (users.empty()) {
        // replace the dead atom with the worst-represented patch
        int worst = -1;
        double worst_res = -1.0;
        for (int s = 0; s < nsamples; ++s) {
          if (reseeded[s]) continue;
          double r = residual.col(s).squaredNorm();
          if (r > worst_res + 1e-15) {
            worst_res = r;
            worst = s;
          }
        }
        if (worst >= 0 && data.col(worst).norm() > 1e-8) {
          dict.col(j) = data.col(worst) / data.col(worst).norm();
          reseeded[worst] = 1;
        }
        continue;
      }

      Eigen::MatrixXd e(n, static_cast<int>(users.size()));
      for (std::size_t i = 0; i < users.size(); ++i)
        e.col(static_cast<int>(i)) =
            residual.col(users[i]) + dict.col(j) * alpha(j, users[i]);

      Eigen::VectorXd d_new, a_new;
      detail::top_singular_pair(e, d_new, a_new);

      for (std::size_t i = 0; i < users.size(); ++i) {
        residual.col(users[i]) = e.col(static_cast<int>(i)) - d_new * a_new[static_cast<int>(i)];
        alpha(j, users[i]) = a_new[static_cast<int>(i)];
      }
      dict.col(j) = d_new;
    }

    // carry the updated coefficients into the next keep-or-refresh comparison
    for (int s = 0; s < nsamples; ++s)
      for (std::size_t i = 0; i < codes[s].support.size(); ++i)
        codes[s].coeffs[static_cast<int>(i)] = alpha(codes[s].support[i], s);
  }

  result.dict.atoms = dict;
  result.dict.sparsity = sparsity;
  result.dict.iters = iters;
  return result;
}

/// Energy-weighted mean spectral position of the atoms: each atom is reshaped
/// to a square patch, transformed by the 2-D orthonormal DCT, and the squared
/// coefficients vote for their frequency index u+v. Lower means smoother.
inline double mean_frequency(const Eigen::MatrixXd& atoms, int patch_size) {
  if (atoms.rows() != patch_size * patch_size) throw Error("atom size is not patch_size^2");
  Dct2d dct(patch_size);
  double total = 0.0;
  for (int m = 0; m < atoms.cols(); ++m) {
    Eigen::VectorXd y = dct.forward(atoms.col(m));
    double mf = 0.0;
    for (int u = 0; u < patch_size; ++u)
      for (int v = 0; v < patch_size; ++v) {
        double c = y[u * patch_size + v];
        mf += static_cast<double>(u + v) * c * c;
      }
    total += mf;
  }
  return total / static_cast<double>(atoms.cols());
}

/// Binary dictionary container: "SJDC", version, n, M, column-major f64
/// atom payload, then the training sparsity and sweep count.
inline void save_dictionary(const std::string& path, const Dictionary& dict) {
  std::vector<std::uint8_t> buf;
  buf.push_back('S');
  buf.push_back('J');
  buf.push_back('D');
  buf.push_back('C');
  put_u32le(buf, 1);
  put_u32le(buf, static_cast<std::uint32_t>(dict.atoms.rows()));
  put_u32le(buf, static_cast<std::uint32_t>(dict.atoms.cols()));
  for (int j = 0; j < dict.atoms.cols(); ++j)
    for (int i = 0; i < dict.atoms.rows(); ++i) put_f64le(buf, dict.atoms(i, j));
  put_u32le(buf, static_cast<std::uint32_t>(dict.sparsity));
  put_u32le(buf, static_cast<std::uint32_t>(dict.iters));

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (written != buf.size()) throw Error("short write to " + path);
}

inline Dictionary load_dictionary(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error("cannot open " + path);
  std::vector<std::uint8_t> buf;
  std::uint8_t chunk[4096];
  std::size_t got;
  while ((got = std::fread(chunk, 1, sizeof chunk, f)) > 0) buf.insert(buf.end(), chunk, chunk + got);
  std::fclose(f);

  if (buf.size() < 4 || buf[0] != 'S' || buf[1] != 'J' || buf[2] != 'D' || buf[3] != 'C')
    throw BadMagic("not a dictionary file: " + path);
  std::size_t pos = 4;
  auto need = [&](std::size_t count) {
    if (pos + count > buf.size()) throw CorruptPayload("dictionary file truncated: " + path);
  };
  need(12);
  std::uint32_t version = get_u32le(buf.data() + pos);
  pos += 4;
  if (version != 1) throw VersionMismatch("dictionary version " + std::to_string(version));
  std::uint32_t n = get_u32le(buf.data() + pos);
  pos += 4;
  std::uint32_t m = get_u32le(buf.data() + pos);
  pos += 4;
  if (n == 0 || m == 0 || n > (1u << 20) || m > (1u << 20) ||
      static_cast<std::uint64_t>(n) * m > (1u << 26))
    throw CorruptPayload("implausible dictionary dimensions");

  Dictionary dict;
  dict.atoms.resize(n, m);
  need(static_cast<std::size_t>(n) * m * 8);
  for (std::uint32_t j = 0; j < m; ++j)
    for (std::uint32_t i = 0; i < n; ++i) {
      dict.atoms(i, j) = get_f64le(buf.data() + pos);
      pos += 8;
    }
  need(8);
  dict.sparsity = static_cast<int>(get_u32le(buf.data() + pos));
  pos += 4;
  dict.iters = static_cast<int>(get_u32le(buf.data() + pos));
  pos += 4;
  if (pos != buf.size()) throw CorruptPayload("trailing bytes in dictionary file");
  if (!dict.atoms.allFinite()) throw CorruptPayload("non-finite atom payload");
  return dict;
}

}  // namespace softjpeg
