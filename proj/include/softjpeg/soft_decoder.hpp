#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <vector>

#include "softjpeg/graph_prior.hpp"
#include "softjpeg/jpeg_codec.hpp"
#include "softjpeg/laplacian_prior.hpp"
#include "softjpeg/metrics.hpp"
#include "softjpeg/patching.hpp"
#include "softjpeg/sparse_dict.hpp"
#include "softjpeg/threading.hpp"

namespace softjpeg {

struct DictMismatch : Error {
  using Error::Error;
};
struct QpDivergence : Error {
  using Error::Error;
};

struct QpConfig {
  int max_iters = 200;
  double tolerance = 1e-6;  // gradient-map norm
  double step_scale = 1.0;  // multiplies the safe Lipschitz step; > 2 can diverge
};

// lambda2_base, sigma1, sigma2 and omp_max_atoms carry calibrated values; see
// the bench sweeps. sigma1/sigma2 = 0 fall back to the adaptive per-patch rule
// and the patch size, omp_max_atoms = 0 to the dictionary's training sparsity.
struct SolverConfig {
  double lambda1 = 0.001;
  double lambda2_base = 0.3;
  double lambda2_boost = 0.05;
  int max_outer_iters = 8;
  QpConfig qp;
  double sigma1 = 22.0;
  double sigma2 = 5.0;
  int patch_size = 10;
  int omp_max_atoms = 16;
  RegularizerKind kind = RegularizerKind::lerag;
  int threads = 0;  // 0: hardware count; never affects the result
};

/// Quantization-bin box for one block's 64 coefficients in natural order:
/// lo = (q - 1/2) Q and hi = (q + 1/2) Q - eps, so clamping lands strictly
/// inside the half-open encoder bin.
struct CoeffBins {
  std::array<double, 64> lo{};
  std::array<double, 64> hi{};
};

inline CoeffBins coeff_bins(const QIndexBlock& blk, const QuantTable& table) {
  CoeffBins bins;
  for (int i = 0; i < 64; ++i) {
    double q = blk[i];
    double step = table.at_natural(i);
    bins.lo[i] = (q - 0.5) * step;
    bins.hi[i] = (q + 0.5) * step - 1e-9 * step;
  }
  return bins;
}

/// lambda2 grows with the transmitted high-frequency energy of the block:
/// lambda2_base * (1 + lambda2_boost * sum of |q_i| at zig-zag positions >= 32).
inline double lambda2_effective(const QIndexBlock& blk, double base, double boost) {
  const auto& zz = zigzag_order();
  double hf = 0.0;
  for (int k = 32; k < 64; ++k) hf += std::abs(double(blk[zz[k]]));
  return base * (1.0 + boost * hf);
}

/// Euclidean projection onto {x : enclosed-block DCT coefficients in bins}.
/// Exact because the DCT is orthonormal on the block coordinates and the
/// remaining pixels are unconstrained.
inline void project_bins(Eigen::VectorXd& x, const CoeffBins& bins,
                         const std::array<int, 64>& block_idx) {
  double pix[64], coef[64];
  for (int i = 0; i < 64; ++i) pix[i] = x[block_idx[i]];
  Dct8x8::instance().forward64(pix, coef);
  for (int i = 0; i < 64; ++i) coef[i] = std::clamp(coef[i], bins.lo[i], bins.hi[i]);
  Dct8x8::instance().inverse64(coef, pix);
  for (int i = 0; i < 64; ++i) x[block_idx[i]] = pix[i];
}

inline bool bins_satisfied(const Eigen::VectorXd& x, const CoeffBins& bins,
                           const std::array<int, 64>& block_idx, double tol) {
  double pix[64], coef[64];
  for (int i = 0; i < 64; ++i) pix[i] = x[block_idx[i]];
  Dct8x8::instance().forward64(pix, coef);
  for (int i = 0; i < 64; ++i)
    if (coef[i] < bins.lo[i] - tol || coef[i] > bins.hi[i] + tol) return false;
  return true;
}

struct QpResult {
  Eigen::VectorXd x;
  int iters = 0;
};

/// Projected gradient descent on f(x) = ||x - t||^2 + c x'Gx over a convex
/// set given by its Euclidean projector, with the step bounded through
/// Gershgorin's estimate of ||G||_2 so plain descent is monotone. Five
/// consecutive objective increases abort with QpDivergence (only reachable
/// when step_scale overrides the bound).
template <typename Project>
QpResult qp_minimize(const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                     const Eigen::MatrixXd& G, double c, Project&& project,
                     const QpConfig& cfg) {
  double gersh = 0.0;
  for (int i = 0; i < G.rows(); ++i) gersh = std::max(gersh, G.row(i).cwiseAbs().sum());
  const double step = cfg.step_scale / (2.0 * (1.0 + c * gersh));

  auto objective = [&](const Eigen::VectorXd& x) {
    return (x - target).squaredNorm() + c * x.dot(G * x);
  };

  QpResult res;
  res.x = x0;
  project(res.x);
  double prev_obj = objective(res.x);
  int rising = 0;

  for (res.iters = 1; res.iters <= cfg.max_iters; ++res.iters) {
    Eigen::VectorXd grad = 2.0 * (res.x - target) + 2.0 * c * (G * res.x);
    Eigen::VectorXd next = res.x - step * grad;
    project(next);
    double move = (next - res.x).norm();
    res.x = next;

    double obj = objective(res.x);
    // rounding of the projection's DCT pair can wiggle the objective at the
    // 1e-15 level near the fixed point; only count genuine growth
    if (obj > prev_obj + 1e-9 * std::max(1.0, std::abs(prev_obj))) {
      if (++rising >= 5) throw QpDivergence("objective rose for 5 consecutive steps");
    } else {
      rising = 0;
    }
    prev_obj = obj;

    if (move / step < cfg.tolerance) break;
  }
  return res;
}

inline QpResult qp_step(const Eigen::VectorXd& x0, const Eigen::VectorXd& target,
                        const Eigen::MatrixXd& G, double c, const CoeffBins& bins,
                        const std::array<int, 64>& block_idx, const QpConfig& cfg) {
  return qp_minimize(
      x0, target, G, c, [&](Eigen::VectorXd& x) { project_bins(x, bins, block_idx); }, cfg);
}

struct SolverReport {
  std::vector<double> mean_objective;  // per outer iteration, after the QP pass
  std::vector<double> psnr_vs_hard;    // assembled estimate vs hard decode
  std::vector<int> qp_iters;           // per patch, summed over outer iterations
  int outer_iters = 0;
  int fallback_patches = 0;  // QP divergence fallbacks to the MMSE initialization
  double wall_time_ms = 0.0;
};

struct SolverOutcome {
  RasterU8 image;
  SolverReport report;
  // per patch, per outer iteration: objective before coding, after coding,
  // after the QP step — the monotonicity witness for each epoch
  std::vector<std::vector<std::array<double, 3>>> objective_traces;
};

inline SolverOutcome soft_decode(const QuantizedImage& qimg, const Dictionary& dict,
                                 const SolverConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const int p = cfg.patch_size;
  const int n = p * p;
  if (dict.atoms.rows() != n)
    throw DictMismatch("dictionary atoms sized for a different patch");
  if (cfg.lambda1 < 0 || cfg.lambda2_base < 0 || cfg.lambda2_boost < 0 ||
      cfg.max_outer_iters < 1)
    throw Error("bad solver configuration");

  LaplacianModel model = fit_laplacian(qimg);
  RasterF64 init_field = mmse_field(qimg, model);
  RasterU8 hard = hard_decode(qimg);

  PatchLayout layout(qimg.blocks_x * 8, qimg.blocks_y * 8, p);
  const int npatches = layout.count();
  std::vector<Eigen::VectorXd> patches = layout.extract(init_field);
  const std::vector<Eigen::VectorXd> init_patches = patches;

  std::vector<CoeffBins> bins(static_cast<std::size_t>(npatches));
  std::vector<std::array<int, 64>> block_idx(static_cast<std::size_t>(npatches));
  std::vector<double> lambda2(static_cast<std::size_t>(npatches));
  for (int by = 0; by < layout.blocks_y(); ++by)
    for (int bx = 0; bx < layout.blocks_x(); ++bx) {
      int i = by * layout.blocks_x() + bx;
      bins[i] = coeff_bins(qimg.block(bx, by), qimg.luma_qtable);
      block_idx[i] = layout.block_indices(bx, by);
      lambda2[i] = lambda2_effective(qimg.block(bx, by), cfg.lambda2_base, cfg.lambda2_boost);
    }

  OmpSolver omp(dict.atoms);
  const double omp_eps = std::sqrt(cfg.lambda1 * n);
  const int sparsity =
      cfg.omp_max_atoms > 0 ? cfg.omp_max_atoms : std::max(dict.sparsity, 1);
  const double sigma2 = cfg.sigma2 > 0 ? cfg.sigma2 : double(p);

  SolverOutcome out;
  out.objective_traces.assign(static_cast<std::size_t>(npatches), {});
  out.report.qp_iters.assign(static_cast<std::size_t>(npatches), 0);

  std::vector<SparseCode> codes(static_cast<std::size_t>(npatches));
  std::vector<char> frozen(static_cast<std::size_t>(npatches), 0);
  std::vector<double> rel_change(static_cast<std::size_t>(npatches), 0.0);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    const std::vector<Eigen::VectorXd> epoch_start = patches;
    parallel_for(npatches, cfg.threads, [&](int i) {
      if (frozen[i]) {
        rel_change[i] = 0.0;
        return;
      }
      Eigen::VectorXd& x = patches[static_cast<std::size_t>(i)];
      const double mean = x.mean();
      const Eigen::VectorXd xm = x - mean * ones;

      const double s1 = cfg.sigma1 > 0 ? cfg.sigma1 : default_sigma1(x);
      PatchGraph graph = build_graph(x, p, s1, sigma2);
      auto [G, scale] = regularizer_matrix(graph, cfg.kind);
      const double c = lambda2[static_cast<std::size_t>(i)] * scale;

      auto sparse_term = [&](const SparseCode& code) {
        Eigen::VectorXd r = xm;
        for (std::size_t k = 0; k < code.support.size(); ++k)
          r -= dict.atoms.col(code.support[k]) * code.coeffs[static_cast<int>(k)];
        return r.squaredNorm() + cfg.lambda1 * double(code.support.size());
      };
      auto smooth_term = [&](const Eigen::VectorXd& v) { return c * v.dot(G * v); };

      const SparseCode& prev = codes[static_cast<std::size_t>(i)];
      double obj_pre = sparse_term(prev) + smooth_term(x);

      // sparse-coding step; never worse than refitting the previous support
      SparseCode code = omp.code(xm, sparsity, omp_eps);
      if (!prev.support.empty()) {
        const int k = static_cast<int>(prev.support.size());
        Eigen::MatrixXd ds(n, k);
        for (int j = 0; j < k; ++j) ds.col(j) = dict.atoms.col(prev.support[j]);
        Eigen::VectorXd refit = (ds.transpose() * ds).ldlt().solve(ds.transpose() * xm);
        SparseCode kept;
        kept.support = prev.support;
        kept.coeffs = refit;
        kept.residual_norm = (xm - ds * refit).norm();
        if (sparse_term(kept) < sparse_term(code)) code = std::move(kept);
      }
      double obj_code = sparse_term(code) + smooth_term(x);

      // box-constrained quadratic step toward the sparse approximation
      Eigen::VectorXd target = mean * ones;
      for (std::size_t k = 0; k < code.support.size(); ++k)
        target += dict.atoms.col(code.support[k]) * code.coeffs[static_cast<int>(k)];

      double obj_qp;
      try {
        QpResult qp = qp_step(x, target, G, c, bins[static_cast<std::size_t>(i)],
                              block_idx[static_cast<std::size_t>(i)], cfg.qp);
        out.report.qp_iters[static_cast<std::size_t>(i)] += qp.iters;
        // the objective uses the residual against the regenerated target
        Eigen::VectorXd r = qp.x - target;
        obj_qp = r.squaredNorm() + cfg.lambda1 * double(code.support.size()) +
                 smooth_term(qp.x);
        x = qp.x;
        codes[static_cast<std::size_t>(i)] = std::move(code);
      } catch (const QpDivergence&) {
        x = init_patches[static_cast<std::size_t>(i)];
        frozen[i] = 1;
        codes[static_cast<std::size_t>(i)] = SparseCode{};
        obj_qp = obj_code;  // trace ends flat for the falling-back patch
      }
      out.objective_traces[static_cast<std::size_t>(i)].push_back({obj_pre, obj_code, obj_qp});
    });

    out.report.outer_iters = outer + 1;

    double mean_obj = 0.0;
    for (int i = 0; i < npatches; ++i)
      mean_obj += out.objective_traces[static_cast<std::size_t>(i)].empty()
                      ? 0.0
                      : out.objective_traces[static_cast<std::size_t>(i)].back()[2];
    out.report.mean_objective.push_back(mean_obj / npatches);

    // consensus merge: overlapping estimates are averaged and patches re-read
    // from the merged field, so neighbours exchange their overlap pixels once
    // per epoch. Averaging can push a block out of its bins, so each re-read
    // patch is projected back before the next epoch starts — the next QP then
    // descends from a feasible point. Frozen patches keep their initialization.
    RasterF64 merged = layout.assemble(patches);
    patches = layout.extract(merged);
    for (int i = 0; i < npatches; ++i) {
      if (frozen[i]) {
        patches[static_cast<std::size_t>(i)] = init_patches[static_cast<std::size_t>(i)];
        rel_change[i] = 0.0;
      } else {
        project_bins(patches[static_cast<std::size_t>(i)], bins[static_cast<std::size_t>(i)],
                     block_idx[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd& before = epoch_start[static_cast<std::size_t>(i)];
        rel_change[i] = (patches[static_cast<std::size_t>(i)] - before).norm() /
                        std::max(before.norm(), 1e-12);
      }
    }

    out.report.psnr_vs_hard.push_back(
        psnr(hard, finalize_raster(merged, qimg.width, qimg.height)));

    double worst = 0.0;
    for (int i = 0; i < npatches; ++i) worst = std::max(worst, rel_change[i]);
    if (worst < 1e-4) break;
  }

  for (int i = 0; i < npatches; ++i)
    if (frozen[i]) ++out.report.fallback_patches;

  out.image = finalize_raster(layout.assemble(patches), qimg.width, qimg.height);
  out.report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
          .count();
  return out;
}

}  // namespace softjpeg
