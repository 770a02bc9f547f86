#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "softjpeg/sparse_dict.hpp"

using namespace softjpeg;

namespace {

Eigen::MatrixXd random_unit_atoms(int n, int m, Rng& rng) {
  Eigen::MatrixXd d(n, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) d(i, j) = rng.normal();
    d.col(j).normalize();
  }
  return d;
}

Eigen::MatrixXd random_orthonormal(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

// Best residual over all supports of size <= k, by exhaustive least squares.
double best_subset_residual(const Eigen::MatrixXd& d, const Eigen::VectorXd& x, int k) {
  int m = int(d.cols());
  double best = x.norm();
  std::vector<int> pick;
  auto rec = [&](auto&& self, int start, int left) -> void {
    if (!pick.empty()) {
      Eigen::MatrixXd sub(d.rows(), pick.size());
      for (std::size_t j = 0; j < pick.size(); ++j) sub.col(j) = d.col(pick[j]);
      Eigen::VectorXd c = sub.colPivHouseholderQr().solve(x);
      best = std::min(best, (x - sub * c).norm());
    }
    if (left == 0) return;
    for (int j = start; j < m; ++j) {
      pick.push_back(j);
      self(self, j + 1, left - 1);
      pick.pop_back();
    }
  };
  rec(rec, 0, k);
  return best;
}

std::string temp_path(const char* stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

}  // namespace

TEST(Omp, RecoversSparseCodeOverOrthonormalDictionary) {
  Rng rng(101);
  Eigen::MatrixXd d = random_orthonormal(16, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(16);
  truth[3] = 2.0;
  truth[11] = -1.0;
  truth[7] = 0.5;
  Eigen::VectorXd x = d * truth;
  OmpSolver omp(d);
  SparseCode code = omp.code(x, 3, 0.0);
  EXPECT_LT(code.residual_norm, 1e-10);
  Eigen::VectorXd dense = densify(code, 16);
  EXPECT_LT((dense - truth).norm(), 1e-10);
  // greedy order follows correlation magnitude
  EXPECT_EQ(code.support[0], 3);
  EXPECT_EQ(code.support[1], 11);
  EXPECT_EQ(code.support[2], 7);
}

TEST(Omp, ResidualOrthogonalToChosenAtoms) {
  Rng rng(55);
  Eigen::MatrixXd d = random_unit_atoms(12, 30, rng);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::VectorXd x(12);
    for (int i = 0; i < 12; ++i) x[i] = rng.normal();
    OmpSolver omp(d);
    SparseCode code = omp.code(x, 5, 0.0);
    Eigen::VectorXd r = x - d * densify(code, 30);
    EXPECT_NEAR(r.norm(), code.residual_norm, 1e-8);
    for (int j : code.support) EXPECT_LT(std::abs(d.col(j).dot(r)), 1e-8);
  }
}

TEST(Omp, ResidualNonIncreasingInSparsity) {
  Rng rng(77);
  Eigen::MatrixXd d = random_unit_atoms(10, 24, rng);
  Eigen::VectorXd x(10);
  for (int i = 0; i < 10; ++i) x[i] = rng.normal();
  OmpSolver omp(d);
  double prev = x.norm();
  for (int k = 1; k <= 8; ++k) {
    SparseCode code = omp.code(x, k, 0.0);
    EXPECT_LE(code.residual_norm, prev + 1e-12);
    prev = code.residual_norm;
  }
}

TEST(Omp, NeverFarFromExhaustiveSearch) {
  // greedy is not optimal, but on small instances it should stay close and
  // never beat the exhaustive bound (that would indicate a broken oracle)
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd d = random_unit_atoms(8, 12, rng);
    Eigen::VectorXd x(8);
    for (int i = 0; i < 8; ++i) x[i] = rng.normal();
    OmpSolver omp(d);
    SparseCode code = omp.code(x, 2, 0.0);
    double best = best_subset_residual(d, x, 2);
    EXPECT_GE(code.residual_norm, best - 1e-10);
    EXPECT_LE(code.residual_norm, best + x.norm());
  }
}

TEST(Omp, TieBreakPicksLowestIndex) {
  Eigen::MatrixXd d(4, 3);
  d.col(0) << 1, 0, 0, 0;
  d.col(1) << 1, 0, 0, 0;  // exact duplicate of atom 0
  d.col(2) << 0, 1, 0, 0;
  Eigen::VectorXd x(4);
  x << 5, 0, 0, 0;
  OmpSolver omp(d);
  SparseCode code = omp.code(x, 1, 0.0);
  ASSERT_EQ(code.support.size(), 1u);
  EXPECT_EQ(code.support[0], 0);
}

TEST(Omp, StopsOnErrorTarget) {
  Rng rng(13);
  Eigen::MatrixXd d = random_unit_atoms(10, 20, rng);
  Eigen::VectorXd x(10);
  for (int i = 0; i < 10; ++i) x[i] = rng.normal();
  OmpSolver omp(d);
  SparseCode loose = omp.code(x, 10, 1e9);
  EXPECT_TRUE(loose.support.empty());
  SparseCode mid = omp.code(x, 10, 0.5 * x.norm());
  EXPECT_LE(mid.residual_norm, 0.5 * x.norm() + 1e-12);
  SparseCode tight = omp.code(x, 10, 0.0);
  EXPECT_LE(tight.support.size(), 10u);
}

TEST(Ksvd, ObjectiveMonotoneAndAtomsUnitNorm) {
  Rng rng(31);
  Eigen::MatrixXd truth = random_unit_atoms(16, 24, rng);
  Eigen::MatrixXd data(16, 300);
  for (int c = 0; c < 300; ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(16);
    for (int k = 0; k < 3; ++k) v += rng.normal() * truth.col(int(rng.below(24)));
    data.col(c) = v;
  }
  KsvdResult res = train_ksvd(data, 24, 3, 12, 99);
  ASSERT_EQ(res.objective.size(), 12u);
  for (std::size_t i = 1; i < res.objective.size(); ++i)
    EXPECT_LE(res.objective[i], res.objective[i - 1] + 1e-9);
  for (int j = 0; j < res.dict.atoms.cols(); ++j)
    EXPECT_NEAR(res.dict.atoms.col(j).norm(), 1.0, 1e-9);
  EXPECT_EQ(res.dict.sparsity, 3);
  EXPECT_EQ(res.dict.iters, 12);
}

TEST(Ksvd, RecoversPlantedAtoms) {
  Rng rng(2718);
  Eigen::MatrixXd truth = random_unit_atoms(16, 32, rng);
  Eigen::MatrixXd data(16, 600);
  for (int c = 0; c < 600; ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(16);
    // distinct atoms per sample
    int a = int(rng.below(32)), b = a;
    while (b == a) b = int(rng.below(32));
    v += (1.0 + rng.uniform()) * (rng.below(2) ? 1 : -1) * truth.col(a);
    v += (1.0 + rng.uniform()) * (rng.below(2) ? 1 : -1) * truth.col(b);
    data.col(c) = v;
  }
  KsvdResult res = train_ksvd(data, 32, 2, 30, 4242);
  int hits = 0;
  for (int t = 0; t < 32; ++t) {
    double best = 0;
    for (int j = 0; j < 32; ++j)
      best = std::max(best, std::abs(truth.col(t).dot(res.dict.atoms.col(j))));
    if (best >= 0.99) ++hits;
  }
  EXPECT_GE(hits, 26);  // >= 80% of 32
}

TEST(Ksvd, DeterministicForFixedSeed) {
  Rng rng(5);
  Eigen::MatrixXd data(9, 120);
  for (int c = 0; c < 120; ++c)
    for (int i = 0; i < 9; ++i) data(i, c) = rng.normal();
  KsvdResult a = train_ksvd(data, 12, 2, 5, 777);
  KsvdResult b = train_ksvd(data, 12, 2, 5, 777);
  EXPECT_EQ((a.dict.atoms - b.dict.atoms).cwiseAbs().maxCoeff(), 0.0);
  KsvdResult c = train_ksvd(data, 12, 2, 5, 778);
  EXPECT_GT((a.dict.atoms - c.dict.atoms).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MeanFrequency, KnownAtomsAndMixture) {
  int p = 8;
  Eigen::MatrixXd basis = dct_basis(p);  // rows are 1-D DCT vectors
  // separable 2-D basis atom at (u, v): outer product flattened row-major
  auto atom2d = [&](int u, int v) {
    Eigen::VectorXd a(p * p);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c) a[r * p + c] = basis(u, r) * basis(v, c);
    return a;
  };
  Eigen::MatrixXd dc(p * p, 1);
  dc.col(0) = atom2d(0, 0);
  EXPECT_NEAR(mean_frequency(dc, p), 0.0, 1e-12);
  Eigen::MatrixXd hi(p * p, 1);
  hi.col(0) = atom2d(p - 1, p - 1);
  EXPECT_NEAR(mean_frequency(hi, p), 2.0 * (p - 1), 1e-9);
  Eigen::MatrixXd both(p * p, 2);
  both.col(0) = dc.col(0);
  both.col(1) = hi.col(0);
  EXPECT_NEAR(mean_frequency(both, p), (p - 1), 1e-9);
  // energy-weighted: equal mix of (0,0) and (7,7) inside one atom
  Eigen::MatrixXd mix(p * p, 1);
  mix.col(0) = (atom2d(0, 0) + atom2d(p - 1, p - 1)) / std::sqrt(2.0);
  EXPECT_NEAR(mean_frequency(mix, p), (p - 1), 1e-9);
}

TEST(DictionaryIo, RoundTripIsExact) {
  Rng rng(808);
  Dictionary d;
  d.atoms = random_unit_atoms(100, 37, rng);
  d.sparsity = 8;
  d.iters = 30;
  std::string path = temp_path("sjdc_roundtrip.sjdc");
  save_dictionary(path, d);
  Dictionary back = load_dictionary(path);
  EXPECT_EQ(back.sparsity, 8);
  EXPECT_EQ(back.iters, 30);
  ASSERT_EQ(back.atoms.rows(), 100);
  ASSERT_EQ(back.atoms.cols(), 37);
  EXPECT_EQ((back.atoms - d.atoms).cwiseAbs().maxCoeff(), 0.0);
  std::filesystem::remove(path);
}

TEST(DictionaryIo, TypedErrors) {
  Rng rng(809);
  Dictionary d;
  d.atoms = random_unit_atoms(9, 4, rng);
  d.sparsity = 2;
  d.iters = 1;
  std::string path = temp_path("sjdc_errors.sjdc");
  save_dictionary(path, d);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto rewrite = [&](std::string s) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(s.data(), std::streamsize(s.size()));
  };

  rewrite("XJDC" + bytes.substr(4));
  EXPECT_THROW(load_dictionary(path), BadMagic);

  std::string v = bytes;
  v[4] = 9;  // version little-endian low byte
  rewrite(v);
  EXPECT_THROW(load_dictionary(path), VersionMismatch);

  rewrite(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_dictionary(path), CorruptPayload);

  rewrite(bytes + std::string(3, '\0'));
  EXPECT_THROW(load_dictionary(path), CorruptPayload);

  std::string dims = bytes;
  dims[8] = char(0xff);
  dims[9] = char(0xff);
  dims[10] = char(0xff);
  dims[11] = char(0x7f);  // ludicrous atom length
  rewrite(dims);
  EXPECT_THROW(load_dictionary(path), CorruptPayload);

  std::string nan = bytes;
  for (int i = 0; i < 8; ++i) nan[16 + i] = char(0xff);  // first payload double -> NaN
  rewrite(nan);
  EXPECT_THROW(load_dictionary(path), CorruptPayload);

  EXPECT_THROW(load_dictionary(temp_path("definitely_missing.sjdc")), Error);
  std::filesystem::remove(path);
}
