#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"
#include "podlim/lti.hpp"

namespace podlim::modal {

/// Right eigenvectors U, left eigenvectors V with V^H U = I.
///
/// Conjugate pairs are adjacent with the positive-imaginary member first. A defective
/// cluster at the origin (undamped angle reference plus average speed) is stored as one
/// block spanned by an orthonormal basis of null(A^k).
struct ModalDecomposition {
  std::vector<cplx> lambdas;
  CMat U, V;
  std::vector<bool> rotated;
  struct Block {
    Eigen::Index start, size;
  };
  std::vector<Block> defective_blocks;

  Eigen::Index size() const { return static_cast<Eigen::Index>(lambdas.size()); }

  bool in_defective_block(Eigen::Index i) const {
    return std::any_of(defective_blocks.begin(), defective_blocks.end(),
                       [&](const Block& b) { return i >= b.start && i < b.start + b.size; });
  }

  /// Index of the conjugate partner of mode i, or -1 for real modes.
  Eigen::Index partner(Eigen::Index i) const {
    const cplx l = lambdas[static_cast<std::size_t>(i)];
    if (l.imag() == 0.0 || in_defective_block(i)) return -1;
    return l.imag() > 0.0 ? i + 1 : i - 1;
  }
};

struct RealJordanTransform {
  Mat Vr, Ur;
  struct Block {
    Eigen::Index start, size;
  };
  std::vector<Block> block_structure;
};

struct ModeShape {
  Eigen::Index mode_index = 0;
  std::vector<std::string> machine_labels;
  std::vector<cplx> components;
};

inline constexpr double kMaxEigvecCondition = 1e8;

inline double condition_number(const CMat& M) {
  Eigen::JacobiSVD<CMat> svd(M);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

inline ModalDecomposition decompose(const Mat& A) {
  if (A.rows() != A.cols()) throw DimensionError("decompose: A must be square");
  const Eigen::Index n = A.rows();
  Eigen::EigenSolver<Mat> es(A, true);
  if (es.info() != Eigen::Success) throw NumericError("decompose: eigenvalue iteration did not converge");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const cplx x = ev(a), y = ev(b);
    if (x.real() != y.real()) return x.real() < y.real();
    if (std::abs(x.imag()) != std::abs(y.imag())) return std::abs(x.imag()) < std::abs(y.imag());
    return x.imag() > y.imag();
  });

  ModalDecomposition md;
  md.U.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    md.lambdas.push_back(ev(order[static_cast<std::size_t>(k)]));
    CVec u = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    md.U.col(k) = u / u.norm();
  }

  if (condition_number(md.U) > kMaxEigvecCondition) {
    // Replace the eigenvectors of a defective cluster at the origin by a basis of null(A^k).
    const double tol = 1e-6 * std::max(1.0, A.norm());
    std::vector<Eigen::Index> zero_idx;
    for (Eigen::Index k = 0; k < n; ++k)
      if (std::abs(md.lambdas[static_cast<std::size_t>(k)]) < tol) zero_idx.push_back(k);
    const Eigen::Index kz = static_cast<Eigen::Index>(zero_idx.size());
    if (kz >= 2) {
      Mat Ak = Mat::Identity(n, n);
      for (Eigen::Index p = 0; p < kz; ++p) Ak = Ak * A;
      Eigen::JacobiSVD<Mat> svd(Ak, Eigen::ComputeFullV);
      const Mat Q = svd.matrixV().rightCols(kz);
      // The cluster is contiguous in the (re, |im|) order only if nothing sits between; move it.
      std::vector<cplx> lam;
      CMat U(n, n);
      Eigen::Index c = 0;
      bool placed = false;
      for (Eigen::Index k = 0; k < n; ++k) {
        const bool in_cluster = std::find(zero_idx.begin(), zero_idx.end(), k) != zero_idx.end();
        if (in_cluster) {
          if (!placed) {
            md.defective_blocks.push_back({c, kz});
            for (Eigen::Index p = 0; p < kz; ++p, ++c) {
              lam.emplace_back(0.0, 0.0);
              U.col(c) = Q.col(p).cast<cplx>();
            }
            placed = true;
          }
          continue;
        }
        lam.push_back(md.lambdas[static_cast<std::size_t>(k)]);
        U.col(c++) = md.U.col(k);
      }
      md.lambdas = std::move(lam);
      md.U = std::move(U);
    }
    const double cond = condition_number(md.U);
    if (cond > kMaxEigvecCondition)
      throw NumericError("decompose: eigenvector matrix is ill-conditioned (cond ~ " + std::to_string(cond) +
                         "); A is defective or nearly so");
  }
  md.V = md.U.inverse().adjoint();
  md.rotated.assign(static_cast<std::size_t>(n), false);
  return md;
}

/// Real block-diagonalizing transform: Vr^T A Ur has [[s, w], [-w, s]] blocks for pairs.
inline RealJordanTransform real_jordan(const ModalDecomposition& md) {
  const Eigen::Index n = md.size();
  RealJordanTransform rj;
  rj.Vr.resize(n, n);
  rj.Ur.resize(n, n);
  Eigen::Index i = 0;
  while (i < n) {
    auto defective = std::find_if(md.defective_blocks.begin(), md.defective_blocks.end(),
                                  [&](const auto& b) { return b.start == i; });
    if (defective != md.defective_blocks.end()) {
      for (Eigen::Index k = i; k < i + defective->size; ++k) {
        rj.Vr.col(k) = md.V.col(k).real();
        rj.Ur.col(k) = md.U.col(k).real();
      }
      rj.block_structure.push_back({i, defective->size});
      i += defective->size;
      continue;
    }
    if (md.partner(i) == i + 1) {
      rj.Vr.col(i) = md.V.col(i).real();
      rj.Vr.col(i + 1) = md.V.col(i).imag();
      rj.Ur.col(i) = 2.0 * md.U.col(i).real();
      rj.Ur.col(i + 1) = 2.0 * md.U.col(i).imag();
      rj.block_structure.push_back({i, 2});
      i += 2;
      continue;
    }
    // Real mode: remove any common phase so both vectors are real.
    Eigen::Index piv;
    md.U.col(i).cwiseAbs().maxCoeff(&piv);
    const cplx rot = std::conj(md.U(piv, i)) / std::abs(md.U(piv, i));
    rj.Ur.col(i) = (md.U.col(i) * rot).real();
    rj.Vr.col(i) = (md.V.col(i) * rot).real();
    rj.block_structure.push_back({i, 1});
    ++i;
  }
  return rj;
}

/// Rotate mode i (and its partner) so the speed entries of v_i lie on the real axis.
///
/// The phase makes sum_k v_k^2 over the speed entries real-positive; the sign then makes
/// the first significant speed entry positive. The plain sum vanishes for modes where
/// machines swing against each other, the sum of squares does not.
inline ModalDecomposition rotate_mode(ModalDecomposition md, Eigen::Index i,
                                      const std::vector<Eigen::Index>& speed_idx) {
  if (speed_idx.empty()) throw ValueError("rotate_mode: no speed state indices");
  if (i < 0 || i >= md.size()) throw DimensionError("rotate_mode: mode index out of range");
  const Eigen::Index j = md.partner(i);
  if (j < 0) throw ValueError("rotate_mode: mode " + std::to_string(i) + " is not a member of a complex pair");
  cplx sq = 0.0;
  double vmax = 0.0;
  for (Eigen::Index k : speed_idx) {
    sq += md.V(k, i) * md.V(k, i);
    vmax = std::max(vmax, std::abs(md.V(k, i)));
  }
  if (std::abs(sq) <= 1e-12 * std::max(vmax * vmax, 1e-300))
    throw NumericError("rotate_mode: degenerate rotation (speed entries in quadrature)");
  cplx ph = std::polar(1.0, -0.5 * std::arg(sq));
  for (Eigen::Index k : speed_idx) {
    const cplx e = md.V(k, i) * ph;
    if (std::abs(e) > 1e-3 * vmax) {
      if (e.real() < 0.0) ph = -ph;
      break;
    }
  }
  md.V.col(i) *= ph;
  md.U.col(i) *= ph;
  md.V.col(j) *= std::conj(ph);
  md.U.col(j) *= std::conj(ph);
  md.rotated[static_cast<std::size_t>(i)] = true;
  md.rotated[static_cast<std::size_t>(j)] = true;
  return md;
}

/// Eigenvalue sensitivity -C_out u_i v_i^H B_in.
inline cplx residue(const StateSpace& sys, const ModalDecomposition& md, Eigen::Index i, Eigen::Index in_idx,
                    Eigen::Index out_idx) {
  StateSpace::check_index(in_idx, sys.m(), "input");
  StateSpace::check_index(out_idx, sys.p(), "output");
  if (i < 0 || i >= md.size()) throw DimensionError("residue: mode index out of range");
  const cplx cu = (sys.C.row(out_idx).cast<cplx>() * md.U.col(i))(0);
  const cplx vb = (md.V.col(i).adjoint() * sys.B.col(in_idx).cast<cplx>())(0);
  return -cu * vb;
}

/// C_z = (Re v_i)^T of a rotated mode.
inline Eigen::RowVectorXd performance_vector(const ModalDecomposition& md, Eigen::Index i) {
  if (i < 0 || i >= md.size()) throw DimensionError("performance_vector: mode index out of range");
  if (!md.rotated[static_cast<std::size_t>(i)])
    throw ContractError("performance_vector: mode must be rotated with rotate_mode first");
  return md.V.col(i).real().transpose();
}

inline double damping_ratio(cplx lambda) {
  if (lambda == cplx(0.0, 0.0)) throw ValueError("damping_ratio: undefined for lambda = 0");
  return -lambda.real() / std::abs(lambda);
}

/// Speed entries of the left eigenvector of mode i, scaled so the largest has magnitude 1.
inline ModeShape mode_shape(const ModalDecomposition& md, Eigen::Index i, const std::vector<Eigen::Index>& speed_idx,
                            std::vector<std::string> labels) {
  if (labels.size() != speed_idx.size()) throw DimensionError("mode_shape: one label per speed state");
  ModeShape ms;
  ms.mode_index = i;
  ms.machine_labels = std::move(labels);
  double mx = 0.0;
  for (Eigen::Index k : speed_idx) mx = std::max(mx, std::abs(md.V(k, i)));
  if (mx == 0.0) throw NumericError("mode_shape: mode has zero speed participation");
  for (Eigen::Index k : speed_idx) ms.components.push_back(md.V(k, i) / mx);
  return ms;
}

/// Index of the least damped oscillatory mode (positive-imaginary member) with |lambda| in [wmin, wmax].
inline Eigen::Index find_mode(const ModalDecomposition& md, double wmin, double wmax) {
  Eigen::Index best = -1;
  double best_z = 0.0;
  for (Eigen::Index k = 0; k < md.size(); ++k) {
    const cplx l = md.lambdas[static_cast<std::size_t>(k)];
    if (!(l.imag() > 0.0) || md.in_defective_block(k)) continue;
    if (l.imag() < wmin || l.imag() > wmax) continue;
    const double z = damping_ratio(l);
    if (best < 0 || z < best_z) {
      best = k;
      best_z = z;
    }
  }
  if (best < 0) throw ValueError("find_mode: no oscillatory mode in the requested band");
  return best;
}

}  // namespace podlim::modal
