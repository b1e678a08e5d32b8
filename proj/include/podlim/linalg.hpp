#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"
#include "podlim/state_space.hpp"

namespace podlim {

/// Solve A X + X A^T + Q = 0 (Bartels-Stewart on the complex Schur form).
///
/// Requires lambda_i(A) + conj(lambda_j(A)) != 0 for all i, j.
inline Mat lyap(const Mat& A, const Mat& Q) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n) throw DimensionError("lyap: shape mismatch");
  if (n == 0) return Mat(0, 0);
  Eigen::ComplexSchur<CMat> schur(A.cast<cplx>());
  if (schur.info() != Eigen::Success) throw NumericError("lyap: Schur decomposition failed");
  const CMat& T = schur.matrixT();
  const CMat& Z = schur.matrixU();
  const CMat Qt = Z.adjoint() * Q.cast<cplx>() * Z;
  CMat P = CMat::Zero(n, n);
  const double scale = std::max(1.0, A.norm());
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      cplx acc = -Qt(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) acc -= T(i, k) * P(k, j);
      for (Eigen::Index k = j + 1; k < n; ++k) acc -= P(i, k) * std::conj(T(j, k));
      const cplx den = T(i, i) + std::conj(T(j, j));
      if (std::abs(den) < 1e-14 * scale)
        throw SingularityError("lyap: A and -A^T share an eigenvalue; no unique solution");
      P(i, j) = acc / den;
    }
  }
  Mat X = (Z * P * Z.adjoint()).real();
  return 0.5 * (X + X.transpose());
}

/// Residual of A^T X + X A - (X B + S) R^-1 (B^T X + S^T) + Q.
inline Mat care_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S,
                         const Mat& X) {
  const Mat XBS = X * B + S;
  return A.transpose() * X + X * A - XBS * R.ldlt().solve(XBS.transpose()) + Q;
}

namespace detail {

/// Matrix sign function by the determinant-scaled Newton iteration.
inline Mat matrix_sign(Mat Z) {
  const Eigen::Index n = Z.rows();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Mat> lu(Z);
    double logdet = 0.0;
    const Mat& LU = lu.matrixLU();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = std::abs(LU(i, i));
      if (!(d > 0.0) || !std::isfinite(d))
        throw NumericError("matrix sign iteration hit a singular iterate (imaginary-axis eigenvalue)");
      logdet += std::log(d);
    }
    const double c = std::exp(logdet / static_cast<double>(n));
    const Mat Zn = 0.5 * (Z / c + c * lu.inverse());
    const double delta = (Zn - Z).norm();
    Z = Zn;
    if (!Z.allFinite()) throw NumericError("matrix sign iteration diverged");
    if (delta <= 1e-13 * Z.norm()) return Z;
    // Stagnation at roundoff level on ill-conditioned problems; the caller polishes.
    if (delta <= 1e-8 * Z.norm() && delta >= prev) return Z;
    prev = delta;
  }
  throw NumericError("matrix sign iteration did not converge in 100 steps "
                     "(Hamiltonian has eigenvalues near the imaginary axis)");
}

}  // namespace detail

/// Stabilizing solution of A^T X + X A - (X B + S) R^-1 (B^T X + S^T) + Q = 0.
///
/// Sign-function solve of the Hamiltonian followed by Newton-Kleinman polishing.
inline Mat care(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, Mat S = Mat()) {
  const Eigen::Index n = A.rows();
  if (S.size() == 0) S = Mat::Zero(n, B.cols());
  if (B.rows() != n || Q.rows() != n || R.rows() != B.cols() || S.rows() != n || S.cols() != B.cols())
    throw DimensionError("care: shape mismatch");
  Eigen::LDLT<Mat> Rf(R);
  if (Rf.info() != Eigen::Success || !(Rf.vectorD().array() > 0.0).all())
    throw ValueError("care: R must be symmetric positive definite");
  const Mat At = A - B * Rf.solve(S.transpose());
  const Mat G = B * Rf.solve(B.transpose());
  const Mat Qt = Q - S * Rf.solve(S.transpose());

  Mat H(2 * n, 2 * n);
  H << At, -G, -Qt, -At.transpose();
  const Mat W = detail::matrix_sign(H);
  Mat lhs(2 * n, n), rhs(2 * n, n);
  lhs << W.topRightCorner(n, n), W.bottomRightCorner(n, n) + Mat::Identity(n, n);
  rhs << W.topLeftCorner(n, n) + Mat::Identity(n, n), W.bottomLeftCorner(n, n);
  Mat X = lhs.colPivHouseholderQr().solve(-rhs);
  X = 0.5 * (X + X.transpose());

  auto res_norm = [&](const Mat& Xc) { return care_residual(A, B, Q, R, S, Xc).norm(); };
  double res = res_norm(X);
  for (int it = 0; it < 8 && res > 1e-14 * (1.0 + X.norm()); ++it) {
    const Mat Acl = At - G * X;
    Mat Xn;
    try {
      Xn = lyap(Acl.transpose(), Qt + X * G * X);
    } catch (const Error&) {
      break;
    }
    const double rn = res_norm(Xn);
    if (!(rn < res)) break;
    X = Xn;
    res = rn;
  }
  const Mat Acl = At - G * X;
  Eigen::EigenSolver<Mat> es(Acl, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0)
    throw NumericError("care: no stabilizing solution (closed loop not Hurwitz)");
  return X;
}

/// Stabilizing solution of A Y + Y A^T - (Y C^T + S) R^-1 (C Y + S^T) + Q = 0.
inline Mat fare(const Mat& A, const Mat& C, const Mat& Q, const Mat& R, Mat S = Mat()) {
  return care(A.transpose(), C.transpose(), Q, R, std::move(S));
}

/// Orthonormal basis of the Krylov space span{M, AM, A^2 M, ...}.
inline Mat krylov_basis(const Mat& A, const Mat& M, double rel_tol = 1e-9) {
  const Eigen::Index n = A.rows();
  std::vector<Vec> basis;
  const double scale = std::max({1.0, A.norm(), M.norm()});
  auto add = [&](Vec v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& q : basis) v -= q.dot(v) * q;
    const double nv = v.norm();
    if (nv > rel_tol * scale) {
      basis.push_back(v / nv);
      return true;
    }
    return false;
  };
  std::vector<Vec> frontier;
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    if (add(M.col(j))) frontier.push_back(basis.back());
  while (!frontier.empty() && static_cast<Eigen::Index>(basis.size()) < n) {
    std::vector<Vec> next;
    for (const Vec& v : frontier)
      if (add(A * v)) next.push_back(basis.back());
    frontier = std::move(next);
  }
  Mat Q(n, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) Q.col(static_cast<Eigen::Index>(i)) = basis[i];
  return Q;
}

/// Drop unobservable then uncontrollable states by orthogonal projection.
inline StateSpace minreal(const StateSpace& sys, double rel_tol = 1e-9) {
  const Mat Qo = krylov_basis(sys.A.transpose(), sys.C.transpose(), rel_tol);
  const Mat A1 = Qo.transpose() * sys.A * Qo;
  const Mat B1 = Qo.transpose() * sys.B;
  const Mat C1 = sys.C * Qo;
  const Mat Qc = krylov_basis(A1, B1, rel_tol);
  return {Qc.transpose() * A1 * Qc, Qc.transpose() * B1, C1 * Qc, sys.D, sys.input_labels,
          sys.output_labels};
}

/// Minimum-cost perfect assignment for a square cost matrix; returns column of each row.
inline std::vector<int> hungarian(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assign;
}

}  // namespace podlim
