#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"
#include "podlim/linalg.hpp"
#include "podlim/polynomial.hpp"
#include "podlim/rational.hpp"
#include "podlim/state_space.hpp"

namespace podlim {

/// Strictly increasing, finite, positive angular frequencies (rad/s).
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> omegas) : w_(std::move(omegas)) {
    if (w_.empty()) throw ValueError("frequency grid is empty");
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (!std::isfinite(w_[i]) || w_[i] <= 0.0) throw ValueError("frequency grid values must be finite and > 0");
      if (i > 0 && !(w_[i] > w_[i - 1])) throw ValueError("frequency grid must be strictly increasing");
    }
  }
  static FrequencyGrid logspace(double wmin, double wmax, std::size_t points) {
    if (points < 2 || !(wmin > 0.0) || !(wmax > wmin))
      throw ValueError("logspace needs 0 < wmin < wmax and at least 2 points");
    std::vector<double> w(points);
    const double a = std::log10(wmin), b = std::log10(wmax);
    for (std::size_t i = 0; i < points; ++i)
      w[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    return FrequencyGrid(std::move(w));
  }
  const std::vector<double>& omegas() const { return w_; }
  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }

 private:
  std::vector<double> w_;
};

/// Eigenvalues of a square matrix with split multiple roots merged, sorted by (re, im).
inline std::vector<cplx> eigenvalues(const Mat& A) {
  if (A.rows() != A.cols()) throw DimensionError("eigenvalues: matrix must be square");
  const Eigen::Index n = A.rows();
  if (n == 0) return {};
  Eigen::EigenSolver<Mat> es(detail::balanced(A), false);
  if (es.info() != Eigen::Success)
    throw NumericError("eigenvalue QR iteration did not converge within " +
                       std::to_string(40 * n) + " iterations");
  std::vector<cplx> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  detail::merge_clusters(out, 1e-6, std::max(1.0, A.norm()));
  detail::sort_complex(out);
  return out;
}

inline std::vector<cplx> poles(const StateSpace& sys) { return eigenvalues(sys.A); }

inline std::vector<cplx> poles(const RationalTF& tf) {
  const RationalTF s = tf.simplify();
  return s.den().degree() > 0 ? s.den().roots() : std::vector<cplx>{};
}

/// Roots of the numerator after coprime simplification.
inline std::vector<cplx> zeros(const RationalTF& tf) {
  if (tf.is_zero()) throw ValueError("zeros of the zero transfer function are undefined");
  const RationalTF s = tf.simplify();
  return s.num().degree() > 0 ? s.num().roots() : std::vector<cplx>{};
}

/// det(sI - A).
inline Polynomial char_poly(const Mat& A) {
  const std::vector<cplx> ev = eigenvalues(A);
  return Polynomial::from_roots(ev);
}

/// SISO channel C_out (sI-A)^-1 B_in + D as a coprime rational function.
inline RationalTF ss_to_tf(const StateSpace& sys, Eigen::Index in_idx, Eigen::Index out_idx) {
  StateSpace::check_index(in_idx, sys.m(), "input");
  StateSpace::check_index(out_idx, sys.p(), "output");
  const double d = sys.D(out_idx, in_idx);
  if (sys.n() == 0) return RationalTF::gain(d);
  const Vec b = sys.B.col(in_idx);
  const Eigen::RowVectorXd c = sys.C.row(out_idx);
  // det(sI - A + b c) = det(sI - A) (1 + c (sI-A)^-1 b)
  const Polynomial t1 = char_poly(sys.A - b * c);
  const Polynomial t2 = char_poly(sys.A);
  const int n = t2.degree();
  std::vector<double> num(static_cast<std::size_t>(n) + 1);
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int k = 0; k <= n; ++k) {
    const double v = t1[k] - t2[k];
    const double noise = 1e3 * eps * (std::abs(t1[k]) + std::abs(t2[k]));
    num[static_cast<std::size_t>(k)] = (std::abs(v) < noise ? 0.0 : v) + d * t2[k];
  }
  return RationalTF(Polynomial(std::move(num)), t2).simplify();
}

inline RationalTF ss_to_tf(const StateSpace& sys, const std::string& in, const std::string& out) {
  return ss_to_tf(sys, sys.input_index(in), sys.output_index(out));
}

/// Controllable-canonical realization of a proper rational function.
inline StateSpace ss_from_tf(const RationalTF& tf) {
  if (!tf.is_proper()) throw ValueError("improper transfer function has no state-space realization");
  const double lead = tf.den().leading();
  const Polynomial den = (1.0 / lead) * tf.den();
  const Polynomial num = (1.0 / lead) * tf.num();
  const int n = den.degree();
  const double d = num.degree() == n ? num.leading() : 0.0;
  const Polynomial r = num - d * den;
  Mat A = Mat::Zero(n, n), B = Mat::Zero(n, 1), C = Mat::Zero(1, n), D(1, 1);
  for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) {
    A(n - 1, j) = -den[j];
    C(0, j) = r[j];
  }
  if (n > 0) B(n - 1, 0) = 1.0;
  D(0, 0) = d;
  return {A, B, C, D};
}

/// Values at s = j*omega; rejects grid points sitting on imaginary-axis poles.
inline std::vector<cplx> freq_response(const RationalTF& tf, const FrequencyGrid& grid) {
  std::vector<cplx> axis_poles;
  if (tf.den().degree() > 0)
    for (const cplx& p : tf.den().roots())
      if (std::abs(p.real()) < 1e-9) axis_poles.push_back(p);
  std::vector<cplx> out;
  out.reserve(grid.size());
  for (double w : grid.omegas()) {
    for (const cplx& p : axis_poles)
      if (std::abs(p.imag() - w) < 1e-9)
        throw SingularityError("frequency " + std::to_string(w) + " rad/s coincides with a pole");
    out.push_back(tf(cplx(0.0, w)));
  }
  return out;
}

inline cplx freq_response(const StateSpace& sys, Eigen::Index in_idx, Eigen::Index out_idx, cplx s) {
  const Eigen::Index n = sys.n();
  if (n == 0) return sys.D(out_idx, in_idx);
  const CMat M = s * CMat::Identity(n, n) - sys.A.cast<cplx>();
  Eigen::PartialPivLU<CMat> lu(M);
  const CVec x = lu.solve(sys.B.col(in_idx).cast<cplx>());
  return (sys.C.row(out_idx).cast<cplx>() * x)(0) + sys.D(out_idx, in_idx);
}

inline std::vector<cplx> freq_response(const StateSpace& sys, Eigen::Index in_idx, Eigen::Index out_idx,
                                       const FrequencyGrid& grid) {
  StateSpace::check_index(in_idx, sys.m(), "input");
  StateSpace::check_index(out_idx, sys.p(), "output");
  std::vector<cplx> axis_poles;
  for (const cplx& p : poles(sys))
    if (std::abs(p.real()) < 1e-9) axis_poles.push_back(p);
  std::vector<cplx> out;
  out.reserve(grid.size());
  for (double w : grid.omegas()) {
    for (const cplx& p : axis_poles)
      if (std::abs(p.imag() - w) < 1e-9)
        throw SingularityError("frequency " + std::to_string(w) + " rad/s coincides with a pole");
    out.push_back(freq_response(sys, in_idx, out_idx, cplx(0.0, w)));
  }
  return out;
}

inline bool is_hurwitz(const Mat& A) {
  for (const cplx& l : eigenvalues(A))
    if (!(l.real() < 0.0)) return false;
  return true;
}

/// sqrt(trace(C P C^T)) with A P + P A^T + B B^T = 0.
inline double h2_norm(const StateSpace& sys) {
  if (!is_hurwitz(sys.A)) throw StabilityError("h2_norm: A is not Hurwitz");
  if (sys.D.size() > 0 && sys.D.cwiseAbs().maxCoeff() != 0.0)
    throw ValueError("h2_norm: nonzero feedthrough D makes the H2 norm infinite");
  const Mat P = lyap(sys.A, sys.B * sys.B.transpose());
  return std::sqrt(std::max(0.0, (sys.C * P * sys.C.transpose()).trace()));
}

/// Lower fractional transformation with u = -K y.
///
/// The first nw inputs of P are exogenous, the rest are control inputs; the first nz
/// outputs are performance outputs, the rest are measurements.
inline StateSpace lft(const StateSpace& P, const StateSpace& K, Eigen::Index nw, Eigen::Index nz) {
  const Eigen::Index n = P.n(), nu = P.m() - nw, ny = P.p() - nz, nk = K.n();
  if (nu < 0 || ny < 0 || K.m() != ny || K.p() != nu) throw DimensionError("lft: controller shape mismatch");
  const Mat B1 = P.B.leftCols(nw), B2 = P.B.rightCols(nu);
  const Mat C1 = P.C.topRows(nz), C2 = P.C.bottomRows(ny);
  const Mat D11 = P.D.topLeftCorner(nz, nw), D12 = P.D.topRightCorner(nz, nu);
  const Mat D21 = P.D.bottomLeftCorner(ny, nw), D22 = P.D.bottomRightCorner(ny, nu);
  const Mat Ck = -K.C, Dk = -K.D;
  const Mat E = (Mat::Identity(nu, nu) - Dk * D22).inverse();
  const Mat Ux = E * Dk * C2, Uk = E * Ck, Uw = E * Dk * D21;
  const Mat Yx = C2 + D22 * Ux, Yk = D22 * Uk, Yw = D21 + D22 * Uw;
  Mat A(n + nk, n + nk), B(n + nk, nw), C(nz, n + nk);
  A << P.A + B2 * Ux, B2 * Uk, K.B * Yx, K.A + K.B * Yk;
  B << B1 + B2 * Uw, K.B * Yw;
  C << C1 + D12 * Ux, D12 * Uk;
  const Mat D = D11 + D12 * Uw;
  std::vector<std::string> il(P.input_labels.begin(), P.input_labels.begin() + nw);
  std::vector<std::string> ol(P.output_labels.begin(), P.output_labels.begin() + nz);
  return {A, B, C, D, il, ol};
}

/// Close u_in = -K y_out around one channel, keeping every plant input and output.
inline StateSpace close_loop(const StateSpace& plant, const StateSpace& K, Eigen::Index in_idx,
                             Eigen::Index out_idx) {
  StateSpace::check_index(in_idx, plant.m(), "input");
  StateSpace::check_index(out_idx, plant.p(), "output");
  const Eigen::Index m = plant.m(), p = plant.p();
  Mat B(plant.n(), m + 1), C(p + 1, plant.n()), D = Mat::Zero(p + 1, m + 1);
  B << plant.B, plant.B.col(in_idx);
  C << plant.C, plant.C.row(out_idx);
  D.topLeftCorner(p, m) = plant.D;
  D.block(0, m, p, 1) = plant.D.col(in_idx);
  D.block(p, 0, 1, m) = plant.D.row(out_idx);
  D(p, m) = plant.D(out_idx, in_idx);
  std::vector<std::string> il = plant.input_labels, ol = plant.output_labels;
  il.push_back("__u");
  ol.push_back("__y");
  return lft(StateSpace(plant.A, B, C, D, il, ol), K, m, p);
}

/// Cascade: output of g1 feeds input of g2.
inline StateSpace ss_series(const StateSpace& g1, const StateSpace& g2) {
  if (g1.p() != g2.m()) throw DimensionError("ss_series: output/input count mismatch");
  const Eigen::Index n1 = g1.n(), n2 = g2.n();
  Mat A = Mat::Zero(n1 + n2, n1 + n2), B(n1 + n2, g1.m()), C(g2.p(), n1 + n2);
  A.topLeftCorner(n1, n1) = g1.A;
  A.bottomLeftCorner(n2, n1) = g2.B * g1.C;
  A.bottomRightCorner(n2, n2) = g2.A;
  B << g1.B, g2.B * g1.D;
  C << g2.D * g1.C, g2.C;
  return {A, B, C, g2.D * g1.D, g1.input_labels, g2.output_labels};
}

/// Sampled response with inputs held over each step, integrated by RK4.
inline std::vector<Vec> lsim(const StateSpace& sys, const std::vector<Vec>& u, double dt) {
  if (!(dt > 0.0)) throw ValueError("lsim: dt must be > 0");
  Vec x = Vec::Zero(sys.n());
  std::vector<Vec> y;
  y.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k].size() != sys.m()) throw DimensionError("lsim: input sample has the wrong length");
    y.push_back(sys.C * x + sys.D * u[k]);
    if (k + 1 == u.size()) break;
    auto f = [&](const Vec& xs) { return Vec(sys.A * xs + sys.B * u[k]); };
    const Vec k1 = f(x), k2 = f(x + 0.5 * dt * k1), k3 = f(x + 0.5 * dt * k2), k4 = f(x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

}  // namespace podlim
