#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"
#include "podlim/linalg.hpp"
#include "podlim/lti.hpp"

namespace podlim::synth {

// ---------------------------------------------------------------------------
// Phase-compensating damping controller

struct PssDesign {
  double k_pss = 1.0;
  double T1 = 1.0, T2 = 1.0;
  double Omega1 = 1.0;
  double lp_corner_mult = 5.0;
  double washout_corner_mult = 0.2;

  void validate() const {
    if (!(T1 > 0.0) || !(T2 > 0.0)) throw ParameterError("pss: T1 and T2 must be > 0");
    if (!(Omega1 > 0.0)) throw ParameterError("pss: Omega1 must be > 0");
    if (!(lp_corner_mult > 0.0) || !(washout_corner_mult > 0.0))
      throw ParameterError("pss: corner multipliers must be > 0");
    if (!std::isfinite(k_pss)) throw ParameterError("pss: gain must be finite");
  }
};

/// s k (sT1+1)/(sT2+1) (a/(s+a))^2 s/(s+b) with a = lp*Omega1, b = wo*Omega1.
inline RationalTF pss_controller(const PssDesign& d) {
  d.validate();
  const double a = d.lp_corner_mult * d.Omega1;
  const double b = d.washout_corner_mult * d.Omega1;
  const Polynomial num = (d.k_pss * a * a) * (Polynomial{0.0, 0.0, 1.0} * Polynomial{1.0, d.T1});
  const Polynomial den = Polynomial{1.0, d.T2} * Polynomial{a, 1.0} * Polynomial{a, 1.0} * Polynomial{b, 1.0};
  RationalTF k(num, den);
  if (!k.is_strictly_proper()) throw NumericError("pss: controller must be strictly proper");
  return k;
}

inline double wrap_angle(double x) {
  x = std::remainder(x, 2.0 * std::numbers::pi);
  return x <= -std::numbers::pi ? x + 2.0 * std::numbers::pi : x;
}

/// Lead-lag (T1, T2) giving arg(R K(j Omega1)) = -pi with every other factor fixed.
inline std::pair<double, double> tune_phase_compensation(cplx residue, double Omega1, PssDesign tmpl = {}) {
  if (residue == cplx(0.0, 0.0)) throw ValueError("tune_phase_compensation: residue is zero");
  tmpl.Omega1 = Omega1;
  tmpl.T1 = tmpl.T2 = 1.0;
  tmpl.k_pss = 1.0;
  const cplx jw(0.0, Omega1);
  const double phi_fixed = std::arg(pss_controller(tmpl)(jw));
  const double phi_req = wrap_angle(-std::numbers::pi - std::arg(residue) - phi_fixed);
  if (std::abs(phi_req) >= 0.5 * std::numbers::pi)
    throw UnsupportedError("tune_phase_compensation: required phase " +
                           std::to_string(phi_req * 180.0 / std::numbers::pi) +
                           " deg needs more than one lead-lag stage");
  const double sp = std::sin(phi_req);
  const double alpha = (1.0 + sp) / (1.0 - sp);
  const double T2 = 1.0 / (Omega1 * std::sqrt(alpha));
  return {alpha * T2, T2};
}

// ---------------------------------------------------------------------------
// Root locus

struct RootLocus {
  std::vector<double> gains;
  std::vector<std::vector<cplx>> poles;  // poles[g][branch]
};

inline StateSpace closed_loop_siso(const StateSpace& plant, const RationalTF& K) {
  if (plant.m() != 1 || plant.p() != 1) throw DimensionError("closed_loop_siso: plant must be SISO");
  return close_loop(plant, ss_from_tf(K), 0, 0);
}

/// Closed-loop eigenvalues for u = -g K_shape y, branches matched across gains.
inline RootLocus root_locus(const StateSpace& plant, const RationalTF& K_shape, const std::vector<double>& gains) {
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (!(gains[i] >= 0.0)) throw ValueError("root_locus: gains must be nonnegative");
    if (i > 0 && !(gains[i] >= gains[i - 1])) throw ValueError("root_locus: gains must be ascending");
  }
  RootLocus rl;
  rl.gains = gains;
  for (double g : gains) {
    std::vector<cplx> p = eigenvalues(closed_loop_siso(plant, g * K_shape).A);
    if (!rl.poles.empty()) {
      const auto& prev = rl.poles.back();
      Mat cost(static_cast<Eigen::Index>(prev.size()), static_cast<Eigen::Index>(p.size()));
      for (std::size_t i = 0; i < prev.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
          cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::abs(prev[i] - p[j]);
      const std::vector<int> asg = hungarian(cost);
      std::vector<cplx> q(p.size());
      for (std::size_t i = 0; i < asg.size(); ++i) q[i] = p[static_cast<std::size_t>(asg[i])];
      p = std::move(q);
    }
    rl.poles.push_back(std::move(p));
  }
  return rl;
}

// ---------------------------------------------------------------------------
// Weighted extended plant and H2 synthesis

struct IntegralWeight {
  double corner = 0.1;
  double pole_shift_epsilon = 1e-3;
};

struct MeasurementDelay {
  double T = 0.0;
  int order = 2;
};

/// Either a control design (e = (Wz Wi z, Wu u), u drives the plant) or, with
/// `estimation` set, a filter design where u is the estimate and e = Wz Wi (z - u).
/// Wi is 1 + corner/(s + epsilon) when an integral weight is present, else 1.
struct ExtendedPlantSpec {
  StateSpace plant;
  std::vector<std::string> disturbance_inputs;
  std::vector<double> Wd{1.0};
  std::string control_input;
  std::string performance_output;
  std::string measurement_output;
  double Wn = 1.0, Wu = 1.0, Wz = 1.0;
  std::optional<IntegralWeight> integral_weight;
  std::optional<double> washout_precancel;
  std::optional<MeasurementDelay> measurement_delay;
  bool estimation = false;
  double minreal_tol = 1e-7;
};

struct ExtendedPlant {
  StateSpace sys;
  Eigen::Index nw = 0, ne = 0;
};

inline RationalTF pade_delay(double T, int order);

inline ExtendedPlant build_extended_plant(const ExtendedPlantSpec& s) {
  const StateSpace& g = s.plant;
  const Eigen::Index nd = static_cast<Eigen::Index>(s.disturbance_inputs.size());
  if (nd == 0) throw ValueError("extended plant: at least one disturbance input is required");
  if (s.Wd.size() != 1 && static_cast<Eigen::Index>(s.Wd.size()) != nd)
    throw DimensionError("extended plant: Wd must be scalar or one per disturbance");
  for (double w : s.Wd)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("extended plant: Wd must be finite and >= 0");
  for (double w : {s.Wn, s.Wu, s.Wz})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("extended plant: weights must be finite and >= 0");
  if (s.integral_weight && !(s.integral_weight->pole_shift_epsilon > 0.0))
    throw ParameterError("extended plant: integral weight needs epsilon > 0");
  if (s.estimation == !s.control_input.empty())
    throw ValueError("extended plant: give a control input for control designs and none for estimation");

  const Eigen::Index n = g.n();
  const Eigen::Index iz = g.output_index(s.performance_output);
  const Eigen::Index iy = g.output_index(s.measurement_output);
  Mat Bd(n, nd), Dzd(1, nd), Dyd(1, nd);
  for (Eigen::Index k = 0; k < nd; ++k) {
    const Eigen::Index j = g.input_index(s.disturbance_inputs[static_cast<std::size_t>(k)]);
    const double w = s.Wd.size() == 1 ? s.Wd[0] : s.Wd[static_cast<std::size_t>(k)];
    Bd.col(k) = w * g.B.col(j);
    Dzd(0, k) = w * g.D(iz, j);
    Dyd(0, k) = w * g.D(iy, j);
  }
  if (Dzd.cwiseAbs().maxCoeff() != 0.0)
    throw ContractError("extended plant: disturbance feedthrough to the performance output");
  Vec Bu = Vec::Zero(n);
  double Dzu = 0.0, Dyu = 0.0;
  if (!s.estimation) {
    const Eigen::Index ju = g.input_index(s.control_input);
    Bu = g.B.col(ju);
    Dzu = g.D(iz, ju);
    Dyu = g.D(iy, ju);
  }
  const Eigen::RowVectorXd Cz = g.C.row(iz), Cy = g.C.row(iy);

  // Measurement path: optional delay, then optional wash-out, then noise.
  StateSpace ypath;  // SISO filter on the raw measurement
  {
    RationalTF f = RationalTF::gain(1.0);
    if (s.measurement_delay && s.measurement_delay->T > 0.0)
      f = f * pade_delay(s.measurement_delay->T, s.measurement_delay->order);
    if (s.washout_precancel) {
      if (!(*s.washout_precancel > 0.0)) throw ParameterError("extended plant: wash-out corner must be > 0");
      f = f * RationalTF(Polynomial{0.0, 1.0}, Polynomial{*s.washout_precancel, 1.0});
    }
    ypath = ss_from_tf(f);
  }
  const Eigen::Index nf = ypath.n();
  const Eigen::Index ni = s.integral_weight ? 1 : 0;
  const Eigen::Index N = n + ni + nf;
  const Eigen::Index nw = nd + 1;
  const Eigen::Index ne = s.estimation ? 1 : 2;

  Mat A = Mat::Zero(N, N), B = Mat::Zero(N, nw + 1), C = Mat::Zero(ne + 1, N), D = Mat::Zero(ne + 1, nw + 1);
  A.topLeftCorner(n, n) = g.A;
  B.topLeftCorner(n, nd) = Bd;
  B.block(0, nw, n, 1) = Bu;

  // zeta = z (control) or z - u (estimation)
  Eigen::RowVectorXd zx = Cz;
  Eigen::RowVectorXd zw = Eigen::RowVectorXd::Zero(nw);
  zw.head(nd) = Dzd;
  const double zu = s.estimation ? -1.0 : Dzu;

  // performance row
  C.block(0, 0, 1, n) = s.Wz * zx;
  D.block(0, 0, 1, nw) = s.Wz * zw;
  D(0, nw) = s.Wz * zu;
  if (ni) {
    const double wc = s.integral_weight->corner, eps = s.integral_weight->pole_shift_epsilon;
    A(n, n) = -eps;
    A.block(n, 0, 1, n) = wc * zx;
    B.block(n, 0, 1, nw) = wc * zw;
    B(n, nw) = wc * zu;
    C(0, n) = s.Wz;
  }
  if (!s.estimation) D(1, nw) = s.Wu;

  // measurement: raw = Cy x + Dyd d + Dyu u, through ypath
  const Eigen::Index r0 = n + ni;
  if (nf) {
    A.block(r0, r0, nf, nf) = ypath.A;
    A.block(r0, 0, nf, n) = ypath.B * Cy;
    B.block(r0, 0, nf, nd) = ypath.B * Dyd;
    B.block(r0, nw, nf, 1) = ypath.B * Dyu;
    C.block(ne, r0, 1, nf) = ypath.C;
  }
  const double yd = ypath.D(0, 0);
  C.block(ne, 0, 1, n) = yd * Cy;
  D.block(ne, 0, 1, nd) = yd * Dyd;
  D(ne, nw) = yd * Dyu;
  D(ne, nd) = s.Wn;

  std::vector<std::string> il = s.disturbance_inputs;
  il.emplace_back("n");
  il.emplace_back(s.estimation ? "zhat" : s.control_input);
  std::vector<std::string> ol{"e_z"};
  if (!s.estimation) ol.emplace_back("e_u");
  ol.push_back(s.measurement_output);

  StateSpace ext(A, B, C, D, il, ol);
  ext = minreal(ext, s.minreal_tol);
  return {ext, nw, ne};
}

struct H2Result {
  StateSpace controller;  // u = -K y
  double closed_loop_norm = 0.0;
  double care_residual = 0.0, fare_residual = 0.0;
  double control_term = 0.0, filter_term = 0.0;
  Mat X, Y, F, L;
};

/// Hurwitz-ness of the modes of (A, B) that are not controllable (PBH test).
inline bool pbh_stabilizable(const Mat& A, const Mat& B) {
  for (const cplx& l : eigenvalues(A)) {
    if (l.real() < -1e-9 * std::max(1.0, A.norm())) continue;
    CMat M(A.rows(), A.cols() + B.cols());
    M << A.cast<cplx>() - l * CMat::Identity(A.rows(), A.cols()), B.cast<cplx>();
    Eigen::JacobiSVD<CMat> svd(M);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-9 * std::max(1.0, sv(0))) return false;
  }
  return true;
}

/// Observer plus state feedback minimizing the H2 norm from w to e.
///
/// The last nu inputs are controls and the last ny outputs are measurements. A nonzero
/// D22 is handled by synthesizing for the plant without it and folding it back in.
inline H2Result h2_synthesize(const StateSpace& P, Eigen::Index nu = 1, Eigen::Index ny = 1) {
  const Eigen::Index nw = P.m() - nu, ne = P.p() - ny;
  if (nw <= 0 || ne <= 0) throw DimensionError("h2_synthesize: need exogenous inputs and performance outputs");
  const Mat B1 = P.B.leftCols(nw), B2 = P.B.rightCols(nu);
  const Mat C1 = P.C.topRows(ne), C2 = P.C.bottomRows(ny);
  const Mat D11 = P.D.topLeftCorner(ne, nw), D12 = P.D.topRightCorner(ne, nu);
  const Mat D21 = P.D.bottomLeftCorner(ny, nw), D22 = P.D.bottomRightCorner(ny, nu);
  if (D11.size() && D11.cwiseAbs().maxCoeff() != 0.0)
    throw ContractError("h2_synthesize: nonzero w -> e feedthrough makes the H2 norm infinite");
  const Mat R1 = D12.transpose() * D12, R2 = D21 * D21.transpose();
  if (Eigen::FullPivLU<Mat>(R1).rank() < nu)
    throw ValueError("h2_synthesize: D12 must have full column rank (penalize the control input)");
  if (Eigen::FullPivLU<Mat>(R2).rank() < ny)
    throw ValueError("h2_synthesize: D21 must have full row rank (add measurement noise)");
  if (!pbh_stabilizable(P.A, B2)) throw ValueError("h2_synthesize: (A, B2) is not stabilizable");
  if (!pbh_stabilizable(P.A.transpose(), C2.transpose()))
    throw ValueError("h2_synthesize: (C2, A) is not detectable");

  H2Result r;
  const Mat S1 = C1.transpose() * D12, S2 = B1 * D21.transpose();
  try {
    r.X = care(P.A, B2, C1.transpose() * C1, R1, S1);
  } catch (const NumericError& e) {
    throw NumericError(std::string("h2_synthesize: control Riccati failed, likely imaginary-axis zeros of (A,B2,C1,D12): ") +
                       e.what());
  }
  try {
    r.Y = fare(P.A, C2, B1 * B1.transpose(), R2, S2);
  } catch (const NumericError& e) {
    throw NumericError(std::string("h2_synthesize: filter Riccati failed, likely imaginary-axis zeros of (A,B1,C2,D21): ") +
                       e.what());
  }
  r.care_residual = care_residual(P.A, B2, C1.transpose() * C1, R1, S1, r.X).norm();
  r.fare_residual =
      care_residual(P.A.transpose(), C2.transpose(), B1 * B1.transpose(), R2, S2, r.Y).norm();
  r.F = -R1.ldlt().solve(B2.transpose() * r.X + D12.transpose() * C1);
  r.L = -(r.Y * C2.transpose() + S2) * R2.ldlt().solve(Mat::Identity(ny, ny));

  // u = F xk, xk' = (A + B2 F + L C2) xk - L y0, y0 = y - D22 u
  const Mat Ak0 = P.A + B2 * r.F + r.L * C2;
  const Mat Bk = -r.L, Ck = -r.F;
  const Mat Ak = Ak0 + Bk * D22 * Ck;
  std::vector<std::string> kin(P.output_labels.end() - ny, P.output_labels.end());
  std::vector<std::string> kout(P.input_labels.end() - nu, P.input_labels.end());
  r.controller = StateSpace(Ak, Bk, Ck, Mat::Zero(nu, ny), kin, kout);

  r.control_term = (B1.transpose() * r.X * B1).trace();
  r.filter_term = (R1 * r.F * r.Y * r.F.transpose()).trace();
  const StateSpace cl = lft(P, r.controller, nw, ne);
  if (!is_hurwitz(cl.A)) throw NumericError("h2_synthesize: closed loop is not internally stable");
  r.closed_loop_norm = h2_norm(cl);
  return r;
}

// ---------------------------------------------------------------------------
// Order reduction

struct Reduction {
  StateSpace reduced;
  std::vector<double> hankel_singular_values;
  double max_error = 0.0;  // max |K - Kr| over the standard grid
  std::string note;
};

namespace detail {

inline Mat psd_sqrt(const Mat& W) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Real basis T = [Ts Tu] separating stable and antistable invariant subspaces.
inline std::pair<Mat, Eigen::Index> stable_antistable_basis(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A, true);
  if (es.info() != Eigen::Success) throw NumericError("reduce_order: eigen decomposition failed");
  const Eigen::Index n = A.rows();
  std::vector<Vec> st, un;
  for (Eigen::Index i = 0; i < n; ++i) {
    const cplx l = es.eigenvalues()(i);
    auto& dst = l.real() < 0.0 ? st : un;
    const CVec v = es.eigenvectors().col(i);
    if (l.imag() == 0.0) {
      dst.push_back(v.real());
    } else if (l.imag() > 0.0) {
      dst.push_back(v.real());
      dst.push_back(v.imag());
    }
  }
  Mat T(n, n);
  Eigen::Index c = 0;
  for (const Vec& v : st) T.col(c++) = v;
  for (const Vec& v : un) T.col(c++) = v;
  return {T, static_cast<Eigen::Index>(st.size())};
}

}  // namespace detail

inline double max_response_gap(const StateSpace& a, const StateSpace& b) {
  const FrequencyGrid grid = FrequencyGrid::logspace(1e-2, 1e3, 400);
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.m(); ++i)
    for (Eigen::Index o = 0; o < a.p(); ++o)
      for (double w : grid.omegas())
        e = std::max(e, std::abs(freq_response(a, i, o, cplx(0.0, w)) - freq_response(b, i, o, cplx(0.0, w))));
  return e;
}

/// Balanced truncation of the stable part; antistable modes are kept.
inline Reduction reduce_order(const StateSpace& K, Eigen::Index target_order) {
  Reduction out;
  if (target_order >= K.n()) {
    out.reduced = K;
    out.note = "target order >= current order; unchanged";
    return out;
  }
  if (target_order < 0) throw ValueError("reduce_order: negative target order");
  auto [T, ns] = detail::stable_antistable_basis(K.A);
  const StateSpace Kt = K.transformed(T.inverse());
  const Eigen::Index nu = K.n() - ns;
  if (target_order < nu) throw ValueError("reduce_order: target order below the number of unstable modes");
  const Mat As = Kt.A.topLeftCorner(ns, ns), Bs = Kt.B.topRows(ns), Cs = Kt.C.leftCols(ns);
  const Mat Wc = lyap(As, Bs * Bs.transpose());
  const Mat Wo = lyap(As.transpose(), Cs.transpose() * Cs);
  const Mat Lc = detail::psd_sqrt(Wc), Lo = detail::psd_sqrt(Wo);
  Eigen::JacobiSVD<Mat> svd(Lo * Lc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec hsv = svd.singularValues();
  for (Eigen::Index i = 0; i < hsv.size(); ++i) out.hankel_singular_values.push_back(hsv(i));
  const Eigen::Index r = target_order - nu;
  if (r > 0 && !(hsv(r - 1) > 0.0)) throw NumericError("reduce_order: retained Hankel singular value is zero");
  const Vec sinv = hsv.head(r).cwiseSqrt().cwiseInverse();
  const Mat Tl = sinv.asDiagonal() * svd.matrixU().leftCols(r).transpose() * Lo;  // r x ns
  const Mat Tr = Lc * svd.matrixV().leftCols(r) * sinv.asDiagonal();            // ns x r

  const Eigen::Index N = target_order;
  Mat A = Mat::Zero(N, N), B(N, K.m()), C(K.p(), N);
  A.topLeftCorner(r, r) = Tl * As * Tr;
  A.topRightCorner(r, nu) = Tl * Kt.A.topRightCorner(ns, nu);
  A.bottomRightCorner(nu, nu) = Kt.A.bottomRightCorner(nu, nu);
  B << Tl * Bs, Kt.B.bottomRows(nu);
  C << Cs * Tr, Kt.C.rightCols(nu);
  out.reduced = StateSpace(A, B, C, K.D, K.input_labels, K.output_labels);
  if (!is_hurwitz(out.reduced.A.topLeftCorner(r, r)))
    throw NumericError("reduce_order: truncated stable part lost stability");
  out.max_error = max_response_gap(K, out.reduced);
  if (nu > 0) out.note = std::to_string(nu) + " antistable mode(s) kept without truncation";
  return out;
}

// ---------------------------------------------------------------------------
// Delay

/// Diagonal Pade approximant of exp(-sT).
inline RationalTF pade_delay(double T, int order) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ParameterError("pade_delay: T must be finite and >= 0");
  if (order < 1 || order > 3) throw UnsupportedError("pade_delay: order must be 1, 2 or 3");
  if (T == 0.0) return RationalTF::gain(1.0);
  std::vector<double> num(static_cast<std::size_t>(order) + 1), den(num.size());
  double c = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) c *= static_cast<double>(order - k + 1) / static_cast<double>(k * (2 * order - k + 1));
    const double tk = c * std::pow(T, k);
    den[static_cast<std::size_t>(k)] = tk;
    num[static_cast<std::size_t>(k)] = (k % 2 ? -tk : tk);
  }
  return {Polynomial(num), Polynomial(den)};
}

}  // namespace podlim::synth
