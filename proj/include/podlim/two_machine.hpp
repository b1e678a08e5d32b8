#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "podlim/errors.hpp"
#include "podlim/lti.hpp"

namespace podlim {

/// Linearized two-machine system: inertias, damping and effective reactances to the control bus.
struct TwoMachineParams {
  double M1 = 2.0, M2 = 2.0;  // pu s^2/rad
  double D1 = 0.0, D2 = 0.0;  // pu/(rad/s)
  double X1 = 0.5, X2 = 0.5;  // pu, cosine-scaled
  std::optional<double> Omega;

  double Xsum() const { return X1 + X2; }

  void validate() const {
    if (!(M1 > 0.0) || !(M2 > 0.0)) throw ParameterError("two-machine: inertias must be > 0");
    if (!(D1 >= 0.0) || !(D2 >= 0.0)) throw ParameterError("two-machine: damping must be >= 0");
    if (!(X1 > 0.0) || !(X2 > 0.0)) throw ParameterError("two-machine: reactances X1, X2 must be > 0");
    if (Omega && !(*Omega > 0.0)) throw ParameterError("two-machine: Omega override must be > 0");
  }
};

namespace two_machine {

inline const std::vector<std::string> kInputs{"dP1", "dP2", "Pu"};
inline const std::vector<std::string> kOutputs{"delta1", "delta2", "omega1", "omega2", "theta"};

/// States (delta1, delta2, omega1, omega2); theta is an algebraic output with Pu feedthrough.
inline StateSpace build_state_space(const TwoMachineParams& p) {
  p.validate();
  const double xs = p.Xsum();
  Mat L(2, 2);
  L << 1, -1, -1, 1;
  L /= xs;
  Vec Lth(2);
  Lth << p.X2 / xs, p.X1 / xs;
  Vec Minv(2);
  Minv << 1.0 / p.M1, 1.0 / p.M2;
  Mat A = Mat::Zero(4, 4), B = Mat::Zero(4, 3), C = Mat::Zero(5, 4), D = Mat::Zero(5, 3);
  A.topRightCorner(2, 2).setIdentity();
  A.bottomLeftCorner(2, 2) = -(Minv.asDiagonal() * L);
  A(2, 2) = -p.D1 / p.M1;
  A(3, 3) = -p.D2 / p.M2;
  B(2, 0) = Minv(0);
  B(3, 1) = Minv(1);
  B.block(2, 2, 2, 1) = Minv.asDiagonal() * Lth;
  C.topRows(4).setIdentity();
  C(4, 0) = p.X2 / xs;
  C(4, 1) = p.X1 / xs;
  D(4, 2) = p.X1 * p.X2 / xs;
  return {A, B, C, D, kInputs, kOutputs};
}

/// Disturbance inputs only, with the extra output theta_dot = C_theta A x.
///
/// The Pu input is excluded: its theta_dot path would need the derivative of Pu.
inline StateSpace build_state_space_theta_dot(const TwoMachineParams& p) {
  const StateSpace full = build_state_space(p);
  Mat C(6, 4), D = Mat::Zero(6, 2);
  C << full.C, full.C.row(4) * full.A;
  D.topRows(5) = full.D.leftCols(2);
  std::vector<std::string> out = kOutputs;
  out.emplace_back("theta_dot");
  return {full.A, full.B.leftCols(2), C, D, {"dP1", "dP2"}, out};
}

/// SISO channel by label. The theta_dot outputs accept dP1/dP2 only.
inline RationalTF channel(const TwoMachineParams& p, const std::string& in, const std::string& out) {
  if (out == "theta_dot") {
    if (in == "Pu")
      throw UnsupportedError("Pu -> theta_dot needs the derivative of the Pu feedthrough; use theta");
    return ss_to_tf(build_state_space_theta_dot(p), in, out);
  }
  if (out == "z") {
    const StateSpace s = build_state_space(p);
    StateSpace z(s.A, s.B, s.C.row(2) - s.C.row(3), Mat::Zero(1, 3), s.input_labels, {"z"});
    return ss_to_tf(z, in, "z");
  }
  return ss_to_tf(build_state_space(p), in, out);
}

inline double common_inertia(const TwoMachineParams& p) {
  p.validate();
  if (std::abs(p.M1 - p.M2) > 1e-12 * std::max(p.M1, p.M2))
    throw UnsupportedError("closed form assumes identical inertias M1 == M2");
  return p.M1;
}

/// Undamped inter-area frequency sqrt(2/(M Xsum)).
inline double interarea_frequency(const TwoMachineParams& p) {
  const double M = common_inertia(p);
  if (p.Omega) return *p.Omega;
  return std::sqrt(2.0 / (M * p.Xsum()));
}

/// Closed-form transfer functions with z = omega1 - omega2 and y = theta.
struct PerformanceTfs {
  RationalTF Gzd1, Gzd2, Gzu, Gyd1, Gyd2, Gyu;
};

inline PerformanceTfs performance_tfs(const TwoMachineParams& p) {
  const double M = common_inertia(p);
  if (p.D1 != 0.0 || p.D2 != 0.0)
    throw UnsupportedError("closed forms are undamped; use the state-space path for D > 0");
  const double W2 = 2.0 / (M * p.Xsum());
  const double xs = p.Xsum();
  // G0 = 1 / (M s^2 (s^2 + W^2))
  const Polynomial g0den{0.0, 0.0, M * W2, 0.0, M};
  const Polynomial N1 = (p.X2 / xs) * Polynomial{1.0 / (M * p.X2), 0.0, 1.0};
  const Polynomial N2 = (p.X1 / xs) * Polynomial{1.0 / (M * p.X1), 0.0, 1.0};
  const Polynomial s3 = Polynomial::monomial(3);
  PerformanceTfs t;
  t.Gzd1 = RationalTF(s3, g0den).simplify();
  t.Gzd2 = RationalTF(-s3, g0den).simplify();
  t.Gyd1 = RationalTF(N1, g0den).simplify();
  t.Gyd2 = RationalTF(N2, g0den).simplify();
  t.Gyu = RationalTF(M * xs * (N1 * N2), g0den).simplify();
  // Sign follows the state-space model: (X2 - X1)/(M Xsum) * s/(s^2 + W^2).
  t.Gzu = RationalTF(Polynomial{0.0, (p.X2 - p.X1) / (M * xs)}, Polynomial{W2, 0.0, 1.0});
  return t;
}

/// (|q1|, |q2|) = (sqrt(1/(M X2)), sqrt(1/(M X1))); machine 1 must be nearer the control bus.
inline std::pair<double, double> zero_frequencies(const TwoMachineParams& p) {
  const double M = common_inertia(p);
  if (!(p.X1 < p.X2))
    throw ParameterError("zero_frequencies needs X1 < X2; relabel the machines so machine 1 is nearer");
  const double q1 = std::sqrt(1.0 / (M * p.X2));
  const double q2 = std::sqrt(1.0 / (M * p.X1));
  const double W = std::sqrt(2.0 / (M * p.Xsum()));
  if (!(q1 >= W / std::sqrt(2.0) * (1.0 - 1e-12) && q1 < q2))
    throw NumericError("zero ordering W/sqrt(2) <= |q1| < |q2| violated");
  return {q1, q2};
}

}  // namespace two_machine
}  // namespace podlim
