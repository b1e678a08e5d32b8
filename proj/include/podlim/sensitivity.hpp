#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "podlim/errors.hpp"
#include "podlim/lti.hpp"

namespace podlim::sens {

struct SensitivityPair {
  RationalTF S, T;
  bool closed_loop_stable = false;
};

struct FilteringPair {
  RationalTF P, M;
  std::string disturbance_label;
};

namespace detail {

inline bool all_stable(const std::vector<cplx>& ps) {
  return std::all_of(ps.begin(), ps.end(), [](const cplx& p) { return p.real() < 0.0; });
}

/// Pairwise summation with a fixed split, independent of thread count.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

}  // namespace detail

/// S = 1/(1 + Gyu K), T = 1 - S.
inline SensitivityPair sensitivity_pair(const RationalTF& Gyu, const RationalTF& K) {
  const Polynomial den = Gyu.den() * K.den() + Gyu.num() * K.num();
  double dmax = 0.0;
  for (double c : den.coeffs()) dmax = std::max(dmax, std::abs(c));
  double scale = 0.0;
  for (double c : (Gyu.den() * K.den()).coeffs()) scale = std::max(scale, std::abs(c));
  if (den.is_zero() || dmax <= 1e-14 * scale)
    throw ValueError("algebraic loop: 1 + Gyu K is identically zero");
  SensitivityPair out;
  out.S = RationalTF(Gyu.den() * K.den(), den).simplify();
  // T on the denominator of S, so that separate cancellations cannot break S + T = 1.
  out.T = RationalTF(out.S.den() - out.S.num(), out.S.den());
  out.closed_loop_stable = den.degree() == 0 || detail::all_stable(den.roots());
  return out;
}

/// Tzd = Gzd - Gzu K (1 + Gyu K)^-1 Gyd.
inline RationalTF closed_loop_tzd(const RationalTF& Gzd, const RationalTF& Gzu, const RationalTF& Gyd,
                                  const RationalTF& Gyu, const RationalTF& K) {
  const SensitivityPair sp = sensitivity_pair(Gyu, K);
  const RationalTF loop = ((Gzu * K).simplify() * sp.S).simplify();
  return (Gzd - loop * Gyd).simplify();
}

/// P = (Gzd - F Gyd) Gzd^-1, M = 1 - P.
inline FilteringPair filtering_pair(const RationalTF& Gzd, const RationalTF& Gyd, const RationalTF& F,
                                    std::string label) {
  if (Gzd.is_zero()) throw ValueError("filtering_pair: Gzd is identically zero and cannot be inverted");
  if (!F.is_zero() && !detail::all_stable(poles(F)))
    throw ContractError("filtering_pair: the filter F must be stable");
  FilteringPair out;
  out.M = (F * Gyd / Gzd).simplify();
  out.P = (RationalTF::gain(1.0) - out.M).simplify();
  out.disturbance_label = std::move(label);
  return out;
}

/// R = Tzd Gzd^-1 = 1 - Gzu K (1 + Gyu K)^-1 Gyd Gzd^-1.
inline RationalTF disturbance_response_ratio(const RationalTF& Gzd, const RationalTF& Gzu,
                                             const RationalTF& Gyd, const RationalTF& Gyu,
                                             const RationalTF& K) {
  if (Gzd.is_zero()) throw ValueError("disturbance_response_ratio: Gzd is identically zero");
  const SensitivityPair sp = sensitivity_pair(Gyu, K);
  // Cancel stepwise; one product of all factors leaves split root clusters behind.
  const RationalTF loop = ((Gzu * K).simplify() * sp.S).simplify();
  return (RationalTF::gain(1.0) - loop * (Gyd / Gzd).simplify()).simplify();
}

struct InputDecoupling {
  RationalTF Fu;
  bool proper = false;
};

/// Fu with Gzu = F (Gyu + Fu).
inline InputDecoupling decouple_input(const RationalTF& F, const RationalTF& Gzu, const RationalTF& Gyu) {
  if (F.is_zero()) throw ValueError("decouple_input: F is identically zero");
  InputDecoupling out;
  out.Fu = (Gzu / F - Gyu).simplify();
  out.proper = out.Fu.is_proper();
  return out;
}

/// K = Kz F (1 + Kz F Fu)^-1, so that u = -K y equals u = -Kz F (y + Fu u).
inline RationalTF assemble_estimation_feedback(const RationalTF& F, const RationalTF& Fu, double Kz) {
  const RationalTF kf = Kz * F;
  const RationalTF loop = kf * Fu;
  const Polynomial den = loop.den() + loop.num();
  double dmax = 0.0, scale = 0.0;
  for (double c : den.coeffs()) dmax = std::max(dmax, std::abs(c));
  for (double c : loop.den().coeffs()) scale = std::max(scale, std::abs(c));
  if (!kf.is_zero() && dmax <= 1e-14 * scale)
    throw ValueError("inner algebraic loop: 1 + Kz F Fu is identically zero");
  if (kf.is_zero()) return RationalTF::gain(0.0);
  return (kf * RationalTF(loop.den(), den)).simplify();
}

/// Numeric log-magnitude integral and the matching right-hand side of the water-bed identity.
struct IntegralReport {
  double value = 0.0;           // head + quadrature + tail + axis correction
  double quadrature = 0.0;      // trapezoid in ln(omega) over [1e-4, omega_max]
  double head = 0.0;            // [0, 1e-4]
  double tail_estimate = 0.0;   // [omega_max, inf) from the fitted c/omega^2 decay
  double axis_correction = 0.0; // closed-form part for imaginary-axis zeros/poles
  double omega_max = 0.0;
  double tail_c_fit = 0.0;
  double tail_c_symbolic = 0.0;
  double rhp_pole_sum = 0.0;    // sum of Re p over open RHP poles (rad/s)
  double rhp_zero_sum = 0.0;    // sum of Re z over open RHP zeros (rad/s)
  double relative_degree_limit_term = 0.0;  // (pi/2) lim s (f(s) - f_inf) / f_inf
  double rhs = 0.0;
  std::vector<double> axis_frequencies;
  std::string warning;
};

/// Integral of ln|f(jw)/f(inf)| over [0, inf).
///
/// Zeros or poles on the imaginary axis at +-j a are deflated; the numeric integrand then
/// carries ln(w^2 + a^2) in their place and the difference, -pi a per root pair, is added
/// in closed form.
inline IntegralReport bode_log_integral(const RationalTF& tf, double omega_max = 1e3, std::size_t n_points = 2000,
                                        bool normalize_at_infinity = true) {
  constexpr double pi = std::numbers::pi;
  constexpr double w0 = 1e-4;
  if (!(omega_max > 10.0 * w0)) throw ValueError("bode_log_integral: omega_max must exceed 1e-3");
  if (n_points < 16) throw ValueError("bode_log_integral: need at least 16 points");
  if (!tf.is_proper()) throw ValueError("bode_log_integral: argument must be proper");
  const RationalTF f = tf.simplify();
  const double finf = f.at_infinity();
  const double ref = normalize_at_infinity ? finf : 1.0;
  if (ref == 0.0) throw ValueError("bode_log_integral: f(inf) = 0, ln|f/f(inf)| is undefined");
  if (std::abs(std::abs(finf / ref) - 1.0) > 1e-12)
    throw ValueError("bode_log_integral: |f(inf)/ref| != 1, the integral diverges");

  IntegralReport rep;
  rep.omega_max = omega_max;

  // Expansion f/f_inf = 1 + a1/s + a2/s^2 + ...
  const int n = f.den().degree();
  const double nn = f.num()[n], dn = f.den()[n];
  const double al1 = f.num()[n - 1] / nn, al2 = f.num()[n - 2] / nn;
  const double be1 = f.den()[n - 1] / dn, be2 = f.den()[n - 2] / dn;
  const double a1 = al1 - be1;
  const double a2 = al2 - be2 - be1 * a1;
  rep.relative_degree_limit_term = 0.5 * pi * a1;

  auto axis_split = [&](const Polynomial& p, int sign, Polynomial& deflated, std::vector<double>& axis,
                        double& csym_extra) {
    deflated = p;
    if (p.degree() <= 0) return;
    for (const cplx& r : p.roots()) {
      if (r.real() > 1e-9 * std::max(1.0, std::abs(r))) (sign > 0 ? rep.rhp_zero_sum : rep.rhp_pole_sum) += r.real();
      const bool on_axis = std::abs(r.real()) <= 1e-9 * std::max(1.0, std::abs(r));
      if (on_axis && r.imag() > 1e-9) {
        const double a = r.imag();
        deflated = deflated.divmod(Polynomial{a * a, 0.0, 1.0}).first;
        rep.axis_correction += -sign * pi * a;
        rep.axis_frequencies.push_back(a);
        axis.push_back(a);
        csym_extra += sign * 2.0 * a * a;
      }
    }
  };
  Polynomial num_d, den_d;
  std::vector<double> axis_num, axis_den;
  double csym_extra = 0.0;
  axis_split(f.num(), +1, num_d, axis_num, csym_extra);
  axis_split(f.den(), -1, den_d, axis_den, csym_extra);
  rep.rhs = rep.relative_degree_limit_term + pi * rep.rhp_zero_sum - pi * rep.rhp_pole_sum;
  rep.tail_c_symbolic = 0.5 * a1 * a1 - a2 + csym_extra;

  auto g = [&](double w) {
    const cplx s(0.0, w);
    double v = std::log(std::abs(num_d(s) / den_d(s) / ref));
    for (double a : axis_num) v += std::log(w * w + a * a);
    for (double a : axis_den) v -= std::log(w * w + a * a);
    if (!std::isfinite(v)) throw NumericError("bode_log_integral: non-finite integrand at w=" + std::to_string(w));
    return v;
  };

  const double u0 = std::log(w0), u1 = std::log(omega_max);
  const double du = (u1 - u0) / static_cast<double>(n_points - 1);
  std::vector<double> terms(n_points);
  std::vector<double> ws(n_points), gs(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double w = std::exp(u0 + du * static_cast<double>(i));
    ws[i] = w;
    gs[i] = g(w);
    const double wt = (i == 0 || i + 1 == n_points) ? 0.5 : 1.0;
    terms[i] = wt * gs[i] * w * du;
  }
  rep.quadrature = detail::pairwise_sum(terms.data(), terms.size());

  const int m0 = f.num().origin_multiplicity() - f.den().origin_multiplicity();
  rep.head = w0 * gs.front() - static_cast<double>(m0) * w0;

  // Least-squares fit g ~ c / w^2 over the last decade.
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n_points; ++i) {
    if (ws[i] < omega_max / 10.0) continue;
    const double x = 1.0 / (ws[i] * ws[i]);
    sxx += x * x;
    sxy += x * gs[i];
  }
  rep.tail_c_fit = sxx > 0.0 ? sxy / sxx : 0.0;
  rep.tail_estimate = rep.tail_c_fit / omega_max;
  const double cs = rep.tail_c_symbolic;
  if (std::abs(rep.tail_c_fit - cs) > 0.05 * std::max(std::abs(cs), 1e-12) &&
      std::abs(rep.tail_c_fit - cs) / omega_max > 1e-9)
    rep.warning = "tail constant fit " + std::to_string(rep.tail_c_fit) + " disagrees with symbolic " +
                  std::to_string(cs) + " by more than 5%";
  rep.value = rep.head + rep.quadrature + rep.tail_estimate + rep.axis_correction;
  return rep;
}

enum class Fn { S, T, P, M };
enum class Kind { Pole, Zero };

struct ConstraintRecord {
  cplx location;
  Kind kind;
  Fn function;
  double expected;
  cplx observed;
  bool pass;
};

using ConstraintReport = std::vector<ConstraintRecord>;

/// Interpolation values at open-RHP plant poles/zeros: S, P vanish at poles and equal 1 at
/// zeros; T, M the reverse.
inline ConstraintReport interpolation_check(const RationalTF& f, Fn fn, const std::vector<cplx>& locations,
                                            const std::vector<Kind>& kinds, double tol = 1e-6) {
  if (locations.size() != kinds.size()) throw DimensionError("interpolation_check: locations/kinds length mismatch");
  ConstraintReport rep;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const cplx s = locations[i];
    if (!(s.real() > 0.0)) throw ValueError("interpolation_check: locations must lie in the open RHP");
    const bool vanishes_at_pole = fn == Fn::S || fn == Fn::P;
    const double expected = (kinds[i] == Kind::Pole) == vanishes_at_pole ? 0.0 : 1.0;
    const cplx obs = f(s);
    rep.push_back({s, kinds[i], fn, expected, obs, std::abs(obs - expected) < tol});
  }
  return rep;
}

struct Band {
  bool empty = true;
  double lo = 0.0, hi = 0.0;
  std::size_t first = 0, last = 0;
};

/// Longest contiguous run of grid points where every curve has magnitude strictly below 1.
inline Band attenuation_band(const std::vector<std::pair<std::string, RationalTF>>& curves,
                             const FrequencyGrid& grid) {
  if (curves.empty()) throw ValueError("attenuation_band: no curves");
  std::vector<double> mx(grid.size(), 0.0);
  for (const auto& [label, tf] : curves) {
    const auto r = freq_response(tf, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) mx[i] = std::max(mx[i], std::abs(r[i]));
  }
  Band best;
  std::size_t i = 0;
  while (i < grid.size()) {
    if (!(mx[i] < 1.0)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < grid.size() && mx[j + 1] < 1.0) ++j;
    if (best.empty || j - i > best.last - best.first) {
      best.empty = false;
      best.first = i;
      best.last = j;
    }
    i = j + 1;
  }
  if (!best.empty) {
    best.lo = grid[best.first];
    best.hi = grid[best.last];
  }
  return best;
}

/// sup over grid points outside the band of max_i |curve_i(jw)|.
inline double sup_outside(const std::vector<std::pair<std::string, RationalTF>>& curves, const FrequencyGrid& grid,
                          const Band& band) {
  double sup = 0.0;
  for (const auto& [label, tf] : curves) {
    const auto r = freq_response(tf, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (band.empty || i < band.first || i > band.last) sup = std::max(sup, std::abs(r[i]));
  }
  return sup;
}

}  // namespace podlim::sens
