#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "podlim/errors.hpp"
#include "podlim/polynomial.hpp"

namespace podlim {

/// Default relative distance below which a numerator and a denominator root cancel.
inline constexpr double kCancelTol = 1e-7;

/// Relative size below which low-order coefficients present on both sides count as zero.
inline constexpr double kOriginNoise = 1e-12;

/// Scalar rational transfer function num(s)/den(s).
class RationalTF {
 public:
  RationalTF() : num_(Polynomial()), den_(Polynomial::constant(1.0)) {}
  RationalTF(Polynomial num, Polynomial den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw ValueError("transfer function denominator is identically zero");
  }
  static RationalTF gain(double k) { return {Polynomial::constant(k), Polynomial::constant(1.0)}; }
  static RationalTF s() { return {Polynomial{0.0, 1.0}, Polynomial::constant(1.0)}; }

  const Polynomial& num() const { return num_; }
  const Polynomial& den() const { return den_; }

  bool is_zero() const { return num_.is_zero(); }
  bool is_proper() const { return num_.is_zero() || num_.degree() <= den_.degree(); }
  bool is_strictly_proper() const { return num_.is_zero() || num_.degree() < den_.degree(); }
  int relative_degree() const { return den_.degree() - num_.degree(); }

  cplx operator()(cplx s) const { return num_(s) / den_(s); }

  /// lim_{s->inf} of the function; requires properness.
  double at_infinity() const {
    if (!is_proper()) throw ValueError("improper transfer function has no finite value at infinity");
    if (num_.is_zero() || num_.degree() < den_.degree()) return 0.0;
    return num_.leading() / den_.leading();
  }

  /// Cancel common numerator/denominator roots and make the denominator monic.
  RationalTF simplify(double tol = kCancelTol) const {
    if (num_.is_zero()) return {Polynomial(), Polynomial::constant(1.0)};
    // Common factors s^k whose low-order coefficients are rounding noise on both sides.
    auto low_noise = [](const Polynomial& p) {
      double m = 0.0;
      for (double c : p.coeffs()) m = std::max(m, std::abs(c));
      int k = 0;
      while (k < p.degree() && std::abs(p[k]) <= kOriginNoise * m) ++k;
      return k;
    };
    if (const int k = std::min(low_noise(num_), low_noise(den_)); k > 0) {
      std::vector<double> a(num_.coeffs().begin() + k, num_.coeffs().end());
      std::vector<double> b(den_.coeffs().begin() + k, den_.coeffs().end());
      return RationalTF(Polynomial(std::move(a)), Polynomial(std::move(b))).simplify(tol);
    }
    std::vector<cplx> zn = num_.degree() > 0 ? num_.roots() : std::vector<cplx>{};
    std::vector<cplx> zd = den_.degree() > 0 ? den_.roots() : std::vector<cplx>{};
    std::vector<bool> used(zd.size(), false);
    std::vector<cplx> common;
    for (const cplx& z : zn) {
      std::size_t best = zd.size();
      double best_dist = 0.0;
      for (std::size_t j = 0; j < zd.size(); ++j) {
        if (used[j]) continue;
        const double d = std::abs(z - zd[j]);
        if (d < tol * std::max(1.0, std::abs(z)) && (best == zd.size() || d < best_dist)) {
          best = j;
          best_dist = d;
        }
      }
      if (best != zd.size()) {
        used[best] = true;
        common.push_back(z);
      }
    }
    Polynomial n = num_, d = den_;
    if (!common.empty()) {
      const Polynomial c = Polynomial::from_roots(common);
      n = n.divmod(c).first;
      d = d.divmod(c).first;
    }
    const double lead = d.leading();
    return {(1.0 / lead) * n, (1.0 / lead) * d};
  }

  friend RationalTF operator*(const RationalTF& a, const RationalTF& b) {
    return {a.num_ * b.num_, a.den_ * b.den_};
  }
  friend RationalTF operator/(const RationalTF& a, const RationalTF& b) {
    if (b.num_.is_zero()) throw ValueError("division by the zero transfer function");
    return {a.num_ * b.den_, a.den_ * b.num_};
  }
  friend RationalTF operator+(const RationalTF& a, const RationalTF& b) {
    if (a.den_ == b.den_) return {a.num_ + b.num_, a.den_};
    return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
  }
  friend RationalTF operator-(const RationalTF& a) { return {-a.num_, a.den_}; }
  friend RationalTF operator-(const RationalTF& a, const RationalTF& b) { return a + (-b); }
  friend RationalTF operator*(double k, const RationalTF& a) { return {k * a.num_, a.den_}; }

 private:
  Polynomial num_;
  Polynomial den_;
};

/// Coprime product G2*G1.
inline RationalTF series(const RationalTF& g1, const RationalTF& g2) { return (g1 * g2).simplify(); }

/// Coprime sum G1+G2.
inline RationalTF parallel(const RationalTF& g1, const RationalTF& g2) { return (g1 + g2).simplify(); }

/// G(1+GK)^-1 under u = -K y.
inline RationalTF feedback(const RationalTF& g, const RationalTF& k) {
  const Polynomial num = g.num() * k.den();
  const Polynomial den = g.den() * k.den() + g.num() * k.num();
  double scale = 0.0;
  for (double c : (g.den() * k.den()).coeffs()) scale = std::max(scale, std::abs(c));
  for (double c : (g.num() * k.num()).coeffs()) scale = std::max(scale, std::abs(c));
  double dmax = 0.0;
  for (double c : den.coeffs()) dmax = std::max(dmax, std::abs(c));
  if (dmax <= 1e-14 * scale) throw ValueError("algebraic loop: 1 + G K is identically zero");
  return RationalTF(num, den).simplify();
}

}  // namespace podlim
