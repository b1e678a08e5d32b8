#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"

namespace podlim {

using cplx = std::complex<double>;

namespace detail {

/// Parlett-Reinsch diagonal balancing with powers of two; returns the scaled copy.
inline Eigen::MatrixXd balanced(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return a;
}

/// Sort by (real, imag) so sequence-valued results are deterministic.
inline void sort_complex(std::vector<cplx>& v) {
  std::sort(v.begin(), v.end(), [](const cplx& x, const cplx& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
}

/// Replace every cluster of mutually close roots by its centroid.
///
/// A root of multiplicity m computed from a perturbed matrix splits into m
/// points on a circle of radius ~eps^(1/m); their mean is accurate to ~eps.
inline void merge_clusters(std::vector<cplx>& roots, double rel_tol, double abs_scale = 1.0) {
  const std::size_t n = roots.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double scale = std::max({abs_scale, std::abs(roots[i]), std::abs(roots[j])});
      if (std::abs(roots[i] - roots[j]) < rel_tol * scale) parent[find(i)] = find(j);
    }
  }
  std::vector<cplx> sum(n, 0.0);
  std::vector<int> count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[find(i)] += roots[i];
    ++count[find(i)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (count[r] > 1) roots[i] = sum[r] / static_cast<double>(count[r]);
  }
}

inline constexpr double kRootClusterTol = 1e-5;

}  // namespace detail

/// Real polynomial with coefficients in ascending powers of s.
///
/// The stored vector never has a zero leading coefficient except for the zero
/// polynomial, which is represented as a single 0.
class Polynomial {
 public:
  Polynomial() : c_{0.0} {}
  Polynomial(std::initializer_list<double> ascending) : c_(ascending) { trim(); }
  explicit Polynomial(std::vector<double> ascending) : c_(std::move(ascending)) { trim(); }

  static Polynomial constant(double v) { return Polynomial({v}); }
  static Polynomial monomial(int k, double c = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(k) + 1, 0.0);
    v.back() = c;
    return Polynomial(std::move(v));
  }

  /// gain * prod (s - r). Complex roots must come in conjugate pairs.
  static Polynomial from_roots(std::span<const cplx> roots, double gain = 1.0) {
    std::vector<cplx> acc{1.0};
    for (const cplx& r : roots) {
      std::vector<cplx> next(acc.size() + 1, 0.0);
      for (std::size_t i = 0; i < acc.size(); ++i) {
        next[i + 1] += acc[i];
        next[i] -= acc[i] * r;
      }
      acc = std::move(next);
    }
    std::vector<double> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = gain * acc[i].real();
    return Polynomial(std::move(out));
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.size() == 1 && c_[0] == 0.0; }
  double leading() const { return c_.back(); }
  double operator[](int i) const {
    return (i >= 0 && i < static_cast<int>(c_.size())) ? c_[static_cast<std::size_t>(i)] : 0.0;
  }
  const std::vector<double>& coeffs() const& { return c_; }
  std::vector<double> coeffs() && { return std::move(c_); }

  template <class T>
  T operator()(const T& s) const {
    T acc = T(c_.back());
    for (std::size_t i = c_.size() - 1; i-- > 0;) acc = acc * s + T(c_[i]);
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() == 1) return Polynomial();
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
    return Polynomial(std::move(d));
  }

  /// Number of exactly vanishing low-order coefficients (roots at the origin).
  int origin_multiplicity() const {
    if (is_zero()) return 0;
    int k = 0;
    while (c_[static_cast<std::size_t>(k)] == 0.0) ++k;
    return k;
  }

  /// Zero coefficients whose magnitude is below rel * max|c|.
  Polynomial chopped(double rel) const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    std::vector<double> v = c_;
    for (double& x : v)
      if (std::abs(x) <= rel * m) x = 0.0;
    return Polynomial(std::move(v));
  }

  /// Roots via eigenvalues of the balanced companion matrix, with multiplicity,
  /// sorted by (real, imag).
  std::vector<cplx> roots() const {
    if (is_zero()) throw ValueError("roots of the zero polynomial are undefined");
    std::vector<cplx> out;
    const int z = origin_multiplicity();
    out.assign(static_cast<std::size_t>(z), cplx(0.0, 0.0));
    const int n = degree() - z;
    if (n > 0) {
      Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
      const double lead = c_.back();
      for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
      for (int i = 0; i < n; ++i) comp(i, n - 1) = -c_[static_cast<std::size_t>(i + z)] / lead;
      Eigen::EigenSolver<Eigen::MatrixXd> es(detail::balanced(comp), false);
      if (es.info() != Eigen::Success)
        throw NumericError("companion eigenvalue iteration did not converge (degree " +
                           std::to_string(n) + ")");
      std::vector<cplx> rest(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) rest[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
      detail::merge_clusters(rest, detail::kRootClusterTol);
      out.insert(out.end(), rest.begin(), rest.end());
    }
    detail::sort_complex(out);
    return out;
  }

  /// Quotient and remainder of polynomial long division.
  std::pair<Polynomial, Polynomial> divmod(const Polynomial& d) const {
    if (d.is_zero()) throw ValueError("polynomial division by zero");
    if (degree() < d.degree()) return {Polynomial(), *this};
    std::vector<double> r = c_;
    const int nq = degree() - d.degree();
    std::vector<double> q(static_cast<std::size_t>(nq) + 1, 0.0);
    for (int k = nq; k >= 0; --k) {
      const double f = r[static_cast<std::size_t>(k + d.degree())] / d.leading();
      q[static_cast<std::size_t>(k)] = f;
      for (int j = 0; j <= d.degree(); ++j) r[static_cast<std::size_t>(k + j)] -= f * d[j];
    }
    r.resize(static_cast<std::size_t>(std::max(d.degree(), 1)));
    return {Polynomial(std::move(q)), Polynomial(std::move(r))};
  }

  Polynomial operator-() const {
    std::vector<double> v = c_;
    for (double& x : v) x = -x;
    return Polynomial(std::move(v));
  }
  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> v(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i) v[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) v[i] += b.c_[i];
    return Polynomial(std::move(v));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    std::vector<double> v(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) v[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(v));
  }
  friend Polynomial operator*(double k, const Polynomial& a) { return Polynomial::constant(k) * a; }
  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  void trim() {
    if (c_.empty()) c_.push_back(0.0);
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
  }

  std::vector<double> c_;
};

}  // namespace podlim
