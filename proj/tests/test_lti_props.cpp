#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "podlim/lti.hpp"

using namespace podlim;

namespace {

StateSpace random_stable(std::mt19937& rng, int n, int m = 1, int p = 1, bool with_d = false) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat R = Mat::NullaryExpr(n, n, [&] { return N(rng); });
  double amax = -1e300;
  for (const cplx& l : eigenvalues(R)) amax = std::max(amax, l.real());
  const Mat A = R - (amax + 0.3 + std::uniform_real_distribution<double>(0, 1)(rng)) * Mat::Identity(n, n);
  const Mat B = Mat::NullaryExpr(n, m, [&] { return N(rng); });
  const Mat C = Mat::NullaryExpr(p, n, [&] { return N(rng); });
  const Mat D = with_d ? Mat(Mat::NullaryExpr(p, m, [&] { return N(rng); })) : Mat(Mat::Zero(p, m));
  return {A, B, C, D};
}

/// Impulse-response energy by exact stepping and composite Simpson.
double impulse_energy_norm(const StateSpace& s) {
  double slow = 1e300;
  for (const cplx& l : eigenvalues(s.A)) slow = std::min(slow, -l.real());
  const double T = 40.0 / slow;
  const int n = 20000;
  const double h = T / n;
  const Mat Phi = (s.A * h).exp();
  Mat X = s.B;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double f = (s.C * X).squaredNorm();
    acc += f * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
    X = Phi * X;
  }
  return std::sqrt(acc * h / 3.0);
}

RationalTF random_tf(std::mt19937& rng, int nd, int nn) {
  std::vector<cplx> p, z;
  std::uniform_real_distribution<double> U(0.2, 3.0);
  for (int i = 0; i < nd; ++i) p.emplace_back(-U(rng), 0.0);
  for (int i = 0; i < nn; ++i) z.emplace_back(U(rng) - 1.5, 0.0);
  return {2.0 * Polynomial::from_roots(z), Polynomial::from_roots(p)};
}

}  // namespace

TEST(LtiProperties, StateSpaceAndTransferFunctionAgree) {
  std::mt19937 rng(7);
  const FrequencyGrid g = FrequencyGrid::logspace(1e-2, 1e2, 100);
  for (int trial = 0; trial < 10; ++trial) {
    const StateSpace s = random_stable(rng, 2 + trial % 5, 2, 2, true);
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index o = 0; o < 2; ++o) {
        const auto a = freq_response(s, i, o, g);
        const auto b = freq_response(ss_to_tf(s, i, o), g);
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-8 * std::abs(a[k]) + 1e-12);
      }
  }
}

TEST(LtiProperties, ClosedLoopPolesSolveCharacteristicPolynomial) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const RationalTF G = random_tf(rng, 3, 1), K = random_tf(rng, 2, 1);
    const Polynomial chi = G.den() * K.den() + G.num() * K.num();
    double scale = 0.0;
    for (double c : chi.coeffs()) scale = std::max(scale, std::abs(c));
    for (const cplx& p : poles(feedback(G, K))) {
      double pw = 0.0;
      for (int k = 0; k <= chi.degree(); ++k) pw += std::abs(chi[k]) * std::pow(std::abs(p), k);
      EXPECT_LT(std::abs(chi(p)), 1e-8 * std::max(pw, scale));
    }
  }
}

TEST(LtiProperties, H2NormInvariantUnderSimilarity) {
  std::mt19937 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const StateSpace s = random_stable(rng, 4);
    Mat T = Mat::NullaryExpr(4, 4, [&] { return N(rng); }) + 3.0 * Mat::Identity(4, 4);
    const Mat Ti = T.inverse();
    const StateSpace t(Ti * s.A * T, Ti * s.B, s.C * T, s.D);
    EXPECT_NEAR(h2_norm(s), h2_norm(t), 1e-8 * h2_norm(s));
  }
}

TEST(LtiProperties, H2NormMatchesImpulseEnergy) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const StateSpace s = random_stable(rng, 3 + trial, 2, 2);
    const double a = h2_norm(s), b = impulse_energy_norm(s);
    EXPECT_LT(std::abs(a - b), 0.005 * b) << "trial " << trial;
  }
}

TEST(LtiProperties, SimplifyIdempotentAndResponsePreserving) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> W(0.01, 100.0);
  for (int trial = 0; trial < 10; ++trial) {
    // Plant a common factor so cancellation has something to do.
    const Polynomial common = Polynomial{0.7, 1.0};
    const RationalTF base = random_tf(rng, 3, 2);
    const RationalTF raw(base.num() * common, base.den() * common);
    const RationalTF s1 = raw.simplify(), s2 = s1.simplify();
    EXPECT_EQ(s1.num().degree(), s2.num().degree());
    EXPECT_EQ(s1.den().degree(), s2.den().degree());
    EXPECT_EQ(s1.den().degree(), 3);
    for (int k = 0; k < 100; ++k) {
      const cplx jw(0.0, W(rng));
      EXPECT_LT(std::abs(raw(jw) - s1(jw)), 1e-10 * std::max(1.0, std::abs(raw(jw))));
    }
  }
}

TEST(Lsim, FirstOrderStep) {
  const StateSpace s(Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0),
                     Mat::Zero(1, 1));
  const std::vector<Vec> u(501, Vec::Ones(1));
  const auto y = lsim(s, u, 0.01);
  for (std::size_t k = 0; k < y.size(); k += 50) EXPECT_NEAR(y[k](0), 1.0 - std::exp(-0.01 * double(k)), 1e-9);
}

TEST(CloseLoop, ProportionalIntegrator) {
  // 1/s under u = -2 y has its pole at -2.
  const StateSpace g(Mat::Zero(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1));
  const StateSpace k(Mat::Zero(0, 0), Mat::Zero(0, 1), Mat::Zero(1, 0), Mat::Constant(1, 1, 2.0));
  const auto p = poles(close_loop(g, k, 0, 0));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0].real(), -2.0, 1e-14);
}
