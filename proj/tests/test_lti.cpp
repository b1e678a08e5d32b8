#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "podlim/lti.hpp"

using namespace podlim;

namespace {

Mat m1(double v) { return Mat::Constant(1, 1, v); }

}  // namespace

TEST(Polynomial, TrimsLeadingZeros) {
  Polynomial p{1.0, 2.0, 0.0, 0.0};
  EXPECT_EQ(p.degree(), 1);
  EXPECT_EQ(Polynomial{}.degree(), 0);
  EXPECT_TRUE(Polynomial({0.0, 0.0}).is_zero());
}

TEST(Polynomial, RootsOfRepeatedFactor) {
  // (s+1)^3 (s^2+1)
  const std::vector<cplx> r0{-1.0, -1.0, -1.0, cplx(0, 1), cplx(0, -1)};
  const auto r = Polynomial::from_roots(r0).roots();
  ASSERT_EQ(r.size(), 5u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(r[static_cast<std::size_t>(i)] + 1.0), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(r[3] - cplx(0, -1)), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(r[4] - cplx(0, 1)), 0.0, 1e-10);
}

TEST(Polynomial, DivmodRoundTrip) {
  const Polynomial a{1, 2, 3, 4, 5}, b{-1, 1};
  const auto [q, r] = a.divmod(b);
  const Polynomial back = q * b + r;
  for (int i = 0; i <= 4; ++i) EXPECT_NEAR(back[i], a[i], 1e-12);
}

TEST(Poles, RotationMatrix) {
  Mat A(2, 2);
  A << 0, 1, -1, 0;
  const auto p = poles(StateSpace(A, Mat::Zero(2, 1), Mat::Zero(1, 2), Mat::Zero(1, 1)));
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(std::abs(p[0] - cplx(0, -1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(p[1] - cplx(0, 1)), 0.0, 1e-12);
}

TEST(Poles, Integrator) {
  const auto p = poles(StateSpace(m1(0), m1(1), m1(1), m1(0)));
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], cplx(0.0, 0.0));
}

TEST(Poles, NonSquareRejected) {
  EXPECT_THROW(StateSpace(Mat::Zero(2, 3), Mat::Zero(2, 1), Mat::Zero(1, 3), Mat::Zero(1, 1)), DimensionError);
}

TEST(Zeros, Examples) {
  const auto z = zeros(RationalTF({0.5556, 0, 1}, {0, 0, 0, 1}));
  ASSERT_EQ(z.size(), 2u);
  EXPECT_NEAR(std::abs(z[1].imag()), std::sqrt(0.5556), 1e-9);
  const auto z2 = zeros(RationalTF({-1, 1}, {1, 1}));
  ASSERT_EQ(z2.size(), 1u);
  EXPECT_NEAR(z2[0].real(), 1.0, 1e-12);
  EXPECT_TRUE(zeros(RationalTF({1}, {1, 1})).empty());
  EXPECT_THROW(zeros(RationalTF({0}, {1, 1})), ValueError);
}

TEST(SsToTf, HandExamples) {
  const auto integ = ss_to_tf(StateSpace(m1(0), m1(1), m1(1), m1(0)), 0, 0);
  EXPECT_EQ(integ.num(), Polynomial({1}));
  EXPECT_EQ(integ.den(), Polynomial({0, 1}));
  const auto g = ss_to_tf(StateSpace(m1(-1), m1(1), m1(1), m1(1)), 0, 0);
  EXPECT_NEAR(g.num()[0], 2.0, 1e-12);
  EXPECT_NEAR(g.num()[1], 1.0, 1e-12);
  EXPECT_NEAR(g.den()[0], 1.0, 1e-12);
  EXPECT_THROW(ss_to_tf(StateSpace(m1(-1), m1(1), m1(1), m1(1)), 1, 0), DimensionError);
}

TEST(FreqResponse, Examples) {
  const FrequencyGrid g({1.0});
  EXPECT_NEAR(std::abs(freq_response(RationalTF({1}, {0, 1}), g)[0] - cplx(0, -1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(freq_response(RationalTF({1}, {1, 1}), g)[0] - cplx(0.5, -0.5)), 0.0, 1e-15);
  EXPECT_THROW(freq_response(RationalTF({1}, {1, 0, 1}), g), SingularityError);
}

TEST(Feedback, Examples) {
  const RationalTF g({1}, {0, 1});
  const auto t = feedback(g, RationalTF::gain(1));
  EXPECT_NEAR(t.den()[0], 1.0, 1e-14);
  const auto o = feedback(g, RationalTF::gain(0));
  EXPECT_EQ(o.den(), Polynomial({0, 1}));
  EXPECT_THROW(feedback(RationalTF::gain(1), RationalTF::gain(-1)), ValueError);
}

TEST(SeriesParallel, Examples) {
  const auto one = series(RationalTF({1}, {0, 1}), RationalTF::s());
  EXPECT_EQ(one.num(), Polynomial({1}));
  EXPECT_EQ(one.den(), Polynomial({1}));
  const auto two = parallel(RationalTF({1}, {1, 1}), RationalTF({1}, {1, 1}));
  EXPECT_NEAR(two.num()[0], 2.0, 1e-14);
  EXPECT_EQ(two.den().degree(), 1);
}

TEST(H2Norm, ScalarExamples) {
  EXPECT_NEAR(h2_norm(StateSpace(m1(-1), m1(1), m1(1), m1(0))), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(h2_norm(StateSpace(m1(-2), m1(1), m1(1), m1(0))), 0.5, 1e-14);
  EXPECT_THROW(h2_norm(StateSpace(m1(1), m1(1), m1(1), m1(0))), StabilityError);
  EXPECT_THROW(h2_norm(StateSpace(m1(-1), m1(1), m1(1), m1(1))), ValueError);
}
