#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "podlim/two_machine.hpp"

using namespace podlim;

namespace {

TwoMachineParams ex2() {
  TwoMachineParams p;
  p.M1 = p.M2 = 2.0;
  p.X1 = 0.1;
  p.X2 = 0.9;
  return p;
}

std::vector<cplx> sorted(std::vector<cplx> v) {
  std::sort(v.begin(), v.end(), [](cplx a, cplx b) { return a.imag() < b.imag(); });
  return v;
}

}  // namespace

TEST(TwoMachine, SpectrumOfUndampedSystem) {
  // Omega^2 = 2/(M Xsum) = 1
  const auto ev = sorted(eigenvalues(two_machine::build_state_space(ex2()).A));
  ASSERT_EQ(ev.size(), 4u);
  EXPECT_LT(std::abs(ev[0] - cplx(0.0, -1.0)), 1e-9);
  EXPECT_LT(std::abs(ev[1]), 1e-9);
  EXPECT_LT(std::abs(ev[2]), 1e-9);
  EXPECT_LT(std::abs(ev[3] - cplx(0.0, 1.0)), 1e-9);
  EXPECT_NEAR(two_machine::interarea_frequency(ex2()), 1.0, 1e-15);
}

TEST(TwoMachine, ZeroFrequencies) {
  const auto [q1, q2] = two_machine::zero_frequencies(ex2());
  EXPECT_NEAR(q1, std::sqrt(1.0 / 1.8), 1e-12);
  EXPECT_NEAR(q1, 0.745356, 1e-6);
  EXPECT_NEAR(q2, 2.236068, 1e-6);
}

TEST(TwoMachine, ZeroFrequenciesAreZerosOfThetaChannels) {
  const auto t = two_machine::performance_tfs(ex2());
  const auto [q1, q2] = two_machine::zero_frequencies(ex2());
  EXPECT_LT(std::abs(t.Gyd1.num()(cplx(0.0, q1))), 1e-12);
  EXPECT_LT(std::abs(t.Gyd2.num()(cplx(0.0, q2))), 1e-12);
}

TEST(TwoMachine, ClosedFormsMatchStateSpace) {
  const TwoMachineParams p = ex2();
  const auto t = two_machine::performance_tfs(p);
  const FrequencyGrid g = FrequencyGrid::logspace(1e-2, 1e2, 200);
  const std::vector<std::pair<RationalTF, RationalTF>> pairs{
      {t.Gzd1, two_machine::channel(p, "dP1", "z")},   {t.Gzd2, two_machine::channel(p, "dP2", "z")},
      {t.Gzu, two_machine::channel(p, "Pu", "z")},     {t.Gyd1, two_machine::channel(p, "dP1", "theta")},
      {t.Gyd2, two_machine::channel(p, "dP2", "theta")}, {t.Gyu, two_machine::channel(p, "Pu", "theta")}};
  for (const auto& [closed, ss] : pairs) {
    const auto a = freq_response(closed, g), b = freq_response(ss, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (std::abs(g[k] - 1.0) < 1e-3) continue;  // resonance
      EXPECT_LT(std::abs(a[k] - b[k]), 1e-8 * std::max(1.0, std::abs(a[k])));
    }
  }
}

TEST(TwoMachine, GzuCoefficientAndSign) {
  const auto t = two_machine::performance_tfs(ex2());
  // (X2 - X1)/(M Xsum) = 0.4
  EXPECT_NEAR(t.Gzu(cplx(0.0, 2.0)).imag(), 0.4 * 2.0 / (1.0 - 4.0), 1e-14);
  EXPECT_NEAR(t.Gzu(cplx(0.0, 2.0)).real(), 0.0, 1e-14);
}

TEST(TwoMachine, DisturbanceChannelsToSpeedDifferenceCancel) {
  const auto t = two_machine::performance_tfs(ex2());
  EXPECT_TRUE((t.Gzd1 + t.Gzd2).simplify().is_zero());
}

TEST(TwoMachine, ControlHasNoEffectWhenBusIsElectricalMidpoint) {
  TwoMachineParams p = ex2();
  p.X1 = p.X2 = 0.5;
  EXPECT_TRUE(two_machine::performance_tfs(p).Gzu.is_zero());
  for (double w : {0.3, 2.0, 7.0}) EXPECT_LT(std::abs(two_machine::channel(p, "Pu", "z")(cplx(0.0, w))), 1e-12);
}

TEST(TwoMachine, ZeroOrderingAcrossGeometries) {
  for (double x1 : {0.01, 0.1, 0.3, 0.49}) {
    TwoMachineParams p = ex2();
    p.X1 = x1;
    p.X2 = 1.0 - x1;
    const auto [q1, q2] = two_machine::zero_frequencies(p);
    const double W = two_machine::interarea_frequency(p);
    EXPECT_GE(q1, W / std::sqrt(2.0) * (1.0 - 1e-12));
    EXPECT_LT(q1, q2);
    EXPECT_LT(q1, W);
    EXPECT_GT(q2, W);
  }
}

TEST(TwoMachine, DampingMovesPairIntoLeftHalfPlane) {
  TwoMachineParams p = ex2();
  p.D1 = p.D2 = 0.1;
  int oscillatory = 0;
  for (const cplx& l : eigenvalues(two_machine::build_state_space(p).A)) {
    EXPECT_LE(l.real(), 1e-12);
    if (std::abs(l.imag()) > 0.5) {
      ++oscillatory;
      EXPECT_NEAR(l.real(), -0.1 / (2.0 * 2.0), 1e-9);
    }
  }
  EXPECT_EQ(oscillatory, 2);
  EXPECT_THROW(two_machine::performance_tfs(p), UnsupportedError);
}

TEST(TwoMachine, ThetaDotIsDerivativeOfTheta) {
  const TwoMachineParams p = ex2();
  for (const char* in : {"dP1", "dP2"}) {
    const RationalTF th = two_machine::channel(p, in, "theta"), thd = two_machine::channel(p, in, "theta_dot");
    for (double w : {0.2, 0.8, 3.0}) {
      const cplx s(0.0, w);
      EXPECT_LT(std::abs(thd(s) - s * th(s)), 1e-10 * std::abs(thd(s)));
    }
  }
  EXPECT_THROW(two_machine::channel(p, "Pu", "theta_dot"), UnsupportedError);
}

TEST(TwoMachine, ParameterValidation) {
  TwoMachineParams p = ex2();
  p.M1 = 0.0;
  EXPECT_THROW(two_machine::build_state_space(p), ParameterError);
  p = ex2();
  p.X2 = -1.0;
  EXPECT_THROW(two_machine::build_state_space(p), ParameterError);
  p = ex2();
  p.D1 = -0.1;
  EXPECT_THROW(two_machine::build_state_space(p), ParameterError);
  p = ex2();
  p.M2 = 3.0;
  EXPECT_THROW(two_machine::performance_tfs(p), UnsupportedError);
  p = ex2();
  std::swap(p.X1, p.X2);
  EXPECT_THROW(two_machine::zero_frequencies(p), ParameterError);
}

TEST(TwoMachine, OmegaOverride) {
  TwoMachineParams p = ex2();
  p.Omega = 2.5;
  EXPECT_DOUBLE_EQ(two_machine::interarea_frequency(p), 2.5);
}
