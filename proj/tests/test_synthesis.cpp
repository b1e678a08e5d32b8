#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "podlim/design.hpp"
#include "podlim/scenarios.hpp"
#include "podlim/synthesis.hpp"

using namespace podlim;

namespace {

constexpr double pi = std::numbers::pi;

/// x' = -x + w1 + u, e = (x, u), y = x + w2.
StateSpace scalar_plant() {
  Mat A(1, 1), B(1, 3), C(3, 1), D = Mat::Zero(3, 3);
  A << -1.0;
  B << 1.0, 0.0, 1.0;
  C << 1.0, 0.0, 1.0;
  D(1, 2) = 1.0;
  D(2, 1) = 1.0;
  return {A, B, C, D};
}

StateSpace random_plant(std::mt19937& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 3;
  Mat A = Mat::NullaryExpr(n, n, [&] { return N(rng); });
  Mat B(n, 3), C(3, n), D = Mat::Zero(3, 3);
  B << Mat::NullaryExpr(n, 1, [&] { return N(rng); }), Mat::Zero(n, 1), Mat::NullaryExpr(n, 1, [&] { return N(rng); });
  C << Mat::NullaryExpr(1, n, [&] { return N(rng); }), Mat::Zero(1, n), Mat::NullaryExpr(1, n, [&] { return N(rng); });
  D(1, 2) = 1.0;
  D(2, 1) = 0.5;
  return {A, B, C, D};
}

}  // namespace

TEST(H2, ScalarRiccatiOracle) {
  // X^2 + 2X - 1 = 0 for both Riccati equations.
  const auto r = synth::h2_synthesize(scalar_plant());
  const double x = std::sqrt(2.0) - 1.0;
  EXPECT_NEAR(r.X(0, 0), x, 1e-8);
  EXPECT_NEAR(r.Y(0, 0), x, 1e-8);
  EXPECT_NEAR(r.F(0, 0), -x, 1e-8);
  EXPECT_NEAR(r.L(0, 0), -x, 1e-8);
  EXPECT_NEAR(r.closed_loop_norm, std::sqrt(x + x * x * x), 1e-8);
  EXPECT_LT(r.care_residual, 1e-12);
  EXPECT_LT(r.fare_residual, 1e-12);
}

TEST(H2, ClosedLoopNormMatchesIndependentAssembly) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const StateSpace P = random_plant(rng);
    const auto r = synth::h2_synthesize(P);
    // u = -K y assembled by hand: states (x, xk).
    const StateSpace& K = r.controller;
    const Mat B1 = P.B.leftCols(2), B2 = P.B.rightCols(1), C1 = P.C.topRows(2), C2 = P.C.bottomRows(1);
    const Mat D12 = P.D.topRightCorner(2, 1), D21 = P.D.bottomLeftCorner(1, 2);
    const Eigen::Index n = P.n(), nk = K.n();
    Mat A(n + nk, n + nk), B(n + nk, 2), C(2, n + nk);
    A << P.A, -B2 * K.C, K.B * C2, K.A;
    B << B1, K.B * D21;
    C << C1, -D12 * K.C;
    EXPECT_NEAR(r.closed_loop_norm, h2_norm(StateSpace(A, B, C, Mat::Zero(2, 2))), 1e-6);
    EXPECT_NEAR(r.closed_loop_norm * r.closed_loop_norm, r.control_term + r.filter_term,
                1e-8 * r.closed_loop_norm * r.closed_loop_norm);
  }
}

TEST(H2, LocalMinimumUnderControllerPerturbation) {
  std::mt19937 rng(23);
  std::normal_distribution<double> N(0.0, 1.0);
  const StateSpace P = random_plant(rng);
  const auto r = synth::h2_synthesize(P);
  const StateSpace& K = r.controller;
  const double eps = 1e-3;
  for (int d = 0; d < 20; ++d) {
    const Mat dA = Mat::NullaryExpr(K.n(), K.n(), [&] { return N(rng); });
    const Mat dB = Mat::NullaryExpr(K.n(), 1, [&] { return N(rng); });
    const Mat dC = Mat::NullaryExpr(1, K.n(), [&] { return N(rng); });
    const StateSpace Kp(K.A + eps * dA, K.B + eps * dB, K.C + eps * dC, K.D);
    const StateSpace cl = lft(P, Kp, 2, 2);
    ASSERT_TRUE(is_hurwitz(cl.A));
    EXPECT_GE(h2_norm(cl), r.closed_loop_norm * (1.0 - 1e-10)) << "direction " << d;
  }
}

TEST(H2, RejectsIllPosedPlants) {
  StateSpace P = scalar_plant();
  P.D(1, 2) = 0.0;
  EXPECT_THROW(synth::h2_synthesize(P), ValueError);
  P = scalar_plant();
  P.D(2, 1) = 0.0;
  EXPECT_THROW(synth::h2_synthesize(P), ValueError);
  P = scalar_plant();
  P.D(0, 0) = 1.0;
  EXPECT_THROW(synth::h2_synthesize(P), ContractError);
  P = scalar_plant();
  P.B(0, 2) = 0.0;
  P.A(0, 0) = 1.0;
  EXPECT_THROW(synth::h2_synthesize(P), ValueError);
}

TEST(Pss, PhaseCompensationOfReferenceSettings) {
  // T1 = 0.21, T2 = 0.25 at 4.4 rad/s is a slight lag, about -5 degrees.
  const double lead = std::atan(4.4 * 0.21) - std::atan(4.4 * 0.25);
  EXPECT_NEAR(lead * 180.0 / pi, -5.0, 0.5);
}

TEST(Pss, TuningHitsMinusPi) {
  synth::PssDesign d;
  d.Omega1 = 4.1;
  // Residue that needs no lead-lag, then offsets from it.
  const cplx R0 = -1.0 / synth::pss_controller(d)(cplx(0.0, d.Omega1));
  for (const cplx R : {R0 * std::polar(1.0, 0.3), R0 * std::polar(0.2, -1.2), R0 * std::polar(3.0, 1.4)}) {
    std::tie(d.T1, d.T2) = synth::tune_phase_compensation(R, d.Omega1);
    const cplx loop = R * synth::pss_controller(d)(cplx(0.0, d.Omega1));
    EXPECT_LT(std::abs(synth::wrap_angle(std::arg(loop) + pi)), 1e-6);
  }
}

TEST(Pss, ControllerShape) {
  synth::PssDesign d;
  d.k_pss = 2.0;
  d.T1 = 0.3;
  d.T2 = 0.2;
  d.Omega1 = 4.0;
  const RationalTF k = synth::pss_controller(d);
  EXPECT_TRUE(k.is_strictly_proper());
  EXPECT_EQ(k.num().origin_multiplicity(), 2);
  d.T1 = -1.0;
  EXPECT_THROW(synth::pss_controller(d), ParameterError);
}

TEST(Pss, LargeCompensationRejected) {
  synth::PssDesign d;
  d.Omega1 = 4.0;
  const cplx R0 = -1.0 / synth::pss_controller(d)(cplx(0.0, d.Omega1));
  EXPECT_THROW(synth::tune_phase_compensation(R0 * std::polar(1.0, 1.7), 4.0), UnsupportedError);
  EXPECT_THROW(synth::tune_phase_compensation(-R0, 4.0), UnsupportedError);
  EXPECT_THROW(synth::tune_phase_compensation(cplx(0.0, 0.0), 4.0), ValueError);
}

TEST(Pss, FourMachineRootLocusCrossesTenPercent) {
  const auto r = design::design_pss(design::kundur_case());
  EXPECT_LT(r.zeta_open, 0.05);
  EXPECT_NEAR(r.zeta_closed, 0.10, 1e-3);
  EXPECT_TRUE(r.monotone);
  const cplx loop = r.residue * synth::pss_controller(r.design)(cplx(0.0, r.design.Omega1));
  EXPECT_LT(std::abs(synth::wrap_angle(std::arg(loop) + pi)), 1e-6);
  ASSERT_LT(r.crossing_row, r.locus.gains.size());
  const auto& row = r.locus.poles[r.crossing_row];
  EXPECT_GE(modal::damping_ratio(row[r.branch]), 0.10);
}

TEST(RootLocus, BranchesContinuous) {
  // 1/(s(s+2)) under gain g: poles -1 +- sqrt(1 - g).
  const StateSpace g = ss_from_tf(RationalTF(Polynomial{1.0}, Polynomial{0.0, 2.0, 1.0}));
  std::vector<double> gains;
  for (int i = 0; i <= 40; ++i) gains.push_back(0.05 * i);
  const auto rl = synth::root_locus(g, RationalTF::gain(1.0), gains);
  for (std::size_t k = 1; k < gains.size(); ++k)
    for (std::size_t b = 0; b < 2; ++b) EXPECT_LT(std::abs(rl.poles[k][b] - rl.poles[k - 1][b]), 0.5);
  for (const cplx& p : rl.poles.back()) EXPECT_NEAR(p.real(), -1.0, 1e-9);
  EXPECT_THROW(synth::root_locus(g, RationalTF::gain(1.0), {1.0, 0.5}), ValueError);
}

TEST(Pade, PhaseAtInterAreaFrequency) {
  const RationalTF d = synth::pade_delay(0.2, 2);
  const cplx v = d(cplx(0.0, 4.4));
  EXPECT_NEAR(std::abs(v), 1.0, 1e-12);
  EXPECT_NEAR(std::arg(v), -0.88, 0.02 * 0.88);
  EXPECT_NEAR(synth::pade_delay(0.2, 3)(cplx(0.0, 4.4)).imag(), std::sin(-0.88), 1e-3);
  EXPECT_THROW(synth::pade_delay(0.2, 4), UnsupportedError);
  EXPECT_THROW(synth::pade_delay(-1.0, 2), ParameterError);
  EXPECT_DOUBLE_EQ(synth::pade_delay(0.0, 2).at_infinity(), 1.0);
}

TEST(Reduction, BalancedTruncationBoundsError) {
  std::mt19937 rng(9);
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 8;
  Mat A = Mat::NullaryExpr(n, n, [&] { return N(rng); });
  double amax = -1e300;
  for (const cplx& l : eigenvalues(A)) amax = std::max(amax, l.real());
  A -= (amax + 0.5) * Mat::Identity(n, n);
  const StateSpace K(A, Mat::NullaryExpr(n, 1, [&] { return N(rng); }), Mat::NullaryExpr(1, n, [&] { return N(rng); }),
                     Mat::Zero(1, 1));
  const auto r = synth::reduce_order(K, 4);
  EXPECT_EQ(r.reduced.n(), 4);
  double tail = 0.0;
  for (std::size_t i = 4; i < r.hankel_singular_values.size(); ++i) tail += r.hankel_singular_values[i];
  EXPECT_LE(r.max_error, 2.0 * tail * (1.0 + 1e-6));
  EXPECT_TRUE(is_hurwitz(r.reduced.A));
  EXPECT_THROW(synth::reduce_order(K, -1), ValueError);
  EXPECT_EQ(synth::reduce_order(K, 10).reduced.n(), n);
}

TEST(ExtendedPlant, DelayAndIntegralWeightAddStates) {
  synth::ExtendedPlantSpec s;
  s.plant = scen::two_machine_zy(scen::ex2_params(0.05));
  s.disturbance_inputs = {"d1", "d2"};
  s.performance_output = "z";
  s.measurement_output = "theta";
  s.estimation = true;
  const auto base = synth::build_extended_plant(s);
  s.integral_weight = synth::IntegralWeight{};
  const auto wi = synth::build_extended_plant(s);
  EXPECT_EQ(wi.sys.n(), base.sys.n() + 1);
  s.Wd = {1.0, 2.0, 3.0};
  EXPECT_THROW(synth::build_extended_plant(s), DimensionError);
  s.Wd = {-1.0};
  EXPECT_THROW(synth::build_extended_plant(s), ParameterError);
}

TEST(H2Damping, FourMachineThetaDesignReachesTarget) {
  const auto kc = design::kundur_case();
  const auto h = design::design_h2_damping(kc, design::theta9_degrees());
  EXPECT_GE(h.zeta_closed, 2.0 * h.zeta_open);
  EXPECT_NEAR(h.zeta_closed, 0.10, 2e-3);
  EXPECT_EQ(h.K.D(0, 0), 0.0);
  EXPECT_TRUE(h.washout.has_value());
}
