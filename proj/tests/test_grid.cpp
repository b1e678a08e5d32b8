#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "podlim/design.hpp"
#include "podlim/grid_sim.hpp"

using namespace podlim;
using namespace podlim::grid;

namespace {

/// G1 at bus 1 and G2 (slack) at bus 2 joined by one line.
GridModel two_bus(double P_MW, double X) {
  GridModel m;
  m.buses = {{1, 0.0, 0.0}, {2, P_MW, 0.0}};
  m.lines = {{1, 2, X, 0.0, 1}};
  m.machines = {{"G1", 1, 10.0, 0.0, 0.2, P_MW, 1.0}, {"G2", 2, 10.0, 0.0, 0.2, 0.0, 1.0}};
  m.slack_machine = 1;
  return m;
}

const design::KundurCase& kundur() {
  static const design::KundurCase kc = design::kundur_case();
  return kc;
}

}  // namespace

TEST(PowerFlow, TwoBusAngleMatchesArcSine) {
  for (double P : {10.0, 50.0, 150.0}) {
    GridModel m = two_bus(P, 0.4);
    const OperatingPoint op = solve_equilibrium(m);
    EXPECT_NEAR(op.theta(0) - op.theta(1), std::asin(P / 100.0 * 0.4), 1e-9) << P;
    EXPECT_LT(op.max_residual, 1e-9);
  }
}

TEST(PowerFlow, KundurCorridorFlowMatchesRequest) {
  EXPECT_NEAR(kundur().op.corridor_flow, 500.0, 0.5);
  EXPECT_LT(kundur().op.max_residual, 1e-8);
}

TEST(PowerFlow, BeyondTransferLimitIsConfigError) {
  GridModel m = kundur_two_area(0.75, 5000.0);
  EXPECT_THROW(solve_equilibrium(m), ConfigError);
}

TEST(GridModel, Validation) {
  GridModel m = two_bus(10.0, 0.4);
  m.lines[0].X = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = two_bus(10.0, 0.4);
  m.buses.push_back({3, 0.0, 0.0});
  EXPECT_THROW(m.validate(), ConfigError);
  m = two_bus(10.0, 0.4);
  m.machines[0].M = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(m.bus_index(42), ConfigError);
  EXPECT_THROW(kundur_two_area(0.0), ConfigError);
  EXPECT_THROW(meas_kind_from_string("torque"), ConfigError);
}

TEST(Simulation, EquilibriumIsStationary) {
  SimOptions o;
  o.t_end = 20.0;
  const Trajectory tr = simulate(kundur().model, kundur().op, {}, {}, o);
  ASSERT_FALSE(tr.separated);
  for (std::size_t i = 0; i < kundur().model.machines.size(); ++i) {
    const auto& d = tr.at("delta_" + kundur().model.machines[i].label);
    for (double v : d) EXPECT_NEAR(v, kundur().op.delta(static_cast<Eigen::Index>(i)), 1e-9);
  }
}

TEST(Simulation, UndampedEnergyIsConserved) {
  GridModel m = kundur_two_area(0.75, 500.0, 75.0, 0.0, false);
  const OperatingPoint op = solve_equilibrium(m);
  SimOptions o;
  o.t_end = 20.0;
  o.record_energy = true;
  // Area 1 against area 2 with no net momentum.
  const double a = 0.02, b = a * m.machines[0].M / m.machines[2].M;
  o.initial_speed = Vec(4);
  o.initial_speed << a, a, -b, -b;
  const Trajectory tr = simulate(m, op, {}, {}, o);
  ASSERT_FALSE(tr.separated);
  const auto& E = tr.at("energy");
  double kinetic = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i)
    kinetic += 0.5 * m.machines[static_cast<std::size_t>(i)].M * o.initial_speed(i) * o.initial_speed(i);
  double drift = 0.0;
  for (double e : E) drift = std::max(drift, std::abs(e - E.front()));
  EXPECT_LT(drift, 1e-3 * kinetic);
}

TEST(Simulation, HvdcInjectionsAreAntisymmetricAndSaturate) {
  // A stiff speed feedback drives the link into its limit.
  const StateSpace K(Mat::Constant(1, 1, -10.0), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1e5),
                     Mat::Zero(1, 1));
  const MeasurementSpec w{MeasKind::machine_speed, 0};
  SimOptions o;
  o.t_end = 5.0;
  const Trajectory tr = simulate(kundur().model, kundur().op, {{K, w}}, {{7, 100.0, 0.5, 1.0}}, o);
  const auto &a = tr.at("hvdc_inj_from"), &b = tr.at("hvdc_inj_to"), &p = tr.at("P_dc"), &u = tr.at("u");
  double pmax = 0.0, umax = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i] + b[i], 0.0);
    pmax = std::max(pmax, std::abs(p[i]));
    umax = std::max(umax, std::abs(u[i]));
  }
  EXPECT_DOUBLE_EQ(pmax, 75.0);
  EXPECT_GT(umax, 75.0);
}

TEST(Simulation, SmallPulseMatchesLinearization) {
  const auto& kc = kundur();
  const StateSpace G = linearize(kc.model, kc.op, {false, {7}}, {});
  Mat C = Mat::Zero(1, G.n());
  C(0, 0) = 1.0;
  C(0, 3) = -1.0;
  const StateSpace d14(G.A, G.B, C, Mat::Zero(1, 1));
  const double dt = 0.005, t_end = 10.0;
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
  std::vector<Vec> u(n, Vec::Zero(1));
  for (std::size_t k = 0; k < n; ++k)
    if (dt * static_cast<double>(k) < 1.0 - 1e-12) u[k](0) = 0.1;
  const auto yl = lsim(d14, u, dt);
  SimOptions o;
  o.dt = dt;
  o.t_end = t_end;
  const Trajectory tr = simulate(kc.model, kc.op, {}, {{7, 0.1, 0.0, 1.0}}, o);
  const auto &x1 = tr.at("delta_G1"), &x4 = tr.at("delta_G4");
  double peak = 0.0, err = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double nl = (x1[k] - x4[k]) - (x1[0] - x4[0]);
    peak = std::max(peak, std::abs(nl));
    err = std::max(err, std::abs(nl - yl[k](0)));
  }
  ASSERT_GT(peak, 0.0);
  EXPECT_LT(err, 0.02 * peak);
}

TEST(Linearize, TwoMachineMatchesAnalyticSynchronizingCoefficient) {
  GridModel m = two_bus(0.0, 0.4);
  m.machines[0].D = m.machines[1].D = 1.5;
  const OperatingPoint op = solve_equilibrium(m);
  const StateSpace g = linearize(m, op, {false, {}}, {});
  const double Ks = 1.0 / (0.2 + 0.4 + 0.2) * 100.0;  // E1 E2 / Xtot, MW/rad
  Mat A = Mat::Zero(4, 4);
  A.topRightCorner(2, 2).setIdentity();
  A(2, 0) = -Ks / 10.0;
  A(2, 1) = Ks / 10.0;
  A(3, 0) = Ks / 10.0;
  A(3, 1) = -Ks / 10.0;
  A(2, 2) = A(3, 3) = -1.5 / 10.0;
  EXPECT_LT((g.A - A).cwiseAbs().maxCoeff(), 1e-6 * Ks / 10.0);
}

TEST(Linearize, DeflationRemovesReferenceMode) {
  const auto& kc = kundur();
  const MeasurementSpec w{MeasKind::machine_speed, 0};
  const StateSpace g = linearize(kc.model, kc.op, {true, {7, 9}}, {w});
  const StateSpace d = deflate_angle_reference(g, kc.model);
  EXPECT_EQ(d.n(), g.n() - 1);
  for (const cplx& l : eigenvalues(d.A)) EXPECT_GT(std::abs(l), 1e-6);
  const MeasurementSpec th{MeasKind::theta_bus, 9};
  EXPECT_THROW(deflate_angle_reference(linearize(kc.model, kc.op, {true, {}}, {th}), kc.model), ContractError);
  MeasurementSpec delayed = w;
  delayed.delay = 0.2;
  EXPECT_THROW(linearize(kc.model, kc.op, {true, {}}, {delayed}), UnsupportedError);
}

TEST(Linearize, HvdcMovesPowerFromAreaOneToAreaTwo) {
  // Positive P_dc unloads the corridor at steady state.
  const auto& kc = kundur();
  const MeasurementSpec flow{MeasKind::line_P, kc.model.corridor_lines.front()};
  const StateSpace g = deflate_angle_reference(linearize(kc.model, kc.op, {true, {}}, {flow}), kc.model);
  const double dc = (g.D - g.C * g.A.partialPivLu().solve(g.B))(0, 0);
  EXPECT_LT(dc, 0.0);
}

TEST(OfflineMeasurement, FrequencyOfSineIsFilteredCosine) {
  GridModel m = two_bus(0.0, 0.4);
  Trajectory tr;
  const double h = 1e-3;
  for (int k = 0; k <= 20000; ++k) {
    const double t = h * k;
    tr.time.push_back(t);
    tr.signals["theta_abs_1"].push_back(std::sin(t));
  }
  MeasurementSpec s{MeasKind::freq_bus, 1};
  const auto y = measure_offline(m, tr, s);
  const cplx H = s.freq_lp_corner / cplx(s.freq_lp_corner, 1.0);
  for (std::size_t k = 5000; k < y.size(); k += 500)
    EXPECT_NEAR(y[k], std::abs(H) * std::cos(tr.time[k] + std::arg(H)), 2e-3);
}

TEST(OfflineMeasurement, DelayShiftsSeries) {
  GridModel m = two_bus(0.0, 0.4);
  Trajectory tr;
  for (int k = 0; k <= 1000; ++k) {
    tr.time.push_back(0.01 * k);
    tr.signals["omega_G1"].push_back(0.01 * k);
  }
  MeasurementSpec s{MeasKind::machine_speed, 0, 0.2};
  const auto y = measure_offline(m, tr, s);
  for (std::size_t k = 20; k < y.size(); ++k) EXPECT_NEAR(y[k], tr.time[k] - 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(y[5], 0.0);
  s.location = 7;
  EXPECT_THROW(measure_offline(m, tr, s), ValueError);
}

TEST(Simulation, InputValidation) {
  SimOptions o;
  o.dt = 0.05;
  EXPECT_THROW(simulate(kundur().model, kundur().op, {}, {}, o), ValueError);
  o = {};
  EXPECT_THROW(simulate(kundur().model, kundur().op, {}, {{42, 1.0, 0.0, 1.0}}, o), ConfigError);
  const StateSpace Kd(Mat::Zero(0, 0), Mat::Zero(0, 1), Mat::Zero(1, 0), Mat::Ones(1, 1));
  EXPECT_THROW(simulate(kundur().model, kundur().op, {{Kd, {}}}, {}, o), ContractError);
}
