#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "podlim/grid_sim.hpp"
#include "podlim/lti.hpp"
#include "podlim/modal.hpp"
#include "podlim/synthesis.hpp"

namespace podlim::design {

// Four-machine damping-controller design on the classical-model preset.

struct KundurCase {
  grid::GridModel model;
  grid::OperatingPoint op;
};

inline KundurCase kundur_case(double inertia_scale = 0.75, double flow = 500.0, double hvdc_limit = 75.0,
                              double damping = 5.6, bool impedance_loads = true) {
  KundurCase kc{grid::kundur_two_area(inertia_scale, flow, hvdc_limit, damping, impedance_loads), {}};
  kc.op = grid::solve_equilibrium(kc.model);
  return kc;
}

/// Inter-area search band (rad/s), 0.3 to 1.0 Hz.
inline constexpr double kBandLo = 2.0 * std::numbers::pi * 0.3;
inline constexpr double kBandHi = 2.0 * std::numbers::pi * 1.0;

/// Measurement noise weight per unit of the measured signal.
inline double default_noise_weight(const grid::MeasurementSpec& m) {
  switch (m.kind) {
    case grid::MeasKind::theta_bus: return m.degrees ? 1e-2 : 1e-2 * std::numbers::pi / 180.0;
    case grid::MeasKind::machine_speed: return 1e-3;
    case grid::MeasKind::freq_bus: return 1e-3;
    case grid::MeasKind::line_P: return 0.1;
    case grid::MeasKind::bus_Vmag: return 1e-5;
  }
  return 1.0;
}

/// Angle outputs see the absolute rotor frame and keep the reference mode.
inline bool needs_angle_reference(const grid::MeasurementSpec& m) { return m.kind == grid::MeasKind::theta_bus; }

struct DesignPlant {
  StateSpace G;  // inputs P_dc then dP_<bus>; outputs y then z
  bool deflated = false;
  std::vector<int> disturbance_buses;
  modal::ModalDecomposition md;  // rotated at the inter-area mode
  Eigen::Index mode = -1;
  cplx lambda;
  CVec u_mode;  // right eigenvector of the inter-area mode
};

inline DesignPlant design_plant(const KundurCase& kc, grid::MeasurementSpec meas) {
  meas.delay = 0.0;
  DesignPlant dp;
  dp.deflated = !needs_angle_reference(meas);
  dp.disturbance_buses = dp.deflated ? std::vector<int>{5, 7, 9, 11} : std::vector<int>{7, 9};
  StateSpace G = grid::linearize(kc.model, kc.op, {true, dp.disturbance_buses}, {meas});
  if (dp.deflated) G = grid::deflate_angle_reference(G, kc.model);
  dp.md = modal::decompose(G.A);
  dp.mode = modal::find_mode(dp.md, kBandLo, kBandHi);
  if (dp.mode < 0) throw NumericError("design_plant: no oscillatory mode in the inter-area band");
  dp.lambda = dp.md.lambdas[static_cast<std::size_t>(dp.mode)];
  dp.u_mode = dp.md.U.col(dp.mode);
  dp.md = modal::rotate_mode(dp.md, dp.mode, grid::speed_states(kc.model, dp.deflated));
  Eigen::RowVectorXd Cz = modal::performance_vector(dp.md, dp.mode);
  Cz /= Cz.norm();
  Mat C(2, G.n()), D = Mat::Zero(2, G.m());
  C << G.C, Cz;
  D.row(0) = G.D.row(0);
  dp.G = StateSpace(G.A, G.B, C, D, G.input_labels, {"y", "z"});
  return dp;
}

/// SISO P_dc -> y, with a Pade model of the measurement delay when present.
inline StateSpace loop_plant(const DesignPlant& dp, double delay) {
  StateSpace g(dp.G.A, dp.G.B.col(0), dp.G.C.row(0), dp.G.D.block(0, 0, 1, 1), {"P_dc"}, {"y"});
  if (delay > 0.0) g = ss_series(g, ss_from_tf(synth::pade_delay(delay, 2)));
  return g;
}

/// Closed-loop eigenvalue whose plant part lines up best with the open-loop mode shape.
inline cplx tracked_mode(const StateSpace& cl, const CVec& u_open) {
  Eigen::EigenSolver<Mat> es(cl.A, true);
  if (es.info() != Eigen::Success) throw NumericError("tracked_mode: eigensolver failed");
  const Eigen::Index n = u_open.size();
  double best = -1.0;
  cplx lam;
  for (Eigen::Index k = 0; k < cl.A.rows(); ++k) {
    const cplx l = es.eigenvalues()(k);
    if (l.imag() <= 0.0) continue;
    const CVec x = es.eigenvectors().col(k).head(n);
    const double xn = x.norm();
    if (xn == 0.0) continue;
    const double c = std::abs(u_open.dot(x)) / (u_open.norm() * xn);
    if (c > best) {
      best = c;
      lam = l;
    }
  }
  if (best < 0.0) throw NumericError("tracked_mode: no oscillatory closed-loop eigenvalue");
  return lam;
}

struct H2Damping {
  grid::MeasurementSpec meas;
  StateSpace K;  // acts on the raw measurement deviation, u = -K y
  double Wz = 0.0, Wn = 0.0;
  double zeta_open = 0.0, zeta_closed = 0.0;
  cplx lambda_open, lambda_closed;
  std::optional<double> washout;
  synth::H2Result h2;
};

inline constexpr double kThetaWashout = 0.4;

/// H2 controller with the performance weight bisected so the inter-area damping hits `target`.
inline H2Damping design_h2_damping(const KundurCase& kc, const grid::MeasurementSpec& meas, double target = 0.10,
                                   std::optional<double> Wn = std::nullopt) {
  const DesignPlant dp = design_plant(kc, meas);
  const StateSpace Gl = loop_plant(dp, meas.delay);
  H2Damping out;
  out.meas = meas;
  out.Wn = Wn ? *Wn : default_noise_weight(meas);
  out.lambda_open = dp.lambda;
  out.zeta_open = modal::damping_ratio(dp.lambda);
  if (!dp.deflated) out.washout = kThetaWashout;

  auto build = [&](double Wz, synth::H2Result* keep) {
    synth::ExtendedPlantSpec s;
    s.plant = dp.G;
    for (int b : dp.disturbance_buses) s.disturbance_inputs.push_back("dP_" + std::to_string(b));
    s.control_input = "P_dc";
    s.performance_output = "z";
    s.measurement_output = "y";
    s.Wn = out.Wn;
    s.Wz = Wz;
    s.washout_precancel = out.washout;
    if (meas.delay > 0.0) s.measurement_delay = synth::MeasurementDelay{meas.delay, 2};
    synth::H2Result h = synth::h2_synthesize(synth::build_extended_plant(s).sys);
    StateSpace K = h.controller;
    if (out.washout)
      K = ss_series(ss_from_tf(RationalTF(Polynomial{0.0, 1.0}, Polynomial{*out.washout, 1.0})), K);
    if (keep) *keep = std::move(h);
    return K;
  };
  auto zeta_at = [&](double Wz) {
    return modal::damping_ratio(tracked_mode(close_loop(Gl, build(Wz, nullptr), 0, 0), dp.u_mode));
  };

  if (out.zeta_open >= target) throw ValueError("design_h2_damping: open loop already meets the target");
  double lo = std::log(1e-2), hi = lo;
  const double step = std::log(1.1), cap = std::log(1e6);
  while (zeta_at(std::exp(hi)) < target) {
    lo = hi;
    hi += step;
    if (hi > cap) throw NumericError("design_h2_damping: target damping not reached for Wz up to 1e6");
  }
  for (int it = 0; it < 50 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (zeta_at(std::exp(mid)) < target ? lo : hi) = mid;
  }
  out.Wz = std::exp(hi);
  out.K = build(out.Wz, &out.h2);
  out.lambda_closed = tracked_mode(close_loop(Gl, out.K, 0, 0), dp.u_mode);
  out.zeta_closed = modal::damping_ratio(out.lambda_closed);
  return out;
}

struct PssResult {
  synth::PssDesign design;  // k_pss at the target crossing
  cplx residue;
  double phase_comp_deg = 0.0;
  double zeta_open = 0.0, zeta_closed = 0.0;
  StateSpace plant;  // P_dc -> theta_9 in degrees
  synth::RootLocus locus;
  std::size_t branch = 0;              // inter-area branch in locus.poles
  std::size_t crossing_row = 0;        // first locus row with zeta >= target
  bool monotone = false;               // zeta strictly increasing up to and past the crossing
};

inline grid::MeasurementSpec theta9_degrees() {
  grid::MeasurementSpec m{grid::MeasKind::theta_bus, 9};
  m.degrees = true;
  return m;
}

/// Residue-tuned lead-lag controller on theta_9 with the gain read off a root locus.
inline PssResult design_pss(const KundurCase& kc, double target = 0.10, std::size_t locus_points = 61) {
  const DesignPlant dp = design_plant(kc, theta9_degrees());
  PssResult r;
  r.plant = loop_plant(dp, 0.0);
  r.residue = modal::residue(r.plant, dp.md, dp.mode, 0, 0);
  r.zeta_open = modal::damping_ratio(dp.lambda);
  r.design.Omega1 = std::abs(dp.lambda);
  std::tie(r.design.T1, r.design.T2) = synth::tune_phase_compensation(r.residue, r.design.Omega1);
  const double w = r.design.Omega1;
  r.phase_comp_deg = (std::atan(w * r.design.T1) - std::atan(w * r.design.T2)) * 180.0 / std::numbers::pi;

  synth::PssDesign shape = r.design;
  shape.k_pss = 1.0;
  const RationalTF Ks = synth::pss_controller(shape);
  auto zeta_at = [&](double g) {
    return modal::damping_ratio(tracked_mode(synth::closed_loop_siso(r.plant, g * Ks), dp.u_mode));
  };
  double lo = 0.0, hi = 1e-4;
  while (zeta_at(hi) < target) {
    lo = hi;
    hi *= 1.2;
    if (hi > 1e6) throw NumericError("design_pss: target damping not reached on the locus");
  }
  for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (zeta_at(mid) < target ? lo : hi) = mid;
  }
  r.design.k_pss = hi;
  r.zeta_closed = zeta_at(hi);

  std::vector<double> gains(locus_points);
  for (std::size_t i = 0; i < locus_points; ++i)
    gains[i] = 2.0 * hi * static_cast<double>(i) / static_cast<double>(locus_points - 1);
  r.locus = synth::root_locus(r.plant, Ks, gains);
  const auto& p0 = r.locus.poles.front();
  double best = 1e300;
  for (std::size_t b = 0; b < p0.size(); ++b)
    if (const double d = std::abs(p0[b] - dp.lambda); d < best) {
      best = d;
      r.branch = b;
    }
  r.crossing_row = gains.size();
  for (std::size_t i = 0; i < gains.size(); ++i)
    if (modal::damping_ratio(r.locus.poles[i][r.branch]) >= target) {
      r.crossing_row = i;
      break;
    }
  r.monotone = r.crossing_row > 0 && r.crossing_row + 1 < gains.size();
  for (std::size_t i = 1; r.monotone && i <= std::min(gains.size() - 1, r.crossing_row + 1); ++i)
    r.monotone = modal::damping_ratio(r.locus.poles[i][r.branch]) >
                 modal::damping_ratio(r.locus.poles[i - 1][r.branch]);
  return r;
}

// Transient pulses.

struct Pulse {
  std::string name;
  int bus;
  double delta_P;
};

/// Far and near pulses relative to the theta_9 sensor: 350 MW for 1 s.
inline std::vector<Pulse> canonical_pulses() { return {{"far", 5, -350.0}, {"near", 11, 350.0}}; }

struct PulseRun {
  grid::Trajectory tr;
  double peak = 0.0;  // max |delta_1 - delta_4|
};

inline PulseRun run_pulse(const KundurCase& kc, const std::vector<grid::ControllerLoop>& loops, const Pulse& p,
                          double t_end = 10.0) {
  grid::SimOptions o;
  o.t_end = t_end;
  PulseRun r{grid::simulate(kc.model, kc.op, loops, {{p.bus, p.delta_P, 1.0, 1.0}}, o), 0.0};
  r.peak = grid::peak_angle_difference(r.tr, kc.model.machines.front().label, kc.model.machines.back().label);
  return r;
}

}  // namespace podlim::design
