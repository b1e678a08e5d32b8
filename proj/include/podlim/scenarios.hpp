#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "podlim/design.hpp"
#include "podlim/io.hpp"
#include "podlim/modal.hpp"
#include "podlim/sensitivity.hpp"
#include "podlim/synthesis.hpp"
#include "podlim/two_machine.hpp"

namespace podlim::scen {

using json = nlohmann::json;

struct Artifact {
  std::string name;
  std::string content;
  bool plottable = true;
};

struct Result {
  std::string id;
  std::vector<Artifact> files;
  json summary = json::object();
};

inline constexpr const char* kAnalogNote =
    "analog of the published figure on a reduced classical-machine model, not a bit reproduction";

inline FrequencyGrid default_grid() { return FrequencyGrid::logspace(1e-2, 1e2, 500); }

inline double rad2deg(double x) { return x * 180.0 / std::numbers::pi; }

/// Phase in degrees, unwrapped along the sequence.
inline std::vector<double> unwrapped_phase_deg(const std::vector<cplx>& v) {
  std::vector<double> ph(v.size());
  double prev = 0.0, offset = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::arg(v[i]);
    if (i > 0) {
      const double d = a - prev;
      if (d > std::numbers::pi) offset -= 2.0 * std::numbers::pi;
      if (d < -std::numbers::pi) offset += 2.0 * std::numbers::pi;
    }
    prev = a;
    ph[i] = rad2deg(a + offset);
  }
  return ph;
}

inline std::string bode_csv(const FrequencyGrid& g, const std::vector<cplx>& r) {
  std::vector<double> mag(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) mag[i] = std::abs(r[i]);
  io::CsvTable t;
  t.add("omega", g.omegas()).add("mag", mag).add("phase_deg", unwrapped_phase_deg(r));
  return t.str();
}

inline std::string bode_csv(const FrequencyGrid& g, const RationalTF& tf) { return bode_csv(g, freq_response(tf, g)); }

// ---------------------------------------------------------------------------
// Two-machine studies

inline TwoMachineParams ex2_params(double D = 0.0) {
  TwoMachineParams p;
  p.M1 = p.M2 = 2.0;
  p.X1 = 0.1;
  p.X2 = 0.9;
  p.D1 = p.D2 = D;
  return p;
}

struct FilterDesignSpec {
  TwoMachineParams plant = ex2_params(0.05);  // design plant
  double Wd = 0.2, Wn = 0.05, Wz = 1.0;
  double integral_corner = 0.1, integral_epsilon = 1e-3;
  double washout = 0.1;
};

struct FilterDesign {
  FilterDesignSpec spec;
  synth::ExtendedPlant ext;
  synth::H2Result h2;
  RationalTF F;  // theta -> estimate of omega1 - omega2
};

/// State space with z = omega1 - omega2 and y = theta for the given disturbance inputs.
inline StateSpace two_machine_zy(const TwoMachineParams& p) {
  const StateSpace g = two_machine::build_state_space(p);
  Mat C(2, 4);
  C << g.C.row(2) - g.C.row(3), g.C.row(4);
  return {g.A, g.B.leftCols(2), C, Mat::Zero(2, 2), {"d1", "d2"}, {"z", "theta"}};
}

inline FilterDesign filter_design(const FilterDesignSpec& s = {}) {
  FilterDesign fd;
  fd.spec = s;
  synth::ExtendedPlantSpec es;
  es.plant = two_machine_zy(s.plant);
  es.disturbance_inputs = {"d1", "d2"};
  es.Wd = {s.Wd};
  es.performance_output = "z";
  es.measurement_output = "theta";
  es.Wn = s.Wn;
  es.Wz = s.Wz;
  es.integral_weight = synth::IntegralWeight{s.integral_corner, s.integral_epsilon};
  es.washout_precancel = s.washout;
  es.estimation = true;
  fd.ext = synth::build_extended_plant(es);
  fd.h2 = synth::h2_synthesize(fd.ext.sys);
  // The estimate is -K acting on the washed-out measurement.
  const RationalTF K = ss_to_tf(fd.h2.controller, 0, 0);
  fd.F = (-1.0 * K * RationalTF(Polynomial{0.0, 1.0}, Polynomial{s.washout, 1.0})).simplify();
  return fd;
}

struct FeedbackStudy {
  two_machine::PerformanceTfs t;
  RationalTF Fu, K, R1, R2;
  sens::SensitivityPair sp;
};

inline FeedbackStudy feedback_study(const RationalTF& F, double Kz, const TwoMachineParams& p = ex2_params()) {
  FeedbackStudy fs;
  fs.t = two_machine::performance_tfs(p);
  fs.Fu = sens::decouple_input(F, fs.t.Gzu, fs.t.Gyu).Fu;
  fs.K = sens::assemble_estimation_feedback(F, fs.Fu, Kz);
  fs.R1 = sens::disturbance_response_ratio(fs.t.Gzd1, fs.t.Gzu, fs.t.Gyd1, fs.t.Gyu, fs.K);
  fs.R2 = sens::disturbance_response_ratio(fs.t.Gzd2, fs.t.Gzu, fs.t.Gyd2, fs.t.Gyu, fs.K);
  fs.sp = sens::sensitivity_pair(fs.t.Gyu, fs.K);
  return fs;
}

inline json band_json(const sens::Band& b) {
  return b.empty ? json(nullptr) : json::array({b.lo, b.hi});
}

inline bool band_inside(const sens::Band& b, double q1, double q2) { return !b.empty && b.lo > q1 && b.hi < q2; }

inline Result fig4(const FrequencyGrid& g) {
  const TwoMachineParams p = ex2_params();
  const auto t = two_machine::performance_tfs(p);
  const auto [q1, q2] = two_machine::zero_frequencies(p);
  Result r{"fig4", {}, {}};
  const RationalTF f1 = (t.Gyd1 / t.Gzd1).simplify(), f2 = (t.Gyd2 / t.Gzd2).simplify();
  r.files.push_back({"fig4_d1.csv", bode_csv(g, f1)});
  r.files.push_back({"fig4_d2.csv", bode_csv(g, f2)});
  // First interior local minimum of the magnitude.
  auto notch = [&](const RationalTF& f) -> json {
    const auto v = freq_response(f, g);
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
      if (std::abs(v[i]) < std::abs(v[i - 1]) && std::abs(v[i]) <= std::abs(v[i + 1])) return g[i];
    return nullptr;
  };
  r.summary = {{"q1", q1}, {"q2", q2}, {"Omega", two_machine::interarea_frequency(p)},
               {"notch_d1", notch(f1)}, {"notch_d2", notch(f2)}};
  return r;
}

inline Result fig5like(const FrequencyGrid& g) {
  const FilterDesign fd = filter_design();
  Result r{"fig5like", {}, {}};
  r.files.push_back({"fig5like_filter.csv", bode_csv(g, fd.F)});
  bool stable = true;
  for (const cplx& p : poles(fd.F)) stable = stable && p.real() < 0.0;
  r.summary = {{"Wd", fd.spec.Wd},
               {"Wn", fd.spec.Wn},
               {"Wz", fd.spec.Wz},
               {"integral_corner", fd.spec.integral_corner},
               {"integral_epsilon", fd.spec.integral_epsilon},
               {"washout", fd.spec.washout},
               {"extended_order", fd.ext.sys.n()},
               {"filter_order", fd.F.den().degree()},
               {"filter_relative_degree", fd.F.relative_degree()},
               {"filter_stable", stable},
               {"closed_loop_norm", fd.h2.closed_loop_norm},
               {"care_residual", fd.h2.care_residual},
               {"fare_residual", fd.h2.fare_residual}};
  return r;
}

inline constexpr double kEx4Kz = 0.5;

inline Result fig6(const FrequencyGrid& g) {
  const TwoMachineParams p = ex2_params();
  const auto [q1, q2] = two_machine::zero_frequencies(p);
  const FilterDesign fd = filter_design();
  const FeedbackStudy fs = feedback_study(fd.F, kEx4Kz, p);
  const RationalTF P1 = sens::filtering_pair(fs.t.Gzd1, fs.t.Gyd1, fd.F, "d1").P;
  const RationalTF P2 = sens::filtering_pair(fs.t.Gzd2, fs.t.Gyd2, fd.F, "d2").P;
  const std::vector<std::pair<std::string, RationalTF>> Pc{{"P1", P1}, {"P2", P2}}, Rc{{"R1", fs.R1}, {"R2", fs.R2}};
  const sens::Band bp = sens::attenuation_band(Pc, g), br = sens::attenuation_band(Rc, g);
  // Undamped plant modes cancelled by zeros of K stay on the axis; the coprime S does not show them.
  const Polynomial chi = fs.t.Gyu.den() * fs.K.den() + fs.t.Gyu.num() * fs.K.num();
  int marginal_roots = 0;
  for (const cplx& z : chi.roots()) marginal_roots += std::abs(z.real()) <= 1e-3 * std::max(1.0, std::abs(z)) ? 1 : 0;
  bool S_stable = true;
  for (const cplx& q : poles(fs.sp.S)) S_stable = S_stable && q.real() < 0.0;
  Result r{"fig6", {}, {}};
  r.files.push_back({"fig6_P1.csv", bode_csv(g, P1)});
  r.files.push_back({"fig6_P2.csv", bode_csv(g, P2)});
  r.files.push_back({"fig6_R1.csv", bode_csv(g, fs.R1)});
  r.files.push_back({"fig6_R2.csv", bode_csv(g, fs.R2)});
  r.summary = {{"q1", q1},
               {"q2", q2},
               {"Kz", kEx4Kz},
               {"P_band", band_json(bp)},
               {"R_band", band_json(br)},
               {"P_band_inside", band_inside(bp, q1, q2)},
               {"R_band_inside", band_inside(br, q1, q2)},
               {"P_sup_outside", sens::sup_outside(Pc, g, bp)},
               {"R_sup_outside", sens::sup_outside(Rc, g, br)},
               {"closed_loop_stable", fs.sp.closed_loop_stable},
               {"S_stable", S_stable},
               {"marginal_roots", marginal_roots}};
  return r;
}

/// Sign of the first sample exceeding 1e-3 of the peak magnitude.
inline int initial_sign(const std::vector<double>& x) {
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, std::abs(v));
  for (double v : x)
    if (std::abs(v) > 1e-3 * mx) return v > 0.0 ? 1 : -1;
  return 0;
}

inline Result fig7(double dt = 0.01, double t_end = 20.0, double step = 0.2) {
  const FilterDesign fd = filter_design();
  const StateSpace g = two_machine_zy(fd.spec.plant);
  const StateSpace Fs = ss_from_tf(fd.F);
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
  Result r{"fig7", {}, {}};
  for (Eigen::Index d = 0; d < 2; ++d) {
    const StateSpace gi(g.A, g.B.col(d), g.C, g.D.col(d));
    const StateSpace theta(g.A, g.B.col(d), g.C.row(1), g.D.block(1, d, 1, 1));
    const StateSpace est = ss_series(theta, Fs);
    const std::vector<Vec> u(n, Vec::Constant(1, step));
    const auto yz = lsim(gi, u, dt), ye = lsim(est, u, dt);
    std::vector<double> t(n), z(n), zh(n);
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = dt * static_cast<double>(k);
      z[k] = yz[k](0);
      zh[k] = ye[k](0);
    }
    const std::string lbl = "d" + std::to_string(d + 1);
    io::CsvTable tab;
    tab.add("t", t).add("z", z).add("z_hat", zh);
    r.files.push_back({"fig7_" + lbl + ".csv", tab.str()});
    r.summary["sign_match_" + lbl] = initial_sign(z) == initial_sign(zh);
  }
  const bool m1 = r.summary["sign_match_d1"], m2 = r.summary["sign_match_d2"];
  r.summary["favored"] = m1 && !m2 ? "d1" : (m2 && !m1 ? "d2" : "none");
  r.summary["step_pu"] = step;
  return r;
}

// ---------------------------------------------------------------------------
// Four-machine studies

inline Result fig11(const design::KundurCase& kc) {
  const design::DesignPlant dp = design::design_plant(kc, design::theta9_degrees());
  std::vector<std::string> labels;
  for (const auto& m : kc.model.machines) labels.push_back(m.label);
  const modal::ModeShape ms = modal::mode_shape(dp.md, dp.mode, grid::speed_states(kc.model), labels);
  io::CsvTable t;
  std::vector<double> re, im, mag, ph;
  for (const cplx& c : ms.components) {
    re.push_back(c.real());
    im.push_back(c.imag());
    mag.push_back(std::abs(c));
    ph.push_back(rad2deg(std::arg(c)));
  }
  t.add_text("machine", labels).add("re", re).add("im", im).add("mag", mag).add("phase_deg", ph);
  const auto sgn = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
  const int a1 = sgn(re[0]) == sgn(re[1]) ? sgn(re[0]) : 0, a2 = sgn(re[2]) == sgn(re[3]) ? sgn(re[2]) : 0;
  Result r{"fig11", {{"fig11_mode_shape.csv", t.str()}}, {}};
  r.summary = {{"lambda_re", dp.lambda.real()},
               {"lambda_im", dp.lambda.imag()},
               {"freq_hz", dp.lambda.imag() / (2.0 * std::numbers::pi)},
               {"zeta", modal::damping_ratio(dp.lambda)},
               {"area1_sign", a1},
               {"area2_sign", a2},
               {"opposite_areas", a1 != 0 && a2 != 0 && a1 == -a2}};
  return r;
}

inline Result fig12(const design::KundurCase& kc, double target = 0.10) {
  const design::PssResult p = design::design_pss(kc, target);
  io::CsvTable all, track;
  std::vector<double> g, br, re, im, ze;
  std::vector<double> tg, tre, tim, tze, cross;
  for (std::size_t i = 0; i < p.locus.gains.size(); ++i) {
    for (std::size_t b = 0; b < p.locus.poles[i].size(); ++b) {
      const cplx l = p.locus.poles[i][b];
      g.push_back(p.locus.gains[i]);
      br.push_back(static_cast<double>(b));
      re.push_back(l.real());
      im.push_back(l.imag());
      ze.push_back(l == cplx(0.0, 0.0) ? 1.0 : modal::damping_ratio(l));
    }
    const cplx l = p.locus.poles[i][p.branch];
    tg.push_back(p.locus.gains[i]);
    tre.push_back(l.real());
    tim.push_back(l.imag());
    tze.push_back(modal::damping_ratio(l));
    cross.push_back(i == p.crossing_row ? 1.0 : 0.0);
  }
  all.add("gain", g).add("branch", br).add("re", re).add("im", im).add("zeta", ze);
  track.add("gain", tg).add("re", tre).add("im", tim).add("zeta", tze).add("crossing", cross);
  Result r{"fig12", {{"fig12_locus.csv", all.str()}, {"fig12_interarea.csv", track.str()}}, {}};
  r.summary = {{"Omega1", p.design.Omega1},
               {"residue_re", p.residue.real()},
               {"residue_im", p.residue.imag()},
               {"phase_comp_deg", p.phase_comp_deg},
               {"T1", p.design.T1},
               {"T2", p.design.T2},
               {"k_pss", p.design.k_pss},
               {"zeta_open", p.zeta_open},
               {"zeta_closed", p.zeta_closed},
               {"crossing_gain", p.crossing_row < p.locus.gains.size() ? json(p.locus.gains[p.crossing_row])
                                                                       : json(nullptr)},
               {"monotone", p.monotone}};
  return r;
}

inline Result fig15(const design::KundurCase& kc, const FrequencyGrid& g) {
  const design::DesignPlant dp = design::design_plant(kc, design::theta9_degrees());
  Result r{"fig15", {}, {}};
  const Eigen::Index iy = dp.G.output_index("y"), iz = dp.G.output_index("z");
  for (int bus : dp.disturbance_buses) {
    const Eigen::Index in = dp.G.input_index("dP_" + std::to_string(bus));
    std::vector<cplx> v(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const cplx s(0.0, g[k]);
      v[k] = freq_response(dp.G, in, iy, s) / freq_response(dp.G, in, iz, s);
    }
    r.files.push_back({"fig15_d" + std::to_string(bus) + ".csv", bode_csv(g, v)});
    // Lightly damped zeros of the disturbance-to-measurement channel.
    json zs = json::array();
    for (const cplx& z : zeros(ss_to_tf(dp.G, in, iy)))
      if (z.imag() > 0.0 && std::abs(z) > 0.5 && std::abs(z) < 20.0 && -z.real() < 0.2 * std::abs(z))
        zs.push_back(z.imag());
    r.summary["zeros_d" + std::to_string(bus)] = zs;
  }
  r.summary["Omega1"] = std::abs(dp.lambda);
  return r;
}

/// One pulse run as CSV: t, delta14, u, P_dc.
inline std::string pulse_csv(const design::KundurCase& kc, const grid::Trajectory& tr) {
  const auto& a = tr.at("delta_" + kc.model.machines.front().label);
  const auto& b = tr.at("delta_" + kc.model.machines.back().label);
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  io::CsvTable t;
  t.add("t", tr.time).add("delta14", d).add("u", tr.at("u")).add("P_dc", tr.at("P_dc"));
  return t.str();
}

struct Contrast {
  std::map<std::string, double> open, closed;
  bool separated = false;
  json t_separation = nullptr;
};

/// Runs the canonical pulses open and closed loop; CSVs named <prefix>_<open|closed>_<pulse>.csv.
inline Contrast pulse_contrast(const design::KundurCase& kc, const std::vector<grid::ControllerLoop>& loops,
                               const std::string& prefix, Result& r, bool emit_open = true) {
  Contrast c;
  for (const design::Pulse& p : design::canonical_pulses()) {
    const design::PulseRun o = design::run_pulse(kc, {}, p);
    const design::PulseRun k = design::run_pulse(kc, loops, p);
    c.open[p.name] = o.peak;
    c.closed[p.name] = k.peak;
    if (k.tr.separated && !c.separated) {
      c.separated = true;
      c.t_separation = k.tr.t_separation;
    }
    if (emit_open) r.files.push_back({prefix + "_open_" + p.name + ".csv", pulse_csv(kc, o.tr)});
    r.files.push_back({prefix + "_closed_" + p.name + ".csv", pulse_csv(kc, k.tr)});
  }
  return c;
}

inline void contrast_summary(const Contrast& c, json& s, const std::string& tag = "") {
  for (const char* w : {"near", "far"}) {
    s[tag + w + "_peak_open"] = c.open.at(w);
    s[tag + w + "_peak_closed"] = c.closed.at(w);
  }
}

inline Result fig14(const design::KundurCase& kc) {
  const design::PssResult p = design::design_pss(kc);
  Result r{"fig14", {}, {}};
  const Contrast c =
      pulse_contrast(kc, {{ss_from_tf(synth::pss_controller(p.design)), design::theta9_degrees()}}, "fig14", r);
  contrast_summary(c, r.summary);
  r.summary["near_peak_closed_lt_open"] = c.closed.at("near") < c.open.at("near");
  r.summary["far_peak_closed_gt_open"] = c.closed.at("far") > c.open.at("far") || c.separated;
  r.summary["separated"] = c.separated;
  r.summary["t_separation"] = c.t_separation;
  r.summary["k_pss"] = p.design.k_pss;
  r.summary["zeta_closed"] = p.zeta_closed;
  return r;
}

inline Result fig16(const design::KundurCase& kc) {
  const design::H2Damping h = design::design_h2_damping(kc, design::theta9_degrees());
  Result r{"fig16", {}, {}};
  const Contrast c = pulse_contrast(kc, {{h.K, h.meas}}, "fig16", r);
  contrast_summary(c, r.summary);
  r.summary["near_peak_closed_lt_open"] = c.closed.at("near") < c.open.at("near");
  r.summary["far_peak_closed_gt_open"] = c.closed.at("far") > c.open.at("far") || c.separated;
  r.summary["separated"] = c.separated;
  r.summary["t_separation"] = c.t_separation;
  r.summary["Wz"] = h.Wz;
  r.summary["zeta_open"] = h.zeta_open;
  r.summary["zeta_closed"] = h.zeta_closed;
  r.summary["controller_order"] = h.K.n();
  return r;
}

inline grid::MeasurementSpec wams_speed() {
  grid::MeasurementSpec m{grid::MeasKind::machine_speed, 0};
  m.delay = 0.2;
  return m;
}

inline constexpr double kPeakTolerance = 1.02;

inline Result fig17(const design::KundurCase& kc) {
  const grid::MeasurementSpec meas = wams_speed();
  const design::H2Damping h = design::design_h2_damping(kc, meas);
  Result r{"fig17", {}, {}};
  const Contrast c = pulse_contrast(kc, {{h.K, meas}}, "fig17", r);
  contrast_summary(c, r.summary);
  r.summary["both_peaks_reduced"] = c.closed.at("near") < c.open.at("near") && c.closed.at("far") < c.open.at("far");
  r.summary["both_peaks_within_tolerance"] = c.closed.at("near") <= kPeakTolerance * c.open.at("near") &&
                                             c.closed.at("far") <= kPeakTolerance * c.open.at("far");
  r.summary["separated"] = c.separated;
  r.summary["delay"] = meas.delay;
  r.summary["Wz"] = h.Wz;
  r.summary["zeta_closed"] = h.zeta_closed;
  return r;
}

/// Line-flow measurement on the 8-9 corridor segment.
inline grid::MeasurementSpec corridor_flow_meas() { return {grid::MeasKind::line_P, 7}; }
inline grid::MeasurementSpec v9_meas() { return {grid::MeasKind::bus_Vmag, 9}; }

inline Result fig18(const design::KundurCase& kc) {
  Result r{"fig18", {}, {}};
  bool first = true;
  const std::vector<std::pair<std::string, grid::MeasurementSpec>> cases{{"line_P", corridor_flow_meas()},
                                                                         {"V9", v9_meas()}};
  for (const auto& [tag, meas] : cases) {
    const design::H2Damping h = design::design_h2_damping(kc, meas);
    Result tmp;
    const Contrast c = pulse_contrast(kc, {{h.K, meas}}, "fig18_" + tag, tmp, first);
    for (auto& f : tmp.files) {
      // Open-loop runs are shared between the two measurements.
      if (f.name.find("_open_") != std::string::npos) f.name = "fig18_open_" + f.name.substr(f.name.rfind('_') + 1);
      r.files.push_back(std::move(f));
    }
    first = false;
    contrast_summary(c, r.summary, tag + "_");
    r.summary["no_amplification_" + tag] = c.closed.at("near") <= kPeakTolerance * c.open.at("near") &&
                                           c.closed.at("far") <= kPeakTolerance * c.open.at("far");
    r.summary["zeta_closed_" + tag] = h.zeta_closed;
    r.summary["Wz_" + tag] = h.Wz;
    r.summary["separated_" + tag] = c.separated;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Registry

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig4",  "fig5like", "fig6",  "fig7",  "fig11", "fig12",
                                            "fig14", "fig15",    "fig16", "fig17", "fig18"};
  return ids;
}

/// Keys each figure summary may contain.
inline const std::map<std::string, std::vector<std::string>>& summary_schema() {
  static const std::map<std::string, std::vector<std::string>> s{
      {"fig4", {"q1", "q2", "Omega", "notch_d1", "notch_d2"}},
      {"fig5like",
       {"Wd", "Wn", "Wz", "integral_corner", "integral_epsilon", "washout", "extended_order", "filter_order",
        "filter_relative_degree", "filter_stable", "closed_loop_norm", "care_residual", "fare_residual"}},
      {"fig6",
       {"q1", "q2", "Kz", "P_band", "R_band", "P_band_inside", "R_band_inside", "P_sup_outside", "R_sup_outside",
        "closed_loop_stable", "S_stable", "marginal_roots"}},
      {"fig7", {"sign_match_d1", "sign_match_d2", "favored", "step_pu"}},
      {"fig11", {"lambda_re", "lambda_im", "freq_hz", "zeta", "area1_sign", "area2_sign", "opposite_areas"}},
      {"fig12",
       {"Omega1", "residue_re", "residue_im", "phase_comp_deg", "T1", "T2", "k_pss", "zeta_open", "zeta_closed",
        "crossing_gain", "monotone"}},
      {"fig14",
       {"near_peak_open", "near_peak_closed", "far_peak_open", "far_peak_closed", "near_peak_closed_lt_open",
        "far_peak_closed_gt_open", "separated", "t_separation", "k_pss", "zeta_closed"}},
      {"fig15", {"zeros_d7", "zeros_d9", "Omega1"}},
      {"fig16",
       {"near_peak_open", "near_peak_closed", "far_peak_open", "far_peak_closed", "near_peak_closed_lt_open",
        "far_peak_closed_gt_open", "separated", "t_separation", "Wz", "zeta_open", "zeta_closed",
        "controller_order"}},
      {"fig17",
       {"near_peak_open", "near_peak_closed", "far_peak_open", "far_peak_closed", "both_peaks_reduced",
        "both_peaks_within_tolerance", "separated", "delay", "Wz", "zeta_closed"}},
      {"fig18",
       {"line_P_near_peak_open", "line_P_near_peak_closed", "line_P_far_peak_open", "line_P_far_peak_closed",
        "no_amplification_line_P", "zeta_closed_line_P", "Wz_line_P", "separated_line_P", "V9_near_peak_open",
        "V9_near_peak_closed", "V9_far_peak_open", "V9_far_peak_closed", "no_amplification_V9", "zeta_closed_V9",
        "Wz_V9", "separated_V9"}},
  };
  return s;
}

inline Result repro(const std::string& id, const FrequencyGrid& g = default_grid()) {
  static const std::vector<std::string> four_machine{"fig11", "fig12", "fig14", "fig15", "fig16", "fig17", "fig18"};
  if (id == "fig4") return fig4(g);
  if (id == "fig5like") return fig5like(g);
  if (id == "fig6") return fig6(g);
  if (id == "fig7") return fig7();
  if (std::find(four_machine.begin(), four_machine.end(), id) == four_machine.end())
    throw ConfigError("unknown figure id '" + id + "'");
  const design::KundurCase kc = design::kundur_case();
  if (id == "fig11") return fig11(kc);
  if (id == "fig12") return fig12(kc);
  if (id == "fig14") return fig14(kc);
  if (id == "fig15") return fig15(kc, g);
  if (id == "fig16") return fig16(kc);
  if (id == "fig17") return fig17(kc);
  return fig18(kc);
}

// ---------------------------------------------------------------------------
// Declarative scenarios

inline const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> k{"two_machine_analysis", "filter_design", "feedback_analysis", "modal",
                                          "synthesize",           "simulate",      "linearize"};
  return k;
}

inline const std::map<std::string, std::vector<std::string>>& required_parameters() {
  static const std::map<std::string, std::vector<std::string>> r{
      {"two_machine_analysis", {"M1", "M2", "X1", "X2"}},
      {"filter_design", {"M", "X1", "X2"}},
      {"feedback_analysis", {"M", "X1", "X2", "Kz"}},
      {"modal", {"model"}},
      {"synthesize", {"method", "measurement"}},
      {"simulate", {"disturbances"}},
      {"linearize", {"outputs"}},
  };
  return r;
}

/// JSON Schema of the scenario configuration file.
inline json config_schema() {
  json measurement = {{"type", "object"},
                      {"required", {"kind", "location"}},
                      {"properties",
                       {{"kind", {{"enum", {"theta_bus", "freq_bus", "line_P", "bus_Vmag", "machine_speed"}}}},
                        {"location", {{"type", "integer"}}},
                        {"delay", {{"type", "number"}, {"minimum", 0}}},
                        {"freq_lp_corner", {{"type", "number"}, {"exclusiveMinimum", 0}}},
                        {"degrees", {{"type", "boolean"}}}}}};
  json preset = {{"type", "object"},
                 {"properties",
                  {{"inertia_scale", {{"type", "number"}}},
                   {"flow", {{"type", "number"}}},
                   {"hvdc_limit", {{"type", "number"}}},
                   {"damping", {{"type", "number"}}},
                   {"impedance_loads", {{"type", "boolean"}}}}}};
  json all_of = json::array();
  for (const auto& [kind, keys] : required_parameters())
    all_of.push_back({{"if", {{"properties", {{"kind", {{"const", kind}}}}}}},
                      {"then", {{"properties", {{"parameters", {{"required", keys}}}}}}}});
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "podlim scenario"},
          {"type", "object"},
          {"required", {"kind", "parameters", "outputs"}},
          {"properties",
           {{"kind", {{"enum", scenario_kinds()}}},
            {"parameters", {{"type", "object"}}},
            {"outputs", {{"type", "string"}}},
            {"grid",
             {{"type", "object"},
              {"required", {"min", "max", "points"}},
              {"properties",
               {{"min", {{"type", "number"}}}, {"max", {{"type", "number"}}}, {"points", {{"type", "integer"}}}}}}}}},
          {"allOf", all_of},
          {"$defs", {{"measurement", measurement}, {"preset", preset}}}};
}

namespace detail {

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + " is required");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T dflt, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : dflt;
}

inline grid::MeasurementSpec measurement(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  grid::MeasurementSpec m;
  m.kind = grid::meas_kind_from_string(get<std::string>(j, "kind", where));
  m.location = get<int>(j, "location", where);
  m.delay = get_or<double>(j, "delay", 0.0, where);
  m.freq_lp_corner = get_or<double>(j, "freq_lp_corner", 20.0, where);
  m.degrees = get_or<bool>(j, "degrees", false, where);
  if (!(m.delay >= 0.0)) throw ConfigError(where + ".delay must be >= 0");
  return m;
}

inline design::KundurCase preset(const json& p) {
  const json j = p.contains("preset") ? p.at("preset") : json::object();
  const std::string w = "parameters.preset";
  return design::kundur_case(get_or<double>(j, "inertia_scale", 0.75, w), get_or<double>(j, "flow", 500.0, w),
                             get_or<double>(j, "hvdc_limit", 75.0, w), get_or<double>(j, "damping", 5.6, w),
                             get_or<bool>(j, "impedance_loads", true, w));
}

inline TwoMachineParams two_machine_params(const json& p, bool symmetric) {
  const std::string w = "parameters";
  TwoMachineParams t;
  if (symmetric) {
    t.M1 = t.M2 = get<double>(p, "M", w);
    t.D1 = t.D2 = get_or<double>(p, "D", 0.0, w);
  } else {
    t.M1 = get<double>(p, "M1", w);
    t.M2 = get<double>(p, "M2", w);
    t.D1 = get_or<double>(p, "D1", 0.0, w);
    t.D2 = get_or<double>(p, "D2", 0.0, w);
  }
  t.X1 = get<double>(p, "X1", w);
  t.X2 = get<double>(p, "X2", w);
  t.validate();
  return t;
}

inline json complex_list(const std::vector<cplx>& v) {
  json a = json::array();
  for (const cplx& c : v) a.push_back({c.real(), c.imag()});
  return a;
}

inline std::string eigen_csv(const std::vector<cplx>& v) {
  std::vector<double> re, im, ze;
  for (const cplx& c : v) {
    re.push_back(c.real());
    im.push_back(c.imag());
    ze.push_back(c == cplx(0.0, 0.0) ? 1.0 : modal::damping_ratio(c));
  }
  io::CsvTable t;
  t.add("re", re).add("im", im).add("zeta", ze);
  return t.str();
}

inline FilterDesignSpec filter_spec(const json& p) {
  const std::string w = "parameters";
  FilterDesignSpec s;
  s.plant = two_machine_params(p, true);
  s.Wd = get_or<double>(p, "Wd", s.Wd, w);
  s.Wn = get_or<double>(p, "Wn", s.Wn, w);
  s.Wz = get_or<double>(p, "Wz", s.Wz, w);
  s.integral_corner = get_or<double>(p, "integral_corner", s.integral_corner, w);
  s.integral_epsilon = get_or<double>(p, "integral_epsilon", s.integral_epsilon, w);
  s.washout = get_or<double>(p, "washout", s.washout, w);
  return s;
}

struct Controller {
  StateSpace K;
  grid::MeasurementSpec meas;
  json report;
};

inline Controller synthesize(const design::KundurCase& kc, const json& p) {
  const std::string w = "parameters";
  const std::string method = get<std::string>(p, "method", w);
  const grid::MeasurementSpec meas = measurement(p.at("measurement"), w + ".measurement");
  const double target = get_or<double>(p, "target_zeta", 0.10, w);
  if (method == "h2") {
    std::optional<double> Wn;
    if (p.contains("Wn")) Wn = get<double>(p, "Wn", w);
    const design::H2Damping h = design::design_h2_damping(kc, meas, target, Wn);
    return {h.K, meas,
            {{"method", method}, {"Wz", h.Wz}, {"Wn", h.Wn}, {"zeta_open", h.zeta_open},
             {"zeta_closed", h.zeta_closed}, {"order", h.K.n()}}};
  }
  if (method == "pss") {
    if (meas.kind != grid::MeasKind::theta_bus || meas.location != 9 || !meas.degrees || meas.delay != 0.0)
      throw ConfigError(w + ".measurement: the pss method is tuned on theta_bus 9 in degrees without delay");
    const design::PssResult r = design::design_pss(kc, target);
    return {ss_from_tf(synth::pss_controller(r.design)), meas,
            {{"method", method}, {"k_pss", r.design.k_pss}, {"T1", r.design.T1}, {"T2", r.design.T2},
             {"Omega1", r.design.Omega1}, {"zeta_open", r.zeta_open}, {"zeta_closed", r.zeta_closed}}};
  }
  throw ConfigError(w + ".method must be 'h2' or 'pss'");
}

}  // namespace detail

inline FrequencyGrid grid_from_json(const json& g) {
  const double lo = detail::get<double>(g, "min", "grid"), hi = detail::get<double>(g, "max", "grid");
  const int n = detail::get<int>(g, "points", "grid");
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ConfigError("grid needs 0 < min < max and points >= 2");
  return FrequencyGrid::logspace(lo, hi, static_cast<std::size_t>(n));
}

/// Structural checks on a scenario configuration; throws ConfigError naming the offending key.
inline void validate_config(const json& c) {
  if (!c.is_object()) throw ConfigError("config must be a JSON object");
  const std::string kind = detail::get<std::string>(c, "kind", "config");
  if (std::find(scenario_kinds().begin(), scenario_kinds().end(), kind) == scenario_kinds().end())
    throw ConfigError("config.kind '" + kind + "' is not a known scenario kind");
  detail::get<std::string>(c, "outputs", "config");
  if (!c.contains("parameters") || !c.at("parameters").is_object())
    throw ConfigError("config.parameters must be an object");
  for (const std::string& k : required_parameters().at(kind))
    if (!c.at("parameters").contains(k)) throw ConfigError("config.parameters." + k + " is required for " + kind);
  if (c.contains("grid")) grid_from_json(c.at("grid"));
}

/// Runs a validated scenario in memory.
inline Result run_config(const json& c) {
  validate_config(c);
  const std::string kind = c.at("kind");
  const json& p = c.at("parameters");
  const FrequencyGrid g = c.contains("grid") ? grid_from_json(c.at("grid")) : default_grid();
  Result r{kind, {}, {}};

  if (kind == "two_machine_analysis") {
    const TwoMachineParams t = detail::two_machine_params(p, false);
    const StateSpace ss = two_machine::build_state_space(t);
    r.summary["eigenvalues"] = detail::complex_list(poles(ss));
    r.files.push_back({"eigenvalues.csv", detail::eigen_csv(poles(ss)), false});
    if (t.D1 == 0.0 && t.D2 == 0.0 && t.M1 == t.M2) {
      const auto tf = two_machine::performance_tfs(t);
      r.summary["Omega"] = two_machine::interarea_frequency(t);
      if (t.X1 < t.X2) {
        const auto [q1, q2] = two_machine::zero_frequencies(t);
        r.summary["q1"] = q1;
        r.summary["q2"] = q2;
      }
      r.files.push_back({"Gyd1_over_Gzd1.csv", bode_csv(g, (tf.Gyd1 / tf.Gzd1).simplify())});
      r.files.push_back({"Gyd2_over_Gzd2.csv", bode_csv(g, (tf.Gyd2 / tf.Gzd2).simplify())});
    } else {
      r.summary["note"] = "closed forms cover the undamped symmetric case only; eigenvalues from the state space";
    }
    return r;
  }

  if (kind == "filter_design" || kind == "feedback_analysis") {
    const FilterDesignSpec s = detail::filter_spec(p);
    const FilterDesign fd = filter_design(s);
    TwoMachineParams u = s.plant;
    u.D1 = u.D2 = 0.0;
    const auto t = two_machine::performance_tfs(u);
    r.summary["filter"] = io::to_json(fd.F);
    r.summary["closed_loop_norm"] = fd.h2.closed_loop_norm;
    r.files.push_back({"filter.csv", bode_csv(g, fd.F)});
    std::optional<std::pair<double, double>> q;
    if (u.X1 < u.X2) q = two_machine::zero_frequencies(u);
    auto band = [&](const std::string& tag, const std::vector<std::pair<std::string, RationalTF>>& curves) {
      const sens::Band b = sens::attenuation_band(curves, g);
      r.summary[tag + "_band"] = band_json(b);
      r.summary[tag + "_sup_outside"] = sens::sup_outside(curves, g, b);
      if (q) r.summary[tag + "_band_inside"] = band_inside(b, q->first, q->second);
      for (const auto& [name, tf] : curves) r.files.push_back({name + ".csv", bode_csv(g, tf)});
    };
    if (kind == "filter_design") {
      band("P", {{"P1", sens::filtering_pair(t.Gzd1, t.Gyd1, fd.F, "d1").P},
                 {"P2", sens::filtering_pair(t.Gzd2, t.Gyd2, fd.F, "d2").P}});
      return r;
    }
    const FeedbackStudy fs = feedback_study(fd.F, detail::get<double>(p, "Kz", "parameters"), u);
    band("R", {{"R1", fs.R1}, {"R2", fs.R2}});
    r.files.push_back({"S.csv", bode_csv(g, fs.sp.S)});
    r.files.push_back({"T.csv", bode_csv(g, fs.sp.T)});
    r.summary["controller"] = io::to_json(fs.K);
    r.summary["closed_loop_stable"] = fs.sp.closed_loop_stable;
    return r;
  }

  if (kind == "modal") {
    const std::string model = detail::get<std::string>(p, "model", "parameters");
    if (model == "two_machine") {
      const TwoMachineParams t = detail::two_machine_params(p, false);
      const StateSpace ss = two_machine::build_state_space(t);
      const modal::ModalDecomposition md = modal::decompose(ss.A);
      r.summary["eigenvalues"] = detail::complex_list(md.lambdas);
      r.files.push_back({"eigenvalues.csv", detail::eigen_csv(md.lambdas), false});
      return r;
    }
    if (model != "kundur") throw ConfigError("parameters.model must be 'kundur' or 'two_machine'");
    Result f = fig11(detail::preset(p));
    f.id = kind;
    f.files.front().name = "mode_shape.csv";
    return f;
  }

  const design::KundurCase kc = detail::preset(p);

  if (kind == "synthesize") {
    const detail::Controller k = detail::synthesize(kc, p);
    r.summary = k.report;
    r.files.push_back({"controller.json", io::to_json(k.K).dump(2) + "\n", false});
    return r;
  }

  if (kind == "simulate") {
    std::vector<grid::Disturbance> dist;
    for (const json& d : detail::get<json>(p, "disturbances", "parameters")) {
      const std::string w = "parameters.disturbances[]";
      grid::Disturbance x{detail::get<int>(d, "bus", w), detail::get<double>(d, "delta_P", w),
                          detail::get<double>(d, "t_start", w), detail::get<double>(d, "duration", w)};
      if (!(x.duration > 0.0)) throw ConfigError(w + ".duration must be > 0");
      kc.model.bus_index(x.bus);
      dist.push_back(x);
    }
    std::vector<grid::ControllerLoop> loops;
    if (p.contains("controller")) {
      const detail::Controller k = detail::synthesize(kc, p.at("controller"));
      loops.push_back({k.K, k.meas});
      r.summary["controller"] = k.report;
    }
    grid::SimOptions o;
    o.dt = detail::get_or<double>(p, "dt", o.dt, "parameters");
    o.t_end = detail::get_or<double>(p, "t_end", o.t_end, "parameters");
    o.record_energy = detail::get_or<bool>(p, "record_energy", false, "parameters");
    const grid::Trajectory tr = grid::simulate(kc.model, kc.op, loops, dist, o);
    r.files.push_back({"trajectory.csv", io::trajectory_csv(tr)});
    r.files.push_back({"trajectory.json", io::trajectory_metadata(tr).dump(2) + "\n", false});
    r.summary["separated"] = tr.separated;
    r.summary["peak_delta14"] =
        grid::peak_angle_difference(tr, kc.model.machines.front().label, kc.model.machines.back().label);
    return r;
  }

  // linearize
  std::vector<grid::MeasurementSpec> outs;
  for (const json& m : detail::get<json>(p, "outputs", "parameters"))
    outs.push_back(detail::measurement(m, "parameters.outputs[]"));
  grid::LinearizationInputs in;
  in.hvdc_P = detail::get_or<bool>(p, "hvdc", true, "parameters");
  in.load_buses = detail::get_or<std::vector<int>>(p, "load_buses", {}, "parameters");
  StateSpace ss = grid::linearize(kc.model, kc.op, in, outs);
  if (detail::get_or<bool>(p, "deflate", false, "parameters")) ss = grid::deflate_angle_reference(ss, kc.model);
  r.files.push_back({"linearization.json", io::to_json(ss).dump(2) + "\n", false});
  r.files.push_back({"eigenvalues.csv", detail::eigen_csv(poles(ss)), false});
  r.summary["states"] = ss.n();
  const modal::ModalDecomposition md = modal::decompose(ss.A);
  if (const Eigen::Index i = modal::find_mode(md, design::kBandLo, design::kBandHi); i >= 0) {
    r.summary["interarea_re"] = md.lambdas[static_cast<std::size_t>(i)].real();
    r.summary["interarea_im"] = md.lambdas[static_cast<std::size_t>(i)].imag();
    r.summary["interarea_zeta"] = modal::damping_ratio(md.lambdas[static_cast<std::size_t>(i)]);
  }
  return r;
}

}  // namespace podlim::scen
