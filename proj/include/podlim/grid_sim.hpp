#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "podlim/errors.hpp"
#include "podlim/lti.hpp"

namespace podlim::grid {

struct Bus {
  int id = 0;
  double load_P = 0.0;  // MW
  double load_Q = 0.0;  // MVAr
};

struct Line {
  int from = 0, to = 0;
  double X = 0.0;  // pu per circuit
  double R = 0.0;
  int count = 1;
};

struct Machine {
  std::string label;
  int bus = 0;
  double M = 0.0;         // MW s^2/rad
  double D = 0.0;         // MW/(rad/s)
  double Xd_prime = 0.0;  // pu
  double P_set = 0.0;     // MW dispatch for the initial power flow
  double V_set = 1.0;     // pu terminal voltage for the initial power flow
  double P_mech = 0.0;    // MW, set by solve_equilibrium
  double E_prime = 0.0;   // pu, set by solve_equilibrium
};

struct Hvdc {
  int from_bus = 0, to_bus = 0;
  double P0 = 0.0;     // MW
  double limit = 75.0;  // MW, symmetric around P0
};

struct GridModel {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Machine> machines;
  std::optional<Hvdc> hvdc;
  double system_base = 100.0;  // MVA
  double f_s = 60.0;           // Hz
  int slack_machine = 0;
  std::vector<int> corridor_lines;  // lines whose summed flow is the inter-area flow
  /// Base loads as constant impedance at their equilibrium voltage; disturbances stay constant power.
  bool impedance_loads = false;
  std::vector<double> load_V0;  // set by solve_equilibrium

  int bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return static_cast<int>(i);
    throw ConfigError("grid: unknown bus id " + std::to_string(id));
  }

  void validate() const {
    if (buses.empty() || machines.empty()) throw ConfigError("grid: need at least one bus and one machine");
    for (const Line& l : lines) {
      bus_index(l.from);
      bus_index(l.to);
      if (!(l.X > 0.0) || l.R < 0.0 || l.count < 1) throw ConfigError("grid: line needs X > 0, R >= 0, count >= 1");
    }
    for (const Machine& m : machines) {
      bus_index(m.bus);
      if (!(m.M > 0.0) || !(m.Xd_prime > 0.0) || m.D < 0.0)
        throw ConfigError("grid: machine '" + m.label + "' needs M > 0, Xd' > 0, D >= 0");
    }
    if (hvdc) {
      bus_index(hvdc->from_bus);
      bus_index(hvdc->to_bus);
      if (hvdc->limit < 0.0) throw ConfigError("grid: HVDC limit must be >= 0");
    }
    if (slack_machine < 0 || slack_machine >= static_cast<int>(machines.size()))
      throw ConfigError("grid: slack machine index out of range");
    // connectivity
    const std::size_t n = buses.size();
    std::vector<int> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    auto find = [&](int i) {
      while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
      return i;
    };
    for (const Line& l : lines) parent[static_cast<std::size_t>(find(bus_index(l.from)))] = find(bus_index(l.to));
    for (std::size_t i = 0; i < n; ++i)
      if (find(static_cast<int>(i)) != find(0)) throw ConfigError("grid: network graph is not connected");
  }
};

struct Disturbance {
  int bus = 0;
  double delta_P = 0.0;  // MW, positive = added load
  double t_start = 0.0;
  double duration = 1.0;
};

enum class MeasKind { theta_bus, freq_bus, line_P, bus_Vmag, machine_speed };

inline std::string to_string(MeasKind k) {
  switch (k) {
    case MeasKind::theta_bus: return "theta_bus";
    case MeasKind::freq_bus: return "freq_bus";
    case MeasKind::line_P: return "line_P";
    case MeasKind::bus_Vmag: return "bus_Vmag";
    case MeasKind::machine_speed: return "machine_speed";
  }
  return "?";
}

inline MeasKind meas_kind_from_string(const std::string& s) {
  for (MeasKind k : {MeasKind::theta_bus, MeasKind::freq_bus, MeasKind::line_P, MeasKind::bus_Vmag,
                     MeasKind::machine_speed})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown measurement kind '" + s + "'");
}

/// Deviation from the operating point. Angles in rad (or deg with `degrees`), powers in MW.
/// `location` is a bus id, a line index or a machine index depending on `kind`.
struct MeasurementSpec {
  MeasKind kind = MeasKind::theta_bus;
  int location = 0;
  double delay = 0.0;
  double freq_lp_corner = 20.0;
  bool degrees = false;

  std::string label() const {
    return to_string(kind) + "_" + std::to_string(location) + (delay > 0.0 ? "_delayed" : "");
  }
};

struct OperatingPoint {
  Vec delta;     // rad, machine-1 rotor frame
  Vec E;         // pu
  Vec theta, V;  // per bus
  Vec P_e;       // MW
  double corridor_flow = 0.0;
  double max_residual = 0.0;
};

struct Trajectory {
  std::vector<double> time;
  std::map<std::string, std::vector<double>> signals;
  double dt = 0.0;
  std::string solver = "rk4";
  std::string model_hash;
  bool separated = false;
  double t_separation = std::numeric_limits<double>::quiet_NaN();

  const std::vector<double>& at(const std::string& key) const {
    auto it = signals.find(key);
    if (it == signals.end()) throw ValueError("trajectory has no signal '" + key + "'");
    return it->second;
  }
};

/// FNV-1a over a canonical text dump; identifies the model in trajectory metadata.
inline std::string model_hash(const GridModel& m) {
  std::string s;
  char buf[64];
  auto add = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    s += buf;
  };
  for (const Bus& b : m.buses) add(b.id), add(b.load_P), add(b.load_Q);
  for (const Line& l : m.lines) add(l.from), add(l.to), add(l.X), add(l.R), add(l.count);
  for (const Machine& g : m.machines) add(g.bus), add(g.M), add(g.D), add(g.Xd_prime), add(g.P_set), add(g.V_set);
  if (m.hvdc) add(m.hvdc->from_bus), add(m.hvdc->to_bus), add(m.hvdc->P0), add(m.hvdc->limit);
  add(m.system_base), add(m.f_s);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline CMat line_admittance(const GridModel& m) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.buses.size());
  CMat Y = CMat::Zero(n, n);
  for (const Line& l : m.lines) {
    const int a = m.bus_index(l.from), b = m.bus_index(l.to);
    const cplx y = static_cast<double>(l.count) / cplx(l.R, l.X);
    Y(a, a) += y;
    Y(b, b) += y;
    Y(a, b) -= y;
    Y(b, a) -= y;
  }
  return Y;
}

/// Newton on S(V) = V conj(Y V - Isrc) = Sinj in polar coordinates.
/// `fixed_theta`/`fixed_V` mark unknowns held at their current value (power-flow use);
/// rows listed in `skip_P`/`skip_Q` are dropped from the mismatch.
struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  int worst_bus = -1;
};

inline NewtonResult polar_newton(const CMat& Y, const CVec& Isrc, const CVec& Sinj, Vec& theta, Vec& Vm,
                                 const std::vector<bool>& free_theta, const std::vector<bool>& free_V,
                                 const std::vector<bool>& use_P, const std::vector<bool>& use_Q, double tol,
                                 int max_iter, bool polish = false) {
  const Eigen::Index n = Y.rows();
  std::vector<Eigen::Index> cols, rows;
  for (Eigen::Index k = 0; k < n; ++k)
    if (free_theta[static_cast<std::size_t>(k)]) cols.push_back(k);
  for (Eigen::Index k = 0; k < n; ++k)
    if (free_V[static_cast<std::size_t>(k)]) cols.push_back(n + k);
  for (Eigen::Index k = 0; k < n; ++k)
    if (use_P[static_cast<std::size_t>(k)]) rows.push_back(k);
  for (Eigen::Index k = 0; k < n; ++k)
    if (use_Q[static_cast<std::size_t>(k)]) rows.push_back(n + k);
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size()), nc = static_cast<Eigen::Index>(cols.size());
  if (nr != nc) throw NumericError("network Newton: equation/unknown count mismatch");

  auto mismatch = [&](const CVec& V, CVec& Ibus) {
    Ibus = Y * V - Isrc;
    return CVec(V.cwiseProduct(Ibus.conjugate()) - Sinj);
  };
  NewtonResult r;
  double prev = std::numeric_limits<double>::infinity();
  int extra = polish ? 3 : 0;
  for (int it = 0; it <= max_iter; ++it) {
    CVec V(n);
    for (Eigen::Index k = 0; k < n; ++k) V(k) = std::polar(Vm(k), theta(k));
    CVec Ibus;
    const CVec F = mismatch(V, Ibus);
    Vec f(nr);
    for (Eigen::Index i = 0; i < nr; ++i) {
      const Eigen::Index q = rows[static_cast<std::size_t>(i)];
      f(i) = q < n ? F(q).real() : F(q - n).imag();
    }
    r.residual = nr ? f.cwiseAbs().maxCoeff() : 0.0;
    r.iterations = it;
    if (nr) {
      Eigen::Index w;
      f.cwiseAbs().maxCoeff(&w);
      r.worst_bus = static_cast<int>(rows[static_cast<std::size_t>(w)] % n);
    }
    if (!std::isfinite(r.residual)) return r;
    if (r.residual < tol) {
      r.converged = true;
      if (extra == 0 || !(r.residual < prev)) return r;
      --extra;
    } else if (it == max_iter) {
      return r;
    }
    prev = r.residual;
    // dS/dtheta and dS/d|V|
    const CVec Vn = V.cwiseQuotient(Vm.cast<cplx>());
    CMat dSa = cplx(0.0, 1.0) * V.asDiagonal() * (CMat(Ibus.asDiagonal()) - Y * V.asDiagonal()).conjugate();
    CMat dSm = V.asDiagonal() * (Y * Vn.asDiagonal()).conjugate();
    dSm += CMat(Ibus.conjugate().asDiagonal()) * Vn.asDiagonal();
    Mat J(nr, nc);
    for (Eigen::Index i = 0; i < nr; ++i) {
      const Eigen::Index q = rows[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < nc; ++j) {
        const Eigen::Index c = cols[static_cast<std::size_t>(j)];
        const cplx d = c < n ? dSa(q % n, c) : dSm(q % n, c - n);
        J(i, j) = q < n ? d.real() : d.imag();
      }
    }
    Eigen::PartialPivLU<Mat> lu(J);
    const Vec dx = lu.solve(-f);
    if (!dx.allFinite()) return r;
    for (Eigen::Index j = 0; j < nc; ++j) {
      const Eigen::Index c = cols[static_cast<std::size_t>(j)];
      if (c < n)
        theta(c) += dx(j);
      else
        Vm(c - n) += dx(j);
    }
    if ((Vm.array() <= 0.0).any()) return r;
  }
  return r;
}

}  // namespace detail

/// Algebraic network with machines as E' sources behind X'd and constant-power loads.
class Network {
 public:
  explicit Network(const GridModel& m) : model_(&m) {
    m.validate();
    n_ = static_cast<Eigen::Index>(m.buses.size());
    Y_ = detail::line_admittance(m);
    for (const Machine& g : m.machines) {
      const int k = m.bus_index(g.bus);
      mbus_.push_back(k);
      Y_(k, k) += 1.0 / cplx(0.0, g.Xd_prime);
    }
    if (m.hvdc) {
      hfrom_ = m.bus_index(m.hvdc->from_bus);
      hto_ = m.bus_index(m.hvdc->to_bus);
    }
    if (m.impedance_loads) {
      if (m.load_V0.size() != m.buses.size()) throw ContractError("impedance loads need solve_equilibrium first");
      for (Eigen::Index k = 0; k < n_; ++k) {
        const Bus& b = m.buses[static_cast<std::size_t>(k)];
        const double v0 = m.load_V0[static_cast<std::size_t>(k)];
        Y_(k, k) += cplx(b.load_P, -b.load_Q) / (m.system_base * v0 * v0);
      }
    }
  }

  struct Solution {
    Vec theta, V;
    Vec P_e;  // MW
    int iterations = 0;
  };

  /// Solve for bus voltages; throws NumericError (with worst bus) on non-convergence.
  Solution solve(const Vec& delta, const Vec& load_P_MW, double P_dc_MW, Vec theta0, Vec V0, double tol = 1e-10,
                 bool polish = false) const {
    const GridModel& m = *model_;
    const double base = m.system_base;
    CVec Isrc = CVec::Zero(n_), Sinj(n_);
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
      const Machine& g = m.machines[i];
      Isrc(mbus_[i]) += std::polar(g.E_prime, delta(static_cast<Eigen::Index>(i))) / cplx(0.0, g.Xd_prime);
    }
    for (Eigen::Index k = 0; k < n_; ++k) {
      const Bus& b = m.buses[static_cast<std::size_t>(k)];
      Sinj(k) = m.impedance_loads ? -cplx(load_P_MW(k) - b.load_P, 0.0) / base : -cplx(load_P_MW(k), b.load_Q) / base;
    }
    if (m.hvdc) {
      Sinj(hfrom_) += P_dc_MW / base;
      Sinj(hto_) -= P_dc_MW / base;
    }
    const std::vector<bool> all(static_cast<std::size_t>(n_), true);
    auto r = detail::polar_newton(Y_, Isrc, Sinj, theta0, V0, all, all, all, all, tol, 50, polish);
    if (!r.converged)
      throw NumericError("network solve did not converge (residual " + std::to_string(r.residual) +
                         " pu, worst bus " + (r.worst_bus >= 0 ? std::to_string(m.buses[r.worst_bus].id) : "?") + ")");
    Solution s;
    s.theta = std::move(theta0);
    s.V = std::move(V0);
    s.iterations = r.iterations;
    s.P_e.resize(static_cast<Eigen::Index>(m.machines.size()));
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
      const Machine& g = m.machines[i];
      const cplx E = std::polar(g.E_prime, delta(static_cast<Eigen::Index>(i)));
      const cplx Vt = std::polar(s.V(mbus_[i]), s.theta(mbus_[i]));
      const cplx I = (E - Vt) / cplx(0.0, g.Xd_prime);
      s.P_e(static_cast<Eigen::Index>(i)) = (E * std::conj(I)).real() * base;
    }
    return s;
  }

  /// Flow from `from` to `to` on one circuit of line l, MW.
  double line_flow(int l, const Vec& theta, const Vec& V) const {
    const Line& ln = model_->lines[static_cast<std::size_t>(l)];
    const int a = model_->bus_index(ln.from), b = model_->bus_index(ln.to);
    const cplx Va = std::polar(V(a), theta(a)), Vb = std::polar(V(b), theta(b));
    return (Va * std::conj((Va - Vb) / cplx(ln.R, ln.X))).real() * model_->system_base;
  }

  Eigen::Index n() const { return n_; }
  int machine_bus(std::size_t i) const { return mbus_[i]; }
  const CMat& Y() const { return Y_; }

 private:
  const GridModel* model_;
  Eigen::Index n_ = 0;
  CMat Y_;
  std::vector<int> mbus_;
  int hfrom_ = -1, hto_ = -1;
};

inline Vec base_loads(const GridModel& m) {
  Vec p(static_cast<Eigen::Index>(m.buses.size()));
  for (std::size_t k = 0; k < m.buses.size(); ++k) p(static_cast<Eigen::Index>(k)) = m.buses[k].load_P;
  return p;
}

inline double corridor_flow(const GridModel& m, const Network& net, const Vec& theta, const Vec& V) {
  double f = 0.0;
  for (int l : m.corridor_lines)
    f += net.line_flow(l, theta, V) * m.lines[static_cast<std::size_t>(l)].count;
  return f;
}

namespace detail {

struct PowerFlow {
  Vec theta, V;
  Vec Pg, Qg;  // MW, MVAr per machine
};

inline PowerFlow power_flow(const GridModel& m) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.buses.size());
  const double base = m.system_base;
  const CMat Y = line_admittance(m);
  std::vector<bool> free_theta(static_cast<std::size_t>(n), true), free_V(static_cast<std::size_t>(n), true);
  std::vector<bool> use_P(static_cast<std::size_t>(n), true), use_Q(static_cast<std::size_t>(n), true);
  Vec theta = Vec::Zero(n), Vm = Vec::Ones(n);
  CVec Sinj(n);
  for (Eigen::Index k = 0; k < n; ++k)
    Sinj(k) = -cplx(m.buses[static_cast<std::size_t>(k)].load_P, m.buses[static_cast<std::size_t>(k)].load_Q) / base;
  if (m.hvdc) {
    Sinj(m.bus_index(m.hvdc->from_bus)) += m.hvdc->P0 / base;
    Sinj(m.bus_index(m.hvdc->to_bus)) -= m.hvdc->P0 / base;
  }
  for (std::size_t i = 0; i < m.machines.size(); ++i) {
    const Machine& g = m.machines[i];
    const int k = m.bus_index(g.bus);
    free_V[static_cast<std::size_t>(k)] = false;
    use_Q[static_cast<std::size_t>(k)] = false;
    Vm(k) = g.V_set;
    if (static_cast<int>(i) == m.slack_machine) {
      free_theta[static_cast<std::size_t>(k)] = false;
      use_P[static_cast<std::size_t>(k)] = false;
    } else {
      Sinj(k) += g.P_set / base;
    }
  }
  auto r = polar_newton(Y, CVec::Zero(n), Sinj, theta, Vm, free_theta, free_V, use_P, use_Q, 1e-12, 50, true);
  if (!r.converged)
    throw ConfigError("power flow did not converge (residual " + std::to_string(r.residual) + " pu at bus " +
                      (r.worst_bus >= 0 ? std::to_string(m.buses[static_cast<std::size_t>(r.worst_bus)].id) : "?") +
                      "); operating point likely beyond the static transfer limit");
  CVec V(n);
  for (Eigen::Index k = 0; k < n; ++k) V(k) = std::polar(Vm(k), theta(k));
  const CVec S = V.cwiseProduct((Y * V).conjugate());  // net injection into the network, pu
  PowerFlow pf;
  pf.theta = theta;
  pf.V = Vm;
  pf.Pg.resize(static_cast<Eigen::Index>(m.machines.size()));
  pf.Qg.resize(pf.Pg.size());
  for (std::size_t i = 0; i < m.machines.size(); ++i) {
    const int k = m.bus_index(m.machines[i].bus);
    const cplx sg = S(k) * base + cplx(m.buses[static_cast<std::size_t>(k)].load_P, m.buses[static_cast<std::size_t>(k)].load_Q);
    pf.Pg(static_cast<Eigen::Index>(i)) = sg.real();
    pf.Qg(static_cast<Eigen::Index>(i)) = sg.imag();
  }
  return pf;
}

}  // namespace detail

/// Power flow, E' behind X'd, and the rotor angles; fills P_mech and E_prime in `m`.
inline OperatingPoint solve_equilibrium(GridModel& m) {
  m.validate();
  const detail::PowerFlow pf = detail::power_flow(m);
  const Eigen::Index nm = static_cast<Eigen::Index>(m.machines.size());
  OperatingPoint op;
  op.delta.resize(nm);
  op.E.resize(nm);
  for (Eigen::Index i = 0; i < nm; ++i) {
    Machine& g = m.machines[static_cast<std::size_t>(i)];
    const int k = m.bus_index(g.bus);
    const cplx Vt = std::polar(pf.V(k), pf.theta(k));
    const cplx I = std::conj(cplx(pf.Pg(i), pf.Qg(i)) / m.system_base / Vt);
    const cplx E = Vt + cplx(0.0, g.Xd_prime) * I;
    g.E_prime = std::abs(E);
    g.P_mech = pf.Pg(i);
    op.delta(i) = std::arg(E);
    op.E(i) = g.E_prime;
  }
  const double ref = op.delta(0);
  op.delta.array() -= ref;
  m.load_V0.assign(pf.V.data(), pf.V.data() + pf.V.size());
  Network net(m);
  Vec th = pf.theta.array() - ref;
  auto sol = net.solve(op.delta, base_loads(m), m.hvdc ? m.hvdc->P0 : 0.0, th, pf.V, 1e-12, true);
  op.theta = sol.theta;
  op.V = sol.V;
  op.P_e = sol.P_e;
  op.max_residual = 0.0;
  for (Eigen::Index i = 0; i < nm; ++i) {
    op.max_residual = std::max(op.max_residual, std::abs(sol.P_e(i) - m.machines[static_cast<std::size_t>(i)].P_mech) / m.system_base);
    m.machines[static_cast<std::size_t>(i)].P_mech = sol.P_e(i);
  }
  double gen = sol.P_e.sum(), load = base_loads(m).sum();
  double losses = 0.0;
  for (std::size_t l = 0; l < m.lines.size(); ++l) {
    const Line& ln = m.lines[l];
    if (ln.R == 0.0) continue;
    const int a = m.bus_index(ln.from), b = m.bus_index(ln.to);
    const cplx Va = std::polar(op.V(a), op.theta(a)), Vb = std::polar(op.V(b), op.theta(b));
    losses += std::norm((Va - Vb) / cplx(ln.R, ln.X)) * ln.R * ln.count * m.system_base;
  }
  if (std::abs(gen - load - losses) / m.system_base > 1e-6)
    throw NumericError("solve_equilibrium: generation/load balance violated");
  op.corridor_flow = corridor_flow(m, net, op.theta, op.V);
  return op;
}

/// Standard two-area four-machine system on a 100 MVA base with classical machines.
///
/// Area 1 dispatch is set so the corridor (7-8) carries `interarea_flow` MW; G3 is slack.
/// Uniform machine damping of 5.6 MW/(rad/s) puts the inter-area mode near 3 %.
inline GridModel kundur_two_area(double inertia_scale = 0.75, double interarea_flow = 500.0,
                                 double hvdc_limit = 75.0, double damping = 5.6, bool impedance_loads = true) {
  if (!(inertia_scale > 0.0 && inertia_scale <= 1.5)) throw ConfigError("kundur: inertia_scale must be in (0, 1.5]");
  if (!std::isfinite(interarea_flow)) throw ConfigError("kundur: interarea_flow must be finite");
  GridModel m;
  m.system_base = 100.0;
  m.f_s = 60.0;
  for (int id = 1; id <= 11; ++id) m.buses.push_back({id, 0.0, 0.0});
  m.buses[6] = {7, 967.0, 100.0 - 200.0};
  m.buses[8] = {9, 1767.0, 100.0 - 350.0};
  const double xt = 0.15 * 100.0 / 900.0;
  m.lines = {{1, 5, xt, 0.0, 1},     {2, 6, xt, 0.0, 1},   {3, 11, xt, 0.0, 1},  {4, 10, xt, 0.0, 1},
             {5, 6, 0.025, 0.0, 2},  {6, 7, 0.01, 0.0, 2}, {7, 8, 0.11, 0.0, 2}, {8, 9, 0.11, 0.0, 2},
             {9, 10, 0.01, 0.0, 2},  {10, 11, 0.025, 0.0, 2}};
  m.corridor_lines = {6};
  const double ws = 2.0 * std::numbers::pi * m.f_s;
  auto M = [&](double H) { return 2.0 * H * 900.0 / ws * inertia_scale; };
  const double xd = 0.3 * 100.0 / 900.0;
  const double p12 = 0.5 * (967.0 + interarea_flow);
  m.machines = {{"G1", 1, M(6.5), damping, xd, p12, 1.03},
                {"G2", 2, M(6.5), damping, xd, p12, 1.01},
                {"G3", 3, M(6.175), damping, xd, 0.0, 1.03},
                {"G4", 4, M(6.175), damping, xd, 700.0, 1.01}};
  m.slack_machine = 2;
  // Positive P_dc moves power from bus 7 (area 1) to bus 9 (area 2).
  m.hvdc = Hvdc{9, 7, 0.0, hvdc_limit};
  m.impedance_loads = impedance_loads;
  return m;
}

// ---------------------------------------------------------------------------
// Dynamic simulation

struct ControllerLoop {
  StateSpace K;  // u = -K y, y the measurement deviation
  MeasurementSpec meas;
};

struct SimOptions {
  double dt = 0.005;
  double t_end = 20.0;
  Vec initial_speed;  // rad/s deviations, optional
  bool record_energy = false;
};

namespace detail {

/// Linear interpolation in a uniformly sampled history starting at t = 0; zero before.
inline double sample_history(const std::vector<double>& h, double dt, double t) {
  if (t <= 0.0 || h.empty()) return h.empty() ? 0.0 : (t <= 0.0 ? h.front() : 0.0);
  const double x = t / dt;
  const std::size_t i = static_cast<std::size_t>(std::floor(x));
  if (i + 1 >= h.size()) return h.back();
  const double a = x - static_cast<double>(i);
  return (1.0 - a) * h[i] + a * h[i + 1];
}

}  // namespace detail

/// Energy function for the lossless structure-preserving model (MW rad).
inline double energy(const GridModel& m, const Network& net, const Vec& delta, const Vec& omega, const Vec& theta,
                     const Vec& V, const Vec& load_P) {
  const double base = m.system_base;
  double W = 0.0;
  const Eigen::Index n = net.n(), nm = static_cast<Eigen::Index>(m.machines.size());
  for (Eigen::Index i = 0; i < nm; ++i) {
    const Machine& g = m.machines[static_cast<std::size_t>(i)];
    W += 0.5 * g.M * omega(i) * omega(i) - g.P_mech * delta(i);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    W += load_P(k) * theta(k) + m.buses[static_cast<std::size_t>(k)].load_Q * std::log(V(k));
  }
  // -1/2 sum B_ab V_a V_b cos(theta_a - theta_b) over network and internal nodes
  const CMat Yl = detail::line_admittance(m);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      W -= 0.5 * Yl(a, b).imag() * V(a) * V(b) * std::cos(theta(a) - theta(b)) * base;
  for (Eigen::Index i = 0; i < nm; ++i) {
    const Machine& g = m.machines[static_cast<std::size_t>(i)];
    const int k = net.machine_bus(static_cast<std::size_t>(i));
    const double b = -1.0 / g.Xd_prime;  // Im(1/(jX))
    // branch between internal node (E', delta) and terminal bus k
    W -= 0.5 * base * (b * g.E_prime * g.E_prime + b * V(k) * V(k) - 2.0 * b * g.E_prime * V(k) * std::cos(delta(i) - theta(k)));
  }
  return W;
}

inline Trajectory simulate(const GridModel& m, const OperatingPoint& op, const std::vector<ControllerLoop>& loops,
                           const std::vector<Disturbance>& dist, const SimOptions& opt = {}) {
  if (!(opt.dt > 0.0) || opt.dt > 0.01 + 1e-15) throw ValueError("simulate: dt must be in (0, 10 ms]");
  if (!(opt.t_end > 0.0)) throw ValueError("simulate: t_end must be > 0");
  for (const Disturbance& d : dist) {
    m.bus_index(d.bus);
    if (!(d.duration > 0.0)) throw ValueError("simulate: disturbance duration must be > 0");
  }
  if (!loops.empty() && !m.hvdc) throw ConfigError("simulate: controllers need an HVDC actuator");
  const Network net(m);
  const Eigen::Index nm = static_cast<Eigen::Index>(m.machines.size());
  const Eigen::Index nb = net.n();
  const Vec loads0 = base_loads(m);
  const double P0 = m.hvdc ? m.hvdc->P0 : 0.0;

  // state layout: delta, omega, controller states, frequency-filter states
  std::vector<Eigen::Index> koff, foff;
  Eigen::Index N = 2 * nm;
  for (const ControllerLoop& c : loops) {
    if (c.K.m() != 1 || c.K.p() != 1) throw DimensionError("simulate: controllers must be SISO");
    if (c.K.D(0, 0) != 0.0) throw ContractError("simulate: controllers must be strictly proper (D = 0)");
    if (c.meas.delay < 0.0) throw ValueError("simulate: delay must be >= 0");
    if (c.meas.delay > 0.0 && c.meas.delay < opt.dt) throw ValueError("simulate: delay shorter than dt");
    koff.push_back(N);
    N += c.K.n();
  }
  for (const ControllerLoop& c : loops) {
    foff.push_back(N);
    if (c.meas.kind == MeasKind::freq_bus) ++N;
  }

  auto loads_at = [&](double t) {
    Vec p = loads0;
    for (const Disturbance& d : dist)
      if (t >= d.t_start && t < d.t_start + d.duration) p(m.bus_index(d.bus)) += d.delta_P;
    return p;
  };
  auto u_of = [&](const Vec& x, double& u_req) {
    u_req = 0.0;
    for (std::size_t c = 0; c < loops.size(); ++c)
      u_req -= (loops[c].K.C * x.segment(koff[c], loops[c].K.n()))(0);
    if (!m.hvdc) return 0.0;
    return P0 + std::clamp(u_req, -m.hvdc->limit, m.hvdc->limit);
  };

  Vec th_ws = op.theta, V_ws = op.V;
  auto raw_meas = [&](const MeasurementSpec& s, const Vec& x, const Network::Solution& sol) -> double {
    const double ang = s.degrees ? 180.0 / std::numbers::pi : 1.0;
    switch (s.kind) {
      case MeasKind::theta_bus:
      case MeasKind::freq_bus: {
        const int k = m.bus_index(s.location);
        return (sol.theta(k) - op.theta(k)) * ang;
      }
      case MeasKind::line_P:
        return net.line_flow(s.location, sol.theta, sol.V) - net.line_flow(s.location, op.theta, op.V);
      case MeasKind::bus_Vmag: {
        const int k = m.bus_index(s.location);
        return sol.V(k) - op.V(k);
      }
      case MeasKind::machine_speed:
        if (s.location < 0 || s.location >= nm) throw ConfigError("measurement: machine index out of range");
        return x(nm + s.location) * ang;
    }
    return 0.0;
  };
  // measurement after the optional frequency filter (undelayed)
  auto meas_now = [&](std::size_t c, const Vec& x, const Network::Solution& sol) {
    const MeasurementSpec& s = loops[c].meas;
    const double r = raw_meas(s, x, sol);
    if (s.kind == MeasKind::freq_bus) return s.freq_lp_corner * (r - x(foff[c]));
    return r;
  };

  std::vector<std::vector<double>> hist(loops.size());
  auto rhs = [&](double t, const Vec& x) {
    Vec dx = Vec::Zero(N);
    double u_req;
    const double pdc = u_of(x, u_req);
    const Network::Solution sol = net.solve(x.head(nm), loads_at(t), pdc, th_ws, V_ws);
    th_ws = sol.theta;
    V_ws = sol.V;
    for (Eigen::Index i = 0; i < nm; ++i) {
      const Machine& g = m.machines[static_cast<std::size_t>(i)];
      dx(i) = x(nm + i);
      dx(nm + i) = (g.P_mech - sol.P_e(i) - g.D * x(nm + i)) / g.M;
    }
    for (std::size_t c = 0; c < loops.size(); ++c) {
      const MeasurementSpec& s = loops[c].meas;
      double y;
      if (s.delay > 0.0) {
        y = detail::sample_history(hist[c], opt.dt, t - s.delay);
      } else {
        y = meas_now(c, x, sol);
      }
      const StateSpace& K = loops[c].K;
      dx.segment(koff[c], K.n()) = K.A * x.segment(koff[c], K.n()) + K.B.col(0) * y;
      if (s.kind == MeasKind::freq_bus)
        dx(foff[c]) = s.freq_lp_corner * (raw_meas(s, x, sol) - x(foff[c]));
    }
    return dx;
  };

  Vec x = Vec::Zero(N);
  x.head(nm) = op.delta;
  if (opt.initial_speed.size() == nm) x.segment(nm, nm) = opt.initial_speed;

  Trajectory tr;
  tr.dt = opt.dt;
  tr.model_hash = model_hash(m);
  const std::size_t steps = static_cast<std::size_t>(std::llround(opt.t_end / opt.dt));
  auto record = [&](double t, const Vec& xs) {
    double u_req;
    const double pdc = u_of(xs, u_req);
    const Vec lp = loads_at(t);
    const Network::Solution sol = net.solve(xs.head(nm), lp, pdc, th_ws, V_ws);
    th_ws = sol.theta;
    V_ws = sol.V;
    tr.time.push_back(t);
    for (Eigen::Index i = 0; i < nm; ++i) {
      const std::string& lb = m.machines[static_cast<std::size_t>(i)].label;
      tr.signals["delta_" + lb].push_back(xs(i));
      tr.signals["omega_" + lb].push_back(xs(nm + i));
      tr.signals["Pe_" + lb].push_back(sol.P_e(i));
    }
    for (Eigen::Index k = 0; k < nb; ++k) {
      const std::string id = std::to_string(m.buses[static_cast<std::size_t>(k)].id);
      tr.signals["theta_" + id].push_back(sol.theta(k) - xs(0));
      tr.signals["theta_abs_" + id].push_back(sol.theta(k));
      tr.signals["V_" + id].push_back(sol.V(k));
    }
    for (std::size_t l = 0; l < m.lines.size(); ++l)
      tr.signals["P_line_" + std::to_string(l)].push_back(net.line_flow(static_cast<int>(l), sol.theta, sol.V));
    tr.signals["u"].push_back(u_req);
    tr.signals["P_dc"].push_back(pdc);
    tr.signals["hvdc_inj_from"].push_back(pdc);
    tr.signals["hvdc_inj_to"].push_back(-pdc);
    for (std::size_t c = 0; c < loops.size(); ++c) {
      const double y = meas_now(c, xs, sol);
      hist[c].push_back(y);
      const double yd = loops[c].meas.delay > 0.0 ? detail::sample_history(hist[c], opt.dt, t - loops[c].meas.delay) : y;
      tr.signals["y" + std::to_string(c) + "_" + loops[c].meas.label()].push_back(yd);
    }
    if (opt.record_energy)
      tr.signals["energy"].push_back(energy(m, net, xs.head(nm), xs.segment(nm, nm), sol.theta, sol.V, lp));
  };

  record(0.0, x);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * opt.dt;
    Vec xn;
    try {
      const Vec k1 = rhs(t, x);
      const Vec k2 = rhs(t + 0.5 * opt.dt, x + 0.5 * opt.dt * k1);
      const Vec k3 = rhs(t + 0.5 * opt.dt, x + 0.5 * opt.dt * k2);
      const Vec k4 = rhs(t + opt.dt, x + opt.dt * k3);
      xn = x + opt.dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      double spread = xn.head(nm).maxCoeff() - xn.head(nm).minCoeff();
      if (!(spread <= std::numbers::pi)) throw NumericError("angle separation");
      x = xn;
      record(static_cast<double>(k + 1) * opt.dt, x);
    } catch (const NumericError&) {
      tr.separated = true;
      tr.t_separation = t + opt.dt;
      break;
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Linearization

struct LinearizationInputs {
  bool hvdc_P = true;
  std::vector<int> load_buses;
};

/// Central-difference linearization of the network-reduced ODE around `op`.
///
/// States: rotor angles (rad), speeds (rad/s), then one filter state per freq_bus output.
/// Inputs: P_dc then load deviations, all MW. Outputs: measurement deviations.
inline StateSpace linearize(const GridModel& m, const OperatingPoint& op, const LinearizationInputs& in,
                            const std::vector<MeasurementSpec>& outs, double rel_step = 1e-6) {
  const Network net(m);
  const Eigen::Index nm = static_cast<Eigen::Index>(m.machines.size());
  std::vector<Eigen::Index> foff;
  Eigen::Index N = 2 * nm;
  for (const MeasurementSpec& s : outs) {
    foff.push_back(s.kind == MeasKind::freq_bus ? N : -1);
    if (s.kind == MeasKind::freq_bus) ++N;
    if (s.delay > 0.0) throw UnsupportedError("linearize: model delays with pade_delay on the linear model");
  }
  const Eigen::Index nu = (in.hvdc_P ? 1 : 0) + static_cast<Eigen::Index>(in.load_buses.size());
  if (in.hvdc_P && !m.hvdc) throw ConfigError("linearize: model has no HVDC link");
  const Vec loads0 = base_loads(m);
  const double P0 = m.hvdc ? m.hvdc->P0 : 0.0;

  // Reference values of the outputs at the operating point (filter states rest at theta_op).
  auto eval = [&](const Vec& x, const Vec& u, Vec& f, Vec& y) {
    Vec lp = loads0;
    double pdc = P0;
    Eigen::Index j = 0;
    if (in.hvdc_P) pdc += u(j++);
    for (int b : in.load_buses) lp(m.bus_index(b)) += u(j++);
    const Network::Solution sol = net.solve(x.head(nm), lp, pdc, op.theta, op.V, 1e-13, true);
    f = Vec::Zero(N);
    for (Eigen::Index i = 0; i < nm; ++i) {
      const Machine& g = m.machines[static_cast<std::size_t>(i)];
      f(i) = x(nm + i);
      f(nm + i) = (g.P_mech - sol.P_e(i) - g.D * x(nm + i)) / g.M;
    }
    y.resize(static_cast<Eigen::Index>(outs.size()));
    for (std::size_t o = 0; o < outs.size(); ++o) {
      const MeasurementSpec& s = outs[o];
      const double ang = s.degrees ? 180.0 / std::numbers::pi : 1.0;
      double r = 0.0;
      switch (s.kind) {
        case MeasKind::theta_bus:
        case MeasKind::freq_bus: {
          const int k = m.bus_index(s.location);
          r = (sol.theta(k) - op.theta(k)) * ang;
          break;
        }
        case MeasKind::line_P:
          r = net.line_flow(s.location, sol.theta, sol.V) - net.line_flow(s.location, op.theta, op.V);
          break;
        case MeasKind::bus_Vmag:
          r = sol.V(m.bus_index(s.location)) - op.V(m.bus_index(s.location));
          break;
        case MeasKind::machine_speed:
          if (s.location < 0 || s.location >= nm) throw ConfigError("measurement: machine index out of range");
          r = x(nm + s.location) * ang;
          break;
      }
      if (s.kind == MeasKind::freq_bus) {
        f(foff[o]) = s.freq_lp_corner * (r - x(foff[o]));
        r = s.freq_lp_corner * (r - x(foff[o]));
      }
      y(static_cast<Eigen::Index>(o)) = r;
    }
  };

  Vec x0 = Vec::Zero(N);
  x0.head(nm) = op.delta;
  const Vec u0 = Vec::Zero(nu);
  const Eigen::Index p = static_cast<Eigen::Index>(outs.size());
  Mat A(N, N), B(N, nu), C(p, N), D(p, nu);
  Vec fp, fm, yp, ym;
  for (Eigen::Index j = 0; j < N; ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x0(j)));
    Vec xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    eval(xp, u0, fp, yp);
    eval(xm, u0, fm, ym);
    A.col(j) = (fp - fm) / (2.0 * h);
    C.col(j) = (yp - ym) / (2.0 * h);
  }
  for (Eigen::Index j = 0; j < nu; ++j) {
    const double h = rel_step * 100.0;  // MW inputs
    Vec up = u0, um = u0;
    up(j) += h;
    um(j) -= h;
    eval(x0, up, fp, yp);
    eval(x0, um, fm, ym);
    B.col(j) = (fp - fm) / (2.0 * h);
    D.col(j) = (yp - ym) / (2.0 * h);
  }
  std::vector<std::string> il, ol;
  if (in.hvdc_P) il.emplace_back("P_dc");
  for (int b : in.load_buses) il.push_back("dP_" + std::to_string(b));
  for (const MeasurementSpec& s : outs) ol.push_back(s.label());
  return StateSpace(A, B, C, D, il, ol);
}

/// Drop the angle-reference mode by moving to angles relative to machine 1.
///
/// Valid only when every output is invariant to a common rotation (speeds, flows,
/// voltages); absolute bus angles keep the mode and need a wash-out instead.
inline StateSpace deflate_angle_reference(const StateSpace& sys, const GridModel& m) {
  const Eigen::Index nm = static_cast<Eigen::Index>(m.machines.size()), n = sys.n();
  Mat T = Mat::Identity(n, n), Ti = Mat::Identity(n, n);
  for (Eigen::Index i = 1; i < nm; ++i) {
    T(i, 0) = -1.0;
    Ti(i, 0) = 1.0;
  }
  const Mat A = T * sys.A * Ti, B = T * sys.B, C = sys.C * Ti;
  const double scale = std::max(1.0, sys.A.norm());
  if (A.col(0).norm() > 1e-6 * scale) throw NumericError("deflate: model is not rotation invariant");
  if (C.rows() && C.col(0).norm() > 1e-6 * std::max(1.0, sys.C.norm()))
    throw ContractError("deflate: an output depends on the absolute angle reference");
  const Eigen::Index r = n - 1;
  return StateSpace(A.bottomRightCorner(r, r), B.bottomRows(r), C.rightCols(r), sys.D, sys.input_labels,
                    sys.output_labels);
}

/// Indices of the speed states in a linearization, optionally after deflation.
inline std::vector<Eigen::Index> speed_states(const GridModel& m, bool deflated = false) {
  std::vector<Eigen::Index> v;
  const Eigen::Index nm = static_cast<Eigen::Index>(m.machines.size());
  for (Eigen::Index i = 0; i < nm; ++i) v.push_back(nm + i - (deflated ? 1 : 0));
  return v;
}

// ---------------------------------------------------------------------------
// Offline measurements

inline std::vector<double> delay_series(const std::vector<double>& t, const std::vector<double>& x, double T) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double tq = t[i] - T;
    if (tq <= t.front()) {
      out[i] = x.front();
      continue;
    }
    const auto it = std::upper_bound(t.begin(), t.end(), tq);
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    if (j >= t.size()) {
      out[i] = x.back();
      continue;
    }
    const double a = (tq - t[j - 1]) / (t[j] - t[j - 1]);
    out[i] = (1.0 - a) * x[j - 1] + a * x[j];
  }
  return out;
}

/// Derived measurement series from recorded raw signals.
inline std::vector<double> measure_offline(const GridModel& m, const Trajectory& tr, const MeasurementSpec& s) {
  std::vector<double> y;
  const double ang = s.degrees ? 180.0 / std::numbers::pi : 1.0;
  switch (s.kind) {
    case MeasKind::theta_bus:
      y = tr.at("theta_abs_" + std::to_string(s.location));
      for (double& v : y) v *= ang;
      break;
    case MeasKind::freq_bus: {
      const auto& th = tr.at("theta_abs_" + std::to_string(s.location));
      y.assign(th.size(), 0.0);
      const double wc = s.freq_lp_corner;
      for (std::size_t i = 1; i < th.size(); ++i) {
        const double h = tr.time[i] - tr.time[i - 1];
        // exact discretization of wc/(s+wc) driven by the backward-difference derivative
        const double a = std::exp(-wc * h);
        const double d = (th[i] - th[i - 1]) / h;
        y[i] = a * y[i - 1] + (1.0 - a) * d;
      }
      for (double& v : y) v *= ang;
      break;
    }
    case MeasKind::line_P: {
      if (s.location < 0 || s.location >= static_cast<int>(m.lines.size()))
        throw ValueError("measure_offline: line index out of range");
      const Line& ln = m.lines[static_cast<std::size_t>(s.location)];
      const std::string a = std::to_string(ln.from), b = std::to_string(ln.to);
      const auto &ta = tr.at("theta_" + a), &tb = tr.at("theta_" + b), &va = tr.at("V_" + a), &vb = tr.at("V_" + b);
      y.resize(ta.size());
      for (std::size_t i = 0; i < ta.size(); ++i) {
        const cplx Va = std::polar(va[i], ta[i]), Vb = std::polar(vb[i], tb[i]);
        y[i] = (Va * std::conj((Va - Vb) / cplx(ln.R, ln.X))).real() * m.system_base;
      }
      break;
    }
    case MeasKind::bus_Vmag:
      y = tr.at("V_" + std::to_string(s.location));
      break;
    case MeasKind::machine_speed:
      if (s.location < 0 || s.location >= static_cast<int>(m.machines.size()))
        throw ValueError("measure_offline: machine index out of range");
      y = tr.at("omega_" + m.machines[static_cast<std::size_t>(s.location)].label);
      for (double& v : y) v *= ang;
      break;
  }
  if (s.delay > 0.0) y = delay_series(tr.time, y, s.delay);
  return y;
}

/// Peak of |delta_a - delta_b| over a trajectory.
inline double peak_angle_difference(const Trajectory& tr, const std::string& a, const std::string& b) {
  const auto &x = tr.at("delta_" + a), &y = tr.at("delta_" + b);
  double p = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) p = std::max(p, std::abs(x[i] - y[i]));
  return p;
}

}  // namespace podlim::grid
