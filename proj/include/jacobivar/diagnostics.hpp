#pragma once

// Self-checks behind the `check` subcommand: finite-difference oracles for
// the symbolic derivatives, the gamma identity, the deviation-equation
// cross-derivation, the linearization oracle and conservation drift.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "jacobivar/dynamics.hpp"
#include "jacobivar/system.hpp"

namespace jacobivar {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / (1.0 + std::max(std::abs(a), std::abs(b)));
}

// Random states clustered around the initial condition, so systems with
// restricted domains (1/r potentials) stay well away from singular points.
inline FlowState random_state(const DerivedSystem& ds, const FlowState& base, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  FlowState s = base;
  s.eps.resize(ds.n);
  s.epsdot.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) {
    s.q[i] = base.q[i] + u(rng) * (1.0 + std::abs(base.q[i]));
    s.qdot[i] = base.qdot[i] + u(rng) * (1.0 + std::abs(base.qdot[i]));
    s.eps[i] = u(rng) * 2.0;
    s.epsdot[i] = u(rng) * 2.0;
  }
  s.t = base.t + std::abs(u(rng));
  return s;
}

inline std::map<std::string, double> binding_map(const DerivedSystem& ds, const FlowState& s) {
  const auto& st = ds.system.table;
  auto b = st.parameter_bindings();
  b[st.time()] = s.t;
  for (int i = 0; i < ds.n; ++i) {
    b[st.coordinates()[i]] = s.q[i];
    b[st.velocities()[i]] = s.qdot[i];
    if (i < static_cast<int>(s.eps.size())) b[st.deviations()[i]] = s.eps[i];
    if (i < static_cast<int>(s.epsdot.size())) b[st.deviation_velocities()[i]] = s.epsdot[i];
  }
  return b;
}

}  // namespace detail

// |d/dx L - central difference| over random states for every coordinate and
// velocity; certifies the symbolic differentiator on this system.
inline CheckResult check_derivative_fd(const DerivedSystem& ds, const FlowState& base,
                                       int points = 200, double tol = 1e-6) {
  std::mt19937 rng(12345);
  const auto& st = ds.system.table;
  double worst = 0.0;
  std::vector<std::string> wrt = st.coordinates();
  wrt.insert(wrt.end(), st.velocities().begin(), st.velocities().end());
  for (int p = 0; p < points; ++p) {
    FlowState s = detail::random_state(ds, base, rng);
    auto b = detail::binding_map(ds, s);
    for (const auto& x : wrt) {
      double exact = evaluate(differentiate(ds.system.lagrangian, x), b);
      double x0 = b.at(x);
      double h = 1e-5 * (1.0 + std::abs(x0));
      auto bp = b;
      bp[x] = x0 + h;
      double fp = evaluate(ds.system.lagrangian, bp);
      bp[x] = x0 - h;
      double fm = evaluate(ds.system.lagrangian, bp);
      double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, std::abs(exact - fd) / (1.0 + std::abs(exact)));
    }
  }
  return {"derivative-fd", worst <= tol,
          "max rel err " + detail::fmt_double(worst) + " (tol " + detail::fmt_double(tol) + ")"};
}

// gamma equals the directional derivative of L along (eps, epsdot).
inline CheckResult check_gamma_identity(const DerivedSystem& ds, const FlowState& base,
                                        int points = 100, double tol = 1e-6) {
  std::mt19937 rng(23456);
  auto probe = build_gamma(ds.system);
  const auto& st = ds.system.table;
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    FlowState s = detail::random_state(ds, base, rng);
    auto b = detail::binding_map(ds, s);
    double gamma = evaluate(probe.gamma, b);
    double h = 1e-6;
    auto shifted = [&](double alpha) {
      auto ba = b;
      for (int i = 0; i < ds.n; ++i) {
        ba[st.coordinates()[i]] = s.q[i] + alpha * s.eps[i];
        ba[st.velocities()[i]] = s.qdot[i] + alpha * s.epsdot[i];
      }
      return evaluate(ds.system.lagrangian, ba);
    };
    double fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    worst = std::max(worst, std::abs(gamma - fd) / (1.0 + std::abs(gamma)));
  }
  return {"gamma-identity", worst <= tol,
          "max rel err " + detail::fmt_double(worst) + " (tol " + detail::fmt_double(tol) + ")"};
}

// h equals the directional derivative of H along (eps, epsdot); autonomous only.
inline CheckResult check_h_relation(const DerivedSystem& ds, const FlowState& base,
                                    int points = 100, double tol = 1e-6) {
  if (!ds.autonomous) return {"h-H-relation", true, "skipped (non-autonomous)"};
  std::mt19937 rng(34567);
  const auto& st = ds.system.table;
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    FlowState s = detail::random_state(ds, base, rng);
    auto b = detail::binding_map(ds, s);
    double h_val = evaluate(ds.jacobi_constant, b);
    double step = 1e-6;
    auto shifted = [&](double alpha) {
      auto ba = b;
      for (int i = 0; i < ds.n; ++i) {
        ba[st.coordinates()[i]] = s.q[i] + alpha * s.eps[i];
        ba[st.velocities()[i]] = s.qdot[i] + alpha * s.epsdot[i];
      }
      return evaluate(ds.energy, ba);
    };
    double fd = (shifted(step) - shifted(-step)) / (2.0 * step);
    worst = std::max(worst, std::abs(h_val - fd) / (1.0 + std::abs(h_val)));
  }
  return {"h-H-relation", worst <= tol,
          "max rel err " + detail::fmt_double(worst) + " (tol " + detail::fmt_double(tol) + ")"};
}

// Deviation RHS double derivation: assembled M, C, K versus the
// finite-difference Jacobian of the base field.
inline CheckResult check_deviation_cross(const DerivedSystem& ds, const FlowState& base,
                                         int points = 50, double tol = 1e-5) {
  std::mt19937 rng(45678);
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    FlowState s = detail::random_state(ds, base, rng);
    auto direct = combined_rhs(ds, s);
    auto fd = jacobian_rhs(ds, s);
    for (int i = 0; i < ds.n; ++i) {
      worst = std::max(worst, detail::rel_err(direct.deps[i], fd.deps[i]));
      worst = std::max(worst, detail::rel_err(direct.depsdot[i], fd.depsdot[i]));
    }
  }
  return {"deviation-rhs-cross-check", worst <= tol,
          "max rel err " + detail::fmt_double(worst) + " (tol " + detail::fmt_double(tol) + ")"};
}

// Linearization oracle: the integrated deviation must match the scaled
// difference of two nearby base trajectories.
inline CheckResult check_linearization(const DerivedSystem& ds, const FlowState& initial,
                                       IntegrationSettings settings, double delta = 1e-6,
                                       double tol = 1e-3) {
  settings.t_end = std::min(settings.t_end, initial.t + 10.0);
  settings.method = Method::Rk4;

  FlowState ref = initial;
  if (max_abs(ref.eps) == 0.0 && max_abs(ref.epsdot) == 0.0) {
    ref.eps.assign(ds.n, 0.0);
    ref.epsdot.assign(ds.n, 0.0);
    ref.eps[0] = 1.0;
  }
  FlowState pert = ref;
  for (int i = 0; i < ds.n; ++i) {
    pert.q[i] += delta * ref.eps[i];
    pert.qdot[i] += delta * ref.epsdot[i];
  }

  auto run_ref = integrate(ds, ref, settings);
  auto run_pert = integrate(ds, pert, settings);
  if (run_ref.reason != TerminationReason::Completed ||
      run_pert.reason != TerminationReason::Completed)
    return {"linearization", false, "base trajectory did not complete"};

  double worst = 0.0;
  for (std::size_t k = 0; k < run_ref.samples.size() && k < run_pert.samples.size(); ++k) {
    const auto& a = run_ref.samples[k];
    const auto& b = run_pert.samples[k];
    double num = 0.0, den = 0.0;
    for (int i = 0; i < ds.n; ++i) {
      double fd_eps = (b.q[i] - a.q[i]) / delta;
      double fd_epsdot = (b.qdot[i] - a.qdot[i]) / delta;
      num += (fd_eps - a.eps[i]) * (fd_eps - a.eps[i]) +
             (fd_epsdot - a.epsdot[i]) * (fd_epsdot - a.epsdot[i]);
      den += a.eps[i] * a.eps[i] + a.epsdot[i] * a.epsdot[i];
    }
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return {"linearization", worst <= tol,
          "max rel err " + detail::fmt_double(worst) + " (tol " + detail::fmt_double(tol) + ")"};
}

inline std::vector<CheckResult> run_all_checks(const DerivedSystem& ds, const FlowState& initial,
                                               const IntegrationSettings& settings) {
  std::vector<CheckResult> results;
  results.push_back(check_derivative_fd(ds, initial));
  results.push_back(check_gamma_identity(ds, initial));
  results.push_back(check_h_relation(ds, initial));
  results.push_back(check_deviation_cross(ds, initial));
  results.push_back(check_linearization(ds, initial, settings));

  auto run = integrate(ds, initial, settings);
  if (run.reason == TerminationReason::Completed) {
    auto drift = drift_report(run);
    double h0 = run.energy_series.front();
    double bound = 1e-6 * (1.0 + std::abs(h0));
    results.push_back({"H-drift", drift.energy_drift <= bound,
                       "max |H - H0| = " + detail::fmt_double(drift.energy_drift) + " (bound " +
                           detail::fmt_double(bound) + ")"});
    if (drift.jacobi_drift) {
      results.push_back({"h-drift", *drift.jacobi_drift <= bound,
                         "max |h - h0| = " + detail::fmt_double(*drift.jacobi_drift) +
                             " (bound " + detail::fmt_double(bound) + ")"});
    } else {
      results.push_back({"h-drift", true, "skipped (non-autonomous)"});
    }
  } else {
    results.push_back({"H-drift", false, std::string("run terminated: ") + to_string(run.reason)});
  }
  return results;
}

}  // namespace jacobivar
