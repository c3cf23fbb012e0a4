#pragma once

// Integration of the combined system: the equations of motion together with
// the deviation equations M eps'' + C eps' + K eps = 0 in first-order form.
// The deviation block shares the step sequence with the base trajectory.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/system.hpp"

namespace jacobivar {

enum class Method { Rk4, Rkf45 };
enum class TerminationReason { Completed, SingularMass, Diverged };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::Completed: return "completed";
    case TerminationReason::SingularMass: return "singular-mass";
    case TerminationReason::Diverged: return "diverged";
  }
  return "unknown";
}

struct IntegrationSettings {
  Method method = Method::Rk4;
  double dt = 1e-3;       // fixed step (rk4) or initial step (rkf45)
  double abs_tol = 1e-9;  // rkf45 only
  double rel_tol = 1e-9;  // rkf45 only
  double t_end = 0.0;
  int sample_every = 1;   // record every k-th accepted step
};

struct IntegrationResult {
  std::vector<FlowState> samples;
  std::vector<double> energy_series;  // H at each sample
  std::vector<double> jacobi_series;  // h at each sample; autonomous systems only
  bool has_jacobi = false;
  TerminationReason reason = TerminationReason::Completed;
  std::string message;
};

struct FlowDerivative {
  std::vector<double> dq, dqdot, deps, depsdot;
};

struct DeviationDerivative {
  std::vector<double> deps, depsdot;
};

static constexpr double kDivergenceLimit = 1e12;

namespace detail {

// Right-hand side of the combined first-order system. The state vector is
// y = [q, qdot, eps, epsdot], matching the environment layout so loading is
// a straight copy. Owns all scratch storage; one instance per integration.
class CombinedField {
 public:
  explicit CombinedField(const DerivedSystem& ds)
      : ds_(ds), n_(ds.n), env_(ds.make_env()), accel_(ds.n), resid_(ds.n) {}

  int dim() const { return 4 * n_; }

  void operator()(double t, const double* y, double* dy) {
    const int n = n_;
    env_[0] = t;
    std::memcpy(env_.data() + 1, y, sizeof(double) * 4 * n);
    Lu lu = accel_env(ds_, env_.data(), accel_.data(), mass_);
    ck_env(ds_, env_.data(), accel_.data(), c_, k_);
    const double* eps = y + 2 * n;
    const double* epsdot = y + 3 * n;
    for (int a = 0; a < n; ++a) {
      double r = 0.0;
      for (int b = 0; b < n; ++b) r -= c_(a, b) * epsdot[b] + k_(a, b) * eps[b];
      resid_[a] = r;
    }
    lu_solve(lu, resid_.data());
    for (int i = 0; i < n; ++i) {
      dy[i] = y[n + i];
      dy[n + i] = accel_[i];
      dy[2 * n + i] = epsdot[i];
      dy[3 * n + i] = resid_[i];
    }
  }

  double energy(double t, const double* y) {
    env_[0] = t;
    std::memcpy(env_.data() + 1, y, sizeof(double) * 4 * n_);
    return ds_.tapes.energy.eval(env_.data());
  }

  double jacobi(double t, const double* y) {
    env_[0] = t;
    std::memcpy(env_.data() + 1, y, sizeof(double) * 4 * n_);
    return ds_.tapes.jacobi_constant.eval(env_.data());
  }

 private:
  const DerivedSystem& ds_;
  int n_;
  std::vector<double> env_;
  std::vector<double> accel_, resid_;
  Mat mass_, c_, k_;
};

struct RkScratch {
  std::vector<double> k1, k2, k3, k4, k5, k6, tmp, err;
  void resize(int dim) {
    k1.resize(dim); k2.resize(dim); k3.resize(dim); k4.resize(dim);
    k5.resize(dim); k6.resize(dim); tmp.resize(dim); err.resize(dim);
  }
};

template <class F>
void rk4_step(F& f, double t, double h, std::vector<double>& y, RkScratch& s) {
  const int dim = static_cast<int>(y.size());
  f(t, y.data(), s.k1.data());
  for (int i = 0; i < dim; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k1[i];
  f(t + 0.5 * h, s.tmp.data(), s.k2.data());
  for (int i = 0; i < dim; ++i) s.tmp[i] = y[i] + 0.5 * h * s.k2[i];
  f(t + 0.5 * h, s.tmp.data(), s.k3.data());
  for (int i = 0; i < dim; ++i) s.tmp[i] = y[i] + h * s.k3[i];
  f(t + h, s.tmp.data(), s.k4.data());
  for (int i = 0; i < dim; ++i)
    y[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
}

// Fehlberg 4(5) embedded pair; advances the 5th-order solution.
// Returns the max error-to-tolerance ratio of the step.
template <class F>
double rkf45_step(F& f, double t, double h, const std::vector<double>& y,
                  std::vector<double>& y_out, double abs_tol, double rel_tol, RkScratch& s) {
  const int dim = static_cast<int>(y.size());
  f(t, y.data(), s.k1.data());
  for (int i = 0; i < dim; ++i) s.tmp[i] = y[i] + h * (1.0 / 4.0) * s.k1[i];
  f(t + h / 4.0, s.tmp.data(), s.k2.data());
  for (int i = 0; i < dim; ++i)
    s.tmp[i] = y[i] + h * (3.0 / 32.0 * s.k1[i] + 9.0 / 32.0 * s.k2[i]);
  f(t + 3.0 * h / 8.0, s.tmp.data(), s.k3.data());
  for (int i = 0; i < dim; ++i)
    s.tmp[i] = y[i] + h * (1932.0 / 2197.0 * s.k1[i] - 7200.0 / 2197.0 * s.k2[i] +
                           7296.0 / 2197.0 * s.k3[i]);
  f(t + 12.0 * h / 13.0, s.tmp.data(), s.k4.data());
  for (int i = 0; i < dim; ++i)
    s.tmp[i] = y[i] + h * (439.0 / 216.0 * s.k1[i] - 8.0 * s.k2[i] + 3680.0 / 513.0 * s.k3[i] -
                           845.0 / 4104.0 * s.k4[i]);
  f(t + h, s.tmp.data(), s.k5.data());
  for (int i = 0; i < dim; ++i)
    s.tmp[i] = y[i] + h * (-8.0 / 27.0 * s.k1[i] + 2.0 * s.k2[i] - 3544.0 / 2565.0 * s.k3[i] +
                           1859.0 / 4104.0 * s.k4[i] - 11.0 / 40.0 * s.k5[i]);
  f(t + h / 2.0, s.tmp.data(), s.k6.data());

  double ratio = 0.0;
  for (int i = 0; i < dim; ++i) {
    double y5 = y[i] + h * (16.0 / 135.0 * s.k1[i] + 6656.0 / 12825.0 * s.k3[i] +
                            28561.0 / 56430.0 * s.k4[i] - 9.0 / 50.0 * s.k5[i] +
                            2.0 / 55.0 * s.k6[i]);
    double y4 = y[i] + h * (25.0 / 216.0 * s.k1[i] + 1408.0 / 2565.0 * s.k3[i] +
                            2197.0 / 4104.0 * s.k4[i] - 1.0 / 5.0 * s.k5[i]);
    double tol = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y5));
    double r = std::abs(y5 - y4) / tol;
    if (r > ratio || !std::isfinite(y5)) ratio = std::isfinite(r) ? std::max(ratio, r) : 1e30;
    y_out[i] = y5;
  }
  return ratio;
}

inline bool state_ok(const std::vector<double>& y) {
  for (double v : y) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) return false;
  }
  return true;
}

}  // namespace detail

inline FlowDerivative combined_rhs(const DerivedSystem& ds, const FlowState& state) {
  detail::CombinedField field(ds);
  const int n = ds.n;
  std::vector<double> y(4 * n, 0.0), dy(4 * n, 0.0);
  for (int i = 0; i < n; ++i) {
    y[i] = state.q[i];
    y[n + i] = state.qdot[i];
    y[2 * n + i] = i < static_cast<int>(state.eps.size()) ? state.eps[i] : 0.0;
    y[3 * n + i] = i < static_cast<int>(state.epsdot.size()) ? state.epsdot[i] : 0.0;
  }
  field(state.t, y.data(), dy.data());
  FlowDerivative d;
  d.dq.assign(dy.begin(), dy.begin() + n);
  d.dqdot.assign(dy.begin() + n, dy.begin() + 2 * n);
  d.deps.assign(dy.begin() + 2 * n, dy.begin() + 3 * n);
  d.depsdot.assign(dy.begin() + 3 * n, dy.end());
  return d;
}

// Independent route to the deviation dynamics: apply the central-difference
// Jacobian of the base vector field (qdot, qddot) to (eps, epsdot). Uses only
// the acceleration solve, never the assembled C and K.
inline DeviationDerivative jacobian_rhs(const DerivedSystem& ds, const FlowState& state,
                                        double fd_step = 1e-6) {
  const int n = ds.n;
  auto env = ds.make_env();
  ds.load_state(state, env);
  std::vector<double> accel(n);
  Mat scratch;

  std::vector<double> u(2 * n);
  for (int i = 0; i < n; ++i) {
    u[i] = state.q[i];
    u[n + i] = state.qdot[i];
  }
  auto base_field = [&](const std::vector<double>& uu, std::vector<double>& g) {
    for (int i = 0; i < n; ++i) {
      env[1 + i] = uu[i];
      env[1 + n + i] = uu[n + i];
    }
    detail::accel_env(ds, env.data(), accel.data(), scratch);
    for (int i = 0; i < n; ++i) {
      g[i] = uu[n + i];
      g[n + i] = accel[i];
    }
  };

  std::vector<double> v(2 * n);
  for (int i = 0; i < n; ++i) {
    v[i] = i < static_cast<int>(state.eps.size()) ? state.eps[i] : 0.0;
    v[n + i] = i < static_cast<int>(state.epsdot.size()) ? state.epsdot[i] : 0.0;
  }

  std::vector<double> gp(2 * n), gm(2 * n), result(2 * n, 0.0), up(u);
  for (int j = 0; j < 2 * n; ++j) {
    double h = fd_step * (1.0 + std::abs(u[j]));
    up[j] = u[j] + h;
    base_field(up, gp);
    up[j] = u[j] - h;
    base_field(up, gm);
    up[j] = u[j];
    double inv = 1.0 / (2.0 * h);
    for (int i = 0; i < 2 * n; ++i) result[i] += (gp[i] - gm[i]) * inv * v[j];
  }
  DeviationDerivative d;
  d.deps.assign(result.begin(), result.begin() + n);
  d.depsdot.assign(result.begin() + n, result.end());
  return d;
}

inline IntegrationResult integrate(const DerivedSystem& ds, const FlowState& initial,
                                   const IntegrationSettings& settings) {
  const int n = ds.n;
  if (settings.t_end <= initial.t)
    throw std::invalid_argument("integration settings: t_end must exceed the initial time");
  if (settings.dt <= 0.0)
    throw std::invalid_argument("integration settings: step size must be positive");
  if (settings.sample_every < 1)
    throw std::invalid_argument("integration settings: sample_every must be at least 1");
  if (settings.method == Method::Rkf45 && (settings.abs_tol <= 0.0 || settings.rel_tol <= 0.0))
    throw std::invalid_argument("integration settings: tolerances must be positive");
  if (static_cast<int>(initial.q.size()) != n || static_cast<int>(initial.qdot.size()) != n)
    throw std::invalid_argument("initial state dimension does not match the system");

  detail::CombinedField field(ds);
  detail::RkScratch scratch;
  scratch.resize(field.dim());

  std::vector<double> y(4 * n, 0.0);
  for (int i = 0; i < n; ++i) {
    y[i] = initial.q[i];
    y[n + i] = initial.qdot[i];
    y[2 * n + i] = i < static_cast<int>(initial.eps.size()) ? initial.eps[i] : 0.0;
    y[3 * n + i] = i < static_cast<int>(initial.epsdot.size()) ? initial.epsdot[i] : 0.0;
  }

  IntegrationResult result;
  result.has_jacobi = ds.autonomous;
  double last_recorded = initial.t - 1.0;
  auto record = [&](double t, const std::vector<double>& yy) {
    if (t <= last_recorded) return;
    FlowState s;
    s.t = t;
    s.q.assign(yy.begin(), yy.begin() + n);
    s.qdot.assign(yy.begin() + n, yy.begin() + 2 * n);
    s.eps.assign(yy.begin() + 2 * n, yy.begin() + 3 * n);
    s.epsdot.assign(yy.begin() + 3 * n, yy.end());
    result.samples.push_back(std::move(s));
    result.energy_series.push_back(field.energy(t, yy.data()));
    if (result.has_jacobi) result.jacobi_series.push_back(field.jacobi(t, yy.data()));
    last_recorded = t;
  };

  record(initial.t, y);
  const double t0 = initial.t;
  const double t_end = settings.t_end;
  long accepted = 0;

  try {
    if (settings.method == Method::Rk4) {
      const double span = t_end - t0;
      long n_full = static_cast<long>(std::floor(span / settings.dt + 1e-9));
      double remainder = span - static_cast<double>(n_full) * settings.dt;
      if (remainder < 1e-9 * settings.dt) remainder = 0.0;
      long total = n_full + (remainder > 0.0 ? 1 : 0);
      for (long i = 0; i < total; ++i) {
        double t = t0 + static_cast<double>(i) * settings.dt;
        double h = (i < n_full) ? settings.dt : remainder;
        detail::rk4_step(field, t, h, y, scratch);
        if (!detail::state_ok(y)) {
          result.reason = TerminationReason::Diverged;
          result.message = "state became non-finite or exceeded " +
                           detail::fmt_double(kDivergenceLimit) + " at t=" +
                           detail::fmt_double(t + h);
          return result;
        }
        ++accepted;
        double t_next = (i + 1 == total) ? t_end : t0 + static_cast<double>(i + 1) * settings.dt;
        if (accepted % settings.sample_every == 0 || i + 1 == total) record(t_next, y);
      }
    } else {
      double t = t0;
      double h = std::min(settings.dt, t_end - t0);
      std::vector<double> y_next(y.size());
      while (t < t_end - 1e-14 * std::max(1.0, std::abs(t_end))) {
        h = std::min(h, t_end - t);
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
          result.reason = TerminationReason::Diverged;
          result.message = "step size underflow at t=" + detail::fmt_double(t);
          return result;
        }
        double ratio = detail::rkf45_step(field, t, h, y, y_next, settings.abs_tol,
                                          settings.rel_tol, scratch);
        if (ratio <= 1.0) {
          t += h;
          y.swap(y_next);
          if (!detail::state_ok(y)) {
            result.reason = TerminationReason::Diverged;
            result.message = "state became non-finite or exceeded " +
                             detail::fmt_double(kDivergenceLimit) + " at t=" +
                             detail::fmt_double(t);
            return result;
          }
          ++accepted;
          if (accepted % settings.sample_every == 0) record(t, y);
        }
        double factor = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
      }
      record(t_end, y);
    }
  } catch (const SingularMassError& e) {
    result.reason = TerminationReason::SingularMass;
    result.message = e.what();
    return result;
  }
  result.reason = TerminationReason::Completed;
  return result;
}

struct DriftReport {
  double energy_drift = 0.0;
  std::optional<double> jacobi_drift;
};

// Max absolute deviation of the conserved-quantity series from their
// initial values; requires a completed run.
inline DriftReport drift_report(const IntegrationResult& result) {
  if (result.reason != TerminationReason::Completed)
    throw std::invalid_argument("drift report requires a completed integration (got " +
                                std::string(to_string(result.reason)) + ")");
  DriftReport report;
  if (result.energy_series.empty()) return report;
  double h0 = result.energy_series.front();
  for (double v : result.energy_series)
    report.energy_drift = std::max(report.energy_drift, std::abs(v - h0));
  if (result.has_jacobi && !result.jacobi_series.empty()) {
    double j0 = result.jacobi_series.front();
    double drift = 0.0;
    for (double v : result.jacobi_series) drift = std::max(drift, std::abs(v - j0));
    report.jacobi_drift = drift;
  }
  return report;
}

}  // namespace jacobivar
