#pragma once

// Lyapunov spectrum from the tangent flow: 2N orthonormal deviation vectors
// propagated along the base trajectory, renormalized every tau time units by
// modified Gram-Schmidt, log norms accumulated (Benettin's method).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/dynamics.hpp"
#include "jacobivar/system.hpp"

namespace jacobivar {

class DivergedTrajectoryError : public std::runtime_error {
 public:
  explicit DivergedTrajectoryError(double t)
      : std::runtime_error("trajectory diverged at t=" + detail::fmt_double(t)) {}
};

struct LyapunovSettings {
  double total_time = 1000.0;
  double tau = 1.0;   // renormalization interval
  double dt = 1e-3;   // rk4 step of the joint propagation
};

struct LyapunovReport {
  std::vector<double> exponents;             // 2N values, sorted descending
  std::vector<double> event_times;           // one per renormalization
  std::vector<std::vector<double>> history;  // running estimates at each event
  double total_time = 0.0;
  double tau = 0.0;
};

namespace detail {

// Joint field: base trajectory (2n) plus 2n tangent vectors of dimension 2n,
// stored column after column. All columns reuse one M factorization and one
// C, K assembly per stage.
class TangentBundleField {
 public:
  explicit TangentBundleField(const DerivedSystem& ds)
      : ds_(ds), n_(ds.n), env_(ds.make_env()), accel_(ds.n), resid_(ds.n) {}

  int dim() const { return 2 * n_ + 4 * n_ * n_; }

  void operator()(double t, const double* y, double* dy) {
    const int n = n_;
    env_[0] = t;
    for (int i = 0; i < 2 * n; ++i) env_[1 + i] = y[i];
    for (int i = 0; i < 2 * n; ++i) env_[1 + 2 * n + i] = 0.0;
    Lu lu = accel_env(ds_, env_.data(), accel_.data(), mass_);
    ck_env(ds_, env_.data(), accel_.data(), c_, k_);
    for (int i = 0; i < n; ++i) {
      dy[i] = y[n + i];
      dy[n + i] = accel_[i];
    }
    for (int k = 0; k < 2 * n; ++k) {
      const double* v = y + 2 * n + k * 2 * n;
      double* dv = dy + 2 * n + k * 2 * n;
      for (int a = 0; a < n; ++a) {
        double r = 0.0;
        for (int b = 0; b < n; ++b) r -= c_(a, b) * v[n + b] + k_(a, b) * v[b];
        resid_[a] = r;
      }
      lu_solve(lu, resid_.data());
      for (int i = 0; i < n; ++i) {
        dv[i] = v[n + i];
        dv[n + i] = resid_[i];
      }
    }
  }

 private:
  const DerivedSystem& ds_;
  int n_;
  std::vector<double> env_;
  std::vector<double> accel_, resid_;
  Mat mass_, c_, k_;
};

}  // namespace detail

inline LyapunovReport lyapunov_spectrum(const DerivedSystem& ds, const FlowState& initial,
                                        const LyapunovSettings& settings) {
  if (settings.total_time <= 0.0 || settings.tau <= 0.0 || settings.dt <= 0.0)
    throw std::invalid_argument("lyapunov settings: total_time, tau and dt must be positive");
  const int n = ds.n;
  const int m = 2 * n;  // tangent-space dimension

  detail::TangentBundleField field(ds);
  detail::RkScratch scratch;
  scratch.resize(field.dim());

  std::vector<double> y(field.dim(), 0.0);
  for (int i = 0; i < n; ++i) {
    y[i] = initial.q[i];
    y[n + i] = initial.qdot[i];
  }
  for (int k = 0; k < m; ++k) y[2 * n + k * m + k] = 1.0;  // orthonormal frame

  LyapunovReport report;
  report.tau = settings.tau;
  std::vector<double> log_sum(m, 0.0);

  const double t0 = initial.t;
  double t = t0;
  long event = 0;
  while (t < t0 + settings.total_time - 1e-9 * settings.tau) {
    double t_target = std::min(t0 + static_cast<double>(event + 1) * settings.tau,
                               t0 + settings.total_time);
    while (t < t_target - 1e-12 * std::max(1.0, std::abs(t_target))) {
      double h = std::min(settings.dt, t_target - t);
      detail::rk4_step(field, t, h, y, scratch);
      t += h;
      for (int i = 0; i < 2 * n; ++i)
        if (!std::isfinite(y[i]) || std::abs(y[i]) > kDivergenceLimit)
          throw DivergedTrajectoryError(t);
    }
    t = t_target;
    ++event;

    // Modified Gram-Schmidt on the tangent columns.
    for (int k = 0; k < m; ++k) {
      double* vk = y.data() + 2 * n + k * m;
      for (int j = 0; j < k; ++j) {
        const double* vj = y.data() + 2 * n + j * m;
        double dot = 0.0;
        for (int i = 0; i < m; ++i) dot += vk[i] * vj[i];
        for (int i = 0; i < m; ++i) vk[i] -= dot * vj[i];
      }
      double norm = 0.0;
      for (int i = 0; i < m; ++i) norm += vk[i] * vk[i];
      norm = std::sqrt(norm);
      if (!(norm > 0.0) || !std::isfinite(norm)) throw DivergedTrajectoryError(t);
      for (int i = 0; i < m; ++i) vk[i] /= norm;
      log_sum[k] += std::log(norm);
    }

    std::vector<double> running(m);
    for (int k = 0; k < m; ++k) running[k] = log_sum[k] / (t - t0);
    std::sort(running.begin(), running.end(), std::greater<double>());
    report.event_times.push_back(t);
    report.history.push_back(std::move(running));
  }

  report.total_time = t - t0;
  report.exponents.resize(m);
  for (int k = 0; k < m; ++k) report.exponents[k] = log_sum[k] / report.total_time;
  std::sort(report.exponents.begin(), report.exponents.end(), std::greater<double>());
  return report;
}

}  // namespace jacobivar
