#pragma once

// Orbit stability in two dimensions using intrinsic coordinates: arc length s
// along a reference orbit and normal distance z from it. The normal deviation
// obeys  eps_z'' + c(s) eps_z = 2h/rho  with the coefficient of stability
// c(s) = (3/rho)(sdot^2/rho + (rho/3) d2U/dz2) evaluated on the orbit;
// pointwise positivity of c along the orbit implies oscillatory (stable)
// normal deviations in the h = 0 case.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/compiled.hpp"
#include "jacobivar/dynamics.hpp"
#include "jacobivar/expr.hpp"

namespace jacobivar {

class StabilityError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ReferenceOrbit {
 public:
  ExprPtr rho;        // curvature radius rho(s)
  ExprPtr potential;  // U(z, s); z = 0 on the orbit
  ExprPtr sdot;       // orbit speed sdot(s)
  double s_min = 0.0;
  double s_max = 0.0;
  std::map<std::string, double> params;

  static ReferenceOrbit make(ExprPtr rho, ExprPtr potential, ExprPtr sdot, double s_min,
                             double s_max, std::map<std::string, double> params) {
    ReferenceOrbit orbit;
    orbit.rho = std::move(rho);
    orbit.potential = std::move(potential);
    orbit.sdot = std::move(sdot);
    orbit.s_min = s_min;
    orbit.s_max = s_max;
    orbit.params = std::move(params);
    if (!(s_min < s_max)) throw StabilityError("orbit domain requires s_min < s_max");
    orbit.finish();
    return orbit;
  }

  // Circular orbit of the given radius in a central potential U(R), with the
  // orbit speed fixed by force balance sdot^2 = R U'(R).
  static ReferenceOrbit circular(const ExprPtr& central_potential, double radius,
                                 std::map<std::string, double> params) {
    if (!(radius > 0.0)) throw StabilityError("circular orbit radius must be positive");
    auto bindings = params;
    bindings["R"] = radius;
    double v2 = radius * evaluate(differentiate(central_potential, "R"), bindings);
    if (!(v2 > 0.0))
      throw StabilityError(
          "no circular orbit at this radius: force balance needs R U'(R) > 0, got " +
          detail::fmt_double(v2));
    ReferenceOrbit orbit;
    orbit.rho = constant(radius);
    orbit.sdot = constant(std::sqrt(v2));
    orbit.potential = substitute(central_potential, "R", add(constant(radius), symbol("z")));
    orbit.s_min = 0.0;
    orbit.s_max = 2.0 * std::numbers::pi * radius;
    orbit.params = std::move(params);
    orbit.finish();
    return orbit;
  }

  double rho_at(double s) const { return eval2(rho_c_, 0.0, s); }
  double sdot_at(double s) const { return eval2(sdot_c_, 0.0, s); }
  double u_zz_at(double s) const { return eval2(u_zz_c_, 0.0, s); }

 private:
  void finish() {
    if (params.size() > 16) throw StabilityError("too many orbit parameters (limit 16)");
    std::map<std::string, int> slots{{"z", 0}, {"s", 1}};
    int next = 2;
    for (const auto& [name, value] : params) {
      if (name == "z" || name == "s" || name == "R")
        throw StabilityError("parameter name '" + name + "' is reserved in orbit expressions");
      slots[name] = next++;
      env_.push_back(value);
    }
    for (const auto* e : {&rho, &potential, &sdot}) {
      for (const auto& sym : symbols_of(*e)) {
        if (!slots.count(sym))
          throw StabilityError("orbit expression references unknown symbol '" + sym + "'");
      }
    }
    rho_c_ = CompiledExpr::compile(rho, slots);
    sdot_c_ = CompiledExpr::compile(sdot, slots);
    u_zz_c_ = CompiledExpr::compile(differentiate(differentiate(potential, "z"), "z"), slots);

    // The curvature radius must stay positive across the domain.
    for (int i = 0; i <= 32; ++i) {
      double s = s_min + (s_max - s_min) * i / 32.0;
      double r = rho_at(s);
      if (!(r > 0.0) || !std::isfinite(r))
        throw StabilityError("curvature radius is not positive at s=" + detail::fmt_double(s));
    }
  }

  double eval2(const CompiledExpr& c, double z, double s) const {
    double env[2 + 16];
    env[0] = z;
    env[1] = s;
    for (std::size_t j = 0; j < env_.size(); ++j) env[2 + j] = env_[j];
    return c.eval(env);
  }

  CompiledExpr rho_c_, sdot_c_, u_zz_c_;
  std::vector<double> env_;
};

// The coefficient of stability (3/rho)(sdot^2/rho + (rho/3) d2U/dz2) at z=0.
inline double stability_coefficient(const ReferenceOrbit& orbit, double s) {
  double rho = orbit.rho_at(s);
  if (!(rho > 0.0))
    throw StabilityError("curvature radius is not positive at s=" + detail::fmt_double(s));
  double v = orbit.sdot_at(s);
  return 3.0 / rho * (v * v / rho + rho / 3.0 * orbit.u_zz_at(s));
}

struct NormalDeviationSettings {
  double dt = 1e-3;
  double t_end = 0.0;
  double s0 = 0.0;
  int sample_every = 1;
};

struct NormalDeviationSeries {
  std::vector<double> t, s, eps_z, epsdot_z;
  TerminationReason reason = TerminationReason::Completed;
};

// Integrates eps_z'' + c(s(t)) eps_z = 2h/rho along the orbit, with s(t)
// advanced by the orbit speed. h = 0 corresponds to energy-preserving
// variations of the orbit.
inline NormalDeviationSeries integrate_normal_deviation(const ReferenceOrbit& orbit, double h,
                                                        double eps_z0, double epsdot_z0,
                                                        const NormalDeviationSettings& settings) {
  if (settings.dt <= 0.0 || settings.t_end <= 0.0)
    throw std::invalid_argument("normal deviation settings: dt and t_end must be positive");

  auto rhs = [&orbit, h](double, const double* u, double* du) {
    double rho = orbit.rho_at(u[0]);
    double v = orbit.sdot_at(u[0]);
    double coeff = 3.0 / rho * (v * v / rho + rho / 3.0 * orbit.u_zz_at(u[0]));
    du[0] = v;
    du[1] = u[2];
    du[2] = 2.0 * h / rho - coeff * u[1];
  };

  NormalDeviationSeries series;
  std::vector<double> u{settings.s0, eps_z0, epsdot_z0};
  detail::RkScratch scratch;
  scratch.resize(3);
  auto record = [&series](double t, const std::vector<double>& uu) {
    series.t.push_back(t);
    series.s.push_back(uu[0]);
    series.eps_z.push_back(uu[1]);
    series.epsdot_z.push_back(uu[2]);
  };
  record(0.0, u);

  long n_full = static_cast<long>(std::floor(settings.t_end / settings.dt + 1e-9));
  double remainder = settings.t_end - static_cast<double>(n_full) * settings.dt;
  if (remainder < 1e-9 * settings.dt) remainder = 0.0;
  long total = n_full + (remainder > 0.0 ? 1 : 0);
  for (long i = 0; i < total; ++i) {
    double t = static_cast<double>(i) * settings.dt;
    double step = (i < n_full) ? settings.dt : remainder;
    detail::rk4_step(rhs, t, step, u, scratch);
    if (!detail::state_ok(u)) {
      series.reason = TerminationReason::Diverged;
      return series;
    }
    double t_next = (i + 1 == total) ? settings.t_end : static_cast<double>(i + 1) * settings.dt;
    if ((i + 1) % settings.sample_every == 0 || i + 1 == total) record(t_next, u);
  }
  return series;
}

enum class Stability { Stable, Unstable, Indeterminate };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

struct StabilityVerdict {
  std::vector<double> s_samples;
  std::vector<double> coefficient_samples;
  Stability verdict = Stability::Indeterminate;
  double h_used = 0.0;
};

// Sign rule over uniformly sampled s: all positive -> stable, any negative ->
// unstable, any coefficient within 1e-9 of zero -> indeterminate.
inline StabilityVerdict verdict(const ReferenceOrbit& orbit, int samples, double h_used = 0.0) {
  if (samples < 2) throw std::invalid_argument("verdict requires at least 2 samples");
  StabilityVerdict out;
  out.h_used = h_used;
  bool near_zero = false;
  bool negative = false;
  for (int i = 0; i < samples; ++i) {
    double s = orbit.s_min + (orbit.s_max - orbit.s_min) * i / (samples - 1.0);
    double c = stability_coefficient(orbit, s);
    out.s_samples.push_back(s);
    out.coefficient_samples.push_back(c);
    if (std::abs(c) <= 1e-9) near_zero = true;
    else if (c < 0.0) negative = true;
  }
  out.verdict = near_zero ? Stability::Indeterminate
                          : (negative ? Stability::Unstable : Stability::Stable);
  return out;
}

}  // namespace jacobivar
