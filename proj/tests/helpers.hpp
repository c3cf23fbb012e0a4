#pragma once

// Shared fixtures for the test suites: the expression corpus, canonical test
// systems, and small numeric utilities (finite differences, period
// measurement). Oracles here are kept independent of the library internals
// they are used to check.

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "jacobivar/jacobivar.hpp"

namespace testutil {

// 50 DSL expressions exercising the whole grammar. All are well-defined for
// bindings in [0.2, 1.4].
inline const std::vector<std::string>& expression_corpus() {
  static const std::vector<std::string> corpus = {
      "q1",
      "qd1",
      "1.5",
      "q1 + qd1",
      "q1 - qd1",
      "q1*qd1",
      "q1/qd1",
      "q1^2",
      "q1^3",
      "-q1",
      "q1 + qd1 + t",
      "q1*qd1*t",
      "sin(q1)",
      "cos(q1)",
      "tan(q1)",
      "exp(q1)",
      "log(q1)",
      "sqrt(q1)",
      "sin(q1)^2 + cos(q1)^2",
      "qd1^2/2 - w^2*q1^2/2",
      "qd1^2/2 + cos(q1)",
      "(dx^2 + dy^2)/2 + B*(x*dy - y*dx)",
      "1/(1 + q1^2)",
      "q1^2*sin(qd1)",
      "exp(-q1^2/2)",
      "log(q1^2 + 1)",
      "sqrt(q1^2 + qd1^2)",
      "q1^qd1",
      "2^q1",
      "q1^0.5",
      "-q1^2 + 3*q1 - 4",
      "q1*(qd1 + t)",
      "(q1 + qd1)^2",
      "sin(q1*qd1)",
      "cos(q1)/(2 + sin(q1))",
      "exp(q1)*log(q1)",
      "q1/2 + qd1/3",
      "5",
      "q1 - -qd1",
      "-(q1 + qd1)",
      "2*q1^2 - 3*qd1^3 + 4*t",
      "sin(cos(q1))",
      "sqrt(1 + sqrt(q1))",
      "q1^2^2",
      "1e-3*q1 + 2.5e2",
      "0.125",
      "tan(q1/4)",
      "(dz^2 + ds^2*(1 + z/r)^2)/2 + k/(r + z)",
      "qd1^2/2 - t*q1",
      "w*q1*qd1*t",
  };
  return corpus;
}

inline std::map<std::string, double> random_bindings(const std::set<std::string>& symbols,
                                                     std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.4);
  std::map<std::string, double> b;
  for (const auto& s : symbols) b[s] = u(rng);
  return b;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / (1.0 + std::max(std::abs(a), std::abs(b)));
}

// --- canonical test systems -------------------------------------------------

inline jacobivar::DerivedSystem oscillator(double w = 1.0) {
  auto table = jacobivar::SymbolTable::make({"q1"}, {{"w", w}});
  return derive(jacobivar::LagrangianSystem::make(table, "qd1^2/2 - w^2*q1^2/2"));
}

inline jacobivar::DerivedSystem pendulum() {
  auto table = jacobivar::SymbolTable::make({"q1"}, {});
  return derive(jacobivar::LagrangianSystem::make(table, "qd1^2/2 + cos(q1)"));
}

// Inverted potential; the tangent flow has exponents +1 and -1.
inline jacobivar::DerivedSystem saddle() {
  auto table = jacobivar::SymbolTable::make({"q1"}, {});
  return derive(jacobivar::LagrangianSystem::make(table, "qd1^2/2 + q1^2/2"));
}

// Planar charged particle in a uniform magnetic field (symmetric gauge).
inline jacobivar::DerivedSystem magnetic(double b = 1.0) {
  auto table = jacobivar::SymbolTable::make({"x", "y"}, {{"B", b}});
  return derive(
      jacobivar::LagrangianSystem::make(table, "(dx^2 + dy^2)/2 + B*(x*dy - y*dx)"));
}

inline jacobivar::DerivedSystem henon_heiles() {
  auto table = jacobivar::SymbolTable::make({"x", "y"}, {});
  return derive(jacobivar::LagrangianSystem::make(
      table, "(dx^2 + dy^2)/2 - (x^2 + y^2)/2 - x^2*y + y^3/3"));
}

inline jacobivar::DerivedSystem kepler_cartesian(double k = 1.0) {
  auto table = jacobivar::SymbolTable::make({"x", "y"}, {{"k", k}});
  return derive(
      jacobivar::LagrangianSystem::make(table, "(dx^2 + dy^2)/2 + k/sqrt(x^2 + y^2)"));
}

// Intrinsic coordinates (arc length s, normal offset z) around a circular
// orbit of radius r in the potential -k/R.
inline jacobivar::DerivedSystem kepler_intrinsic(double k = 1.0, double r = 1.0) {
  auto table = jacobivar::SymbolTable::make({"s", "z"}, {{"k", k}, {"r", r}});
  return derive(jacobivar::LagrangianSystem::make(
      table, "(dz^2 + ds^2*(1 + z/r)^2)/2 + k/(r + z)"));
}

inline jacobivar::DerivedSystem time_dependent() {
  auto table = jacobivar::SymbolTable::make({"q1"}, {});
  return derive(jacobivar::LagrangianSystem::make(table, "qd1^2/2 - t*q1"));
}

inline jacobivar::FlowState state1(double q, double qd, double e = 0.0, double ed = 0.0,
                                   double t = 0.0) {
  return {t, {q}, {qd}, {e}, {ed}};
}

// Mean period from upward zero crossings of the mean-subtracted signal,
// with linear interpolation between samples.
inline double measure_period(const std::vector<double>& t, const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  std::vector<double> crossings;
  for (std::size_t i = 1; i < x.size(); ++i) {
    double a = x[i - 1] - mean, b = x[i] - mean;
    if (a < 0.0 && b >= 0.0) {
      double frac = a / (a - b);
      crossings.push_back(t[i - 1] + frac * (t[i] - t[i - 1]));
    }
  }
  if (crossings.size() < 2) return 0.0;
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

}  // namespace testutil
