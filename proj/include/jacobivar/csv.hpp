#pragma once

// CSV emission for integration results. The header is part of the stable
// interface: t,q_<name>...,qd_<name>...,e_<name>...,ed_<name>...,H[,h]
// with 17 significant digits per field.

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "jacobivar/dynamics.hpp"
#include "jacobivar/lyapunov.hpp"
#include "jacobivar/stability.hpp"

namespace jacobivar {

namespace detail {

inline void csv_value(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace detail

inline void write_time_series_csv(std::ostream& out, const std::vector<std::string>& coordinates,
                                  const IntegrationResult& result) {
  out << "t";
  for (const auto& prefix : {"q_", "qd_", "e_", "ed_"})
    for (const auto& c : coordinates) out << ',' << prefix << c;
  out << ",H";
  if (result.has_jacobi) out << ",h";
  out << '\n';

  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    const FlowState& s = result.samples[i];
    detail::csv_value(out, s.t);
    for (const auto* vec : {&s.q, &s.qdot, &s.eps, &s.epsdot})
      for (double v : *vec) {
        out << ',';
        detail::csv_value(out, v);
      }
    out << ',';
    detail::csv_value(out, result.energy_series[i]);
    if (result.has_jacobi) {
      out << ',';
      detail::csv_value(out, result.jacobi_series[i]);
    }
    out << '\n';
  }
}

inline void write_lyapunov_csv(std::ostream& out, const LyapunovReport& report) {
  out << "t";
  for (std::size_t k = 0; k < report.exponents.size(); ++k) out << ",lambda_" << k + 1;
  out << '\n';
  for (std::size_t i = 0; i < report.event_times.size(); ++i) {
    detail::csv_value(out, report.event_times[i]);
    for (double v : report.history[i]) {
      out << ',';
      detail::csv_value(out, v);
    }
    out << '\n';
  }
}

inline void write_normal_deviation_csv(std::ostream& out, const NormalDeviationSeries& series) {
  out << "t,s,eps_z,epsdot_z\n";
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    detail::csv_value(out, series.t[i]);
    out << ',';
    detail::csv_value(out, series.s[i]);
    out << ',';
    detail::csv_value(out, series.eps_z[i]);
    out << ',';
    detail::csv_value(out, series.epsdot_z[i]);
    out << '\n';
  }
}

}  // namespace jacobivar
