#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
// error (singular mass, divergence), 3 configuration error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jacobivar/config.hpp"
#include "jacobivar/csv.hpp"
#include "jacobivar/diagnostics.hpp"
#include "jacobivar/dynamics.hpp"
#include "jacobivar/lyapunov.hpp"
#include "jacobivar/stability.hpp"
#include "jacobivar/system.hpp"

namespace jacobivar::cli {

namespace detail {

struct CommonOpts {
  std::string config_path;
  std::string output;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::string> method;
  std::optional<double> tau;
  std::optional<double> total_time;
};

inline void apply_overrides(SystemConfig& cfg, const CommonOpts& opts) {
  if (opts.dt) cfg.dt = *opts.dt;
  if (opts.t_end) cfg.t_end = *opts.t_end;
  if (opts.tau) cfg.tau = *opts.tau;
  if (opts.total_time) cfg.total_time = *opts.total_time;
  if (opts.method) {
    if (*opts.method == "rk4") cfg.method = Method::Rk4;
    else if (*opts.method == "rkf45") cfg.method = Method::Rkf45;
    else throw ConfigError("method must be rk4 or rkf45, got '" + *opts.method + "'");
  }
}

// Writes to the -o path, or to `fallback` when no path was given.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      out_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot open output file '" + path + "'");
      out_ = file_.get();
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_ = nullptr;
};

inline double require_t_end(const SystemConfig& cfg, const std::string& path) {
  if (!cfg.t_end) throw ConfigError(path + ": missing required key 't_end'");
  if (*cfg.t_end <= cfg.t0)
    throw ConfigError(path + ": 't_end' must exceed the initial time");
  return *cfg.t_end;
}

inline void print_matrix_block(std::ostream& out, const std::string& label,
                               const std::vector<ExprPtr>& block,
                               const std::vector<std::string>& names) {
  const int n = static_cast<int>(names.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      out << label << "[" << names[a] << "][" << names[b]
          << "] = " << render(block[a * n + b]) << "\n";
}

inline int cmd_derive(const CommonOpts& opts, bool symbolic, std::ostream& out) {
  auto cfg = SystemConfig::load(opts.config_path);
  auto system = cfg.make_system();
  auto ds = derive(system);
  const auto& names = system.table.coordinates();

  out << "system: " << (cfg.name.empty() ? opts.config_path : cfg.name) << "\n";
  out << "N = " << ds.n << "\n";
  out << "autonomous = " << (ds.autonomous ? "true" : "false") << "\n";
  if (symbolic) {
    for (int a = 0; a < ds.n; ++a)
      out << "dL/dq[" << names[a] << "] = " << render(ds.grad_q[a]) << "\n";
    for (int a = 0; a < ds.n; ++a)
      out << "dL/dqdot[" << names[a] << "] = " << render(ds.grad_qdot[a]) << "\n";
    print_matrix_block(out, "M", ds.mass, names);
    print_matrix_block(out, "A", ds.vel_pos, names);
    print_matrix_block(out, "B", ds.pos_pos, names);
  }
  out << "H = " << render(ds.energy) << "\n";
  if (ds.autonomous)
    out << "h = " << render(ds.jacobi_constant) << "\n";
  else
    out << "h = non-autonomous\n";
  return 0;
}

inline int cmd_simulate(const CommonOpts& opts, std::ostream& out, std::ostream& err) {
  auto cfg = SystemConfig::load(opts.config_path);
  apply_overrides(cfg, opts);
  auto settings = cfg.integration_settings();
  settings.t_end = require_t_end(cfg, opts.config_path);
  auto ds = derive(cfg.make_system());

  auto result = integrate(ds, cfg.initial_state(), settings);
  OutputTarget target(opts.output, out);
  write_time_series_csv(target.stream(), cfg.coordinates, result);
  if (result.reason != TerminationReason::Completed) {
    err << "integration terminated early (" << to_string(result.reason)
        << "): " << result.message << "\n";
    return 2;
  }
  return 0;
}

inline int cmd_lyapunov(const CommonOpts& opts, std::ostream& out) {
  auto cfg = SystemConfig::load(opts.config_path);
  apply_overrides(cfg, opts);
  LyapunovSettings settings;
  settings.total_time = cfg.total_time;
  settings.tau = cfg.tau;
  settings.dt = cfg.dt;
  auto ds = derive(cfg.make_system());

  auto report = lyapunov_spectrum(ds, cfg.initial_state(), settings);
  out << "total_time = " << report.total_time << ", tau = " << report.tau
      << ", renormalizations = " << report.event_times.size() << "\n";
  double sum = 0.0;
  for (std::size_t k = 0; k < report.exponents.size(); ++k) {
    out << "lambda_" << k + 1 << " = " << jacobivar::detail::fmt_double(report.exponents[k])
        << "\n";
    sum += report.exponents[k];
  }
  out << "sum = " << jacobivar::detail::fmt_double(sum) << "\n";
  if (!opts.output.empty()) {
    OutputTarget target(opts.output, out);
    write_lyapunov_csv(target.stream(), report);
  }
  return 0;
}

inline int cmd_stability2d(const CommonOpts& opts, std::ostream& out, std::ostream& err) {
  auto cfg = StabilityConfig::load(opts.config_path);
  if (opts.dt) cfg.dt = *opts.dt;
  if (opts.t_end) cfg.t_end = *opts.t_end;
  auto orbit = cfg.make_orbit();

  auto v = verdict(orbit, cfg.samples, cfg.h);
  double cmin = v.coefficient_samples.front(), cmax = cmin;
  for (double c : v.coefficient_samples) {
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  out << "verdict = " << to_string(v.verdict) << "\n";
  out << "coefficient range = [" << jacobivar::detail::fmt_double(cmin) << ", "
      << jacobivar::detail::fmt_double(cmax) << "] over " << v.s_samples.size()
      << " samples\n";
  out << "h = " << jacobivar::detail::fmt_double(cfg.h) << "\n";

  if (cfg.t_end) {
    NormalDeviationSettings nds;
    nds.dt = cfg.dt;
    nds.t_end = *cfg.t_end;
    nds.s0 = cfg.s0;
    auto series = integrate_normal_deviation(orbit, cfg.h, cfg.eps_z0, cfg.epsdot_z0, nds);
    if (!opts.output.empty()) {
      OutputTarget target(opts.output, out);
      write_normal_deviation_csv(target.stream(), series);
    }
    if (series.reason != TerminationReason::Completed) {
      err << "normal deviation integration terminated early ("
          << to_string(series.reason) << ")\n";
      return 2;
    }
  } else if (!opts.output.empty()) {
    throw ConfigError(opts.config_path + ": 't_end' is required to emit the eps_z series");
  }
  return 0;
}

inline int cmd_check(const CommonOpts& opts, std::ostream& out) {
  auto cfg = SystemConfig::load(opts.config_path);
  apply_overrides(cfg, opts);
  auto settings = cfg.integration_settings();
  settings.t_end = require_t_end(cfg, opts.config_path);
  auto ds = derive(cfg.make_system());

  auto results = run_all_checks(ds, cfg.initial_state(), settings);
  bool all_pass = true;
  for (const auto& r : results) {
    out << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all_pass &= r.pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lagrangian dynamics with deviation equations: derive, integrate and analyse"};
  app.name("jacobivar");
  app.require_subcommand(1);

  detail::CommonOpts opts;
  bool symbolic = false;

  auto add_common = [&opts](CLI::App* sub, bool with_output = true) {
    sub->add_option("config", opts.config_path, "system definition file")->required();
    if (with_output) sub->add_option("-o,--output", opts.output, "output CSV path");
    sub->add_option("--dt", opts.dt, "integration step override");
    sub->add_option("--t-end", opts.t_end, "end time override");
    sub->add_option("--method", opts.method, "integrator: rk4 or rkf45");
    sub->add_option("--tau", opts.tau, "renormalization interval override");
    sub->add_option("--total-time", opts.total_time, "total propagation time override");
  };

  CLI::App* c_derive = app.add_subcommand("derive", "print the derived symbolic system");
  add_common(c_derive, false);
  c_derive->add_flag("--symbolic", symbolic, "print gradient and Hessian blocks");
  CLI::App* c_sim = app.add_subcommand("simulate", "integrate the combined system, emit CSV");
  add_common(c_sim);
  CLI::App* c_lyap = app.add_subcommand("lyapunov", "estimate the Lyapunov spectrum");
  add_common(c_lyap);
  CLI::App* c_stab = app.add_subcommand("stability2d", "2d intrinsic-coordinate orbit stability");
  add_common(c_stab);
  CLI::App* c_check = app.add_subcommand("check", "run the built-in oracles and drift report");
  add_common(c_check, false);

  std::vector<const char*> argv{"jacobivar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 1;
  }

  try {
    if (c_derive->parsed()) return detail::cmd_derive(opts, symbolic, out);
    if (c_sim->parsed()) return detail::cmd_simulate(opts, out, err);
    if (c_lyap->parsed()) return detail::cmd_lyapunov(opts, out);
    if (c_stab->parsed()) return detail::cmd_stability2d(opts, out, err);
    if (c_check->parsed()) return detail::cmd_check(opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 3;
  } catch (const SingularMassError& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const DivergedTrajectoryError& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const StabilityError& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  } catch (const EvalError& e) {
    err << "runtime error: " << e.what() << "\n";
    return 2;
  }
  err << "no subcommand given\n";
  return 1;
}

}  // namespace jacobivar::cli
