#pragma once

// Line-oriented system definition files: `key = value` with `#` comments and
// bracketed vector literals `[a, b]`. One system per file. Parameters are
// given as `param.<name> = <real>`.

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/dynamics.hpp"
#include "jacobivar/stability.hpp"
#include "jacobivar/system.hpp"

namespace jacobivar {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct ConfigEntry {
  std::string value;
  int line = 0;
};

class ConfigFile {
 public:
  static ConfigFile read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open file");
    ConfigFile cfg;
    cfg.path_ = path;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string text = trim(line);
      if (text.empty()) continue;
      auto eq = text.find('=');
      if (eq == std::string::npos)
        throw ConfigError(cfg.where(lineno) + ": expected 'key = value'");
      std::string key = trim(text.substr(0, eq));
      std::string value = trim(text.substr(eq + 1));
      if (key.empty()) throw ConfigError(cfg.where(lineno) + ": empty key");
      if (cfg.entries_.count(key))
        throw ConfigError(cfg.where(lineno) + ": duplicate key '" + key + "'");
      cfg.entries_[key] = {value, lineno};
    }
    return cfg;
  }

  const std::string& path() const { return path_; }
  std::string where(int line) const { return path_ + ":" + std::to_string(line); }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const ConfigEntry& require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(path_ + ": missing required key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key) const { return require(key).value; }

  double get_real(const std::string& key) const {
    const auto& e = require(key);
    return parse_real(e.value, key, e.line);
  }

  double get_real_or(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
  }

  int get_int(const std::string& key) const {
    const auto& e = require(key);
    char* end = nullptr;
    long v = std::strtol(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0')
      throw ConfigError(where(e.line) + ": value of '" + key + "' is not an integer");
    return static_cast<int>(v);
  }

  int get_int_or(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    const auto& e = require(key);
    const std::string& v = e.value;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
      throw ConfigError(where(e.line) + ": value of '" + key + "' must be a bracketed list");
    std::vector<std::string> items;
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(trim(item));
    if (items.size() == 1 && items[0].empty()) items.clear();
    return items;
  }

  std::vector<double> get_reals(const std::string& key) const {
    const auto& e = require(key);
    std::vector<double> out;
    for (const auto& item : get_list(key)) out.push_back(parse_real(item, key, e.line));
    return out;
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  // Parameter map from the param.<name> keys.
  std::map<std::string, double> parameters() const {
    std::map<std::string, double> params;
    for (const auto& [key, entry] : entries_) {
      if (key.rfind("param.", 0) != 0) continue;
      std::string name = key.substr(6);
      if (name.empty()) throw ConfigError(where(entry.line) + ": empty parameter name");
      params[name] = parse_real(entry.value, key, entry.line);
    }
    return params;
  }

  void check_known_keys() const {
    static const std::set<std::string> known = {
        "name",     "coordinates", "lagrangian", "q0",          "qd0",
        "eps0",     "epsdot0",     "t0",         "t_end",       "method",
        "dt",       "abs_tol",     "rel_tol",    "sample_every", "total_time",
        "tau",      "rho",         "potential",  "sdot",        "s_min",
        "s_max",    "central_potential", "radius", "h",         "eps_z0",
        "epsdot_z0", "samples",    "s0",
    };
    for (const auto& [key, entry] : entries_) {
      if (key.rfind("param.", 0) == 0) continue;
      if (!known.count(key))
        throw ConfigError(where(entry.line) + ": unknown key '" + key + "'");
    }
  }

 private:
  double parse_real(const std::string& text, const std::string& key, int line) const {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
      throw ConfigError(where(line) + ": value of '" + key + "' is not a number");
    return v;
  }

  std::string path_;
  std::map<std::string, ConfigEntry> entries_;
};

}  // namespace detail

struct SystemConfig {
  std::string name;
  std::vector<std::string> coordinates;
  std::string lagrangian_source;
  std::map<std::string, double> parameters;
  std::vector<double> q0, qd0, eps0, epsdot0;
  double t0 = 0.0;
  std::optional<double> t_end;
  Method method = Method::Rk4;
  double dt = 1e-3;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  int sample_every = 1;
  double total_time = 1000.0;  // lyapunov
  double tau = 1.0;            // lyapunov

  static SystemConfig load(const std::string& path) {
    auto cfg = detail::ConfigFile::read(path);
    cfg.check_known_keys();
    SystemConfig sc;
    if (cfg.has("name")) sc.name = cfg.get_string("name");
    sc.coordinates = cfg.get_list("coordinates");
    if (sc.coordinates.empty())
      throw ConfigError(path + ": 'coordinates' must list at least one name");
    sc.lagrangian_source = cfg.get_string("lagrangian");
    sc.parameters = cfg.parameters();
    sc.q0 = cfg.get_reals("q0");
    sc.qd0 = cfg.get_reals("qd0");
    const std::size_t n = sc.coordinates.size();
    sc.eps0 = cfg.has("eps0") ? cfg.get_reals("eps0") : std::vector<double>(n, 0.0);
    sc.epsdot0 = cfg.has("epsdot0") ? cfg.get_reals("epsdot0") : std::vector<double>(n, 0.0);
    auto check_len = [&](const char* key, const std::vector<double>& v) {
      if (v.size() != n)
        throw ConfigError(path + ": '" + key + "' has " + std::to_string(v.size()) +
                          " entries but there are " + std::to_string(n) + " coordinates");
    };
    check_len("q0", sc.q0);
    check_len("qd0", sc.qd0);
    check_len("eps0", sc.eps0);
    check_len("epsdot0", sc.epsdot0);

    sc.t0 = cfg.get_real_or("t0", 0.0);
    if (cfg.has("t_end")) sc.t_end = cfg.get_real("t_end");
    if (cfg.has("method")) {
      std::string m = cfg.get_string("method");
      if (m == "rk4") sc.method = Method::Rk4;
      else if (m == "rkf45") sc.method = Method::Rkf45;
      else throw ConfigError(cfg.where(cfg.line_of("method")) + ": method must be rk4 or rkf45");
    }
    sc.dt = cfg.get_real_or("dt", 1e-3);
    sc.abs_tol = cfg.get_real_or("abs_tol", 1e-9);
    sc.rel_tol = cfg.get_real_or("rel_tol", 1e-9);
    sc.sample_every = cfg.get_int_or("sample_every", 1);
    if (sc.sample_every < 1)
      throw ConfigError(path + ": 'sample_every' must be at least 1");
    if (sc.dt <= 0.0) throw ConfigError(path + ": 'dt' must be positive");
    sc.total_time = cfg.get_real_or("total_time", 1000.0);
    sc.tau = cfg.get_real_or("tau", 1.0);

    // Build the system once now so symbol and syntax problems surface as
    // config errors with a location.
    try {
      sc.make_system();
    } catch (const ParseError& e) {
      throw ConfigError(cfg.where(cfg.line_of("lagrangian")) + ": in 'lagrangian': " + e.what());
    } catch (const ValidationError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return sc;
  }

  LagrangianSystem make_system() const {
    auto table = SymbolTable::make(coordinates, parameters);
    return LagrangianSystem::make(std::move(table), parse(lagrangian_source));
  }

  FlowState initial_state() const {
    FlowState s;
    s.t = t0;
    s.q = q0;
    s.qdot = qd0;
    s.eps = eps0;
    s.epsdot = epsdot0;
    return s;
  }

  IntegrationSettings integration_settings() const {
    IntegrationSettings is;
    is.method = method;
    is.dt = dt;
    is.abs_tol = abs_tol;
    is.rel_tol = rel_tol;
    is.sample_every = sample_every;
    if (t_end) is.t_end = *t_end;
    return is;
  }
};

struct StabilityConfig {
  std::string name;
  std::map<std::string, double> parameters;
  bool circular = false;
  std::string central_potential_source;  // circular form
  double radius = 0.0;
  std::string rho_source, potential_source, sdot_source;  // explicit form
  double s_min = 0.0, s_max = 0.0;
  double h = 0.0;
  double eps_z0 = 1e-3;
  double epsdot_z0 = 0.0;
  double s0 = 0.0;
  double dt = 1e-3;
  std::optional<double> t_end;
  int samples = 64;

  static StabilityConfig load(const std::string& path) {
    auto cfg = detail::ConfigFile::read(path);
    cfg.check_known_keys();
    StabilityConfig sc;
    if (cfg.has("name")) sc.name = cfg.get_string("name");
    sc.parameters = cfg.parameters();
    if (cfg.has("central_potential")) {
      sc.circular = true;
      sc.central_potential_source = cfg.get_string("central_potential");
      sc.radius = cfg.get_real("radius");
    } else {
      sc.rho_source = cfg.get_string("rho");
      sc.potential_source = cfg.get_string("potential");
      sc.sdot_source = cfg.get_string("sdot");
      sc.s_min = cfg.get_real("s_min");
      sc.s_max = cfg.get_real("s_max");
    }
    sc.h = cfg.get_real_or("h", 0.0);
    sc.eps_z0 = cfg.get_real_or("eps_z0", 1e-3);
    sc.epsdot_z0 = cfg.get_real_or("epsdot_z0", 0.0);
    sc.s0 = cfg.get_real_or("s0", 0.0);
    sc.dt = cfg.get_real_or("dt", 1e-3);
    if (cfg.has("t_end")) sc.t_end = cfg.get_real("t_end");
    sc.samples = cfg.get_int_or("samples", 64);
    if (sc.samples < 2) throw ConfigError(path + ": 'samples' must be at least 2");

    try {
      sc.make_orbit();
    } catch (const ParseError& e) {
      throw ConfigError(path + ": in orbit expression: " + std::string(e.what()));
    } catch (const StabilityError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return sc;
  }

  ReferenceOrbit make_orbit() const {
    if (circular)
      return ReferenceOrbit::circular(parse(central_potential_source), radius, parameters);
    return ReferenceOrbit::make(parse(rho_source), parse(potential_source), parse(sdot_source),
                                s_min, s_max, parameters);
  }
};

}  // namespace jacobivar
