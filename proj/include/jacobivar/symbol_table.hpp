#pragma once

// Symbol table for a Lagrangian system: ordered coordinates, the velocity
// names derived from them, the time symbol and bound parameters.

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/expr.hpp"

namespace jacobivar {

class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class UndeclaredSymbolError : public std::runtime_error {
 public:
  explicit UndeclaredSymbolError(const std::string& name)
      : std::runtime_error("undeclared symbol '" + name + "'") {}
};

namespace detail {

inline bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

inline bool is_indexed_coordinate(const std::string& s) {
  if (s.size() < 2 || s[0] != 'q') return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace detail

// Velocity spelling rule: q3 -> qd3, named coordinate z -> dz.
inline std::string velocity_name(const std::string& coord) {
  if (detail::is_indexed_coordinate(coord)) return "qd" + coord.substr(1);
  return "d" + coord;
}

// Deviation spelling rule: q3 -> e3/ed3, named coordinate z -> e_z/ed_z.
inline std::string deviation_name(const std::string& coord) {
  if (detail::is_indexed_coordinate(coord)) return "e" + coord.substr(1);
  return "e_" + coord;
}

inline std::string deviation_velocity_name(const std::string& coord) {
  if (detail::is_indexed_coordinate(coord)) return "ed" + coord.substr(1);
  return "ed_" + coord;
}

class SymbolTable {
 public:
  // Validates that coordinate, velocity, deviation, parameter and time names
  // are pairwise disjoint legal identifiers.
  static SymbolTable make(std::vector<std::string> coordinates,
                          std::map<std::string, double> parameters) {
    SymbolTable st;
    st.coordinates_ = std::move(coordinates);
    if (st.coordinates_.empty())
      throw ValidationError("at least one coordinate is required");
    for (const auto& c : st.coordinates_) {
      st.velocities_.push_back(velocity_name(c));
      st.deviations_.push_back(deviation_name(c));
      st.deviation_velocities_.push_back(deviation_velocity_name(c));
    }
    for (auto& [name, value] : parameters) {
      st.parameter_names_.push_back(name);
      st.parameter_values_.push_back(value);
    }

    std::set<std::string> seen{st.time_};
    auto claim = [&seen](const std::string& name, const char* role) {
      if (!detail::is_identifier(name))
        throw ValidationError(std::string(role) + " name '" + name +
                              "' is not a valid identifier");
      if (builtin_functions().count(name))
        throw ValidationError(std::string(role) + " name '" + name +
                              "' collides with a built-in function");
      if (!seen.insert(name).second)
        throw ValidationError(std::string(role) + " name '" + name +
                              "' collides with another declared or derived symbol");
    };
    for (const auto& c : st.coordinates_) claim(c, "coordinate");
    for (const auto& v : st.velocities_) claim(v, "velocity");
    for (const auto& d : st.deviations_) claim(d, "deviation");
    for (const auto& d : st.deviation_velocities_) claim(d, "deviation velocity");
    for (const auto& p : st.parameter_names_) claim(p, "parameter");
    return st;
  }

  int n() const { return static_cast<int>(coordinates_.size()); }
  const std::vector<std::string>& coordinates() const { return coordinates_; }
  const std::vector<std::string>& velocities() const { return velocities_; }
  const std::vector<std::string>& deviations() const { return deviations_; }
  const std::vector<std::string>& deviation_velocities() const { return deviation_velocities_; }
  const std::string& time() const { return time_; }
  const std::vector<std::string>& parameter_names() const { return parameter_names_; }
  const std::vector<double>& parameter_values() const { return parameter_values_; }

  double parameter(const std::string& name) const {
    for (std::size_t i = 0; i < parameter_names_.size(); ++i)
      if (parameter_names_[i] == name) return parameter_values_[i];
    throw UndeclaredSymbolError(name);
  }

  // Symbols a Lagrangian may reference (deviations are reserved for gamma).
  bool is_lagrangian_symbol(const std::string& name) const {
    return name == time_ || contains(coordinates_, name) || contains(velocities_, name) ||
           contains(parameter_names_, name);
  }

  bool is_declared(const std::string& name) const {
    return is_lagrangian_symbol(name) || contains(deviations_, name) ||
           contains(deviation_velocities_, name);
  }

  // Parameter bindings as a plain map, for evaluate().
  std::map<std::string, double> parameter_bindings() const {
    std::map<std::string, double> b;
    for (std::size_t i = 0; i < parameter_names_.size(); ++i)
      b[parameter_names_[i]] = parameter_values_[i];
    return b;
  }

 private:
  static bool contains(const std::vector<std::string>& v, const std::string& s) {
    for (const auto& x : v)
      if (x == s) return true;
    return false;
  }

  std::vector<std::string> coordinates_;
  std::vector<std::string> velocities_;
  std::vector<std::string> deviations_;
  std::vector<std::string> deviation_velocities_;
  std::string time_ = "t";
  std::vector<std::string> parameter_names_;
  std::vector<double> parameter_values_;
};

// differentiate() with a declaration check against the table.
inline ExprPtr differentiate(const ExprPtr& e, const std::string& wrt, const SymbolTable& table) {
  if (!table.is_declared(wrt)) throw UndeclaredSymbolError(wrt);
  return differentiate(e, wrt);
}

}  // namespace jacobivar
