#pragma once

// Numeric snapshot of the combined trajectory + deviation system.

#include <cmath>
#include <cstddef>
#include <vector>

namespace jacobivar {

struct FlowState {
  double t = 0.0;
  std::vector<double> q;
  std::vector<double> qdot;
  std::vector<double> eps;
  std::vector<double> epsdot;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool is_finite(const FlowState& s) {
  return std::isfinite(s.t) && all_finite(s.q) && all_finite(s.qdot) && all_finite(s.eps) &&
         all_finite(s.epsdot);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    double a = std::abs(x);
    if (a > m) m = a;
  }
  return m;
}

}  // namespace jacobivar
