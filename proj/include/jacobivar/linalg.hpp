#pragma once

// Small dense matrices and LU with partial pivoting. Systems here have a
// handful of degrees of freedom, so nothing fancier is warranted.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace jacobivar {

struct Mat {
  int n = 0;
  std::vector<double> a;

  Mat() = default;
  explicit Mat(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

// Max absolute row sum (infinity norm); the scale used by the
// mass-matrix singularity threshold.
inline double inf_norm(const Mat& m) {
  double best = 0.0;
  for (int i = 0; i < m.n; ++i) {
    double row = 0.0;
    for (int j = 0; j < m.n; ++j) row += std::abs(m(i, j));
    if (row > best) best = row;
  }
  return best;
}

struct Lu {
  int n = 0;
  std::vector<double> lu;
  std::vector<int> piv;
  double det = 0.0;

  bool factored() const { return n > 0; }
};

inline Lu lu_factor(const Mat& m) {
  Lu f;
  f.n = m.n;
  f.lu = m.a;
  f.piv.resize(m.n);
  f.det = 1.0;
  const int n = m.n;
  auto at = [&f, n](int i, int j) -> double& { return f.lu[static_cast<std::size_t>(i) * n + j]; };
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(at(k, k));
    for (int i = k + 1; i < n; ++i) {
      double v = std::abs(at(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    f.piv[k] = p;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(at(k, j), at(p, j));
      f.det = -f.det;
    }
    double pivot = at(k, k);
    f.det *= pivot;
    if (pivot == 0.0) continue;  // det stays exactly zero; caller checks
    for (int i = k + 1; i < n; ++i) {
      double factor = at(i, k) / pivot;
      at(i, k) = factor;
      for (int j = k + 1; j < n; ++j) at(i, j) -= factor * at(k, j);
    }
  }
  return f;
}

// In-place solve of the factored system; x holds the right-hand side on entry.
inline void lu_solve(const Lu& f, double* x) {
  const int n = f.n;
  for (int k = 0; k < n; ++k) {
    if (f.piv[k] != k) std::swap(x[k], x[f.piv[k]]);
    for (int i = k + 1; i < n; ++i) x[i] -= f.lu[static_cast<std::size_t>(i) * n + k] * x[k];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= f.lu[static_cast<std::size_t>(i) * n + j] * x[j];
    double d = f.lu[static_cast<std::size_t>(i) * n + i];
    x[i] /= d;
  }
}

// Relative singularity test: |det| below 1e-12 at the matrix scale.
// The scale enters once per dimension since det carries n factors of it.
inline bool lu_is_singular(const Lu& f, double scale) {
  if (scale <= 0.0 || !std::isfinite(scale)) return true;
  double threshold = 1e-12;
  for (int i = 0; i < f.n; ++i) threshold *= scale;
  return !(std::abs(f.det) >= threshold);
}

}  // namespace jacobivar
