#pragma once

// Variational deriver: from a Lagrangian, symbolically construct the
// equations of motion, the deviation-equation matrices M, C, K, and the
// conserved quantities H and h.
//
// The second partials of L are kept symbolic; total time derivatives in
// C and K are expanded by chain rule and evaluated numerically with the
// accelerations substituted, so no symbolic matrix inversion occurs.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "jacobivar/compiled.hpp"
#include "jacobivar/expr.hpp"
#include "jacobivar/linalg.hpp"
#include "jacobivar/state.hpp"
#include "jacobivar/symbol_table.hpp"

namespace jacobivar {

// Violation of the invertibility condition on M = d2L/dqdot dqdot.
class SingularMassError : public std::runtime_error {
 public:
  SingularMassError(double t, double det, double scale)
      : std::runtime_error(
            "singular mass matrix at t=" + detail::fmt_double(t) + ": |det| = " +
            detail::fmt_double(std::abs(det)) + " is below 1e-12 at matrix scale " +
            detail::fmt_double(scale) +
            "; the velocity Hessian of the Lagrangian must be invertible to solve for "
            "accelerations"),
        t_(t),
        det_(det) {}
  double t() const { return t_; }
  double det() const { return det_; }

 private:
  double t_;
  double det_;
};

class NotAutonomousError : public std::runtime_error {
 public:
  NotAutonomousError()
      : std::runtime_error(
            "h is defined only for autonomous systems; the Lagrangian depends explicitly on t") {}
};

struct LagrangianSystem {
  SymbolTable table;
  ExprPtr lagrangian;
  int n = 0;
  bool autonomous = true;

  static LagrangianSystem make(SymbolTable table, ExprPtr lagrangian) {
    LagrangianSystem sys;
    for (const auto& name : symbols_of(lagrangian)) {
      if (!table.is_lagrangian_symbol(name))
        throw ValidationError("Lagrangian references undeclared symbol '" + name + "'");
    }
    sys.autonomous = !contains_symbol(lagrangian, table.time());
    sys.n = table.n();
    sys.table = std::move(table);
    sys.lagrangian = std::move(lagrangian);
    return sys;
  }

  static LagrangianSystem make(SymbolTable table, const std::string& source) {
    return make(std::move(table), parse(source));
  }
};

// gamma(q, qdot, eps, epsdot, t): the directional derivative of L along the
// deviation; linear in each deviation symbol by construction.
struct GammaProbe {
  ExprPtr gamma;
  SymbolTable table;
};

inline GammaProbe build_gamma(const LagrangianSystem& sys) {
  const auto& st = sys.table;
  ExprPtr acc;
  for (int a = 0; a < sys.n; ++a) {
    ExprPtr term = add(mul(differentiate(sys.lagrangian, st.velocities()[a]),
                           symbol(st.deviation_velocities()[a])),
                       mul(differentiate(sys.lagrangian, st.coordinates()[a]),
                           symbol(st.deviations()[a])));
    acc = acc ? add(acc, term) : term;
  }
  return {simplify(acc), st};
}

struct DerivedSystem {
  LagrangianSystem system;
  int n = 0;
  bool autonomous = true;

  // Symbolic blocks, all N or NxN (row-major), over q, qdot, t and parameters.
  std::vector<ExprPtr> grad_q;     // dL/dq_a
  std::vector<ExprPtr> grad_qdot;  // dL/dqdot_a
  std::vector<ExprPtr> mass;       // M_ab = d2L/dqdot_a dqdot_b, symmetric
  std::vector<ExprPtr> vel_pos;    // A_ab = d2L/dqdot_a dq_b
  std::vector<ExprPtr> pos_pos;    // B_ab = d2L/dq_a dq_b, symmetric

  ExprPtr energy;           // H = (dL/dqdot_b) qdot_b - L
  ExprPtr jacobi_constant;  // h; only set when autonomous

  // Environment layout: [t, q.., qdot.., eps.., epsdot.., params..]
  std::map<std::string, int> slots;
  int env_size = 0;

  std::vector<double> make_env() const {
    std::vector<double> env(env_size, 0.0);
    const auto& vals = system.table.parameter_values();
    for (std::size_t j = 0; j < vals.size(); ++j) env[1 + 4 * n + j] = vals[j];
    return env;
  }

  void load_state(const FlowState& s, std::vector<double>& env) const {
    env[0] = s.t;
    for (int i = 0; i < n; ++i) {
      env[1 + i] = s.q[i];
      env[1 + n + i] = s.qdot[i];
      env[1 + 2 * n + i] = i < static_cast<int>(s.eps.size()) ? s.eps[i] : 0.0;
      env[1 + 3 * n + i] = i < static_cast<int>(s.epsdot.size()) ? s.epsdot[i] : 0.0;
    }
  }

  struct Tapes {
    std::vector<CompiledExpr> grad_q, grad_qdot;       // N
    std::vector<CompiledExpr> mass, vel_pos, pos_pos;  // N*N
    std::vector<CompiledExpr> dmass_dq, dmass_dqdot;   // N*N*N, index [c][a*n+b]
    std::vector<CompiledExpr> dmass_dt;                // N*N
    std::vector<CompiledExpr> dvp_dq, dvp_dqdot;       // N*N*N
    std::vector<CompiledExpr> dvp_dt;                  // N*N
    std::vector<CompiledExpr> dgrad_qdot_dt;           // N
    CompiledExpr energy, jacobi_constant;
  } tapes;
};

namespace detail {

inline std::map<std::string, int> slot_layout(const SymbolTable& st) {
  std::map<std::string, int> slots;
  const int n = st.n();
  slots[st.time()] = 0;
  for (int i = 0; i < n; ++i) {
    slots[st.coordinates()[i]] = 1 + i;
    slots[st.velocities()[i]] = 1 + n + i;
    slots[st.deviations()[i]] = 1 + 2 * n + i;
    slots[st.deviation_velocities()[i]] = 1 + 3 * n + i;
  }
  for (std::size_t j = 0; j < st.parameter_names().size(); ++j)
    slots[st.parameter_names()[j]] = 1 + 4 * n + static_cast<int>(j);
  return slots;
}

}  // namespace detail

inline DerivedSystem derive(const LagrangianSystem& sys) {
  DerivedSystem ds;
  ds.system = sys;
  ds.n = sys.n;
  ds.autonomous = sys.autonomous;
  const auto& st = sys.table;
  const int n = sys.n;
  const auto& qs = st.coordinates();
  const auto& vs = st.velocities();

  ds.grad_q.resize(n);
  ds.grad_qdot.resize(n);
  for (int a = 0; a < n; ++a) {
    ds.grad_q[a] = differentiate(sys.lagrangian, qs[a]);
    ds.grad_qdot[a] = differentiate(sys.lagrangian, vs[a]);
  }

  // Hessian blocks; M and B are built from the upper triangle so the
  // symmetric entries are identical trees.
  ds.mass.resize(n * n);
  ds.pos_pos.resize(n * n);
  ds.vel_pos.resize(n * n);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      ds.mass[a * n + b] = ds.mass[b * n + a] = differentiate(ds.grad_qdot[a], vs[b]);
      ds.pos_pos[a * n + b] = ds.pos_pos[b * n + a] = differentiate(ds.grad_q[a], qs[b]);
    }
    for (int b = 0; b < n; ++b) ds.vel_pos[a * n + b] = differentiate(ds.grad_qdot[a], qs[b]);
  }

  ExprPtr h_sum;
  for (int b = 0; b < n; ++b) {
    ExprPtr term = mul(ds.grad_qdot[b], symbol(vs[b]));
    h_sum = h_sum ? add(h_sum, term) : term;
  }
  ds.energy = simplify(sub(h_sum, sys.lagrangian));

  if (sys.autonomous) {
    ExprPtr acc;
    for (int b = 0; b < n; ++b) {
      ExprPtr term = add(mul(differentiate(ds.energy, vs[b]), symbol(st.deviation_velocities()[b])),
                         mul(differentiate(ds.energy, qs[b]), symbol(st.deviations()[b])));
      acc = acc ? add(acc, term) : term;
    }
    ds.jacobi_constant = simplify(acc);
  }

  ds.slots = detail::slot_layout(st);
  ds.env_size = 1 + 4 * n + static_cast<int>(st.parameter_names().size());

  // Chain-rule blocks for the total time derivatives in C and K.
  auto& tp = ds.tapes;
  auto comp = [&ds](const ExprPtr& e) { return CompiledExpr::compile(e, ds.slots); };
  tp.grad_q.resize(n);
  tp.grad_qdot.resize(n);
  tp.dgrad_qdot_dt.resize(n);
  for (int a = 0; a < n; ++a) {
    tp.grad_q[a] = comp(ds.grad_q[a]);
    tp.grad_qdot[a] = comp(ds.grad_qdot[a]);
    tp.dgrad_qdot_dt[a] = comp(differentiate(ds.grad_qdot[a], st.time()));
  }
  tp.mass.resize(n * n);
  tp.vel_pos.resize(n * n);
  tp.pos_pos.resize(n * n);
  tp.dmass_dt.resize(n * n);
  tp.dvp_dt.resize(n * n);
  for (int i = 0; i < n * n; ++i) {
    tp.mass[i] = comp(ds.mass[i]);
    tp.vel_pos[i] = comp(ds.vel_pos[i]);
    tp.pos_pos[i] = comp(ds.pos_pos[i]);
    tp.dmass_dt[i] = comp(differentiate(ds.mass[i], st.time()));
    tp.dvp_dt[i] = comp(differentiate(ds.vel_pos[i], st.time()));
  }
  tp.dmass_dq.resize(n * n * n);
  tp.dmass_dqdot.resize(n * n * n);
  tp.dvp_dq.resize(n * n * n);
  tp.dvp_dqdot.resize(n * n * n);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n * n; ++i) {
      tp.dmass_dq[c * n * n + i] = comp(differentiate(ds.mass[i], qs[c]));
      tp.dmass_dqdot[c * n * n + i] = comp(differentiate(ds.mass[i], vs[c]));
      tp.dvp_dq[c * n * n + i] = comp(differentiate(ds.vel_pos[i], qs[c]));
      tp.dvp_dqdot[c * n * n + i] = comp(differentiate(ds.vel_pos[i], vs[c]));
    }
  }
  tp.energy = comp(ds.energy);
  if (ds.jacobi_constant) tp.jacobi_constant = comp(ds.jacobi_constant);
  return ds;
}

namespace detail {

inline void eval_mass_env(const DerivedSystem& ds, const double* env, Mat& m) {
  const int n = ds.n;
  if (m.n != n) m = Mat(n);
  for (int i = 0; i < n * n; ++i) m.a[i] = ds.tapes.mass[i].eval(env);
}

// Accelerations from M qddot = dL/dq - A qdot - d(dL/dqdot)/dt.
// Returns the LU factors of M for reuse by the deviation solve.
inline Lu accel_env(const DerivedSystem& ds, const double* env, double* accel, Mat& scratch) {
  const int n = ds.n;
  eval_mass_env(ds, env, scratch);
  Lu lu = lu_factor(scratch);
  double scale = inf_norm(scratch);
  if (lu_is_singular(lu, scale)) throw SingularMassError(env[0], lu.det, scale);
  const double* qdot = env + 1 + n;
  for (int a = 0; a < n; ++a) {
    double r = ds.tapes.grad_q[a].eval(env) - ds.tapes.dgrad_qdot_dt[a].eval(env);
    for (int b = 0; b < n; ++b) r -= ds.tapes.vel_pos[a * n + b].eval(env) * qdot[b];
    accel[a] = r;
  }
  lu_solve(lu, accel);
  return lu;
}

// Numeric C and K with every total time derivative expanded as
// (dF/dq_c) qdot_c + (dF/dqdot_c) qddot_c + dF/dt.
inline void ck_env(const DerivedSystem& ds, const double* env, const double* accel, Mat& c_out,
                   Mat& k_out) {
  const int n = ds.n;
  if (c_out.n != n) c_out = Mat(n);
  if (k_out.n != n) k_out = Mat(n);
  const double* qdot = env + 1 + n;
  const auto& tp = ds.tapes;
  for (int i = 0; i < n * n; ++i) {
    double dm = tp.dmass_dt[i].eval(env);
    double da = tp.dvp_dt[i].eval(env);
    for (int c = 0; c < n; ++c) {
      dm += tp.dmass_dq[c * n * n + i].eval(env) * qdot[c] +
            tp.dmass_dqdot[c * n * n + i].eval(env) * accel[c];
      da += tp.dvp_dq[c * n * n + i].eval(env) * qdot[c] +
            tp.dvp_dqdot[c * n * n + i].eval(env) * accel[c];
    }
    c_out.a[i] = dm;
    k_out.a[i] = da - tp.pos_pos[i].eval(env);
  }
  // C_ab += A_ab - A_ba
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      c_out(a, b) += tp.vel_pos[a * n + b].eval(env) - tp.vel_pos[b * n + a].eval(env);
}

}  // namespace detail

inline Mat eval_mass(const DerivedSystem& ds, const FlowState& state) {
  auto env = ds.make_env();
  ds.load_state(state, env);
  Mat m(ds.n);
  detail::eval_mass_env(ds, env.data(), m);
  return m;
}

inline std::vector<double> solve_accelerations(const DerivedSystem& ds, const FlowState& state) {
  auto env = ds.make_env();
  ds.load_state(state, env);
  std::vector<double> accel(ds.n);
  Mat scratch;
  detail::accel_env(ds, env.data(), accel.data(), scratch);
  return accel;
}

struct CkMatrices {
  Mat c;
  Mat k;
};

inline CkMatrices assemble_CK(const DerivedSystem& ds, const FlowState& state,
                              const std::vector<double>& accel) {
  auto env = ds.make_env();
  ds.load_state(state, env);
  CkMatrices out{Mat(ds.n), Mat(ds.n)};
  detail::ck_env(ds, env.data(), accel.data(), out.c, out.k);
  return out;
}

inline double eval_H(const DerivedSystem& ds, const FlowState& state) {
  auto env = ds.make_env();
  ds.load_state(state, env);
  return ds.tapes.energy.eval(env.data());
}

inline double eval_h(const DerivedSystem& ds, const FlowState& state) {
  if (!ds.autonomous) throw NotAutonomousError();
  auto env = ds.make_env();
  ds.load_state(state, env);
  return ds.tapes.jacobi_constant.eval(env.data());
}

}  // namespace jacobivar
