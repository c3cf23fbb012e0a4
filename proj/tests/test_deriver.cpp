#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "jacobivar/system.hpp"

using namespace jacobivar;
using testutil::state1;

namespace {

// Independent Hessian oracle: second-order central differences of the
// Lagrangian itself, never touching the symbolic blocks.
double fd_second(const DerivedSystem& ds, const FlowState& s, const std::string& x,
                 const std::string& y) {
  auto bind = [&](double dx, double dy) {
    auto bb = ds.system.table.parameter_bindings();
    bb[ds.system.table.time()] = s.t;
    for (int i = 0; i < ds.n; ++i) {
      bb[ds.system.table.coordinates()[i]] = s.q[i];
      bb[ds.system.table.velocities()[i]] = s.qdot[i];
    }
    bb[x] += dx;
    bb[y] += dy;
    return evaluate(ds.system.lagrangian, bb);
  };
  const double h = 1e-4;
  if (x == y)
    return (bind(h, 0.0) - 2.0 * bind(0.0, 0.0) + bind(-h, 0.0)) / (h * h);
  return (bind(h, h) - bind(h, -h) - bind(-h, h) + bind(-h, -h)) / (4.0 * h * h);
}

FlowState random_state(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  FlowState s;
  s.t = std::abs(u(rng));
  for (int i = 0; i < n; ++i) {
    s.q.push_back(u(rng));
    s.qdot.push_back(u(rng));
    s.eps.push_back(u(rng));
    s.epsdot.push_back(u(rng));
  }
  return s;
}

}  // namespace

TEST_CASE("derive: harmonic oscillator blocks, H and h") {
  auto ds = testutil::oscillator(2.0);  // w = 2
  REQUIRE(ds.n == 1);
  REQUIRE(ds.autonomous);

  auto s = state1(0.7, -0.3, 0.2, 0.9);
  REQUIRE(equal(ds.mass[0], constant(1.0)));
  REQUIRE(eval_mass(ds, s)(0, 0) == 1.0);

  auto bindings = ds.system.table.parameter_bindings();
  bindings["q1"] = 0.7;
  bindings["qd1"] = -0.3;
  bindings["t"] = 0.0;
  REQUIRE(evaluate(ds.vel_pos[0], bindings) == 0.0);
  REQUIRE(evaluate(ds.pos_pos[0], bindings) == -4.0);  // -w^2

  bindings["e1"] = 0.2;
  bindings["ed1"] = 0.9;
  double H = evaluate(ds.energy, bindings);
  REQUIRE_THAT(H, Catch::Matchers::WithinAbs(0.5 * 0.3 * 0.3 + 0.5 * 4.0 * 0.7 * 0.7, 1e-14));
  double h = evaluate(ds.jacobi_constant, bindings);
  REQUIRE_THAT(h, Catch::Matchers::WithinAbs(-0.3 * 0.9 + 4.0 * 0.7 * 0.2, 1e-14));
}

TEST_CASE("derive: hessian blocks match finite differences on three systems") {
  std::mt19937 rng(551);
  std::vector<DerivedSystem> systems;
  systems.push_back(testutil::oscillator());
  systems.push_back(testutil::pendulum());
  systems.push_back(testutil::magnetic(0.7));
  for (const auto& ds : systems) {
    const auto& st = ds.system.table;
    const int n = ds.n;
    for (int rep = 0; rep < 10; ++rep) {
      auto s = random_state(n, rng);
      auto bind = st.parameter_bindings();
      bind[st.time()] = s.t;
      for (int i = 0; i < n; ++i) {
        bind[st.coordinates()[i]] = s.q[i];
        bind[st.velocities()[i]] = s.qdot[i];
      }
      for (int a = 0; a < n; ++a) {
        for (int b2 = 0; b2 < n; ++b2) {
          double m_sym = evaluate(ds.mass[a * n + b2], bind);
          double m_fd = fd_second(ds, s, st.velocities()[a], st.velocities()[b2]);
          REQUIRE(testutil::rel_err(m_sym, m_fd) < 1e-6);
          double a_sym = evaluate(ds.vel_pos[a * n + b2], bind);
          double a_fd = fd_second(ds, s, st.velocities()[a], st.coordinates()[b2]);
          REQUIRE(testutil::rel_err(a_sym, a_fd) < 1e-6);
          double b_sym = evaluate(ds.pos_pos[a * n + b2], bind);
          double b_fd = fd_second(ds, s, st.coordinates()[a], st.coordinates()[b2]);
          REQUIRE(testutil::rel_err(b_sym, b_fd) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("derive: magnetic-term system has the expected mixed Hessians") {
  auto ds = testutil::magnetic(0.7);
  auto bind = ds.system.table.parameter_bindings();
  for (const auto& s : {"x", "y", "dx", "dy", "t"}) bind[s] = 0.37;
  // d2L/ddx dy = -B, d2L/ddy dx = +B
  REQUIRE(evaluate(ds.vel_pos[0 * 2 + 1], bind) == -0.7);
  REQUIRE(evaluate(ds.vel_pos[1 * 2 + 0], bind) == 0.7);
}

TEST_CASE("mass-matrix entries are symmetric as trees and numerically") {
  std::mt19937 rng(8252);
  auto hh = testutil::henon_heiles();
  auto mag = testutil::magnetic(1.3);
  for (const auto& ds : {hh, mag}) {
    const int n = ds.n;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        REQUIRE(equal(ds.mass[a * n + b], ds.mass[b * n + a]));

    // Both differentiation orders, evaluated at random states.
    const auto& st = ds.system.table;
    for (int rep = 0; rep < 100; ++rep) {
      auto s = random_state(n, rng);
      auto bind = st.parameter_bindings();
      bind[st.time()] = s.t;
      for (int i = 0; i < n; ++i) {
        bind[st.coordinates()[i]] = s.q[i];
        bind[st.velocities()[i]] = s.qdot[i];
      }
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
          double ab = evaluate(
              differentiate(differentiate(ds.system.lagrangian, st.velocities()[a]),
                            st.velocities()[b]),
              bind);
          double ba = evaluate(
              differentiate(differentiate(ds.system.lagrangian, st.velocities()[b]),
                            st.velocities()[a]),
              bind);
          REQUIRE(std::abs(ab - ba) <= 1e-12 * (1.0 + std::abs(ab)));
        }
      }
    }
  }
}

TEST_CASE("build_gamma constructs the directional derivative of L") {
  auto free_sys = LagrangianSystem::make(SymbolTable::make({"q1"}, {}), "qd1^2/2");
  auto probe = build_gamma(free_sys);
  REQUIRE(equal(probe.gamma, parse("qd1*ed1")));

  auto osc = LagrangianSystem::make(SymbolTable::make({"q1"}, {{"w", 1.0}}),
                                    "qd1^2/2 - w^2*q1^2/2");
  auto probe2 = build_gamma(osc);
  REQUIRE(equal(probe2.gamma, parse("qd1*ed1 - w^2*q1*e1")));

  // gamma vanishes when the deviation vanishes
  std::map<std::string, double> bind{{"q1", 0.8}, {"qd1", -0.4}, {"w", 1.0},
                                     {"e1", 0.0}, {"ed1", 0.0}};
  REQUIRE(evaluate(probe2.gamma, bind) == 0.0);

  // gamma is linear in each deviation symbol: second derivatives vanish
  for (const auto& dev : {"e1", "ed1"}) {
    auto second = differentiate(differentiate(probe2.gamma, dev), dev);
    REQUIRE(equal(second, constant(0.0)));
  }
}

TEST_CASE("gamma equals the deviation-directional derivative of L") {
  std::mt19937 rng(40412);
  for (const auto& ds : {testutil::pendulum(), testutil::magnetic(0.9),
                         testutil::time_dependent()}) {
    auto probe = build_gamma(ds.system);
    const auto& st = ds.system.table;
    for (int rep = 0; rep < 50; ++rep) {
      auto s = random_state(ds.n, rng);
      auto bind = st.parameter_bindings();
      bind[st.time()] = s.t;
      for (int i = 0; i < ds.n; ++i) {
        bind[st.coordinates()[i]] = s.q[i];
        bind[st.velocities()[i]] = s.qdot[i];
        bind[st.deviations()[i]] = s.eps[i];
        bind[st.deviation_velocities()[i]] = s.epsdot[i];
      }
      double gamma = evaluate(probe.gamma, bind);
      double fd = testutil::central_difference(
          [&](double alpha) {
            auto bb = bind;
            for (int i = 0; i < ds.n; ++i) {
              bb[st.coordinates()[i]] = s.q[i] + alpha * s.eps[i];
              bb[st.velocities()[i]] = s.qdot[i] + alpha * s.epsdot[i];
            }
            return evaluate(ds.system.lagrangian, bb);
          },
          0.0, 1e-6);
      REQUIRE(std::abs(gamma - fd) <= 1e-6 * (1.0 + std::abs(gamma)));
    }
  }
}

TEST_CASE("h equals the deviation-directional derivative of H") {
  std::mt19937 rng(3390);
  for (const auto& ds : {testutil::oscillator(1.4), testutil::henon_heiles()}) {
    const auto& st = ds.system.table;
    for (int rep = 0; rep < 50; ++rep) {
      auto s = random_state(ds.n, rng);
      double h_val = eval_h(ds, s);
      auto bind = st.parameter_bindings();
      bind[st.time()] = s.t;
      double fd = testutil::central_difference(
          [&](double alpha) {
            auto bb = bind;
            for (int i = 0; i < ds.n; ++i) {
              bb[st.coordinates()[i]] = s.q[i] + alpha * s.eps[i];
              bb[st.velocities()[i]] = s.qdot[i] + alpha * s.epsdot[i];
            }
            return evaluate(ds.energy, bb);
          },
          0.0, 1e-6);
      REQUIRE(std::abs(h_val - fd) <= 1e-6 * (1.0 + std::abs(h_val)));
    }
  }
}

TEST_CASE("solve_accelerations: closed forms and the singular error path") {
  auto osc = testutil::oscillator();
  auto acc = solve_accelerations(osc, state1(1.0, 0.0));
  REQUIRE_THAT(acc[0], Catch::Matchers::WithinAbs(-1.0, 1e-14));

  auto free_sys = derive(LagrangianSystem::make(SymbolTable::make({"q1"}, {}), "qd1^2/2"));
  auto acc2 = solve_accelerations(free_sys, state1(3.0, -2.0));
  REQUIRE(acc2[0] == 0.0);

  auto degenerate = derive(LagrangianSystem::make(SymbolTable::make({"q1"}, {}), "q1*qd1"));
  REQUIRE_THROWS_AS(solve_accelerations(degenerate, state1(1.0, 1.0)), SingularMassError);
}

TEST_CASE("assemble_CK: hand values for oscillator, pendulum and magnetic system") {
  auto osc = testutil::oscillator(1.0);
  auto s = state1(0.3, 0.8);
  auto acc = solve_accelerations(osc, s);
  auto ck = assemble_CK(osc, s, acc);
  REQUIRE_THAT(ck.c(0, 0), Catch::Matchers::WithinAbs(0.0, 1e-14));
  REQUIRE_THAT(ck.k(0, 0), Catch::Matchers::WithinAbs(1.0, 1e-14));

  auto pend = testutil::pendulum();
  auto sp = state1(0.5, 0.0);
  auto accp = solve_accelerations(pend, sp);
  auto ckp = assemble_CK(pend, sp, accp);
  REQUIRE_THAT(ckp.c(0, 0), Catch::Matchers::WithinAbs(0.0, 1e-14));
  REQUIRE_THAT(ckp.k(0, 0), Catch::Matchers::WithinAbs(std::cos(0.5), 1e-12));

  auto mag = testutil::magnetic(0.7);
  FlowState sm{0.0, {0.4, -0.2}, {0.1, 0.9}, {0, 0}, {0, 0}};
  auto accm = solve_accelerations(mag, sm);
  auto ckm = assemble_CK(mag, sm, accm);
  REQUIRE_THAT(ckm.c(0, 0), Catch::Matchers::WithinAbs(0.0, 1e-13));
  REQUIRE_THAT(ckm.c(0, 1), Catch::Matchers::WithinAbs(-1.4, 1e-13));
  REQUIRE_THAT(ckm.c(1, 0), Catch::Matchers::WithinAbs(1.4, 1e-13));
  REQUIRE_THAT(ckm.c(1, 1), Catch::Matchers::WithinAbs(0.0, 1e-13));
  for (int i = 0; i < 4; ++i) REQUIRE_THAT(ckm.k.a[i], Catch::Matchers::WithinAbs(0.0, 1e-13));
}

TEST_CASE("Euler-Lagrange of gamma in the deviations equals the Lagrange residual of L") {
  std::mt19937 rng(7717);
  for (const auto& ds : {testutil::pendulum(), testutil::magnetic(0.8),
                         testutil::time_dependent()}) {
    auto probe = build_gamma(ds.system);
    const auto& st = ds.system.table;
    const int n = ds.n;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 25; ++rep) {
      auto s = random_state(n, rng);
      std::vector<double> qddot(n);
      for (auto& v : qddot) v = u(rng);
      auto bind = st.parameter_bindings();
      bind[st.time()] = s.t;
      for (int i = 0; i < n; ++i) {
        bind[st.coordinates()[i]] = s.q[i];
        bind[st.velocities()[i]] = s.qdot[i];
        bind[st.deviations()[i]] = s.eps[i];
        bind[st.deviation_velocities()[i]] = s.epsdot[i];
      }
      // chain-rule expansion of d/dt F(q, qdot, t) with qddot substituted
      auto total_dt = [&](const ExprPtr& f) {
        double v = evaluate(differentiate(f, st.time()), bind);
        for (int c = 0; c < n; ++c) {
          v += evaluate(differentiate(f, st.coordinates()[c]), bind) * s.qdot[c];
          v += evaluate(differentiate(f, st.velocities()[c]), bind) * qddot[c];
        }
        return v;
      };
      for (int a = 0; a < n; ++a) {
        double via_gamma = total_dt(differentiate(probe.gamma, st.deviation_velocities()[a])) -
                           evaluate(differentiate(probe.gamma, st.deviations()[a]), bind);
        double via_l = total_dt(differentiate(ds.system.lagrangian, st.velocities()[a])) -
                       evaluate(differentiate(ds.system.lagrangian, st.coordinates()[a]), bind);
        REQUIRE(std::abs(via_gamma - via_l) <= 1e-9 * (1.0 + std::abs(via_l)));
      }
    }
  }
}

TEST_CASE("eval_H and eval_h spec values; h on non-autonomous systems fails") {
  auto osc = testutil::oscillator();
  REQUIRE_THAT(eval_H(osc, state1(1.0, 0.0, 0.0, 1.0)),
               Catch::Matchers::WithinAbs(0.5, 1e-14));
  REQUIRE_THAT(eval_h(osc, state1(1.0, 0.0, 0.0, 1.0)),
               Catch::Matchers::WithinAbs(0.0, 1e-14));
  REQUIRE_THAT(eval_H(osc, state1(0.0, 1.0, 1.0, 0.0)),
               Catch::Matchers::WithinAbs(0.5, 1e-14));
  REQUIRE_THAT(eval_h(osc, state1(0.0, 1.0, 1.0, 0.0)),
               Catch::Matchers::WithinAbs(0.0, 1e-14));

  auto td = testutil::time_dependent();
  REQUIRE(!td.autonomous);
  REQUIRE(td.jacobi_constant == nullptr);
  REQUIRE_THROWS_AS(eval_h(td, state1(1.0, 0.0)), NotAutonomousError);
}

TEST_CASE("lagrangian validation rejects undeclared symbols") {
  auto table = SymbolTable::make({"q1"}, {});
  REQUIRE_THROWS_AS(LagrangianSystem::make(table, "qd1^2/2 - g*q1"), ValidationError);
  // deviations may not appear in L either
  REQUIRE_THROWS_AS(LagrangianSystem::make(table, "qd1^2/2 + e1"), ValidationError);
}
