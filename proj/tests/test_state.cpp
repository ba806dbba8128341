#include "doctest.h"
#include "support.hpp"

#include "membrane/state.hpp"

#include <random>

using namespace test_support;

namespace {

Problem harmonic_problem(Index n) {
  const Grid g = Grid::unit_square(n);
  return Problem(g, Field(g), Field(g), Boundary::sample(g, [](double x, double) { return x - 0.5; }),
                 Field(g));
}

Problem strip_two_phase(Index nx) {
  const Grid g = strip_grid(nx);
  return Problem(g, Field(g, 1.0), Field(g, 1.0),
                 Boundary::sample(g, [](double x, double) { return x * std::abs(x) / 2; }), Field(g));
}

Problem square_two_phase(Index n) {
  const Grid g = Grid::unit_square(n);
  return Problem(g, Field::sample(g, [](double x, double) { return 1 + 0.5 * std::sin(pi * x); }),
                 Field::sample(g, [](double, double y) { return 1 + 0.25 * std::cos(pi * y); }),
                 Boundary::sample(g, [](double x, double y) { return x - 0.5 + 0.25 * std::sin(2 * pi * y); }),
                 Field(g));
}

Field smooth_bump(const Grid& g, double a) {
  return zero_boundary(Field::sample(g, [&](double x, double y) {
    return a * std::sin(pi * x) * std::sin(2 * pi * y);
  }));
}

}  // namespace

TEST_CASE("ProblemData validation") {
  const Grid g = Grid::unit_square(5);
  CHECK_THROWS_AS(Problem(g, Field(g, -1.0), Field(g), Boundary::zero(g), Field(g)), std::invalid_argument);
  CHECK_THROWS_AS(Problem(g, Field(g), Field(g), Boundary{{1.0}}, Field(g)), std::invalid_argument);
  CHECK_THROWS_AS(Problem(g, Field(Grid::unit_square(6)), Field(g), Boundary::zero(g), Field(g)),
                  std::invalid_argument);
  const Problem p(g, Field(g, 1.0), Field(g, 2.0), Boundary::zero(g), Field(g));
  CHECK(p.admissible(Field(g, 1.0)));
  CHECK(p.admissible(Field(g, -2.0)));
  CHECK_FALSE(p.admissible(Field(g, 1.5)));
}

TEST_CASE("solve_state: harmonic case reproduces x - 1/2") {
  const Problem data = harmonic_problem(17);
  const auto sol = solve_state(data, Smoother<double>(0.1), 1e-12, 10);
  CHECK(sol.converged);
  CHECK(max_abs_diff(sol.u, Field::sample(data.grid, [](double x, double) { return x - 0.5; })) <= 1e-10);
}

TEST_CASE("solve_state: harmonic case takes one Newton step from zero") {
  const Problem data = harmonic_problem(33);
  NewtonOptions<double> opt;
  opt.tol = 1e-12;
  opt.initial = Field(data.grid);
  const auto sol = solve_state(data, Smoother<double>(0.1), opt);
  CHECK(sol.converged);
  CHECK(sol.newton_iters == 1);
  CHECK(max_abs_diff(sol.u, Field::sample(data.grid, [](double x, double) { return x - 0.5; })) <= 1e-10);
}

TEST_CASE("solve_state: strip profile against the dense 1D oracle") {
  const Index nx = 129;
  const double eps = 1e-2;
  const Smoother<double> s(eps);
  const Eigen::VectorXd ref = dense_1d(
      int(nx), -1, 1, -0.5, 0.5,
      [&](double u) { return chi(s, u) - chi(s, -u); },
      [&](double u) { return chi_prime(s, u) + chi_prime(s, -u); });

  SUBCASE("ring carries the 1D solution: every row reproduces it") {
    const Grid g = strip_grid(nx);
    Field ring(g);
    for (Index j = 0; j < g.ny; ++j)
      for (Index i = 0; i < nx; ++i) ring(i, j) = ref[i];
    const Problem data(g, Field(g, 1.0), Field(g, 1.0), Boundary::from_field(ring), Field(g));
    const auto sol = solve_state(data, s, 1e-12, 100);
    REQUIRE(sol.converged);
    CHECK(max_abs_diff(sol.u, ring) <= 1e-9);
  }
  SUBCASE("ring carries x|x|/2: close to the limit profile") {
    const Problem data = strip_two_phase(nx);
    const auto sol = solve_state(data, s, 1e-12, 100);
    REQUIRE(sol.converged);
    double worst = 0;
    for (Index j = 0; j < data.grid.ny; ++j)
      for (Index i = 0; i < nx; ++i) {
        const double x = data.grid.x(i);
        worst = std::max(worst, std::abs(sol.u(i, j) - x * std::abs(x) / 2));
      }
    const double h = data.grid.hx();
    CHECK(worst <= h * h + eps);
    CHECK(sol.u((nx - 1) * 3 / 4, 2) == doctest::Approx(0.125).epsilon(1e-3));
    // The 1D oracle has the same limit.
    CHECK(std::abs(ref[(nx - 1) * 3 / 4] - 0.125) <= h * h + eps);
  }
}

TEST_CASE("solve_state_limit") {
  SUBCASE("harmonic case converges at the first comparison") {
    const Problem data = harmonic_problem(17);
    const auto lim = solve_state_limit(data, 0.1, 1e-9, 1e-12);
    CHECK(lim.converged);
    REQUIRE(lim.h1_steps.size() == 1);
    CHECK(lim.h1_steps[0] <= 1e-9);
    const auto direct = solve_state(data, Smoother<double>(0.1), 1e-12, 100);
    CHECK(max_abs_diff(lim.state.u, direct.u) <= 1e-10);
  }
  SUBCASE("strip profile: H1 steps decrease") {
    const Problem data = strip_two_phase(129);
    const auto lim = solve_state_limit(data, 0.2, 1e-4, 1e-11);
    CHECK(lim.converged);
    REQUIRE(lim.h1_steps.size() >= 3);
    for (std::size_t k = 1; k < lim.h1_steps.size(); ++k) CHECK(lim.h1_steps[k] < lim.h1_steps[k - 1]);
  }
}

TEST_CASE("solve_one_phase") {
  SUBCASE("zero coefficient gives the harmonic extension") {
    const Grid g = Grid::unit_square(17);
    const Field f = Field::sample(g, [](double x, double y) { return 1 + x * y; });
    const Boundary bc = Boundary::sample(g, [](double x, double y) { return 0.3 + x * x - y * y; });
    const Problem data(g, f, Field(g), bc, f);
    const auto sol = solve_one_phase(data, Smoother<double>(0.05), 1e-12);
    CHECK(sol.converged);
    CHECK(max_abs_diff(sol.u, harmonic_extension(g, bc, 1e-12)) <= 1e-10);
  }
  SUBCASE("1D contact region then parabola") {
    const Index nx = 129;
    const double eps = 1e-3;
    const Grid g = strip_grid(nx);
    const Smoother<double> s(eps);
    const Eigen::VectorXd ref = dense_1d(int(nx), -1, 1, 0, 0.5, [&](double u) { return chi(s, u); },
                                         [&](double u) { return chi_prime(s, u); });
    Field ring(g);
    for (Index j = 0; j < g.ny; ++j)
      for (Index i = 0; i < nx; ++i) ring(i, j) = ref[i];
    const Problem data(g, Field(g, 1.0), Field(g, 1.0), Boundary::from_field(ring), Field(g));
    const auto sol = solve_one_phase(data, s, 1e-12, 200);
    REQUIRE(sol.converged);
    CHECK(max_abs_diff(sol.u, ring) <= 1e-9);
    double worst_exact = 0;
    for (Index i = 0; i < nx; ++i) {
      const double x = g.x(i);
      worst_exact = std::max(worst_exact, std::abs(sol.u(i, 2) - (x > 0 ? x * x / 2 : 0.0)));
      CHECK(sol.u(i, 2) >= -eps);
    }
    CHECK(worst_exact <= 5e-3);
    CHECK(sol.u(nx - 1, 2) == 0.5);
    CHECK(sol.u(0, 2) == 0.0);
  }
  SUBCASE("negative coefficient rejected") {
    const Grid g = Grid::unit_square(9);
    const Problem data(g, Field(g, 1.0), Field(g, 1.0), Boundary::zero(g), Field(g, 1.0));
    Problem bad = data;
    bad.phi = Field(g, 1.5);
    CHECK_THROWS_AS(solve_one_phase(bad, Smoother<double>(0.1), 1e-10), std::invalid_argument);
  }
}

TEST_CASE("recover_obstacle") {
  const Grid g = Grid::unit_square(65);
  CHECK(max_abs(recover_obstacle(Field(g))) == 0);
  const Field phi = recover_obstacle(Field(g, 4.0));
  // Lap phi = 4 with zero boundary data: centre value 4 * (-0.0736713).
  CHECK(phi(32, 32) == doctest::Approx(4 * -0.0736713).epsilon(2e-3));
  CHECK(max_abs(zero_boundary(apply_laplacian(phi) - Field(g, 4.0))) <= 1e-8);
}

TEST_CASE("free_boundary") {
  SUBCASE("positive field has no free boundary") {
    const Grid g = Grid::unit_square(9);
    const auto fb = free_boundary(Field(g, 1.0), 1e-8, 1e-3);
    CHECK(fb.gamma_count() == 0);
    CHECK(fb.count(NodeLabel::Positive) == std::size_t(g.size()));
  }
  SUBCASE("x|x|/2 has a tangential free boundary at x = 0") {
    const Grid g = strip_grid(65);
    const Field u = Field::sample(g, [](double x, double) { return x * std::abs(x) / 2; });
    // The centred gradient at a tangential touch is O(h), here h / 2.
    const auto fb = free_boundary(u, 1e-12, 0.1);
    CHECK(fb.count(NodeLabel::Transversal) == 0);
    CHECK(fb.count(NodeLabel::Tangential) == 3);
    for (Index j = 1; j < 4; ++j) CHECK(fb(32, j) == NodeLabel::Tangential);
  }
  SUBCASE("x - 1/2 crosses transversally") {
    const Grid g = Grid::unit_square(17);
    const Field u = Field::sample(g, [](double x, double) { return x - 0.5; });
    const auto fb = free_boundary(u, 1e-12, 0.1);
    CHECK(fb.count(NodeLabel::Tangential) == 0);
    CHECK(fb.count(NodeLabel::Transversal) == 15);
    for (Index j = 1; j < 16; ++j) CHECK(fb(8, j) == NodeLabel::Transversal);
    // Off the node lattice: the node nearer the zero set carries the label.
    const Field v = Field::sample(g, [](double x, double) { return x - 0.51; });
    const auto fv = free_boundary(v, 1e-12, 0.1);
    for (Index j = 1; j < 16; ++j) CHECK(fv(8, j) == NodeLabel::Transversal);
    CHECK(fv.gamma_count() == 15);
  }
  CHECK(std::string(label_name(NodeLabel::Tangential)) == "G1");
}

TEST_CASE("energy_two_phase") {
  const Grid g = Grid::unit_square(33);
  const Problem zero(g, Field(g, 1.0), Field(g, 1.0), Boundary::zero(g), Field(g));
  CHECK(energy_two_phase(Field(g), zero) == 0);
  const Problem harmonic = harmonic_problem(33);
  const Field lin = Field::sample(g, [](double x, double) { return x - 0.5; });
  CHECK(std::abs(energy_two_phase(lin, harmonic) - 0.5) <= g.hy());
}

TEST_CASE("energy_two_phase is minimal at the limit state") {
  const Problem data = square_two_phase(33);
  const auto lim = solve_state_limit(data, 0.05, 1e-6, 1e-11);
  const double e0 = energy_two_phase(lim.state.u, data);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> amp(-0.05, 0.05);
  std::uniform_int_distribution<int> mode(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int kx = mode(rng), ky = mode(rng);
    const double a = amp(rng);
    const Field psi = zero_boundary(Field::sample(data.grid, [&](double x, double y) {
      return a * std::sin(kx * pi * x) * std::sin(ky * pi * y);
    }));
    CHECK(energy_two_phase(lim.state.u + psi, data) >= e0);
  }
}

TEST_CASE("property: residual contract and energy descent") {
  const Problem base = square_two_phase(33);
  for (double eps : {0.2, 0.05, 0.01}) {
    const Smoother<double> s(eps);
    const auto sol = solve_state(base.with_control(smooth_bump(base.grid, 0.4)), s, 1e-10, 100);
    REQUIRE(sol.converged);
    CHECK(sol.final_residual <= 1e-10);
    CHECK(state_residual_norm(base.with_control(smooth_bump(base.grid, 0.4)), s, sol.u) <= 1e-10);
    for (std::size_t k = 1; k < sol.energy_trace.size(); ++k)
      CHECK(sol.energy_trace[k] <= sol.energy_trace[k - 1]);
    CHECK(max_abs_diff(sol.u, with_boundary(sol.u, base.g)) == 0);
  }
}

TEST_CASE("property: uniqueness from different initial iterates") {
  const Problem data = square_two_phase(33).with_control(smooth_bump(Grid::unit_square(33), -0.3));
  const Smoother<double> s(0.02);
  const double tol = 1e-11;
  NewtonOptions<double> a, b;
  a.tol = b.tol = tol;
  b.initial = Field(data.grid);  // zero interior
  const auto ua = solve_state(data, s, a), ub = solve_state(data, s, b);
  REQUIRE(ua.converged);
  REQUIRE(ub.converged);
  CHECK(max_abs_diff(ua.u, ub.u) <= 10 * tol);
}

TEST_CASE("property: comparison in the control") {
  const Problem data = square_two_phase(33);
  const Smoother<double> s(0.02);
  const double tol = 1e-11;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> d(0, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    Field phi2 = smooth_bump(data.grid, 0.5 * (d(rng) - 0.15));
    Field phi1 = phi2;
    for (Index k = 0; k < data.grid.size(); ++k) phi1[k] += d(rng);
    const auto u1 = solve_state(data.with_control(phi1), s, tol, 100);
    const auto u2 = solve_state(data.with_control(phi2), s, tol, 100);
    CHECK((u1.u - u2.u).values().minCoeff() >= -10 * tol);
  }
}

TEST_CASE("property: eps-consistency") {
  const Problem data = square_two_phase(33);
  double prev = 1e300;
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const auto a = solve_state(data, Smoother<double>(eps), 1e-11, 100);
    const auto b = solve_state(data, Smoother<double>(eps / 2), 1e-11, 100);
    const double d = h1_norm(a.u - b.u);
    CHECK(d < prev);
    prev = d;
  }
}
