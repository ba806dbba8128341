#include "doctest.h"
#include "support.hpp"

#include "membrane/verify.hpp"

#include <sstream>

using namespace test_support;
namespace mv = membrane::verify;

namespace {

mv::VerifyConfig small_config(std::uint64_t seed) {
  mv::VerifyConfig c;
  c.seed = seed;
  c.n = 17;
  c.instances = 6;
  c.gradient_directions = 3;
  return c;
}

std::string jsonl(const std::vector<mv::CheckReport>& r) {
  std::ostringstream os;
  mv::write_jsonl(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("Rng is reproducible and in range") {
  mv::Rng a(5), b(5), c(6);
  for (int k = 0; k < 100; ++k) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0);
    CHECK(x < 1);
    const int n = c.integer(-2, 3);
    CHECK(n >= -2);
    CHECK(n <= 3);
  }
  CHECK(mv::Rng(1).next() != mv::Rng(2).next());
}

TEST_CASE("random controls are admissible, directions vanish on the ring") {
  const auto data = mv::default_problem(17);
  mv::Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    CHECK(data.admissible(mv::random_control(data, rng)));
    const Field psi = mv::random_direction(data.grid, rng, k);
    CHECK(max_abs_diff(psi, zero_boundary(psi)) == 0);
    CHECK(max_abs(psi) > 0);
  }
}

TEST_CASE("closed-form eigenvalue") {
  const Grid g = Grid::unit_square(33);
  CHECK(mv::discrete_eigenvalue_closed_form(g) == doctest::Approx(smallest_eigenvalue(g, 1e-12)).epsilon(1e-10));
}

TEST_CASE("check_monotonicity, check_sandwich, check_lipschitz: equal controls") {
  const auto data = mv::default_problem(17);
  const Smoother<double> s(0.01);
  mv::Rng rng(9);
  const Field phi = mv::random_control(data, rng);
  const auto m = mv::check_monotonicity(data, phi, phi, s, 1e-10);
  CHECK(m.passed);
  CHECK(m.worst_violation == 0);
  const auto w = mv::check_sandwich(data, phi, phi, s, 1e-10);
  CHECK(w.passed);
  CHECK(w.worst_violation <= 1e-10);
  const auto l = mv::check_lipschitz(data, phi, phi, s, 1e-10);
  CHECK(l.passed);
  CHECK(l.worst_violation == 0);
}

TEST_CASE("check_monotonicity: extreme controls on the strip") {
  const auto data = mv::strip_problem(65);
  const Smoother<double> s(0.01);
  const auto r = mv::check_monotonicity(data, data.fp, -data.fm, s, 1e-10);
  CHECK(r.passed);
  // Strict gap in the interior.
  const auto u1 = solve_state(data.with_control(data.fp), s, 1e-11, 100).u;
  const auto u2 = solve_state(data.with_control(-data.fm), s, 1e-11, 100).u;
  CHECK(zero_boundary(u1 - u2).values().minCoeff() >= 0);
  CHECK((u1 - u2)(32, 2) > 1e-3);
  const auto l = mv::check_lipschitz(data, data.fp, -data.fm, s, 1e-10);
  CHECK(l.passed);
}

TEST_CASE("check_sandwich: constant shift") {
  const auto data = mv::default_problem(17);
  const Smoother<double> s(0.01);
  mv::Rng rng(4);
  Field phi2 = mv::random_control(data, rng);
  phi2.values() = phi2.values().array().min(data.fp.values().array() - 0.3).matrix();
  const Field phi1 = project_box(phi2 + Field(data.grid, 0.3), data.fm, data.fp);
  CHECK(mv::check_sandwich(data, phi1, phi2, s, 1e-7).passed);
}

TEST_CASE("check_eps_convergence: constant path for harmonic data") {
  const Grid g = Grid::unit_square(17);
  const Problem data(g, Field(g), Field(g), Boundary::sample(g, [](double x, double) { return x - 0.5; }), Field(g));
  const auto r = mv::check_eps_convergence(data, {0.2, 0.1, 0.05}, 1e-9);
  CHECK(r.passed);
}

TEST_CASE("check_picard_newton_agreement: harmonic case") {
  const Grid g = Grid::unit_square(17);
  const Problem data(g, Field(g), Field(g), Boundary::sample(g, [](double x, double y) { return x * y; }), Field(g));
  CHECK(mv::check_picard_newton_agreement(data, Smoother<double>(0.1), 1e-9).passed);
}

TEST_CASE("check_sensitivity_fd runs on the small default problem") {
  const auto data = mv::default_problem(17);
  mv::SensitivityCheckOptions opt;
  opt.directions = 3;
  const auto r = mv::check_sensitivity_fd(data, Field(data.grid), Smoother<double>(0.1), opt);
  CHECK(r.passed);
  CHECK(r.instances == 3);
}

TEST_CASE("run_all is deterministic given the seed") {
  const auto a = mv::run_all(small_config(1234));
  const auto b = mv::run_all(small_config(1234));
  CHECK(jsonl(a) == jsonl(b));
  for (const auto& r : a) {
    INFO(r.name << ": " << r.details);
    CHECK(r.passed);
    CHECK(r.worst_violation <= r.tolerance);
  }
  // Different seeds change the instances but not the verdicts.
  const auto c = mv::run_all(small_config(98765));
  REQUIRE(c.size() == a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(c[k].name == a[k].name);
    CHECK(c[k].passed == a[k].passed);
  }
}

TEST_CASE("write_jsonl emits one object per line") {
  std::vector<mv::CheckReport> r(2);
  r[0].name = "a";
  r[1].name = "b \"quoted\"";
  const std::string out = jsonl(r);
  CHECK(std::count(out.begin(), out.end(), '\n') == 2);
  CHECK(out.find("\\\"quoted\\\"") != std::string::npos);
}
