#include "membrane/verify.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace membrane::verify {

namespace {

constexpr double kPi = std::numbers::pi;

NewtonOptions<double> newton_opts(double tol, int max_newton = 400) {
  NewtonOptions<double> opt;
  opt.tol = tol;
  opt.max_newton = max_newton;
  return opt;
}

Field solve_u(const Problem& data, const Field& phi, const Smooth& s, double tol) {
  auto sol = solve_state(data.with_control(phi), s, newton_opts(tol));
  if (!sol.converged)
    throw ConvergenceError("verify: state solve did not converge", sol.final_residual,
                           sol.newton_iters);
  return sol.u;
}

double interior_max(const Field& f) {
  const auto& g = f.grid();
  double m = -std::numeric_limits<double>::infinity();
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i) m = std::max(m, f(i, j));
  return m;
}

double interior_min(const Field& f) { return -interior_max(-f); }

/// Torsion-type field: Lap_h v = 1, v = 0 on the ring (so v <= 0).
Field unit_poisson(const Grid& grid) {
  return solve_spd(Field(grid), Field(grid, -1.0), Boundary::zero(grid), 1e-13,
                   default_cg_iterations(grid));
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

/// Folds per-instance reports into one suite report.
CheckReport merge(std::string name, const std::vector<CheckReport>& parts) {
  CheckReport out;
  out.name = std::move(name);
  out.passed = !parts.empty();
  int failures = 0;
  for (const auto& p : parts) {
    out.passed = out.passed && p.passed;
    out.worst_violation = std::max(out.worst_violation, p.worst_violation);
    out.tolerance = p.tolerance;
    out.eps = p.eps;
    out.instances += p.instances;
    if (!p.passed) {
      ++failures;
      if (failures <= 3) out.details += (out.details.empty() ? "" : "; ") + p.details;
    }
  }
  if (out.details.empty()) out.details = "all instances within tolerance";
  if (failures > 3) out.details += "; " + std::to_string(failures) + " failing instances";
  return out;
}

}  // namespace

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Field random_control(const Problem& data, Rng& rng) {
  const auto& g = data.grid;
  Field phi(g);
  if (rng.uniform() < 0.5) {
    const int modes = rng.integer(1, 4);
    for (int m = 0; m < modes; ++m) {
      const int kx = rng.integer(1, 4), ky = rng.integer(1, 4);
      const double amp = rng.uniform(-1, 1);
      const double shift = rng.uniform(0, 1);
      phi += Field::sample(g, [&](double x, double y) {
        const double sx = (x - g.ax) / (g.bx - g.ax), sy = (y - g.ay) / (g.by - g.ay);
        return amp * std::cos(kx * kPi * sx + 2 * kPi * shift) * std::sin(ky * kPi * sy);
      });
    }
  } else {
    for (Index k = 0; k < g.size(); ++k) phi[k] = rng.uniform(-data.fm[k], data.fp[k]);
  }
  return project_box(phi, data.fm, data.fp);
}

Field random_direction(const Grid& grid, Rng& rng, int family) {
  Field psi(grid);
  switch (family % 3) {
    case 0: {  // unit bump at one interior node
      const Index i = rng.integer(1, int(grid.nx) - 2), j = rng.integer(1, int(grid.ny) - 2);
      psi(i, j) = 1;
      break;
    }
    case 1: {  // smooth mode
      const int kx = rng.integer(1, 3), ky = rng.integer(1, 3);
      const double amp = rng.uniform(0.5, 1.0);
      psi = Field::sample(grid, [&](double x, double y) {
        const double sx = (x - grid.ax) / (grid.bx - grid.ax);
        const double sy = (y - grid.ay) / (grid.by - grid.ay);
        return amp * std::sin(kx * kPi * sx) * std::sin(ky * kPi * sy);
      });
      break;
    }
    default:  // nodewise noise
      for (Index k = 0; k < grid.size(); ++k) psi[k] = rng.uniform(-1, 1);
  }
  return zero_boundary(std::move(psi));
}

double discrete_eigenvalue_closed_form(const Grid& grid) {
  const double hx = grid.hx(), hy = grid.hy();
  const double sx = std::sin(kPi / (2.0 * double(grid.nx - 1)));
  const double sy = std::sin(kPi / (2.0 * double(grid.ny - 1)));
  return 4.0 / (hx * hx) * sx * sx + 4.0 / (hy * hy) * sy * sy;
}

CheckReport check_monotonicity(const Problem& data, const Field& phi1, const Field& phi2,
                               const Smooth& s, double tol, double solver_tol) {
  CheckReport r{"monotonicity", false, 0, tol, 1, s.eps, ""};
  if (interior_min(phi1 - phi2) < 0)
    throw std::invalid_argument("check_monotonicity: phi1 must dominate phi2");
  const Field u1 = solve_u(data, phi1, s, solver_tol);
  const Field u2 = solve_u(data, phi2, s, solver_tol);
  r.worst_violation = std::max(0.0, -interior_min(u1 - u2));
  r.passed = r.worst_violation <= tol;
  r.details = fmt("min(u1-u2) = %.3e", interior_min(u1 - u2));
  return r;
}

CheckReport check_sandwich(const Problem& data, const Field& phi1, const Field& phi2,
                           const Smooth& s, double tol, double solver_tol) {
  CheckReport r{"sandwich", false, 0, tol, 1, s.eps, ""};
  const Field u1 = solve_u(data, phi1, s, solver_tol);
  const Field u2 = solve_u(data, phi2, s, solver_tol);
  const double m = std::max(0.0, interior_max(phi1 - phi2));
  const Field v = unit_poisson(data.grid);
  const double lower = interior_max(u1 + m * v - u2);  // u1 + M v <= u2
  const double upper = interior_max(u2 - u1);          // u2 <= u1
  r.worst_violation = std::max({0.0, lower, upper});
  r.passed = r.worst_violation <= tol;
  r.details = fmt("M = %.3e", m) + fmt(", max(u1+Mv-u2) = %.3e", lower) +
              fmt(", max(u2-u1) = %.3e", upper);
  return r;
}

CheckReport check_lipschitz(const Problem& data, const Field& phi1, const Field& phi2,
                            const Smooth& s, double tol, std::optional<double> lambda1,
                            double solver_tol) {
  CheckReport r{"lipschitz", false, 0, tol, 1, s.eps, ""};
  const double lam = lambda1 ? *lambda1 : smallest_eigenvalue(data.grid, 1e-12);
  const Field u1 = solve_u(data, phi1, s, solver_tol);
  const Field u2 = solve_u(data, phi2, s, solver_tol);
  const double lhs = std::sqrt(h1_seminorm_sq(u1 - u2));
  const double dphi = l2_norm(phi1 - phi2);
  const double bound = dphi / std::sqrt(lam);
  // Compare the ratio against the constant, so the tolerance is scale-free.
  const double ratio = dphi > 0 ? lhs / dphi : 0.0;
  r.worst_violation = std::max(0.0, ratio - 1.0 / std::sqrt(lam));
  r.passed = dphi > 0 ? ratio <= 1.0 / std::sqrt(lam) + tol : lhs <= tol;
  r.details = fmt("ratio = %.6f", ratio) + fmt(", bound = %.6f", 1.0 / std::sqrt(lam)) +
              fmt(", |u1-u2|_H1 = %.3e", lhs) + fmt(" <= %.3e", bound);
  return r;
}

CheckReport check_gradient_fd(const Problem& data, const Field& z, const Field& phi, double lambda,
                              const Smooth& s, const GradientCheckOptions& opt) {
  CheckReport r{"gradient_fd", true, 0, opt.threshold, 0, s.eps, ""};
  OptimizerConfig<double> cfg;
  cfg.lambda = lambda;
  cfg.eps = s.eps;
  cfg.state_tol = opt.state_tol;
  cfg.max_newton = 400;

  const auto base = solve_state(data.with_control(phi), s, newton_opts(opt.state_tol));
  const Field p = solve_adjoint(base.u, z, data, s, 1e-13).p;
  const Field grad = reduced_gradient(phi, p, lambda);
  // Absolute uncertainty of one objective evaluation.
  const double noise = 10 * (std::numeric_limits<double>::epsilon() *
                                 std::abs(objective(phi, z, cfg, data)) +
                             l2_norm(base.u - z) * opt.state_tol);
  auto at_threshold = [&](const std::vector<double>& errs) {
    for (std::size_t k = 0; k < errs.size(); ++k)
      if (opt.steps[k] == opt.threshold_step) return errs[k];
    return errs.back();
  };

  Rng rng(opt.seed);
  std::ostringstream details;
  for (int d = 0; d < opt.directions; ++d) {
    const Field psi = random_direction(data.grid, rng, d);
    const double adj = l2_inner(grad, psi);
    std::vector<double> errs;
    for (double t : opt.steps) {
      const double jp = objective(phi + t * psi, z, cfg, data);
      const double jm = objective(phi - t * psi, z, cfg, data);
      const double fd = (jp - jm) / (2 * t);
      errs.push_back(std::abs(fd - adj) / std::max(std::abs(adj), 1e-300));
    }
    // Each error must not exceed the previous one unless it already sits at
    // the rounding floor of the difference quotient.
    bool ok = at_threshold(errs) <= opt.threshold;
    for (std::size_t k = 1; k < errs.size(); ++k)
      ok = ok && (errs[k] <= errs[k - 1] || errs[k] <= noise / (opt.steps[k] * std::abs(adj)));
    r.passed = r.passed && ok;
    r.worst_violation = std::max(r.worst_violation, at_threshold(errs));
    ++r.instances;
    details << (d ? "; " : "") << "dir " << d << ":";
    for (double e : errs) details << ' ' << fmt("%.2e", e);
  }
  r.details = details.str();
  return r;
}

CheckReport check_sensitivity_fd(const Problem& data, const Field& phi, const Smooth& s,
                                 const SensitivityCheckOptions& opt) {
  CheckReport r{"sensitivity_fd", true, 0, opt.min_drop, 0, s.eps, ""};
  const double lam = discrete_eigenvalue_closed_form(data.grid);
  const Field u = solve_u(data, phi, s, opt.state_tol);
  Rng rng(opt.seed);
  std::ostringstream details;
  for (int d = 0; d < opt.directions; ++d) {
    const Field psi = random_direction(data.grid, rng, 1 + d % 2);
    const Field xi = solve_sensitivity(u, psi, data, s, 1e-13);
    double err[2];
    bool lipschitz_ok = true;
    for (int k = 0; k < 2; ++k) {
      const double t = opt.t / (k == 0 ? 1.0 : 10.0);
      const Field ut = solve_u(data, phi + t * psi, s, opt.state_tol);
      Field quotient = ut - u;
      quotient *= 1.0 / t;
      err[k] = l2_norm(xi - quotient);
      const double lhs = std::sqrt(h1_seminorm_sq(ut - u));
      lipschitz_ok = lipschitz_ok && lhs <= t * l2_norm(psi) / std::sqrt(lam) + 1e-10;
    }
    const double drop = err[0] / std::max(err[1], 1e-300);
    const bool ok = drop >= opt.min_drop && lipschitz_ok;
    r.passed = r.passed && ok;
    r.worst_violation = std::max(r.worst_violation, std::max(0.0, opt.min_drop - drop));
    ++r.instances;
    details << (d ? "; " : "") << "dir " << d << ": " << fmt("%.2e", err[0]) << " -> "
            << fmt("%.2e", err[1]) << fmt(" (drop %.2f)", drop)
            << (lipschitz_ok ? "" : " lipschitz bound violated");
  }
  r.details = details.str();
  return r;
}

CheckReport check_eps_convergence(const Problem& data, const std::vector<double>& eps_list,
                                  double tol, double solver_tol) {
  CheckReport r{"eps_convergence", true, 0, tol, 1, eps_list.empty() ? 0 : eps_list.back(), ""};
  if (eps_list.size() < 2) throw std::invalid_argument("check_eps_convergence: need two eps values");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1]))
      throw std::invalid_argument("check_eps_convergence: eps list must be decreasing");

  auto opt = newton_opts(solver_tol);
  std::vector<Field> states;
  for (double eps : eps_list) {
    auto sol = solve_state(data, Smooth(eps), opt);
    if (!sol.converged)
      throw ConvergenceError("check_eps_convergence: state solve did not converge",
                             sol.final_residual, sol.newton_iters);
    states.push_back(sol.u);
    opt.initial = sol.u;
  }
  std::vector<double> dist;
  for (std::size_t k = 0; k + 1 < states.size(); ++k)
    dist.push_back(h1_norm(states[k + 1] - states[k]));

  auto decreasing = [&](const std::vector<double>& seq) {
    bool ok = true;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      if (seq[k] <= tol) continue;
      if (!(seq[k] < seq[k - 1])) {
        ok = false;
        r.worst_violation = std::max(r.worst_violation, seq[k] - seq[k - 1]);
      }
    }
    return ok;
  };
  const bool cauchy = decreasing(dist);

  // Coupled path: phi_k -> phi while eps_k -> 0, compared to the last level.
  Field direction = zero_boundary(project_box(Field(data.grid, 0.5), data.fm, data.fp));
  std::vector<double> coupled;
  const Smooth last(eps_list.back());
  const Field reference = states.back();
  for (std::size_t k = 0; k + 1 < eps_list.size(); ++k) {
    const double scale = std::ldexp(1.0, -int(k));
    Field phik = project_box(data.phi + scale * direction, data.fm, data.fp);
    auto sol = solve_state(data.with_control(phik), Smooth(eps_list[k]), newton_opts(solver_tol));
    coupled.push_back(h1_norm(sol.u - reference));
  }
  const bool joint = decreasing(coupled);

  r.passed = cauchy && joint;
  std::ostringstream os;
  os << "h1 steps:";
  for (double d : dist) os << ' ' << fmt("%.3e", d);
  os << "; coupled:";
  for (double d : coupled) os << ' ' << fmt("%.3e", d);
  r.details = os.str();
  return r;
}

CheckReport check_picard_newton_agreement(const Problem& data, const Smooth& s, double tol,
                                          double solver_tol, int max_picard) {
  CheckReport r{"picard_newton", false, 0, 10 * tol, 1, s.eps, ""};
  const auto newton = solve_state(data, s, newton_opts(solver_tol));

  const double lam = discrete_eigenvalue_closed_form(data.grid);
  const double lip = (data.fp.values().maxCoeff() + data.fm.values().maxCoeff()) * 0.75 / s.eps;
  const double omega = 1.0 / (1.0 + lip / lam);
  const Field zero(data.grid);
  Field u = harmonic_extension(data.grid, data.g);
  int it = 0;
  bool converged = false;
  for (; it < max_picard; ++it) {
    const Field target = solve_spd(zero, data.phi - beta(s, u, data.fp, data.fm), data.g, 1e-13,
                                   default_cg_iterations(data.grid));
    Field step = target - u;
    step *= omega;
    u += step;
    // Contraction factor of the relaxed map is at most 1 - omega.
    if (max_abs(step) / omega <= 0.1 * tol) {
      converged = true;
      break;
    }
  }
  r.worst_violation = max_abs(u - newton.u);
  r.passed = converged && newton.converged && r.worst_violation <= 10 * tol;
  r.details = (converged ? "picard converged in " : "picard did not converge after ") +
              std::to_string(it + (converged ? 1 : 0)) + " iterations" +
              fmt(", omega = %.3e", omega) + fmt(", max|u_picard - u_newton| = %.3e",
                                                r.worst_violation);
  return r;
}

Problem default_problem(Index n) {
  const Grid g = Grid::unit_square(n);
  Field fp = Field::sample(g, [](double x, double) { return 1.0 + 0.5 * std::sin(kPi * x); });
  Field fm = Field::sample(g, [](double, double y) { return 1.0 + 0.25 * std::cos(kPi * y); });
  Boundary bc = Boundary::sample(
      g, [](double x, double y) { return x - 0.5 + 0.25 * std::sin(2 * kPi * y); });
  return Problem(g, fp, fm, bc, Field(g));
}

Problem strip_problem(Index nx) {
  const double h = 2.0 / double(nx - 1);
  const Grid g(nx, 5, -1.0, 1.0, 0.0, 4 * h);
  return Problem(g, Field(g, 1.0), Field(g, 1.0),
                 Boundary::sample(g, [](double x, double) { return 0.5 * x * std::abs(x); }),
                 Field(g));
}

namespace {

/// Ordered admissible pair phi1 >= phi2.
std::pair<Field, Field> ordered_pair(const Problem& data, Rng& rng) {
  Field phi2 = random_control(data, rng);
  Field phi1 = phi2;
  const double frac = rng.uniform();
  const bool constant_shift = rng.uniform() < 0.3;
  for (Index k = 0; k < phi1.grid().size(); ++k) {
    const double room = data.fp[k] - phi2[k];
    phi1[k] += constant_shift ? frac * room : rng.uniform() * room;
  }
  return {phi1, phi2};
}

template <typename Check>
CheckReport pair_suite(const VerifyConfig& cfg, std::uint64_t salt, const char* name,
                       Check&& check) {
  const Problem data = default_problem(cfg.n);
  Rng rng(cfg.seed ^ salt);
  std::vector<CheckReport> parts;
  for (int i = 0; i < cfg.instances; ++i) {
    auto [phi1, phi2] = ordered_pair(data, rng);
    CheckReport part = check(data, phi1, phi2);
    part.details = "instance " + std::to_string(i) + ": " + part.details;
    parts.push_back(std::move(part));
  }
  return merge(name, parts);
}

}  // namespace

CheckReport monotonicity_suite(const VerifyConfig& cfg) {
  const Smooth s(cfg.eps);
  return pair_suite(cfg, 0x11, "monotonicity", [&](const Problem& d, const Field& a, const Field& b) {
    return check_monotonicity(d, a, b, s, cfg.order_tol, cfg.solver_tol);
  });
}

CheckReport sandwich_suite(const VerifyConfig& cfg) {
  const Smooth s(cfg.eps);
  return pair_suite(cfg, 0x22, "sandwich", [&](const Problem& d, const Field& a, const Field& b) {
    return check_sandwich(d, a, b, s, cfg.order_tol, cfg.solver_tol);
  });
}

CheckReport lipschitz_suite(const VerifyConfig& cfg) {
  const Smooth s(cfg.eps);
  const double lam = smallest_eigenvalue(Grid::unit_square(cfg.n), 1e-12);
  // Unordered pairs: draw the two controls independently.
  const Problem data = default_problem(cfg.n);
  Rng rng(cfg.seed ^ 0x33);
  std::vector<CheckReport> parts;
  for (int i = 0; i < cfg.instances; ++i) {
    const Field phi1 = random_control(data, rng);
    const Field phi2 = random_control(data, rng);
    parts.push_back(check_lipschitz(data, phi1, phi2, s, cfg.lipschitz_tol, lam, cfg.solver_tol));
  }
  CheckReport out = merge("lipschitz", parts);
  out.details += fmt("; lambda1_h = %.10f", lam);
  return out;
}

CheckReport gradient_suite(const VerifyConfig& cfg) {
  std::vector<CheckReport> parts;
  const double eps_values[3] = {0.2, 0.1, 0.05};
  for (int inst = 0; inst < 3; ++inst) {
    Problem data = default_problem(cfg.n);
    const double a = 0.2 + 0.1 * inst;
    const Field phi = zero_boundary(Field::sample(data.grid, [&](double x, double y) {
      return a * std::sin(kPi * x) * std::sin(kPi * y) - 0.1 * std::cos(kPi * (x + inst * y));
    }));
    const Field z = Field::sample(data.grid, [&](double x, double y) {
      return 0.3 * std::sin(kPi * x) * std::sin(2 * kPi * y) + 0.1 * (x - 0.5) * inst;
    });
    GradientCheckOptions opt;
    opt.directions = cfg.gradient_directions;
    opt.seed = cfg.seed ^ (0x44 + std::uint64_t(inst));
    parts.push_back(check_gradient_fd(data, z, phi, 1e-2, Smooth(eps_values[inst]), opt));
  }
  return merge("gradient_fd", parts);
}

CheckReport sensitivity_suite(const VerifyConfig& cfg) {
  const Problem data = default_problem(cfg.n);
  const Field phi = zero_boundary(Field::sample(data.grid, [](double x, double y) {
    return 0.3 * std::sin(kPi * x) * std::sin(kPi * y);
  }));
  SensitivityCheckOptions opt;
  opt.directions = cfg.gradient_directions;
  opt.seed = cfg.seed ^ 0x55;
  CheckReport r = check_sensitivity_fd(data, phi, Smooth(0.1), opt);
  r.name = "sensitivity_fd";
  return r;
}

CheckReport eps_convergence_suite(const VerifyConfig& cfg) {
  std::vector<CheckReport> parts;
  CheckReport strip = check_eps_convergence(strip_problem(129), cfg.eps_list, 1e-12, 1e-10);
  strip.details = "strip: " + strip.details;
  parts.push_back(strip);
  CheckReport square = check_eps_convergence(default_problem(cfg.n), cfg.eps_list, 1e-12,
                                             cfg.solver_tol);
  square.details = "square: " + square.details;
  parts.push_back(square);
  CheckReport out = merge("eps_convergence", parts);
  out.details = strip.details + "; " + square.details;
  return out;
}

CheckReport picard_suite(const VerifyConfig& cfg) {
  std::vector<CheckReport> parts;
  Problem harmonic = default_problem(cfg.n);
  harmonic.fp = Field(harmonic.grid);
  harmonic.fm = Field(harmonic.grid);
  parts.push_back(check_picard_newton_agreement(harmonic, Smooth(0.1), 1e-9, cfg.solver_tol));
  parts.push_back(check_picard_newton_agreement(strip_problem(65), Smooth(0.05), 1e-9, 1e-10));
  Problem random = default_problem(cfg.n);
  Rng rng(cfg.seed ^ 0x66);
  random.phi = random_control(random, rng);
  parts.push_back(check_picard_newton_agreement(random, Smooth(0.05), 1e-9, cfg.solver_tol));
  return merge("picard_newton", parts);
}

std::vector<CheckReport> run_all(const VerifyConfig& cfg) {
  return {monotonicity_suite(cfg), sandwich_suite(cfg),    lipschitz_suite(cfg),
          gradient_suite(cfg),     sensitivity_suite(cfg), eps_convergence_suite(cfg),
          picard_suite(cfg)};
}

void write_jsonl(std::ostream& os, const std::vector<CheckReport>& reports) {
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["passed"] = r.passed;
    j["worst_violation"] = r.worst_violation;
    j["tolerance"] = r.tolerance;
    j["instances"] = r.instances;
    j["eps"] = r.eps;
    j["details"] = r.details;
    os << j.dump() << '\n';
  }
}

}  // namespace membrane::verify
