#ifndef MEMBRANE_STATE_HPP
#define MEMBRANE_STATE_HPP

#include "membrane/field.hpp"
#include "membrane/regularization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace membrane {

/// Data of one state equation
///
///   Lap u = (f+ - phi) chi{u>0} - (f- + phi) chi{u<0}  in the domain,
///   u = g                                              on the boundary ring.
template <typename Scalar>
struct ProblemData {
  Grid2D<Scalar> grid;
  ScalarField<Scalar> fp;
  ScalarField<Scalar> fm;
  BoundaryData<Scalar> g;
  ScalarField<Scalar> phi;

  ProblemData(const Grid2D<Scalar>& grid_, ScalarField<Scalar> fp_, ScalarField<Scalar> fm_,
              BoundaryData<Scalar> g_, ScalarField<Scalar> phi_)
      : grid(grid_), fp(std::move(fp_)), fm(std::move(fm_)), g(std::move(g_)),
        phi(std::move(phi_)) {
    validate();
  }

  void validate() const {
    require_same_grid(grid, fp.grid(), "ProblemData: f_plus");
    require_same_grid(grid, fm.grid(), "ProblemData: f_minus");
    require_same_grid(grid, phi.grid(), "ProblemData: phi");
    if (g.values.size() != static_cast<std::size_t>(grid.boundary_count()))
      throw std::invalid_argument("ProblemData: boundary data length does not match grid");
    if ((fp.values().array() < 0).any() || (fm.values().array() < 0).any())
      throw std::invalid_argument("ProblemData: f_plus and f_minus must be nonnegative");
    if (!fp.all_finite() || !fm.all_finite() || !phi.all_finite())
      throw std::invalid_argument("ProblemData: non-finite field values");
  }

  /// -f- <= phi <= f+ nodewise.
  bool admissible(const ScalarField<Scalar>& control, Scalar slack = 0) const {
    return ((control.values().array() + fm.values().array()) >= -slack).all() &&
           ((fp.values().array() - control.values().array()) >= -slack).all();
  }

  ProblemData with_control(ScalarField<Scalar> control) const {
    ProblemData out = *this;
    require_same_grid(grid, control.grid(), "ProblemData::with_control");
    out.phi = std::move(control);
    return out;
  }
};

template <typename Scalar>
struct StateSolution {
  ScalarField<Scalar> u;
  int newton_iters{0};
  Scalar final_residual{0};
  Scalar energy{0};
  bool converged{false};
  /// Energy of every accepted iterate, starting with the initial one.
  std::vector<Scalar> energy_trace;
};

template <typename Scalar>
struct NewtonOptions {
  Scalar tol{1e-10};
  int max_newton{100};
  /// Newton steps taken even when the starting residual already meets tol.
  int min_newton{0};
  Scalar armijo_c{1e-4};
  int max_backtracks{60};
  /// Starting iterate; its boundary values are replaced by g. Defaults to the
  /// discrete harmonic extension of g.
  std::optional<ScalarField<Scalar>> initial;
};

/// Discrete harmonic extension of boundary data.
template <typename Scalar>
ScalarField<Scalar> harmonic_extension(const Grid2D<Scalar>& grid, const BoundaryData<Scalar>& g,
                                       Scalar tol = Scalar(1e-11)) {
  const ScalarField<Scalar> zero(grid);
  return solve_spd(zero, zero, g, tol, default_cg_iterations(grid));
}

/// Nonlinear term of the two-phase equation after the partition-of-unity
/// rewrite: -Lap u + beta(u) = phi.
template <typename Scalar>
struct TwoPhaseTerm {
  const Smoother<Scalar>& s;
  const ScalarField<Scalar>& fp;
  const ScalarField<Scalar>& fm;
  const ScalarField<Scalar>& source;

  ScalarField<Scalar> value(const ScalarField<Scalar>& u) const { return beta(s, u, fp, fm); }
  ScalarField<Scalar> derivative(const ScalarField<Scalar>& u) const {
    return beta_prime(s, u, fp, fm);
  }
  Scalar potential(const ScalarField<Scalar>& u) const {
    ScalarField<Scalar> pos(u.grid()), neg(u.grid());
    for (Index k = 0; k < u.grid().size(); ++k) {
      pos[k] = phi_int(s, u[k]);
      neg[k] = phi_int(s, -u[k]);
    }
    return l2_inner(fp, pos) + l2_inner(fm, neg);
  }
};

/// One-phase obstacle form: -Lap u + (f - phi) chi(u) = 0.
template <typename Scalar>
struct OnePhaseTerm {
  const Smoother<Scalar>& s;
  ScalarField<Scalar> coeff;
  ScalarField<Scalar> source;

  ScalarField<Scalar> value(const ScalarField<Scalar>& u) const {
    ScalarField<Scalar> out(u.grid());
    for (Index k = 0; k < u.grid().size(); ++k) out[k] = coeff[k] * chi(s, u[k]);
    return out;
  }
  ScalarField<Scalar> derivative(const ScalarField<Scalar>& u) const {
    ScalarField<Scalar> out(u.grid());
    for (Index k = 0; k < u.grid().size(); ++k) out[k] = coeff[k] * chi_prime(s, u[k]);
    return out;
  }
  Scalar potential(const ScalarField<Scalar>& u) const {
    ScalarField<Scalar> pos(u.grid());
    for (Index k = 0; k < u.grid().size(); ++k) pos[k] = phi_int(s, u[k]);
    return l2_inner(coeff, pos);
  }
};

namespace detail {

/// Lap_h u - N(u) + source on the interior, zero on the ring.
template <typename Scalar, typename Term>
ScalarField<Scalar> state_residual(const Term& term, const ScalarField<Scalar>& u) {
  return zero_boundary(apply_laplacian(u) - term.value(u) + term.source);
}

/// 1/2 |grad u|^2 + potential(u) - source * u.
template <typename Scalar, typename Term>
Scalar state_energy(const Term& term, const ScalarField<Scalar>& u) {
  return Scalar(0.5) * h1_seminorm_sq(u) + term.potential(u) - l2_inner(term.source, u);
}

/// Damped Newton on the convex energy with Armijo backtracking.
template <typename Scalar, typename Term>
StateSolution<Scalar> newton_solve(const Grid2D<Scalar>& grid, const BoundaryData<Scalar>& g,
                                   const Term& term, const NewtonOptions<Scalar>& opt) {
  if (!(opt.tol > 0)) throw std::invalid_argument("solve_state: tol must be positive");
  const auto zero_bc = BoundaryData<Scalar>::zero(grid);
  const int cg_iters = 4 * default_cg_iterations(grid);
  const Scalar roundoff = Scalar(64) * std::numeric_limits<Scalar>::epsilon();

  StateSolution<Scalar> sol;
  sol.u = opt.initial ? with_boundary(*opt.initial, g) : harmonic_extension(grid, g);
  Scalar energy = state_energy(term, sol.u);
  ScalarField<Scalar> r = state_residual(term, sol.u);
  Scalar res = l2_norm(r);
  sol.energy_trace.push_back(energy);

  while ((res > opt.tol || sol.newton_iters < opt.min_newton) &&
         sol.newton_iters < opt.max_newton) {
    // Forcing term: loose far away, below the target tolerance near the end.
    // Without a potential the step is exact, so solve it to the final tolerance.
    const ScalarField<Scalar> d = term.derivative(sol.u);
    const Scalar lin_tol =
        max_abs(d) == 0 ? Scalar(0.5) * opt.tol / (Scalar(1) + res)
                        : std::clamp(Scalar(1e-2) * std::min(res, Scalar(1)), Scalar(1e-2) * opt.tol,
                                     Scalar(1e-2));
    SpdSolveInfo info;
    const ScalarField<Scalar> delta = pcg(d, r, zero_bc, lin_tol, cg_iters, info);
    const Scalar slope = -l2_inner(r, delta);

    bool accepted = false;
    Scalar alpha = 1;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt, alpha *= Scalar(0.5)) {
      ScalarField<Scalar> trial = sol.u;
      trial.values() += alpha * delta.values();
      const Scalar e_trial = state_energy(term, trial);
      const bool armijo = e_trial <= energy + opt.armijo_c * alpha * slope;
      bool noise_floor = false;
      ScalarField<Scalar> r_trial;
      if (!armijo && std::abs(e_trial - energy) <= roundoff * (Scalar(1) + std::abs(energy))) {
        // Energy differences are below rounding; fall back to the residual.
        r_trial = state_residual(term, trial);
        noise_floor = l2_norm(r_trial) < res;
      }
      if (armijo || noise_floor) {
        sol.u = std::move(trial);
        energy = std::min(e_trial, energy);
        r = noise_floor ? std::move(r_trial) : state_residual(term, sol.u);
        res = l2_norm(r);
        accepted = true;
        break;
      }
    }
    ++sol.newton_iters;
    if (!accepted) break;
    sol.energy_trace.push_back(energy);
  }

  sol.final_residual = res;
  sol.energy = state_energy(term, sol.u);
  sol.converged = res <= opt.tol;
  return sol;
}

}  // namespace detail

/// Regularized two-phase state u = T_eps(phi):
///   Lap u = f+ chi(u) - f- chi(-u) - phi,  u = g on the ring.
template <typename Scalar>
StateSolution<Scalar> solve_state(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                  const NewtonOptions<Scalar>& opt) {
  const TwoPhaseTerm<Scalar> term{s, data.fp, data.fm, data.phi};
  return detail::newton_solve(data.grid, data.g, term, opt);
}

template <typename Scalar>
StateSolution<Scalar> solve_state(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                  Scalar tol, int max_newton) {
  NewtonOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_newton = max_newton;
  return solve_state(data, s, opt);
}

/// Regularized energy of `u` for the two-phase problem.
template <typename Scalar>
Scalar regularized_energy(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                          const ScalarField<Scalar>& u) {
  const TwoPhaseTerm<Scalar> term{s, data.fp, data.fm, data.phi};
  return detail::state_energy(term, u);
}

template <typename Scalar>
Scalar state_residual_norm(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                           const ScalarField<Scalar>& u) {
  const TwoPhaseTerm<Scalar> term{s, data.fp, data.fm, data.phi};
  return l2_norm(detail::state_residual(term, u));
}

template <typename Scalar>
struct LimitSolution {
  StateSolution<Scalar> state;
  std::vector<Scalar> eps;
  /// H1 distance between consecutive levels; h1_steps[k] compares eps[k+1] to eps[k].
  std::vector<Scalar> h1_steps;
  bool converged{false};
};

/// Approximates the unregularized state by halving eps from eps0 with warm
/// starts until consecutive levels agree to tol_h1 in H1.
template <typename Scalar>
LimitSolution<Scalar> solve_state_limit(const ProblemData<Scalar>& data, Scalar eps0,
                                        Scalar tol_h1, Scalar tol = Scalar(1e-10),
                                        int max_newton = 200, int max_levels = 24) {
  if (!(eps0 > 0)) throw std::invalid_argument("solve_state_limit: eps0 must be positive");
  LimitSolution<Scalar> out;
  NewtonOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_newton = max_newton;
  Scalar eps = eps0;
  for (int k = 0; k < max_levels; ++k, eps /= Scalar(2)) {
    StateSolution<Scalar> next = solve_state(data, Smoother<Scalar>(eps), opt);
    out.eps.push_back(eps);
    if (k > 0) {
      const Scalar step = h1_norm(next.u - out.state.u);
      out.h1_steps.push_back(step);
      out.state = std::move(next);
      if (step <= tol_h1) {
        out.converged = out.state.converged;
        return out;
      }
    } else {
      out.state = std::move(next);
    }
    opt.initial = out.state.u;
  }
  return out;
}

/// One-phase obstacle form Lap u = (f+ - phi) chi(u), u = g on the ring.
template <typename Scalar>
StateSolution<Scalar> solve_one_phase(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                      const NewtonOptions<Scalar>& opt) {
  const OnePhaseTerm<Scalar> term{s, data.fp - data.phi, ScalarField<Scalar>(data.grid)};
  if ((term.coeff.values().array() < 0).any())
    throw std::invalid_argument("solve_one_phase: f_plus - phi must be nonnegative");
  return detail::newton_solve(data.grid, data.g, term, opt);
}

template <typename Scalar>
StateSolution<Scalar> solve_one_phase(const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                      Scalar tol, int max_newton = 100) {
  NewtonOptions<Scalar> opt;
  opt.tol = tol;
  opt.max_newton = max_newton;
  return solve_one_phase(data, s, opt);
}

/// Obstacle with Lap_h obstacle = phi_star and zero boundary values.
template <typename Scalar>
ScalarField<Scalar> recover_obstacle(const ScalarField<Scalar>& phi_star,
                                     Scalar tol = Scalar(1e-12)) {
  const auto& grid = phi_star.grid();
  return solve_spd(ScalarField<Scalar>(grid), -phi_star, BoundaryData<Scalar>::zero(grid), tol,
                   default_cg_iterations(grid));
}

/// Unregularized two-phase energy with the control absorbed in the phase
/// coefficients.
template <typename Scalar>
Scalar energy_two_phase(const ScalarField<Scalar>& u, const ProblemData<Scalar>& data) {
  require_same_grid(u.grid(), data.grid, "energy_two_phase");
  ScalarField<Scalar> pos(u.grid()), neg(u.grid());
  for (Index k = 0; k < u.grid().size(); ++k) {
    pos[k] = std::max(u[k], Scalar(0));
    neg[k] = std::max(-u[k], Scalar(0));
  }
  return Scalar(0.5) * h1_seminorm_sq(u) + l2_inner(data.fp - data.phi, pos) +
         l2_inner(data.fm + data.phi, neg);
}

enum class NodeLabel : char {
  Positive,   // u > utol
  Negative,   // u < -utol
  Zero,       // |u| <= utol, away from the free boundary
  Tangential, // free boundary node with vanishing gradient
  Transversal // free boundary node with nonvanishing gradient
};

inline const char* label_name(NodeLabel l) {
  switch (l) {
    case NodeLabel::Positive: return "P";
    case NodeLabel::Negative: return "N";
    case NodeLabel::Zero: return "Z";
    case NodeLabel::Tangential: return "G1";
    case NodeLabel::Transversal: return "G2";
  }
  return "?";
}

template <typename Scalar>
struct FreeBoundary {
  Grid2D<Scalar> grid;
  std::vector<NodeLabel> labels;

  NodeLabel operator()(Index i, Index j) const {
    return labels[static_cast<std::size_t>(grid.index(i, j))];
  }
  std::size_t count(NodeLabel l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
  }
  std::size_t gamma_count() const {
    return count(NodeLabel::Tangential) + count(NodeLabel::Transversal);
  }
};

/// Classifies nodes into phases and locates the free boundary. Interior
/// zero-phase nodes touching a phase, and the smaller-|u| end of every edge
/// where u changes sign, are free boundary nodes; they are split by the
/// centred-difference gradient magnitude against gtol.
template <typename Scalar>
FreeBoundary<Scalar> free_boundary(const ScalarField<Scalar>& u, Scalar utol, Scalar gtol) {
  if (!(utol > 0) || !(gtol > 0))
    throw std::invalid_argument("free_boundary: tolerances must be positive");
  const auto& g = u.grid();
  FreeBoundary<Scalar> fb{g, std::vector<NodeLabel>(static_cast<std::size_t>(g.size()))};
  auto phase = [&](Index k) {
    if (u[k] > utol) return NodeLabel::Positive;
    if (u[k] < -utol) return NodeLabel::Negative;
    return NodeLabel::Zero;
  };
  for (Index k = 0; k < g.size(); ++k) fb.labels[static_cast<std::size_t>(k)] = phase(k);

  std::vector<char> on_gamma(static_cast<std::size_t>(g.size()), 0);
  const Index di[4] = {1, -1, 0, 0};
  const Index dj[4] = {0, 0, 1, -1};
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i) {
      const Index k = g.index(i, j);
      const NodeLabel here = phase(k);
      for (int n = 0; n < 4; ++n) {
        const Index kn = g.index(i + di[n], j + dj[n]);
        const NodeLabel there = phase(kn);
        if (here == NodeLabel::Zero && there != NodeLabel::Zero) on_gamma[k] = 1;
        const bool sign_change = (here == NodeLabel::Positive && there == NodeLabel::Negative) ||
                                 (here == NodeLabel::Negative && there == NodeLabel::Positive);
        if (sign_change && std::abs(u[k]) <= std::abs(u[kn])) on_gamma[k] = 1;
      }
    }

  const Scalar hx = g.hx(), hy = g.hy();
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i) {
      const Index k = g.index(i, j);
      if (!on_gamma[k]) continue;
      const Scalar ux = (u(i + 1, j) - u(i - 1, j)) / (Scalar(2) * hx);
      const Scalar uy = (u(i, j + 1) - u(i, j - 1)) / (Scalar(2) * hy);
      fb.labels[static_cast<std::size_t>(k)] =
          std::hypot(ux, uy) > gtol ? NodeLabel::Transversal : NodeLabel::Tangential;
    }
  return fb;
}

}  // namespace membrane

#endif  // MEMBRANE_STATE_HPP
