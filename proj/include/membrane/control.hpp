#ifndef MEMBRANE_CONTROL_HPP
#define MEMBRANE_CONTROL_HPP

#include "membrane/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace membrane {

template <typename Scalar>
struct OptimizerConfig {
  Scalar lambda{1e-3};
  Scalar eps{0.1};
  Scalar step0{1};
  Scalar armijo_c{1e-4};
  Scalar shrink{0.5};
  int max_iters{500};
  Scalar stat_tol{1e-6};
  /// Residual tolerance of the inner state and adjoint solves.
  Scalar state_tol{1e-12};
  int max_newton{100};

  void validate() const {
    auto positive = [](Scalar v, const char* name) {
      if (!(v > 0)) throw std::invalid_argument(std::string("OptimizerConfig: ") + name +
                                                " must be positive");
    };
    positive(lambda, "lambda");
    positive(eps, "eps");
    positive(step0, "step0");
    positive(stat_tol, "stat_tol");
    positive(state_tol, "state_tol");
    if (!(armijo_c > 0 && armijo_c < 1))
      throw std::invalid_argument("OptimizerConfig: armijo_c must lie in (0, 1)");
    if (!(shrink > 0 && shrink < 1))
      throw std::invalid_argument("OptimizerConfig: shrink must lie in (0, 1)");
    if (max_iters <= 0 || max_newton <= 0)
      throw std::invalid_argument("OptimizerConfig: iteration limits must be positive");
  }
};

template <typename Scalar>
struct IterationRecord {
  int iter{0};
  Scalar objective{0};
  Scalar stationarity{0};
  Scalar step{0};
};

template <typename Scalar>
struct OptimizeReport {
  ScalarField<Scalar> phi;
  ScalarField<Scalar> u;
  ScalarField<Scalar> p;
  std::vector<Scalar> objective_trace;
  std::vector<IterationRecord<Scalar>> history;
  Scalar stationarity{0};
  Scalar tracking{0};
  int iters{0};
  bool converged{false};
  Scalar eps{0};
};

/// Nodewise clamp of phi to [-fm, fp].
template <typename Scalar>
ScalarField<Scalar> project_box(const ScalarField<Scalar>& phi, const ScalarField<Scalar>& fm,
                                const ScalarField<Scalar>& fp) {
  require_same_grid(phi.grid(), fm.grid(), "project_box");
  require_same_grid(phi.grid(), fp.grid(), "project_box");
  ScalarField<Scalar> out(phi.grid());
  out.values() = phi.values().cwiseMax(-fm.values()).cwiseMin(fp.values());
  return out;
}

template <typename Scalar>
struct Evaluation {
  StateSolution<Scalar> state;
  Scalar tracking{0};
  Scalar objective{0};
};

namespace detail {

template <typename Scalar>
Evaluation<Scalar> evaluate(const ScalarField<Scalar>& phi, const ScalarField<Scalar>& z,
                            const OptimizerConfig<Scalar>& cfg, const ProblemData<Scalar>& data,
                            const ScalarField<Scalar>* warm = nullptr) {
  NewtonOptions<Scalar> opt;
  opt.tol = cfg.state_tol;
  opt.max_newton = cfg.max_newton;
  if (warm) {
    opt.initial = *warm;
    opt.min_newton = 1;
  }
  Evaluation<Scalar> ev;
  ev.state = solve_state(data.with_control(phi), Smoother<Scalar>(cfg.eps), opt);
  if (!ev.state.converged)
    throw ConvergenceError("objective: state solve did not converge",
                           static_cast<double>(ev.state.final_residual), ev.state.newton_iters);
  const ScalarField<Scalar> diff = ev.state.u - z;
  ev.tracking = Scalar(0.5) * l2_inner(diff, diff);
  ev.objective = ev.tracking + Scalar(0.5) * cfg.lambda * l2_inner(phi, phi);
  return ev;
}

}  // namespace detail

/// J_eps(phi) = 1/2 ||u_eps(phi) - z||^2 + lambda/2 ||phi||^2.
template <typename Scalar>
Scalar objective(const ScalarField<Scalar>& phi, const ScalarField<Scalar>& z,
                 const OptimizerConfig<Scalar>& cfg, const ProblemData<Scalar>& data) {
  return detail::evaluate(phi, z, cfg, data).objective;
}

/// ||phi - P(-p / lambda)||: zero exactly at points satisfying the projected
/// first-order optimality condition over the admissible box.
template <typename Scalar>
Scalar optimality_residual(const ScalarField<Scalar>& phi, const ScalarField<Scalar>& /*u*/,
                           const ScalarField<Scalar>& p, const ProblemData<Scalar>& data,
                           Scalar lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("optimality_residual: lambda must be positive");
  return l2_norm(phi - project_box((Scalar(-1) / lambda) * p, data.fm, data.fp));
}

/// Projected gradient descent with Armijo backtracking along the projection
/// arc. Trial steps after the first come from the Barzilai-Borwein quotient;
/// acceptance is monotone in the objective.
template <typename Scalar>
OptimizeReport<Scalar> optimize(const ProblemData<Scalar>& data, const ScalarField<Scalar>& z,
                                const OptimizerConfig<Scalar>& cfg) {
  cfg.validate();
  require_same_grid(data.grid, z.grid(), "optimize");
  const Smoother<Scalar> s(cfg.eps);

  auto stationarity_of = [&](const ScalarField<Scalar>& phi, const ScalarField<Scalar>& grad) {
    ScalarField<Scalar> trial = phi;
    trial.values() -= cfg.step0 * grad.values();
    return l2_norm(phi - project_box(trial, data.fm, data.fp)) / cfg.step0;
  };

  OptimizeReport<Scalar> rep;
  rep.eps = cfg.eps;
  rep.phi = project_box(data.phi, data.fm, data.fp);
  Evaluation<Scalar> ev = detail::evaluate(rep.phi, z, cfg, data);
  rep.p = solve_adjoint(ev.state.u, z, data, s, cfg.state_tol).p;
  ScalarField<Scalar> grad = reduced_gradient(rep.phi, rep.p, cfg.lambda);
  rep.stationarity = stationarity_of(rep.phi, grad);
  rep.objective_trace.push_back(ev.objective);
  rep.history.push_back({0, ev.objective, rep.stationarity, Scalar(0)});

  const Scalar min_step = cfg.step0 * Scalar(1e-14);
  Scalar trial_step = cfg.step0;
  while (rep.stationarity > cfg.stat_tol && rep.iters < cfg.max_iters) {
    Scalar step = trial_step;
    bool accepted = false;
    ScalarField<Scalar> phi_new;
    Evaluation<Scalar> ev_new;
    while (step >= min_step) {
      ScalarField<Scalar> moved = rep.phi;
      moved.values() -= step * grad.values();
      phi_new = project_box(moved, data.fm, data.fp);
      const Scalar model = l2_inner(grad, phi_new - rep.phi);
      ev_new = detail::evaluate(phi_new, z, cfg, data, &ev.state.u);
      if (ev_new.objective <= ev.objective + cfg.armijo_c * model && ev_new.objective < ev.objective) {
        accepted = true;
        break;
      }
      step *= cfg.shrink;
    }
    if (!accepted) break;

    ScalarField<Scalar> p_new = solve_adjoint(ev_new.state.u, z, data, s, cfg.state_tol).p;
    ScalarField<Scalar> grad_new = reduced_gradient(phi_new, p_new, cfg.lambda);
    const ScalarField<Scalar> dphi = phi_new - rep.phi;
    const Scalar curvature = l2_inner(dphi, grad_new - grad);
    trial_step = curvature > 0 ? l2_inner(dphi, dphi) / curvature : cfg.step0;
    trial_step = std::clamp(trial_step, min_step * Scalar(1e4), cfg.step0 * Scalar(1e10));

    rep.phi = std::move(phi_new);
    rep.p = std::move(p_new);
    grad = std::move(grad_new);
    ev = std::move(ev_new);
    ++rep.iters;
    rep.stationarity = stationarity_of(rep.phi, grad);
    rep.objective_trace.push_back(ev.objective);
    rep.history.push_back({rep.iters, ev.objective, rep.stationarity, step});
  }
  rep.u = ev.state.u;
  rep.tracking = ev.tracking;
  rep.converged = rep.stationarity <= cfg.stat_tol;
  return rep;
}

template <typename Scalar>
struct EpsilonPath {
  std::vector<OptimizeReport<Scalar>> reports;
  /// ||phi_k - phi_{k+1}|| in L2 and ||u_k - u_{k+1}|| in H1.
  std::vector<Scalar> phi_l2_distances;
  std::vector<Scalar> u_h1_distances;
};

/// Runs `optimize` for each eps in a strictly decreasing list, warm-starting
/// the control from the previous optimum.
template <typename Scalar>
EpsilonPath<Scalar> epsilon_path(const ProblemData<Scalar>& data, const ScalarField<Scalar>& z,
                                 const OptimizerConfig<Scalar>& cfg,
                                 const std::vector<Scalar>& eps_list) {
  if (eps_list.empty()) throw std::invalid_argument("epsilon_path: empty eps list");
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1]))
      throw std::invalid_argument("epsilon_path: eps list must be strictly decreasing");
  EpsilonPath<Scalar> path;
  ProblemData<Scalar> current = data;
  for (Scalar eps : eps_list) {
    OptimizerConfig<Scalar> c = cfg;
    c.eps = eps;
    path.reports.push_back(optimize(current, z, c));
    current.phi = path.reports.back().phi;
  }
  for (std::size_t k = 0; k + 1 < path.reports.size(); ++k) {
    path.phi_l2_distances.push_back(l2_norm(path.reports[k].phi - path.reports[k + 1].phi));
    path.u_h1_distances.push_back(h1_norm(path.reports[k].u - path.reports[k + 1].u));
  }
  return path;
}

}  // namespace membrane

#endif  // MEMBRANE_CONTROL_HPP
