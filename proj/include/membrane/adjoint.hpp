#ifndef MEMBRANE_ADJOINT_HPP
#define MEMBRANE_ADJOINT_HPP

#include "membrane/state.hpp"

namespace membrane {

template <typename Scalar>
struct AdjointSolution {
  ScalarField<Scalar> p;
  Scalar residual{0};
};

/// -Lap p + beta'(u) p = u - z, p = 0 on the ring.
template <typename Scalar>
AdjointSolution<Scalar> solve_adjoint(const ScalarField<Scalar>& u, const ScalarField<Scalar>& z,
                                      const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                      Scalar tol) {
  require_same_grid(u.grid(), z.grid(), "solve_adjoint");
  require_same_grid(u.grid(), data.grid, "solve_adjoint");
  SpdSolveInfo info;
  AdjointSolution<Scalar> out;
  out.p = solve_spd(beta_prime(s, u, data.fp, data.fm), u - z,
                    BoundaryData<Scalar>::zero(u.grid()), tol,
                    4 * default_cg_iterations(u.grid()), &info);
  out.residual = static_cast<Scalar>(info.residual);
  return out;
}

/// Directional derivative xi = DT_eps(phi) psi: (-Lap + beta'(u)) xi = psi,
/// xi = 0 on the ring.
template <typename Scalar>
ScalarField<Scalar> solve_sensitivity(const ScalarField<Scalar>& u, const ScalarField<Scalar>& psi,
                                      const ProblemData<Scalar>& data, const Smoother<Scalar>& s,
                                      Scalar tol) {
  require_same_grid(u.grid(), psi.grid(), "solve_sensitivity");
  require_same_grid(u.grid(), data.grid, "solve_sensitivity");
  return solve_spd(beta_prime(s, u, data.fp, data.fm), psi, BoundaryData<Scalar>::zero(u.grid()),
                   tol, 4 * default_cg_iterations(u.grid()));
}

/// L2 Riesz representative of the derivative of the reduced objective.
template <typename Scalar>
ScalarField<Scalar> reduced_gradient(const ScalarField<Scalar>& phi, const ScalarField<Scalar>& p,
                                     Scalar lambda) {
  require_same_grid(phi.grid(), p.grid(), "reduced_gradient");
  return p + lambda * phi;
}

}  // namespace membrane

#endif  // MEMBRANE_ADJOINT_HPP
