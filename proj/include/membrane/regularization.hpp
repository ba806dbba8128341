#ifndef MEMBRANE_REGULARIZATION_HPP
#define MEMBRANE_REGULARIZATION_HPP

#include "membrane/field.hpp"

#include <stdexcept>

namespace membrane {

/// Smoothed Heaviside of width eps built from the cubic smoothstep
/// S(x) = 3x^2 - 2x^3 on [0, 1]:
///
///   chi(t)     = S((t + eps) / (2 eps))
///   phi_int(t) = integral of chi from -inf to t
///
/// chi is C^1, non-decreasing, 0 below -eps, 1 above eps, and satisfies
/// chi(t) + chi(-t) = 1, so chi(0) = 1/2.
template <typename Scalar>
struct Smoother {
  Scalar eps;

  explicit Smoother(Scalar eps_) : eps(eps_) {
    if (!(eps > 0)) throw std::invalid_argument("Smoother: eps must be positive");
  }
};

namespace detail {
template <typename Scalar>
Scalar smoothstep_arg(const Smoother<Scalar>& s, Scalar t) {
  return (t + s.eps) / (Scalar(2) * s.eps);
}
}  // namespace detail

template <typename Scalar>
Scalar chi(const Smoother<Scalar>& s, Scalar t) {
  const Scalar x = detail::smoothstep_arg(s, t);
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  return x * x * (Scalar(3) - Scalar(2) * x);
}

template <typename Scalar>
Scalar chi_prime(const Smoother<Scalar>& s, Scalar t) {
  const Scalar x = detail::smoothstep_arg(s, t);
  if (x <= 0 || x >= 1) return 0;
  return Scalar(6) * x * (Scalar(1) - x) / (Scalar(2) * s.eps);
}

template <typename Scalar>
Scalar phi_int(const Smoother<Scalar>& s, Scalar t) {
  const Scalar x = detail::smoothstep_arg(s, t);
  if (x <= 0) return 0;
  if (x >= 1) return t;
  // 2 eps * (x^3 - x^4 / 2)
  return Scalar(2) * s.eps * x * x * x * (Scalar(1) - x / Scalar(2));
}

namespace detail {
template <typename Scalar>
void require_nonnegative(const ScalarField<Scalar>& f, const char* what) {
  if ((f.values().array() < 0).any())
    throw std::invalid_argument(std::string(what) + " must be nonnegative");
}
}  // namespace detail

/// f+ chi(u) - f- chi(-u), nodewise.
template <typename Scalar>
ScalarField<Scalar> beta(const Smoother<Scalar>& s, const ScalarField<Scalar>& u,
                         const ScalarField<Scalar>& fp, const ScalarField<Scalar>& fm) {
  require_same_grid(u.grid(), fp.grid(), "beta");
  require_same_grid(u.grid(), fm.grid(), "beta");
  detail::require_nonnegative(fp, "beta: f_plus");
  detail::require_nonnegative(fm, "beta: f_minus");
  ScalarField<Scalar> out(u.grid());
  for (Index k = 0; k < out.grid().size(); ++k)
    out[k] = fp[k] * chi(s, u[k]) - fm[k] * chi(s, -u[k]);
  return out;
}

/// d beta / du = f+ chi'(u) + f- chi'(-u) >= 0, nodewise.
template <typename Scalar>
ScalarField<Scalar> beta_prime(const Smoother<Scalar>& s, const ScalarField<Scalar>& u,
                               const ScalarField<Scalar>& fp, const ScalarField<Scalar>& fm) {
  require_same_grid(u.grid(), fp.grid(), "beta_prime");
  require_same_grid(u.grid(), fm.grid(), "beta_prime");
  detail::require_nonnegative(fp, "beta_prime: f_plus");
  detail::require_nonnegative(fm, "beta_prime: f_minus");
  ScalarField<Scalar> out(u.grid());
  for (Index k = 0; k < out.grid().size(); ++k)
    out[k] = fp[k] * chi_prime(s, u[k]) + fm[k] * chi_prime(s, -u[k]);
  return out;
}

}  // namespace membrane

#endif  // MEMBRANE_REGULARIZATION_HPP
