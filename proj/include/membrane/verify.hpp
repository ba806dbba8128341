#ifndef MEMBRANE_VERIFY_HPP
#define MEMBRANE_VERIFY_HPP

#include "membrane/control.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace membrane::verify {

using Grid = Grid2D<double>;
using Field = ScalarField<double>;
using Boundary = BoundaryData<double>;
using Problem = ProblemData<double>;
using Smooth = Smoother<double>;

/// Outcome of one property check over one or more instances.
struct CheckReport {
  std::string name;
  bool passed{false};
  double worst_violation{0};
  double tolerance{0};
  int instances{0};
  double eps{0};
  std::string details;
};

/// Portable seeded generator: splitmix64 feeding uniform doubles in [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + int(next() % std::uint64_t(hi - lo + 1)); }

 private:
  std::uint64_t state_;
};

/// Random admissible control: either a few smooth modes or nodewise noise,
/// clamped to the box.
Field random_control(const Problem& data, Rng& rng);

/// Random direction vanishing on the boundary ring.
Field random_direction(const Grid& grid, Rng& rng, int family);

double discrete_eigenvalue_closed_form(const Grid& grid);

// -- single-instance checks ---------------------------------------------------

CheckReport check_monotonicity(const Problem& data, const Field& phi1, const Field& phi2,
                               const Smooth& s, double tol, double solver_tol = 1e-11);

CheckReport check_sandwich(const Problem& data, const Field& phi1, const Field& phi2,
                           const Smooth& s, double tol, double solver_tol = 1e-11);

/// Passes iff |u1 - u2|_{H1_0} <= lambda1^{-1/2} ||phi1 - phi2|| + tol.
/// lambda1 defaults to the computed smallest discrete eigenvalue.
CheckReport check_lipschitz(const Problem& data, const Field& phi1, const Field& phi2,
                            const Smooth& s, double tol, std::optional<double> lambda1 = {},
                            double solver_tol = 1e-11);

struct GradientCheckOptions {
  int directions{5};
  /// Decreasing steps; errors must not grow along them above the noise floor.
  std::vector<double> steps{1e-1, 1e-2, 1e-3, 1e-4};
  /// Relative error bound, enforced at threshold_step.
  double threshold{1e-3};
  double threshold_step{1e-4};
  double state_tol{3e-13};
  std::uint64_t seed{1};
};

/// Adjoint directional derivative against central differences of J_eps.
CheckReport check_gradient_fd(const Problem& data, const Field& z, const Field& phi, double lambda,
                              const Smooth& s, const GradientCheckOptions& opt);

struct SensitivityCheckOptions {
  int directions{5};
  double t{1e-3};
  double min_drop{5};
  double state_tol{3e-13};
  std::uint64_t seed{2};
};

/// Sensitivity against forward difference quotients at t and t/10, plus the
/// Lipschitz bound on the same samples.
CheckReport check_sensitivity_fd(const Problem& data, const Field& phi, const Smooth& s,
                                 const SensitivityCheckOptions& opt);

/// Consecutive H1 distances along eps_list strictly decrease (distances at or
/// below tol count as converged), and T^{eps_k}(phi_k) approaches T^{eps_K}(phi)
/// monotonically for phi_k -> phi.
CheckReport check_eps_convergence(const Problem& data, const std::vector<double>& eps_list,
                                  double tol, double solver_tol = 1e-11);

/// Relaxed Picard iteration against the Newton solution in the max norm.
CheckReport check_picard_newton_agreement(const Problem& data, const Smooth& s, double tol,
                                          double solver_tol = 1e-11, int max_picard = 20000);

// -- randomized suites ---------------------------------------------------------

struct VerifyConfig {
  std::uint64_t seed{20240917};
  Index n{33};
  int instances{100};
  /// Smoothing used by the comparison and Lipschitz suites.
  double eps{0.01};
  double solver_tol{1e-11};
  double order_tol{1e-7};
  double lipschitz_tol{1e-6};
  int gradient_directions{5};
  std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025, 0.0125};
};

/// Two-phase instance on the n x n unit square with sign-changing g.
Problem default_problem(Index n);

/// Strip (-1,1) x (0, 4h) with f+ = f- = 1, phi = 0 and g = x|x|/2, whose
/// unregularized solution is x|x|/2.
Problem strip_problem(Index nx);

CheckReport monotonicity_suite(const VerifyConfig& cfg);
CheckReport sandwich_suite(const VerifyConfig& cfg);
CheckReport lipschitz_suite(const VerifyConfig& cfg);
CheckReport gradient_suite(const VerifyConfig& cfg);
CheckReport sensitivity_suite(const VerifyConfig& cfg);
CheckReport eps_convergence_suite(const VerifyConfig& cfg);
CheckReport picard_suite(const VerifyConfig& cfg);

std::vector<CheckReport> run_all(const VerifyConfig& cfg);

/// One JSON object per line.
void write_jsonl(std::ostream& os, const std::vector<CheckReport>& reports);

}  // namespace membrane::verify

#endif  // MEMBRANE_VERIFY_HPP
