#ifndef MEMBRANE_TESTS_SUPPORT_HPP
#define MEMBRANE_TESTS_SUPPORT_HPP

#include "membrane/state.hpp"

#include <Eigen/Dense>

#include <functional>
#include <numbers>

namespace test_support {

using namespace membrane;
using Grid = Grid2D<double>;
using Field = ScalarField<double>;
using Boundary = BoundaryData<double>;
using Problem = ProblemData<double>;

inline constexpr double pi = std::numbers::pi;

/// Dense Newton solve of the 1D problem -u'' + n(u) = 0 on n nodes of [a, b]
/// with the same three-point stencil as the 2D grid. Returns nodal values.
inline Eigen::VectorXd dense_1d(int n, double a, double b, double ua, double ub,
                                const std::function<double(double)>& nl,
                                const std::function<double(double)>& dnl, double tol = 1e-13) {
  const double h = (b - a) / (n - 1);
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(n, ua, ub);
  auto residual = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n - 2);
    for (int i = 1; i < n - 1; ++i)
      r[i - 1] = -(v[i + 1] - 2 * v[i] + v[i - 1]) / (h * h) + nl(v[i]);
    return r;
  };
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd r = residual(u);
    if (r.norm() * std::sqrt(h) <= tol) break;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n - 2, n - 2);
    for (int i = 0; i < n - 2; ++i) {
      J(i, i) = 2 / (h * h) + dnl(u[i + 1]);
      if (i > 0) J(i, i - 1) = -1 / (h * h);
      if (i + 1 < n - 2) J(i, i + 1) = -1 / (h * h);
    }
    const Eigen::VectorXd du = J.partialPivLu().solve(-r);
    double t = 1;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      Eigen::VectorXd trial = u;
      trial.segment(1, n - 2) += t * du;
      if (residual(trial).norm() < r.norm() || k == 59) {
        u = trial;
        break;
      }
    }
  }
  return u;
}

/// Strip (-1, 1) x (0, 4h) with five rows; data that depend on x only keep
/// the discrete solution independent of y.
inline Grid strip_grid(Index nx) {
  const double h = 2.0 / double(nx - 1);
  return Grid(nx, 5, -1, 1, 0, 4 * h);
}

inline double max_abs_diff(const Field& a, const Field& b) { return max_abs(a - b); }

}  // namespace test_support

#endif  // MEMBRANE_TESTS_SUPPORT_HPP
