#ifndef MEMBRANE_FIELD_HPP
#define MEMBRANE_FIELD_HPP

#include "membrane/errors.hpp"
#include "membrane/grid.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace membrane {

/// Nodal values on a Grid2D, including the boundary ring.
template <typename Scalar>
class ScalarField {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ScalarField() = default;
  explicit ScalarField(const Grid2D<Scalar>& grid, Scalar value = Scalar(0))
      : grid_(grid), values_(Vector::Constant(grid.size(), value)) {}
  ScalarField(const Grid2D<Scalar>& grid, Vector values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size())
      throw std::invalid_argument("ScalarField: value count does not match grid");
  }

  /// Samples f(x, y) at every node.
  template <typename F>
  static ScalarField sample(const Grid2D<Scalar>& grid, F&& f) {
    ScalarField out(grid);
    for (Index j = 0; j < grid.ny; ++j)
      for (Index i = 0; i < grid.nx; ++i) out(i, j) = f(grid.x(i), grid.y(j));
    return out;
  }

  const Grid2D<Scalar>& grid() const { return grid_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  Scalar& operator()(Index i, Index j) { return values_[grid_.index(i, j)]; }
  Scalar operator()(Index i, Index j) const { return values_[grid_.index(i, j)]; }
  Scalar& operator[](Index k) { return values_[k]; }
  Scalar operator[](Index k) const { return values_[k]; }

  bool all_finite() const { return values_.allFinite(); }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField::operator+=");
    values_ += o.values_;
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid_, o.grid_, "ScalarField::operator-=");
    values_ -= o.values_;
    return *this;
  }
  ScalarField& operator*=(Scalar a) {
    values_ *= a;
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(Scalar a, ScalarField b) { return b *= a; }
  friend ScalarField operator-(ScalarField a) { return a *= Scalar(-1); }

 private:
  Grid2D<Scalar> grid_;
  Vector values_;
};

/// Values on the boundary ring, ordered as Grid2D::boundary_nodes().
template <typename Scalar>
struct BoundaryData {
  std::vector<Scalar> values;

  static BoundaryData zero(const Grid2D<Scalar>& grid) {
    return BoundaryData{std::vector<Scalar>(static_cast<std::size_t>(grid.boundary_count()), 0)};
  }

  /// Restriction of a field to the boundary ring.
  static BoundaryData from_field(const ScalarField<Scalar>& f) {
    BoundaryData out;
    for (Index k : f.grid().boundary_nodes()) out.values.push_back(f[k]);
    return out;
  }

  template <typename F>
  static BoundaryData sample(const Grid2D<Scalar>& grid, F&& f) {
    return from_field(ScalarField<Scalar>::sample(grid, std::forward<F>(f)));
  }

  bool sign_changing() const {
    if (values.empty()) return false;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *lo < 0 && *hi > 0;
  }

  Scalar max_abs() const {
    Scalar m = 0;
    for (Scalar v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Writes boundary values into a copy of `f`.
template <typename Scalar>
ScalarField<Scalar> with_boundary(ScalarField<Scalar> f, const BoundaryData<Scalar>& bc) {
  const auto nodes = f.grid().boundary_nodes();
  if (bc.values.size() != nodes.size())
    throw std::invalid_argument("with_boundary: boundary data length does not match grid");
  for (std::size_t n = 0; n < nodes.size(); ++n) f[nodes[n]] = bc.values[n];
  return f;
}

template <typename Scalar>
ScalarField<Scalar> zero_boundary(ScalarField<Scalar> f) {
  const auto bc = BoundaryData<Scalar>::zero(f.grid());
  return with_boundary(std::move(f), bc);
}

/// 5-point Laplacian; boundary nodes get 0.
template <typename Scalar>
ScalarField<Scalar> apply_laplacian(const ScalarField<Scalar>& u) {
  const auto& g = u.grid();
  const Scalar cx = Scalar(1) / (g.hx() * g.hx());
  const Scalar cy = Scalar(1) / (g.hy() * g.hy());
  ScalarField<Scalar> out(g);
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i)
      out(i, j) = cx * (u(i - 1, j) - Scalar(2) * u(i, j) + u(i + 1, j)) +
                  cy * (u(i, j - 1) - Scalar(2) * u(i, j) + u(i, j + 1));
  return out;
}

/// hx*hy * sum over interior nodes of a*b.
template <typename Scalar>
Scalar l2_inner(const ScalarField<Scalar>& a, const ScalarField<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "l2_inner");
  const auto& g = a.grid();
  Scalar sum = 0;
  for (Index j = 1; j < g.ny - 1; ++j) {
    const Index row = g.index(1, j);
    sum += a.values().segment(row, g.nx - 2).dot(b.values().segment(row, g.nx - 2));
  }
  return g.cell_area() * sum;
}

template <typename Scalar>
Scalar l2_norm(const ScalarField<Scalar>& a) {
  return std::sqrt(l2_inner(a, a));
}

/// Forward-difference edge sum of |grad u|^2 over every grid edge.
template <typename Scalar>
Scalar h1_seminorm_sq(const ScalarField<Scalar>& u) {
  const auto& g = u.grid();
  const Scalar hx = g.hx(), hy = g.hy();
  Scalar sx = 0, sy = 0;
  for (Index j = 0; j < g.ny; ++j)
    for (Index i = 0; i + 1 < g.nx; ++i) {
      const Scalar d = u(i + 1, j) - u(i, j);
      sx += d * d;
    }
  for (Index j = 0; j + 1 < g.ny; ++j)
    for (Index i = 0; i < g.nx; ++i) {
      const Scalar d = u(i, j + 1) - u(i, j);
      sy += d * d;
    }
  return hx * hy * (sx / (hx * hx) + sy / (hy * hy));
}

/// Full H1 norm: sqrt(L2^2 + seminorm^2).
template <typename Scalar>
Scalar h1_norm(const ScalarField<Scalar>& u) {
  return std::sqrt(l2_inner(u, u) + h1_seminorm_sq(u));
}

template <typename Scalar>
Scalar max_abs(const ScalarField<Scalar>& u) {
  return u.values().cwiseAbs().maxCoeff();
}

/// (-Lap_h + diag d) w on interior nodes, zero on the boundary. `w` is read
/// with its boundary values, so callers pass boundary-free fields for the
/// homogeneous operator.
template <typename Scalar>
ScalarField<Scalar> apply_shifted_operator(const ScalarField<Scalar>& d,
                                           const ScalarField<Scalar>& w) {
  ScalarField<Scalar> out = -apply_laplacian(w);
  const auto& g = w.grid();
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i) out(i, j) += d(i, j) * w(i, j);
  return out;
}

struct SpdSolveInfo {
  int iterations{0};
  double residual{0};
  double target{0};
  bool converged{false};
};

namespace detail {

/// Jacobi-preconditioned CG for -Lap_h u + d u = rhs, u = bc on the ring.
/// Returns the last iterate whether or not the target was met.
template <typename Scalar>
ScalarField<Scalar> pcg(const ScalarField<Scalar>& d, const ScalarField<Scalar>& rhs,
                        const BoundaryData<Scalar>& bc, Scalar tol, int max_iter,
                        SpdSolveInfo& info) {
  require_same_grid(d.grid(), rhs.grid(), "solve_spd");
  if (!(tol > 0)) throw std::invalid_argument("solve_spd: tol must be positive");
  const auto& g = d.grid();
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i)
      if (d(i, j) < 0) throw std::invalid_argument("solve_spd: negative diagonal shift");

  // Lift the boundary data; the unknown correction w vanishes on the ring.
  ScalarField<Scalar> lift = with_boundary(ScalarField<Scalar>(g), bc);
  ScalarField<Scalar> b = zero_boundary(rhs + apply_laplacian(lift));

  const Scalar rhs_norm = l2_norm(zero_boundary(rhs));
  const Scalar target = tol * (Scalar(1) + rhs_norm);
  const Scalar diag0 = Scalar(2) / (g.hx() * g.hx()) + Scalar(2) / (g.hy() * g.hy());

  ScalarField<Scalar> inv_diag(g);
  for (Index j = 1; j < g.ny - 1; ++j)
    for (Index i = 1; i < g.nx - 1; ++i) inv_diag(i, j) = Scalar(1) / (diag0 + d(i, j));

  ScalarField<Scalar> w(g);
  int it = 0;
  Scalar res = l2_norm(b);
  // The recursive residual can drift below the true one near rounding level;
  // restart from the true residual while that still makes progress.
  for (int restart = 0; restart < 4 && res > target && it < max_iter; ++restart) {
    ScalarField<Scalar> r = restart ? zero_boundary(b - apply_shifted_operator(d, w)) : b;
    ScalarField<Scalar> z(g, inv_diag.values().cwiseProduct(r.values()));
    ScalarField<Scalar> p = z;
    Scalar rz = l2_inner(r, z);
    Scalar rec = l2_norm(r);
    while (rec > target && it < max_iter) {
      const ScalarField<Scalar> ap = apply_shifted_operator(d, p);
      const Scalar pap = l2_inner(p, ap);
      if (!(pap > 0)) break;
      const Scalar alpha = rz / pap;
      w.values() += alpha * p.values();
      r.values() -= alpha * ap.values();
      ++it;
      // Refresh the recursive residual now and then against drift.
      if (it % 50 == 0) r = zero_boundary(b - apply_shifted_operator(d, w));
      rec = l2_norm(r);
      z.values() = inv_diag.values().cwiseProduct(r.values());
      const Scalar rz_new = l2_inner(r, z);
      p.values() = z.values() + (rz_new / rz) * p.values();
      rz = rz_new;
    }
    const Scalar true_res = l2_norm(zero_boundary(b - apply_shifted_operator(d, w)));
    const bool stalled = restart > 0 && !(true_res < Scalar(0.5) * res);
    res = true_res;
    if (stalled) break;
  }
  info = SpdSolveInfo{it, static_cast<double>(res), static_cast<double>(target), res <= target};
  return with_boundary(std::move(w), bc);
}

}  // namespace detail

/// Solves -Lap_h u + d u = rhs in the interior with u = bc on the boundary by
/// Jacobi-preconditioned conjugate gradients. Succeeds when the discrete L2
/// residual is at most tol * (1 + ||rhs||).
template <typename Scalar>
ScalarField<Scalar> solve_spd(const ScalarField<Scalar>& d, const ScalarField<Scalar>& rhs,
                              const BoundaryData<Scalar>& bc, Scalar tol, int max_iter,
                              SpdSolveInfo* info = nullptr) {
  SpdSolveInfo local;
  ScalarField<Scalar> u = detail::pcg(d, rhs, bc, tol, max_iter, local);
  if (info) *info = local;
  if (!local.converged)
    throw ConvergenceError("solve_spd: conjugate gradients did not converge", local.residual,
                           local.iterations);
  return u;
}

/// Default iteration cap for the CG kernel on a grid.
template <typename Scalar>
int default_cg_iterations(const Grid2D<Scalar>& g) {
  return static_cast<int>(20 * (g.nx + g.ny) + 200);
}

/// Smallest eigenvalue of -Lap_h with zero Dirichlet data by inverse power
/// iteration with a Rayleigh-quotient estimate.
template <typename Scalar>
Scalar smallest_eigenvalue(const Grid2D<Scalar>& grid, Scalar tol, int max_iter = 500) {
  const ScalarField<Scalar> zero(grid);
  const auto bc = BoundaryData<Scalar>::zero(grid);
  ScalarField<Scalar> x = zero_boundary(ScalarField<Scalar>(grid, Scalar(1)));
  const Scalar inner_tol = std::max(tol * Scalar(1e-2), Scalar(1e-12));
  Scalar lambda = 0;
  for (int it = 0; it < max_iter; ++it) {
    x *= Scalar(1) / l2_norm(x);
    const Scalar rayleigh = l2_inner(x, apply_shifted_operator(zero, x));
    if (it > 0 && std::abs(rayleigh - lambda) <= tol * std::abs(rayleigh)) return rayleigh;
    lambda = rayleigh;
    x = solve_spd(zero, x, bc, inner_tol, default_cg_iterations(grid));
  }
  throw ConvergenceError("smallest_eigenvalue: inverse iteration did not converge",
                         static_cast<double>(lambda), max_iter);
}

}  // namespace membrane

#endif  // MEMBRANE_FIELD_HPP
