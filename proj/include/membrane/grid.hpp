#ifndef MEMBRANE_GRID_HPP
#define MEMBRANE_GRID_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace membrane {

using Index = Eigen::Index;

/// Uniform node grid on [ax,bx] x [ay,by]. The outermost ring of nodes is the
/// Dirichlet boundary; nodes are numbered row-major with y outer, x inner.
template <typename Scalar>
struct Grid2D {
  Index nx{0};
  Index ny{0};
  Scalar ax{0}, bx{1}, ay{0}, by{1};

  Grid2D() = default;

  Grid2D(Index nx_, Index ny_, Scalar ax_, Scalar bx_, Scalar ay_, Scalar by_)
      : nx(nx_), ny(ny_), ax(ax_), bx(bx_), ay(ay_), by(by_) {
    if (nx < 3 || ny < 3)
      throw std::invalid_argument("Grid2D: need at least 3 nodes per axis, got " +
                                  std::to_string(nx) + "x" + std::to_string(ny));
    if (!(bx > ax) || !(by > ay))
      throw std::invalid_argument("Grid2D: domain corners must satisfy bx > ax and by > ay");
  }

  /// Unit square with n nodes per axis.
  static Grid2D unit_square(Index n) { return Grid2D(n, n, 0, 1, 0, 1); }

  Scalar hx() const { return (bx - ax) / Scalar(nx - 1); }
  Scalar hy() const { return (by - ay) / Scalar(ny - 1); }
  Scalar cell_area() const { return hx() * hy(); }

  Index size() const { return nx * ny; }
  Index index(Index i, Index j) const { return j * nx + i; }

  Scalar x(Index i) const { return ax + Scalar(i) * hx(); }
  Scalar y(Index j) const { return ay + Scalar(j) * hy(); }

  bool is_boundary(Index i, Index j) const {
    return i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
  }
  bool is_boundary(Index k) const { return is_boundary(k % nx, k / nx); }

  Index interior_count() const { return (nx - 2) * (ny - 2); }
  Index boundary_count() const { return size() - interior_count(); }

  /// Boundary-ring enumeration: ascending linear index.
  std::vector<Index> boundary_nodes() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(boundary_count()));
    for (Index k = 0; k < size(); ++k)
      if (is_boundary(k)) out.push_back(k);
    return out;
  }

  friend bool operator==(const Grid2D& a, const Grid2D& b) {
    return a.nx == b.nx && a.ny == b.ny && a.ax == b.ax && a.bx == b.bx && a.ay == b.ay &&
           a.by == b.by;
  }
};

template <typename Scalar>
void require_same_grid(const Grid2D<Scalar>& a, const Grid2D<Scalar>& b, const char* where) {
  if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

}  // namespace membrane

#endif  // MEMBRANE_GRID_HPP
