#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace mpfc {

/// Uniform periodic grid on the unit torus (R/Z)^d with n points per axis.
///
/// Cells are stored row-major with the last axis fastest; cell (i_0, ..., i_{d-1})
/// sits at x_k = i_k * h.
class GridSpec {
 public:
  static constexpr int kMaxDim = 3;

  GridSpec() = default;
  /// Throws ConfigError unless 1 <= d <= 3 and n >= 8.
  GridSpec(int d, int n);

  int dim() const noexcept { return d_; }
  int points_per_axis() const noexcept { return n_; }
  double spacing() const noexcept { return 1.0 / n_; }
  std::size_t cell_count() const noexcept { return cells_; }
  // Index distance between neighbours along `axis`.
  std::size_t stride(int axis) const noexcept { return strides_[axis]; }

  int coordinate_index(std::size_t cell, int axis) const noexcept {
    return static_cast<int>((cell / strides_[axis]) % static_cast<std::size_t>(n_));
  }
  double coordinate(std::size_t cell, int axis) const noexcept {
    return coordinate_index(cell, axis) * spacing();
  }
  std::array<double, kMaxDim> position(std::size_t cell) const noexcept;

  std::size_t neighbor_plus(std::size_t cell, int axis) const noexcept {
    return coordinate_index(cell, axis) == n_ - 1 ? cell - (n_ - 1) * strides_[axis]
                                                  : cell + strides_[axis];
  }
  std::size_t neighbor_minus(std::size_t cell, int axis) const noexcept {
    return coordinate_index(cell, axis) == 0 ? cell + (n_ - 1) * strides_[axis]
                                             : cell - strides_[axis];
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept {
    return a.d_ == b.d_ && a.n_ == b.n_;
  }

 private:
  int d_ = 0;
  int n_ = 0;
  std::size_t cells_ = 0;
  std::array<std::size_t, kMaxDim> strides_{};
};

using Point = std::array<double, GridSpec::kMaxDim>;

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& spec, double fill = 0.0);
  /// Throws ConfigError on a size mismatch.
  ScalarField(const GridSpec& spec, std::vector<double> values);

  /// Samples f at every cell position.
  static ScalarField sample(const GridSpec& spec, const std::function<double(const Point&)>& f);

  const GridSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const GridSpec& spec);

  static VectorField sample(const GridSpec& spec,
                            const std::function<Point(const Point&)>& g);

  const GridSpec& spec() const noexcept { return spec_; }
  int dim() const noexcept { return static_cast<int>(components_.size()); }
  ScalarField& operator[](int axis) noexcept { return components_[axis]; }
  const ScalarField& operator[](int axis) const noexcept { return components_[axis]; }

 private:
  GridSpec spec_;
  std::vector<ScalarField> components_;
};

// (2d+1)-point second-order Laplacian with periodic wrap.
ScalarField laplacian(const ScalarField& f);

// Central differences (f_{j+1} - f_{j-1}) / 2h per axis.
VectorField gradient(const ScalarField& f);

/// Dirichlet-form density 1/2 sum_k (D+f D+g + D-f D-g) built from one-sided
/// differences. Its integral is the bilinear form whose variation is exactly
/// -laplacian, so energies built on it dissipate exactly under the discrete
/// flow.
ScalarField grad_dot(const ScalarField& f, const ScalarField& g);
ScalarField grad_squared(const ScalarField& f);

/// h^d * sum(f) (or sum(f * weight)) with the deterministic pairwise tree.
double integrate(const ScalarField& f);
double integrate(const ScalarField& f, const ScalarField& weight);

/// Periodic shift by `offset` cells along `axis`: out(i) = f(i - offset).
ScalarField translate(const ScalarField& f, int axis, int offset);

/// Eigenvalue of laplacian() for the Fourier mode with integer wavenumbers k.
double laplacian_symbol(const GridSpec& spec, std::span<const int> wavenumbers);

/// Solves (a I - b laplacian) x = rhs by diagonalising the stencil with FFTs.
/// Plans are cached per grid and thread. Throws ConfigError unless a > 0 and
/// b >= 0, SolverError when the residual check fails.
ScalarField helmholtz_solve(const ScalarField& rhs, double a, double b);

/// Reusable FFT-backed solver for repeated solves on one grid.
class HelmholtzSolver {
 public:
  explicit HelmholtzSolver(const GridSpec& spec);
  ~HelmholtzSolver();
  HelmholtzSolver(HelmholtzSolver&&) noexcept;
  HelmholtzSolver& operator=(HelmholtzSolver&&) noexcept;
  HelmholtzSolver(const HelmholtzSolver&) = delete;
  HelmholtzSolver& operator=(const HelmholtzSolver&) = delete;

  const GridSpec& spec() const noexcept;
  void solve(std::span<const double> rhs, double a, double b, std::span<double> out);
  ScalarField solve(const ScalarField& rhs, double a, double b);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mpfc
