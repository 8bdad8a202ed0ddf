#include "mpfc/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"

namespace mpfc {

GridSpec::GridSpec(int d, int n) : d_(d), n_(n) {
  if (d < 1 || d > kMaxDim) {
    throw ConfigError("grid dimension must be in [1, 3], got " + std::to_string(d));
  }
  if (n < 8) {
    throw ConfigError("grid needs at least 8 points per axis, got " + std::to_string(n));
  }
  cells_ = 1;
  for (int k = 0; k < d; ++k) cells_ *= static_cast<std::size_t>(n);
  std::size_t s = 1;
  for (int k = d - 1; k >= 0; --k) {
    strides_[k] = s;
    s *= static_cast<std::size_t>(n);
  }
}

Point GridSpec::position(std::size_t cell) const noexcept {
  Point x{};
  for (int k = 0; k < d_; ++k) x[k] = coordinate(cell, k);
  return x;
}

ScalarField::ScalarField(const GridSpec& spec, double fill)
    : spec_(spec), values_(spec.cell_count(), fill) {}

ScalarField::ScalarField(const GridSpec& spec, std::vector<double> values)
    : spec_(spec), values_(std::move(values)) {
  if (values_.size() != spec_.cell_count()) {
    throw ConfigError("field has " + std::to_string(values_.size()) + " values, grid needs " +
                      std::to_string(spec_.cell_count()));
  }
}

ScalarField ScalarField::sample(const GridSpec& spec,
                                const std::function<double(const Point&)>& f) {
  ScalarField out(spec);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(spec.position(i));
  return out;
}

bool ScalarField::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

VectorField::VectorField(const GridSpec& spec)
    : spec_(spec), components_(static_cast<std::size_t>(spec.dim()), ScalarField(spec)) {}

VectorField VectorField::sample(const GridSpec& spec,
                                const std::function<Point(const Point&)>& g) {
  VectorField out(spec);
  for (std::size_t i = 0; i < spec.cell_count(); ++i) {
    const Point v = g(spec.position(i));
    for (int k = 0; k < spec.dim(); ++k) out[k][i] = v[k];
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  const GridSpec& g = f.spec();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  ScalarField out(g);
  auto src = f.values();
  auto dst = out.values();
  parallel_for(g.cell_count(), [&](std::size_t i) {
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      acc += src[g.neighbor_plus(i, k)] + src[g.neighbor_minus(i, k)] - 2.0 * src[i];
    }
    dst[i] = acc * inv_h2;
  });
  return out;
}

VectorField gradient(const ScalarField& f) {
  const GridSpec& g = f.spec();
  const double inv_2h = 0.5 / g.spacing();
  VectorField out(g);
  auto src = f.values();
  for (int k = 0; k < g.dim(); ++k) {
    auto dst = out[k].values();
    parallel_for(g.cell_count(), [&](std::size_t i) {
      dst[i] = (src[g.neighbor_plus(i, k)] - src[g.neighbor_minus(i, k)]) * inv_2h;
    });
  }
  return out;
}

ScalarField grad_dot(const ScalarField& f, const ScalarField& h) {
  const GridSpec& g = f.spec();
  const double inv_h = 1.0 / g.spacing();
  ScalarField out(g);
  auto a = f.values();
  auto b = h.values();
  auto dst = out.values();
  parallel_for(g.cell_count(), [&](std::size_t i) {
    double acc = 0.0;
    for (int k = 0; k < g.dim(); ++k) {
      const std::size_t ip = g.neighbor_plus(i, k);
      const std::size_t im = g.neighbor_minus(i, k);
      acc += (a[ip] - a[i]) * (b[ip] - b[i]) + (a[i] - a[im]) * (b[i] - b[im]);
    }
    dst[i] = 0.5 * acc * inv_h * inv_h;
  });
  return out;
}

ScalarField grad_squared(const ScalarField& f) { return grad_dot(f, f); }

double integrate(const ScalarField& f) {
  const double cell_volume = std::pow(f.spec().spacing(), f.spec().dim());
  return cell_volume * deterministic_sum(f.values());
}

double integrate(const ScalarField& f, const ScalarField& weight) {
  if (!(f.spec() == weight.spec())) throw ConfigError("integrate: weight lives on another grid");
  std::vector<double> prod(f.size());
  auto a = f.values();
  auto w = weight.values();
  parallel_for(prod.size(), [&](std::size_t i) { prod[i] = a[i] * w[i]; });
  return std::pow(f.spec().spacing(), f.spec().dim()) * deterministic_sum(prod);
}

ScalarField translate(const ScalarField& f, int axis, int offset) {
  const GridSpec& g = f.spec();
  const int n = g.points_per_axis();
  const int shift = ((offset % n) + n) % n;
  ScalarField out(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const int c = g.coordinate_index(i, axis);
    const int src_c = (c - shift + n) % n;
    const std::size_t src = i + static_cast<std::size_t>(src_c) * g.stride(axis) -
                            static_cast<std::size_t>(c) * g.stride(axis);
    out[i] = f[src];
  }
  return out;
}

double laplacian_symbol(const GridSpec& spec, std::span<const int> wavenumbers) {
  const double inv_h2 = 1.0 / (spec.spacing() * spec.spacing());
  double s = 0.0;
  for (int k = 0; k < spec.dim(); ++k) {
    const double theta = 2.0 * std::numbers::pi * wavenumbers[k] / spec.points_per_axis();
    s += (2.0 * std::cos(theta) - 2.0) * inv_h2;
  }
  return s;
}

// ---------------------------------------------------------------------------
// FFT-backed Helmholtz solver

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct HelmholtzSolver::Impl {
  GridSpec spec;
  std::size_t complex_size = 0;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<double> symbol;

  explicit Impl(const GridSpec& g) : spec(g) {
    const int d = g.dim();
    const int n = g.points_per_axis();
    complex_size = g.cell_count() / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
    real_buf = fftw_alloc_real(g.cell_count());
    spec_buf = fftw_alloc_complex(complex_size);
    std::array<int, GridSpec::kMaxDim> dims{};
    for (int k = 0; k < d; ++k) dims[k] = n;
    {
      std::lock_guard lock(planner_mutex());
      // FFTW_ESTIMATE keeps the chosen algorithm, and therefore the bits, fixed.
      forward = fftw_plan_dft_r2c(d, dims.data(), real_buf, spec_buf, FFTW_ESTIMATE);
      backward = fftw_plan_dft_c2r(d, dims.data(), spec_buf, real_buf, FFTW_ESTIMATE);
    }
    if (forward == nullptr || backward == nullptr) throw SolverError("FFTW planning failed");

    symbol.resize(complex_size);
    const int half = n / 2 + 1;
    std::array<int, GridSpec::kMaxDim> wave{};
    for (std::size_t c = 0; c < complex_size; ++c) {
      std::size_t rem = c;
      wave[d - 1] = static_cast<int>(rem % static_cast<std::size_t>(half));
      rem /= static_cast<std::size_t>(half);
      for (int k = d - 2; k >= 0; --k) {
        wave[k] = static_cast<int>(rem % static_cast<std::size_t>(n));
        rem /= static_cast<std::size_t>(n);
      }
      symbol[c] = laplacian_symbol(g, std::span<const int>(wave.data(), d));
    }
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    fftw_free(real_buf);
    fftw_free(spec_buf);
  }
};

HelmholtzSolver::HelmholtzSolver(const GridSpec& spec) : impl_(std::make_unique<Impl>(spec)) {}
HelmholtzSolver::~HelmholtzSolver() = default;
HelmholtzSolver::HelmholtzSolver(HelmholtzSolver&&) noexcept = default;
HelmholtzSolver& HelmholtzSolver::operator=(HelmholtzSolver&&) noexcept = default;

const GridSpec& HelmholtzSolver::spec() const noexcept { return impl_->spec; }

void HelmholtzSolver::solve(std::span<const double> rhs, double a, double b,
                            std::span<double> out) {
  if (!(a > 0.0) || !(b >= 0.0)) {
    throw ConfigError("helmholtz_solve requires a > 0 and b >= 0");
  }
  Impl& m = *impl_;
  const std::size_t cells = m.spec.cell_count();
  if (rhs.size() != cells || out.size() != cells) throw ConfigError("helmholtz_solve: size mismatch");
  if (b == 0.0) {
    for (std::size_t i = 0; i < cells; ++i) out[i] = rhs[i] / a;
    return;
  }
  std::copy(rhs.begin(), rhs.end(), m.real_buf);
  fftw_execute(m.forward);
  const double norm = 1.0 / static_cast<double>(cells);
  for (std::size_t c = 0; c < m.complex_size; ++c) {
    const double scale = norm / (a - b * m.symbol[c]);
    m.spec_buf[c][0] *= scale;
    m.spec_buf[c][1] *= scale;
  }
  fftw_execute(m.backward);
  std::copy(m.real_buf, m.real_buf + cells, out.begin());
}

ScalarField HelmholtzSolver::solve(const ScalarField& rhs, double a, double b) {
  ScalarField out(rhs.spec());
  solve(rhs.values(), a, b, out.values());
  return out;
}

ScalarField helmholtz_solve(const ScalarField& rhs, double a, double b) {
  thread_local std::map<std::pair<int, int>, HelmholtzSolver> cache;
  const GridSpec& g = rhs.spec();
  auto key = std::make_pair(g.dim(), g.points_per_axis());
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, HelmholtzSolver(g)).first;
  ScalarField x = it->second.solve(rhs, a, b);

  const ScalarField lap = laplacian(x);
  double residual = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    residual = std::max(residual, std::abs(a * x[i] - b * lap[i] - rhs[i]));
  }
  if (!(residual <= 1e-10 * rhs.max_abs())) {
    if (!(rhs.max_abs() == 0.0 && residual == 0.0)) {
      throw SolverError("helmholtz_solve residual " + std::to_string(residual) +
                        " exceeds 1e-10 * |rhs|");
    }
  }
  return x;
}

}  // namespace mpfc
