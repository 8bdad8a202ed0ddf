#include "mpfc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/potential.hpp"

namespace mpfc {

ScalarField energy_density(const ScalarField& u, double eps) {
  ScalarField e = grad_squared(u);
  parallel_for(e.size(), [&](std::size_t i) {
    e[i] = (0.5 * eps * e[i] + w_eval(u[i]) / eps) / kSigma;
  });
  return e;
}

ScalarField discrepancy_density(const ScalarField& u, double eps) {
  ScalarField x = grad_squared(u);
  parallel_for(x.size(), [&](std::size_t i) {
    x[i] = (0.5 * eps * x[i] - w_eval(u[i]) / eps) / kSigma;
  });
  return x;
}

std::vector<double> energy_measure(const PhaseField& state, double eps, const ScalarField* test_fn) {
  std::vector<double> out;
  out.reserve(state.phases.size());
  for (const auto& u : state.phases) {
    const ScalarField e = energy_density(u, eps);
    out.push_back(test_fn != nullptr ? integrate(e, *test_fn) : integrate(e));
  }
  return out;
}

std::vector<double> discrepancy_measure(const PhaseField& state, double eps,
                                        const ScalarField* test_fn, bool signed_values) {
  std::vector<double> out;
  out.reserve(state.phases.size());
  for (const auto& u : state.phases) {
    ScalarField x = discrepancy_density(u, eps);
    if (!signed_values) {
      parallel_for(x.size(), [&](std::size_t i) { x[i] = std::abs(x[i]); });
    }
    out.push_back(test_fn != nullptr ? integrate(x, *test_fn) : integrate(x));
  }
  return out;
}

std::vector<double> bv_proxy(const PhaseField& state, double /*eps*/) {
  std::vector<double> out;
  out.reserve(state.phases.size());
  for (const auto& u : state.phases) {
    ScalarField b = grad_squared(u);
    parallel_for(b.size(), [&](std::size_t i) {
      b[i] = std::sqrt(b[i]) * sqrt_two_w(u[i]) / kSigma;
    });
    out.push_back(integrate(b));
  }
  return out;
}

MeasureSample sample_measures(const PhaseField& state, const ModelSpec& model,
                              const PhaseRates* rates) {
  std::optional<PhaseRates> own;
  if (rates == nullptr) {
    own = rhs(state, model);
    rates = &*own;
  }
  MeasureSample s;
  s.time = state.time;
  s.energy_per_phase = energy_measure(state, model.eps);
  s.discrepancy_per_phase = discrepancy_measure(state, model.eps, nullptr, true);
  const std::vector<double> abs_xi = discrepancy_measure(state, model.eps, nullptr, false);
  s.bv_proxy_per_phase = bv_proxy(state, model.eps);
  for (double e : s.energy_per_phase) s.energy_total += e;
  for (double x : abs_xi) s.discrepancy_abs += x;
  s.dissipation_rate = dissipation_rate(*rates, model.eps);
  s.constraint_drift = constraint_violation(state, model);
  for (const auto& u : state.phases) {
    s.phase_volume.push_back(integrate(u));
    s.phase_max.push_back(*std::max_element(u.values().begin(), u.values().end()));
  }
  return s;
}

double assumption_a_residual(const MeasureSample& sample) {
  double bv = 0.0;
  for (double b : sample.bv_proxy_per_phase) bv += b;
  return sample.energy_total - bv;
}

namespace {

// d/du of the conserved primitive: the normal of the constraint manifold.
double constraint_normal(ModelKind kind, double u) noexcept {
  switch (kind) {
    case ModelKind::SphereLL: return u;
    case ModelKind::MeanShift:
    case ModelKind::WeightedSum: return 1.0;
    case ModelKind::WeightedSquare: return sqrt_two_w(u);
  }
  return 0.0;
}

// Jacobian J[j][k] = d_j g_k by central differences.
std::vector<VectorField> jacobian(const VectorField& g) {
  std::vector<VectorField> out;
  out.reserve(static_cast<std::size_t>(g.dim()));
  for (int k = 0; k < g.dim(); ++k) out.push_back(gradient(g[k]));
  return out;  // out[k][j] = d_j g_k
}

}  // namespace

std::vector<VectorField> tangent_gradients(const PhaseField& state, const ModelSpec& model) {
  const GridSpec& grid = state.spec;
  const int n_ph = state.n_phases();
  const int d = grid.dim();
  std::vector<VectorField> grads;
  grads.reserve(state.phases.size());
  for (const auto& u : state.phases) grads.push_back(gradient(u));

  parallel_for(grid.cell_count(), [&](std::size_t i) {
    double nu[64];
    double norm2 = 0.0;
    const int n = std::min(n_ph, 64);
    for (int p = 0; p < n; ++p) {
      nu[p] = constraint_normal(model.kind, state[p][i]);
      norm2 += nu[p] * nu[p];
    }
    if (norm2 < 1e-30) return;
    for (int k = 0; k < d; ++k) {
      double dot = 0.0;
      for (int p = 0; p < n; ++p) dot += nu[p] * grads[static_cast<std::size_t>(p)][k][i];
      const double c = dot / norm2;
      for (int p = 0; p < n; ++p) grads[static_cast<std::size_t>(p)][k][i] -= c * nu[p];
    }
  });
  return grads;
}

VariationReport first_variation(const PhaseField& state, const ModelSpec& model,
                                const VectorField& g, std::string test_field_id,
                                double gradient_floor) {
  const GridSpec& grid = state.spec;
  if (!(g.spec() == grid)) throw InputError("test field lives on a different grid");
  const int d = grid.dim();
  const double eps = model.eps;
  const PhaseRates rates = rhs(state, model);
  const std::vector<VectorField> tangent = tangent_gradients(state, model);
  const std::vector<VectorField> jac = jacobian(g);

  VariationReport rep;
  rep.test_field_id = std::move(test_field_id);
  ScalarField varifold(grid);
  ScalarField xi_term(grid);
  ScalarField chem(grid);
  ScalarField kin(grid);
  ScalarField floored(grid);

  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    const VectorField grad = gradient(u);
    const ScalarField e = energy_density(u, eps);
    const ScalarField x = discrepancy_density(u, eps);
    const VectorField& tg = tangent[static_cast<std::size_t>(p)];
    const ScalarField& mu = rates.chemical[static_cast<std::size_t>(p)];
    const ScalarField& r = rates.rates[static_cast<std::size_t>(p)];

    parallel_for(grid.cell_count(), [&](std::size_t i) {
      double div = 0.0;
      for (int k = 0; k < d; ++k) div += jac[static_cast<std::size_t>(k)][k][i];
      double norm2 = 0.0;
      for (int k = 0; k < d; ++k) norm2 += grad[k][i] * grad[k][i];
      const double norm = std::sqrt(norm2);
      if (norm > gradient_floor) {
        double nn = 0.0;
        for (int j = 0; j < d; ++j) {
          for (int k = 0; k < d; ++k) {
            nn += grad[j][i] * grad[k][i] * jac[static_cast<std::size_t>(k)][j][i];
          }
        }
        nn /= norm2;
        varifold[i] += (div - nn) * e[i];
        xi_term[i] += nn * x[i];
      } else {
        xi_term[i] -= div * w_eval(u[i]) / (eps * kSigma);
        floored[i] += 1.0;
      }
      double gu = 0.0;
      for (int k = 0; k < d; ++k) gu += g[k][i] * tg[k][i];
      chem[i] -= gu * mu[i] / kSigma;
      kin[i] += eps * r[i] * gu / kSigma;
    });
  }

  rep.first_variation = integrate(varifold);
  rep.xi_correction = integrate(xi_term);
  rep.chemical_form = integrate(chem);
  rep.kinetic_form = integrate(kin);
  rep.varifold_residual = rep.first_variation - rep.chemical_form - rep.xi_correction;
  rep.kinetic_chemical_residual = rep.kinetic_form - rep.chemical_form;
  rep.floored_fraction = deterministic_sum(floored.values()) /
                         (static_cast<double>(grid.cell_count()) * state.n_phases());
  return rep;
}

namespace {

VectorField curvature_density_impl(const PhaseField& state, const ModelSpec& model,
                                   const PhaseRates& rates, int only_phase) {
  const GridSpec& grid = state.spec;
  const std::vector<VectorField> tangent = tangent_gradients(state, model);
  VectorField h(grid);
  for (int p = 0; p < state.n_phases(); ++p) {
    if (only_phase >= 0 && p != only_phase) continue;
    const ScalarField& r = rates.rates[static_cast<std::size_t>(p)];
    const VectorField& tg = tangent[static_cast<std::size_t>(p)];
    for (int k = 0; k < grid.dim(); ++k) {
      parallel_for(grid.cell_count(), [&](std::size_t i) {
        h[k][i] -= model.eps * r[i] * tg[k][i] / kSigma;
      });
    }
  }
  return h;
}

}  // namespace

CurvatureProxy mean_curvature_proxy(const PhaseField& state, const ModelSpec& model,
                                    const PhaseRates* rates) {
  std::optional<PhaseRates> own;
  if (rates == nullptr) {
    own = rhs(state, model);
    rates = &*own;
  }
  CurvatureProxy out;
  out.density = curvature_density_impl(state, model, *rates, -1);
  out.kinetic_bound = dissipation_rate(*rates, model.eps);
  return out;
}

VectorField phase_curvature_density(const PhaseField& state, const ModelSpec& model, int phase,
                                    const PhaseRates* rates) {
  if (phase < 0 || phase >= state.n_phases()) throw InputError("phase index out of range");
  std::optional<PhaseRates> own;
  if (rates == nullptr) {
    own = rhs(state, model);
    rates = &*own;
  }
  return curvature_density_impl(state, model, *rates, phase);
}

double pairing(const VectorField& density, const VectorField& g) {
  if (!(density.spec() == g.spec())) throw InputError("pairing fields live on different grids");
  const GridSpec& grid = g.spec();
  ScalarField dot(grid);
  parallel_for(grid.cell_count(), [&](std::size_t i) {
    double s = 0.0;
    for (int k = 0; k < grid.dim(); ++k) s += density[k][i] * g[k][i];
    dot[i] = s;
  });
  return integrate(dot);
}

double test_field_norm(const PhaseField& state, const ModelSpec& model, const VectorField& g) {
  const GridSpec& grid = state.spec;
  const std::vector<VectorField> tangent = tangent_gradients(state, model);
  ScalarField w(grid);
  parallel_for(grid.cell_count(), [&](std::size_t i) {
    double g2 = 0.0;
    for (int k = 0; k < grid.dim(); ++k) g2 += g[k][i] * g[k][i];
    double t2 = 0.0;
    for (const auto& tg : tangent) {
      for (int k = 0; k < grid.dim(); ++k) t2 += tg[k][i] * tg[k][i];
    }
    w[i] = model.eps * g2 * t2 / kSigma;
  });
  return std::sqrt(integrate(w));
}

HolderFit holder_fit(std::span<const PhaseField> run, int phase) {
  HolderFit fit;
  if (run.size() < 2) return fit;
  const PhaseField& first = run.front();
  if (phase < 0 || phase >= first.n_phases()) throw InputError("phase index out of range");
  const ScalarField& u0 = first[phase];
  for (std::size_t k = 1; k < run.size(); ++k) {
    const double dt = run[k].time - first.time;
    if (!(dt > 0.0)) continue;
    const ScalarField& uk = run[k][phase];
    ScalarField diff(u0.spec());
    parallel_for(diff.size(), [&](std::size_t i) {
      diff[i] = std::abs(g_transform(uk[i]) - g_transform(u0[i]));
    });
    const double ratio = integrate(diff) / std::sqrt(dt);
    fit.ratios.push_back(ratio);
    fit.constant = std::max(fit.constant, ratio);
  }
  return fit;
}

}  // namespace mpfc
