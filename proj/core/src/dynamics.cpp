#include "mpfc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/potential.hpp"

namespace mpfc {

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::SphereLL: return "SphereLL";
    case ModelKind::WeightedSum: return "WeightedSum";
    case ModelKind::MeanShift: return "MeanShift";
    case ModelKind::WeightedSquare: return "WeightedSquare";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "SphereLL" || name == "ac") return ModelKind::SphereLL;
  if (name == "WeightedSum" || name == "ac3") return ModelKind::WeightedSum;
  if (name == "MeanShift" || name == "ac5") return ModelKind::MeanShift;
  if (name == "WeightedSquare" || name == "ac4") return ModelKind::WeightedSquare;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::IMEX ? "IMEX" : "ExplicitEuler";
}

std::string_view to_string(Projection p) noexcept {
  return p == Projection::EveryStep ? "every_step" : "off";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "IMEX") return Scheme::IMEX;
  if (name == "ExplicitEuler") return Scheme::ExplicitEuler;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

Projection parse_projection(std::string_view name) {
  if (name == "off") return Projection::Off;
  if (name == "every_step") return Projection::EveryStep;
  throw ConfigError("unknown projection policy '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (n_phases < 2) throw ConfigError("need at least two phases");
  if (!(denom_floor >= 0.0)) throw ConfigError("denom_floor must be >= 0");
}

bool PhaseField::all_finite() const noexcept {
  return std::all_of(phases.begin(), phases.end(),
                     [](const ScalarField& f) { return f.all_finite(); });
}

double coupling_weight(ModelKind kind, double u) noexcept {
  switch (kind) {
    case ModelKind::SphereLL: return u;
    case ModelKind::MeanShift: return 1.0;
    case ModelKind::WeightedSum:
    case ModelKind::WeightedSquare: return sqrt_two_w(u);
  }
  return 0.0;
}

double constraint_primitive(ModelKind kind, double u) noexcept {
  switch (kind) {
    case ModelKind::SphereLL: return 0.5 * u * u;
    case ModelKind::MeanShift:
    case ModelKind::WeightedSum: return u;
    case ModelKind::WeightedSquare: return k_primitive(u);
  }
  return 0.0;
}

double constraint_target(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::SphereLL: return 0.5;
    case ModelKind::MeanShift:
    case ModelKind::WeightedSum: return 1.0;
    case ModelKind::WeightedSquare: return kSigma;
  }
  return 0.0;
}

ScalarField chemical_potential(const ScalarField& u, double eps) {
  const ScalarField lap = laplacian(u);
  ScalarField mu(u.spec());
  parallel_for(u.size(), [&](std::size_t i) { mu[i] = -eps * lap[i] + w_prime(u[i]) / eps; });
  return mu;
}

namespace {

double cell_violation(const PhaseField& s, ModelKind kind, std::size_t i) {
  double acc = 0.0;
  for (const auto& u : s.phases) acc += constraint_primitive(kind, u[i]);
  // SphereLL: report |sum u^2 - 1| rather than the half-scaled primitive.
  const double scale = kind == ModelKind::SphereLL ? 2.0 : 1.0;
  return scale * std::abs(acc - constraint_target(kind));
}

MultiplierField multiplier_from_potentials(const PhaseField& state,
                                           const std::vector<ScalarField>& mu,
                                           const ModelSpec& model) {
  const GridSpec& g = state.spec;
  const int n_ph = state.n_phases();
  MultiplierField out{ScalarField(g), 0.0, false};
  std::vector<double> denominators(g.cell_count(), 1.0);
  std::vector<double> floored(g.cell_count(), 0.0);

  parallel_for(g.cell_count(), [&](std::size_t i) {
    double num = 0.0;
    double den = 1.0;
    switch (model.kind) {
      case ModelKind::SphereLL:
        for (int p = 0; p < n_ph; ++p) num += state[p][i] * mu[p][i];
        break;
      case ModelKind::MeanShift:
        for (int p = 0; p < n_ph; ++p) num += mu[p][i];
        den = n_ph;
        break;
      case ModelKind::WeightedSum:
        den = 0.0;
        for (int p = 0; p < n_ph; ++p) {
          num += mu[p][i];
          den += sqrt_two_w(state[p][i]);
        }
        break;
      case ModelKind::WeightedSquare:
        den = 0.0;
        for (int p = 0; p < n_ph; ++p) {
          const double a = sqrt_two_w(state[p][i]);
          num += a * mu[p][i];
          den += a * a;
        }
        break;
    }
    denominators[i] = den;
    if (den < model.denom_floor || den == 0.0) {
      out.values[i] = 0.0;
      floored[i] = 1.0;
    } else {
      out.values[i] = num / den;
    }
  });

  if (model.denom_floor == 0.0) {
    for (std::size_t i = 0; i < denominators.size(); ++i) {
      if (denominators[i] == 0.0) throw DegenerateDenominatorError(i);
    }
  }
  out.floored_fraction = deterministic_sum(floored) / static_cast<double>(g.cell_count());
  return out;
}

}  // namespace

MultiplierField compute_multiplier(const PhaseField& state, const ModelSpec& model) {
  std::vector<ScalarField> mu;
  mu.reserve(state.phases.size());
  for (const auto& u : state.phases) mu.push_back(chemical_potential(u, model.eps));
  MultiplierField m = multiplier_from_potentials(state, mu, model);
  m.off_manifold = constraint_violation(state, model) > 1e-3;
  return m;
}

PhaseRates rhs(const PhaseField& state, const ModelSpec& model) {
  const double eps = model.eps;
  PhaseRates out;
  out.laplacians.reserve(state.phases.size());
  out.chemical.reserve(state.phases.size());
  for (const auto& u : state.phases) {
    ScalarField lap = laplacian(u);
    ScalarField mu(u.spec());
    parallel_for(u.size(), [&](std::size_t i) { mu[i] = -eps * lap[i] + w_prime(u[i]) / eps; });
    out.laplacians.push_back(std::move(lap));
    out.chemical.push_back(std::move(mu));
  }
  out.multiplier = multiplier_from_potentials(state, out.chemical, model);
  out.multiplier.off_manifold = constraint_violation(state, model) > 1e-3;

  const ScalarField& m = out.multiplier.values;
  for (int p = 0; p < state.n_phases(); ++p) {
    ScalarField r(state.spec);
    const ScalarField& u = state[p];
    const ScalarField& mu = out.chemical[static_cast<std::size_t>(p)];
    parallel_for(r.size(), [&](std::size_t i) {
      r[i] = (-mu[i] + m[i] * coupling_weight(model.kind, u[i])) / eps;
    });
    out.rates.push_back(std::move(r));
  }
  return out;
}

double constraint_violation(const PhaseField& state, const ModelSpec& model) {
  std::vector<double> v(state.spec.cell_count());
  parallel_for(v.size(), [&](std::size_t i) { v[i] = cell_violation(state, model.kind, i); });
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

namespace {

// Finds t with sum_i k(u_i + t) = 1/6. The map is strictly increasing in t;
// Newton steps are accepted only inside the current bisection bracket.
bool solve_k_shift(const double* u, int n, double& t_out) {
  auto f = [&](double t) {
    double s = 0.0;
    for (int p = 0; p < n; ++p) s += k_primitive(u[p] + t);
    return s - kSigma;
  };
  auto df = [&](double t) {
    double s = 0.0;
    for (int p = 0; p < n; ++p) s += sqrt_two_w(u[p] + t);
    return s;
  };
  // At the wells df vanishes and f is quadratic in t, so chasing round-off
  // would move u by sqrt(machine eps).
  double f0 = f(0.0);
  if (std::abs(f0) <= 1e-15) {
    t_out = 0.0;
    return true;
  }
  double lo = -1.0;
  double hi = 1.0;
  if (!(f(lo) < 0.0 && f(hi) > 0.0)) return false;
  double t = 0.0;
  double ft = f0;
  for (int it = 0; it < 60; ++it) {
    if (ft < 0.0) lo = t; else hi = t;
    const double slope = df(t);
    double next = slope > 0.0 ? t - ft / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double change = std::abs(next - t);
    t = next;
    ft = f(t);
    if (ft == 0.0 || change <= 1e-15 || hi - lo <= 1e-15) break;
    if (std::abs(ft) <= 1e-15) break;
  }
  t_out = t;
  return std::abs(ft) <= 1e-12;
}

}  // namespace

PhaseField project_constraint(const PhaseField& state, const ModelSpec& model) {
  PhaseField out = state;
  const int n_ph = state.n_phases();
  const std::size_t cells = state.spec.cell_count();
  std::vector<double> failed(cells, 0.0);

  parallel_for(cells, [&](std::size_t i) {
    switch (model.kind) {
      case ModelKind::SphereLL: {
        double norm2 = 0.0;
        for (int p = 0; p < n_ph; ++p) norm2 += state[p][i] * state[p][i];
        if (norm2 == 0.0) {
          failed[i] = 1.0;
          return;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (int p = 0; p < n_ph; ++p) out[p][i] = state[p][i] * inv;
        break;
      }
      case ModelKind::MeanShift:
      case ModelKind::WeightedSum: {
        double sum = 0.0;
        for (int p = 0; p < n_ph; ++p) sum += state[p][i];
        const double shift = (sum - 1.0) / n_ph;
        for (int p = 0; p < n_ph; ++p) out[p][i] = state[p][i] - shift;
        break;
      }
      case ModelKind::WeightedSquare: {
        double u[16];
        const int n = std::min(n_ph, 16);
        for (int p = 0; p < n; ++p) u[p] = state[p][i];
        double t = 0.0;
        if (!solve_k_shift(u, n, t)) {
          failed[i] = 2.0;
          return;
        }
        for (int p = 0; p < n_ph; ++p) out[p][i] = state[p][i] + t;
        break;
      }
    }
  });

  for (std::size_t i = 0; i < cells; ++i) {
    if (failed[i] == 1.0) throw ProjectionError("sphere projection is singular: |u| = 0", i);
    if (failed[i] == 2.0) throw ProjectionError("k-sum projection could not bracket a shift", i);
  }
  if (model.kind == ModelKind::WeightedSquare && n_ph > 16) {
    throw ProjectionError("WeightedSquare projection supports at most 16 phases", 0);
  }
  return out;
}

void check_stability(const GridSpec& grid, const ModelSpec& model, double dt, Scheme scheme) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const double h = grid.spacing();
  const double eps2 = model.eps * model.eps;
  if (scheme == Scheme::ExplicitEuler) {
    const double limit = std::min(h * h / (4.0 * grid.dim()), eps2 / 10.0);
    if (dt > limit * (1.0 + 1e-12)) {
      throw ConfigError("ExplicitEuler needs dt <= min(h^2/(4d), eps^2/10) = " +
                        std::to_string(limit) + ", got " + std::to_string(dt));
    }
  } else if (dt > 0.25 * eps2 * (1.0 + 1e-12)) {
    throw ConfigError("IMEX needs dt <= eps^2/4 = " + std::to_string(0.25 * eps2) + ", got " +
                      std::to_string(dt));
  }
}

void require_smooth(const PhaseField& state) {
  const GridSpec& g = state.spec;
  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      for (int k = 0; k < g.dim(); ++k) {
        if (std::abs(u[g.neighbor_plus(i, k)] - u[i]) > 0.5) {
          throw ScenarioError("phase " + std::to_string(p) + " jumps by more than 0.5 at cell " +
                              std::to_string(i) + "; build initial data from mollified profiles");
        }
      }
    }
  }
}

double dissipation_rate(const PhaseRates& rates, double eps) {
  if (rates.rates.empty()) return 0.0;
  const GridSpec& g = rates.rates.front().spec();
  ScalarField density(g);
  for (const auto& r : rates.rates) {
    parallel_for(g.cell_count(), [&](std::size_t i) { density[i] += r[i] * r[i]; });
  }
  return eps * integrate(density) / kSigma;
}

double coupling_power(const PhaseField& state, const PhaseRates& rates, const ModelSpec& model) {
  const GridSpec& g = state.spec;
  ScalarField density(g);
  const ScalarField& m = rates.multiplier.values;
  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    const ScalarField& r = rates.rates[static_cast<std::size_t>(p)];
    parallel_for(g.cell_count(), [&](std::size_t i) {
      density[i] += m[i] * coupling_weight(model.kind, u[i]) * r[i];
    });
  }
  return integrate(density) / kSigma;
}

Stepper::Stepper(const GridSpec& grid, const ModelSpec& model, double dt, Scheme scheme,
                 Projection projection)
    : grid_(grid), model_(model), dt_(dt), scheme_(scheme), projection_(projection) {
  model_.validate();
  check_stability(grid_, model_, dt_, scheme_);
  if (scheme_ == Scheme::IMEX) solver_.emplace(grid_);
}

PhaseField Stepper::advance(const PhaseField& state) { return advance(state, rhs(state, model_)); }

PhaseField Stepper::advance(const PhaseField& state, const PhaseRates& rates) {
  PhaseField next(state.spec, state.n_phases(), state.time + dt_);
  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    const ScalarField& r = rates.rates[static_cast<std::size_t>(p)];
    ScalarField& out = next[p];
    if (scheme_ == Scheme::ExplicitEuler) {
      parallel_for(u.size(), [&](std::size_t i) { out[i] = u[i] + dt_ * r[i]; });
    } else {
      // Diffusion implicit: (I - dt Lap) u^{n+1} = u^n + dt (rate - Lap u^n).
      const ScalarField& lap = rates.laplacians[static_cast<std::size_t>(p)];
      ScalarField explicit_part(u.spec());
      parallel_for(u.size(), [&](std::size_t i) {
        explicit_part[i] = u[i] + dt_ * (r[i] - lap[i]);
      });
      solver_->solve(explicit_part.values(), 1.0, dt_, out.values());
    }
  }
  ++steps_;
  if (projection_ == Projection::EveryStep && next.all_finite()) {
    next = project_constraint(next, model_);
  }
  if (!next.all_finite()) throw BlowUpError(steps_);

  last_.step = steps_;
  last_.dissipation_rate = dissipation_rate(rates, model_.eps);
  last_.coupling_power = coupling_power(state, rates, model_);
  last_.floored_fraction = rates.multiplier.floored_fraction;
  return next;
}

PhaseField step(const PhaseField& state, const ModelSpec& model, double dt, Scheme scheme,
                Projection projection, StepInfo* info) {
  Stepper stepper(state.spec, model, dt, scheme, projection);
  PhaseField next = stepper.advance(state);
  if (info != nullptr) *info = stepper.last();
  return next;
}

}  // namespace mpfc
