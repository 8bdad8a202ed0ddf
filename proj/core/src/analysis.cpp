#include "mpfc/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "mpfc/diagnostics.hpp"
#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/potential.hpp"

namespace mpfc {

namespace {

constexpr double kTailExponent = 40.0;  // e^{-40} ~ 4e-18 per omitted image

double kernel_tau(double t, const KernelSpec& spec) {
  const double tau = spec.terminal_s - t;
  if (!(tau > 0.0)) {
    throw DomainError("heat kernel evaluated at t = " + std::to_string(t) +
                      " which is not below s = " + std::to_string(spec.terminal_s));
  }
  return tau;
}

double kernel_prefactor(double tau, int d) {
  return std::pow(4.0 * std::numbers::pi * tau, -0.5 * (d - 1));
}

int image_radius(const KernelSpec& spec, double tau) {
  return spec.image_truncation >= 0 ? spec.image_truncation : automatic_image_radius(tau);
}

// Minimal-image displacement in [-1/2, 1/2).
double wrap(double v) { return v - std::floor(v + 0.5); }

// One-dimensional image sums theta(x) = sum_z exp(-(x + z)^2 / (4 tau)) and its
// derivative, evaluated at the minimal-image displacement x.
struct Theta {
  double value;
  double slope;
};

Theta theta(double x, double tau, int radius) {
  Theta out{0.0, 0.0};
  for (int z = -radius; z <= radius; ++z) {
    const double r = x + z;
    const double e = std::exp(-r * r / (4.0 * tau));
    out.value += e;
    out.slope -= e * r / (2.0 * tau);
  }
  return out;
}

// Per-axis tables for the separable product rho = prefactor prod_k theta_k.
std::vector<std::vector<Theta>> axis_tables(const GridSpec& grid, double tau,
                                            const KernelSpec& spec) {
  const int radius = image_radius(spec, tau);
  std::vector<std::vector<Theta>> tables(static_cast<std::size_t>(grid.dim()));
  for (int k = 0; k < grid.dim(); ++k) {
    auto& table = tables[static_cast<std::size_t>(k)];
    table.resize(static_cast<std::size_t>(grid.points_per_axis()));
    for (int j = 0; j < grid.points_per_axis(); ++j) {
      table[static_cast<std::size_t>(j)] =
          theta(wrap(j * grid.spacing() - spec.center[static_cast<std::size_t>(k)]), tau, radius);
    }
  }
  return tables;
}

}  // namespace

int automatic_image_radius(double tau) {
  // The minimal-image displacement is at most 1/2, so every image outside
  // radius R sits at distance >= R + 1/2.
  const double reach = std::sqrt(4.0 * tau * kTailExponent);
  return std::max(1, static_cast<int>(std::ceil(reach - 0.5)));
}

double heat_kernel_eval(const Point& x, double t, const KernelSpec& spec, int d) {
  const double tau = kernel_tau(t, spec);
  const int radius = image_radius(spec, tau);
  double product = kernel_prefactor(tau, d);
  for (int k = 0; k < d; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    product *= theta(wrap(x[kk] - spec.center[kk]), tau, radius).value;
  }
  return product;
}

ScalarField heat_kernel_field(const GridSpec& grid, double t, const KernelSpec& spec) {
  const double tau = kernel_tau(t, spec);
  const auto tables = axis_tables(grid, tau, spec);
  const double pre = kernel_prefactor(tau, grid.dim());
  ScalarField rho(grid);
  parallel_for(grid.cell_count(), [&](std::size_t i) {
    double v = pre;
    for (int k = 0; k < grid.dim(); ++k) {
      v *= tables[static_cast<std::size_t>(k)][static_cast<std::size_t>(grid.coordinate_index(i, k))]
               .value;
    }
    rho[i] = v;
  });
  return rho;
}

VectorField heat_kernel_gradient(const GridSpec& grid, double t, const KernelSpec& spec) {
  const double tau = kernel_tau(t, spec);
  const auto tables = axis_tables(grid, tau, spec);
  const double pre = kernel_prefactor(tau, grid.dim());
  VectorField grad(grid);
  parallel_for(grid.cell_count(), [&](std::size_t i) {
    for (int a = 0; a < grid.dim(); ++a) {
      double v = pre;
      for (int k = 0; k < grid.dim(); ++k) {
        const Theta& th =
            tables[static_cast<std::size_t>(k)][static_cast<std::size_t>(grid.coordinate_index(i, k))];
        v *= k == a ? th.slope : th.value;
      }
      grad[a][i] = v;
    }
  });
  return grad;
}

double gaussian_density(const PhaseField& state, double eps, const KernelSpec& spec) {
  const ScalarField rho = heat_kernel_field(state.spec, state.time, spec);
  double total = 0.0;
  for (double v : energy_measure(state, eps, &rho)) total += v;
  return total;
}

MonotonicitySample monotonicity_sample(const PhaseField& state, const ModelSpec& model,
                                       const KernelSpec& spec, const PhaseRates* rates) {
  std::optional<PhaseRates> own;
  if (rates == nullptr) {
    own = rhs(state, model);
    rates = &*own;
  }
  const GridSpec& grid = state.spec;
  const double eps = model.eps;
  const double tau = kernel_tau(state.time, spec);
  const ScalarField rho = heat_kernel_field(grid, state.time, spec);
  const VectorField grad_rho = heat_kernel_gradient(grid, state.time, spec);
  const ScalarField& m = rates->multiplier.values;

  MonotonicitySample out;
  out.time = state.time;
  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    const ScalarField& r = rates->rates[static_cast<std::size_t>(p)];
    out.gaussian_density += integrate(energy_density(u, eps), rho);
    out.rhs_bound += integrate(discrepancy_density(u, eps), rho) / (2.0 * tau);

    ScalarField primitive(grid);
    parallel_for(grid.cell_count(), [&](std::size_t i) {
      primitive[i] = constraint_primitive(model.kind, u[i]);
    });
    const VectorField grad_p = gradient(primitive);
    const VectorField grad_u = gradient(u);

    ScalarField time_part(grid);
    ScalarField space_part(grid);
    ScalarField square(grid);
    parallel_for(grid.cell_count(), [&](std::size_t i) {
      time_part[i] = m[i] * rho[i] * coupling_weight(model.kind, u[i]) * r[i] / kSigma;
      double gp = 0.0;
      double gu = 0.0;
      for (int k = 0; k < grid.dim(); ++k) {
        gp += grad_rho[k][i] * grad_p[k][i];
        gu += grad_rho[k][i] * grad_u[k][i];
      }
      space_part[i] = m[i] * gp / kSigma;
      if (rho[i] > 0.0) {
        const double q = r[i] + gu / rho[i];
        square[i] = -eps * rho[i] * q * q / kSigma;
      }
    });
    const double ta = integrate(time_part);
    const double tb = integrate(space_part);
    out.multiplier_cancellation += ta + tb;
    out.multiplier_scale += std::abs(ta) + std::abs(tb);
    out.square_term += integrate(square);
  }
  return out;
}

MonotonicityTrace monotonicity_trace(std::span<const MonotonicitySample> samples,
                                     const KernelSpec& spec, double tol_fd) {
  if (samples.size() < 3) throw InputError("monotonicity check needs at least three snapshots");
  const double step = samples[1].time - samples[0].time;
  if (!(step > 0.0)) throw InputError("snapshot times must be strictly increasing");
  for (std::size_t k = 1; k < samples.size(); ++k) {
    const double gap = samples[k].time - samples[k - 1].time;
    if (std::abs(gap - step) > 1e-9 * step) {
      throw InputError("snapshot times are not uniformly spaced");
    }
  }
  if (!(samples.back().time < spec.terminal_s)) {
    throw InputError("every snapshot time must lie below the terminal time s");
  }

  MonotonicityTrace tr;
  for (const auto& s : samples) {
    tr.times.push_back(s.time);
    tr.gaussian_density.push_back(s.gaussian_density);
    tr.rhs_bound.push_back(s.rhs_bound);
    tr.multiplier_cancellation.push_back(s.multiplier_cancellation);
    tr.multiplier_scale.push_back(s.multiplier_scale);
    tr.square_term.push_back(s.square_term);
  }
  const auto& g = tr.gaussian_density;
  const std::size_t n = samples.size();
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double d1 = (g[k + 1] - g[k - 1]) / (2.0 * step);
    tr.derivative.push_back(d1);
    tr.slack.push_back(d1 - tr.rhs_bound[k]);
    // Richardson estimate against the doubled stencil where it fits.
    double trunc = -1.0;
    if (k >= 2 && k + 2 < n) {
      const double d2 = (g[k + 2] - g[k - 2]) / (4.0 * step);
      trunc = std::abs(d2 - d1) / 3.0;
    }
    tr.fd_truncation.push_back(trunc);
  }
  // Edge samples borrow the nearest available estimate.
  double fallback = 0.0;
  for (double v : tr.fd_truncation) fallback = std::max(fallback, v);
  for (std::size_t k = 0; k < tr.fd_truncation.size(); ++k) {
    if (tr.fd_truncation[k] >= 0.0) continue;
    double best = -1.0;
    for (std::size_t off = 1; off < tr.fd_truncation.size() && best < 0.0; ++off) {
      if (k >= off && tr.fd_truncation[k - off] >= 0.0) best = tr.fd_truncation[k - off];
      if (k + off < tr.fd_truncation.size() && tr.fd_truncation[k + off] >= 0.0) {
        best = std::max(best, tr.fd_truncation[k + off]);
      }
    }
    tr.fd_truncation[k] = best >= 0.0 ? best : fallback;
  }
  apply_tolerance(tr, tol_fd);
  return tr;
}

void apply_tolerance(MonotonicityTrace& trace, double tol_fd) {
  trace.tolerance = tol_fd;
  trace.worst_excess = -std::numeric_limits<double>::infinity();
  for (double s : trace.slack) trace.worst_excess = std::max(trace.worst_excess, s - tol_fd);
  trace.pass = trace.worst_excess <= 0.0;
}

MonotonicityTrace monotonicity_check(std::span<const PhaseField> run, const ModelSpec& model,
                                     const KernelSpec& spec, double tol_fd) {
  if (run.size() < 3) throw InputError("monotonicity check needs at least three snapshots");
  std::vector<MonotonicitySample> samples;
  samples.reserve(run.size());
  for (const auto& state : run) {
    if (!(state.time < spec.terminal_s)) {
      throw InputError("every snapshot time must lie below the terminal time s");
    }
    samples.push_back(monotonicity_sample(state, model, spec));
  }
  return monotonicity_trace(samples, spec, tol_fd);
}

double calibrate_monotonicity_tolerance(const MonotonicityTrace& base,
                                        const MonotonicityTrace& half_dt,
                                        const MonotonicityTrace* coarse_h) {
  auto same_times = [&](const MonotonicityTrace& other) {
    if (other.slack.size() != base.slack.size()) return false;
    for (std::size_t k = 0; k < base.times.size(); ++k) {
      if (std::abs(other.times[k] - base.times[k]) > 1e-9 * (1.0 + std::abs(base.times[k]))) {
        return false;
      }
    }
    return true;
  };
  if (!same_times(half_dt)) throw InputError("dt-refinement trace samples different times");
  if (coarse_h != nullptr && !same_times(*coarse_h)) {
    throw InputError("h-refinement trace samples different times");
  }

  double tol_dt = 0.0;
  double tol_h = 0.0;
  double tol_trunc = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < base.slack.size(); ++k) {
    // First order in dt: error(dt) ~ 2 (slack(dt) - slack(dt/2)).
    tol_dt = std::max(tol_dt, 2.0 * std::abs(base.slack[k] - half_dt.slack[k]));
    // Second order in h: error(h) ~ (slack(2h) - slack(h)) / 3.
    if (coarse_h != nullptr) {
      tol_h = std::max(tol_h, std::abs(coarse_h->slack[k] - base.slack[k]) / 3.0);
    }
    tol_trunc = std::max(tol_trunc, base.fd_truncation[k]);
    scale = std::max(scale, std::abs(base.derivative[k]) + std::abs(base.rhs_bound[k + 1]));
  }
  return tol_dt + tol_h + tol_trunc + 1e-12 * scale;
}

SpaceTimeTestFunction unit_test_function() {
  return {"one", [](const Point&, double) { return 1.0; }, [](const Point&, double) { return 0.0; }};
}

SpaceTimeTestFunction bump_test_function(const Point& center, double radius, double growth) {
  if (!(radius > 0.0 && radius < 0.5)) throw ConfigError("bump radius must lie in (0, 0.5)");
  auto profile = [center, radius](const Point& x) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double dx = wrap(x[k] - center[k]);
      r2 += dx * dx;
    }
    const double q = 1.0 - r2 / (radius * radius);
    return q > 0.0 ? q * q * q * q : 0.0;
  };
  std::ostringstream name;
  name << "bump:" << center[0] << ',' << center[1] << ',' << radius;
  return {name.str(),
          [profile, growth](const Point& x, double t) { return (1.0 + growth * t) * profile(x); },
          [profile, growth](const Point& x, double) { return growth * profile(x); }};
}

SpaceTimeTestFunction parse_test_function(const std::string& text, int d) {
  if (text == "one") return unit_test_function();
  if (text.rfind("bump", 0) != 0) throw ConfigError("unknown test function '" + text + "'");
  // Unused axes sit at 0, matching GridSpec::position.
  Point center{};
  for (int k = 0; k < d && k < static_cast<int>(center.size()); ++k) center[static_cast<std::size_t>(k)] = 0.5;
  double radius = 0.45;
  if (text.size() > 4) {
    if (text[4] != ':') throw ConfigError("expected bump:x,y[,z],r in '" + text + "'");
    std::vector<double> values;
    std::stringstream ss(text.substr(5));
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
      if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
        throw ConfigError("bad number '" + item + "' in '" + text + "'");
      }
      values.push_back(v);
    }
    if (static_cast<int>(values.size()) != d + 1) {
      throw ConfigError("bump needs " + std::to_string(d) + " center coordinates and a radius");
    }
    for (int k = 0; k < d; ++k) center[static_cast<std::size_t>(k)] = values[static_cast<std::size_t>(k)];
    radius = values.back();
  }
  return bump_test_function(center, radius);
}

BrakkeBalance::BrakkeBalance(ModelSpec model, SpaceTimeTestFunction phi)
    : model_(model), phi_(std::move(phi)) {}

void BrakkeBalance::add_node(const PhaseField& state, const PhaseRates* rates) {
  std::optional<PhaseRates> own;
  if (rates == nullptr) {
    own = rhs(state, model_);
    rates = &*own;
  }
  const GridSpec& grid = state.spec;
  const double t = state.time;
  const double eps = model_.eps;
  const ScalarField phi =
      ScalarField::sample(grid, [&](const Point& x) { return phi_.value(x, t); });
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i] < 0.0) {
      throw InputError("Brakke test function '" + phi_.name + "' is negative at cell " +
                       std::to_string(i));
    }
  }
  const ScalarField phi_t =
      ScalarField::sample(grid, [&](const Point& x) { return phi_.time_derivative(x, t); });
  const ScalarField& m = rates->multiplier.values;

  double mass = 0.0;
  ScalarField integrand(grid);
  ScalarField power(grid);
  for (int p = 0; p < state.n_phases(); ++p) {
    const ScalarField& u = state[p];
    const ScalarField& r = rates->rates[static_cast<std::size_t>(p)];
    const ScalarField e = energy_density(u, eps);
    mass += integrate(e, phi);
    const ScalarField cross = grad_dot(phi, u);
    parallel_for(grid.cell_count(), [&](std::size_t i) {
      integrand[i] += phi_t[i] * e[i] -
                      eps * (phi[i] * r[i] * r[i] + cross[i] * r[i]) / kSigma;
      power[i] += phi[i] * m[i] * coupling_weight(model_.kind, u[i]) * r[i] / kSigma;
    });
  }
  const double value = integrate(integrand);
  const double pw = integrate(power);

  if (!has_node_) {
    has_node_ = true;
    open_t0_ = t;
    open_mass0_ = mass;
  } else {
    if (!(t > last_time_)) throw InputError("Brakke nodes must advance in time");
    const double dt = t - last_time_;
    open_integral_ += 0.5 * dt * (last_integrand_ + value);
    open_power_ += 0.5 * dt * (last_power_ + pw);
  }
  last_time_ = t;
  last_mass_ = mass;
  last_integrand_ = value;
  last_power_ = pw;
}

void BrakkeBalance::close_interval() {
  if (!has_node_ || !(last_time_ > open_t0_)) return;
  BrakkeInterval iv;
  iv.t0 = open_t0_;
  iv.t1 = last_time_;
  iv.lhs = last_mass_ - open_mass0_;
  iv.rhs = open_integral_;
  iv.residual = iv.lhs - iv.rhs;
  iv.multiplier_power = open_power_;
  intervals_.push_back(iv);
  open_t0_ = last_time_;
  open_mass0_ = last_mass_;
  open_integral_ = 0.0;
  open_power_ = 0.0;
}

double BrakkeBalance::total_residual() const {
  double lhs = 0.0;
  double rhs_sum = 0.0;
  for (const auto& iv : intervals_) {
    lhs += iv.lhs;
    rhs_sum += iv.rhs;
  }
  return lhs - rhs_sum;
}

std::vector<BrakkeInterval> brakke_residual(std::span<const PhaseField> run,
                                            const ModelSpec& model,
                                            const SpaceTimeTestFunction& phi) {
  if (run.size() < 2) throw InputError("Brakke balance needs at least two snapshots");
  BrakkeBalance balance(model, phi);
  for (const auto& state : run) {
    balance.add_node(state);
    balance.close_interval();
  }
  return balance.intervals();
}

}  // namespace mpfc
