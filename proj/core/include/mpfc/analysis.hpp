#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpfc/dynamics.hpp"
#include "mpfc/grid.hpp"

namespace mpfc {

// Backward heat kernel with the (d-1)-dimensional normalisation
//   rho(x, t) = (4 pi (s - t))^{-(d-1)/2} exp(-|x - y|^2 / (4 (s - t))),
// extended periodically by summing over the integer lattice of images.

struct KernelSpec {
  Point center{};
  double terminal_s = 0.0;
  /// Lattice radius per axis; negative picks the smallest radius whose
  /// omitted image mass is below 1e-14.
  int image_truncation = -1;
};

/// Smallest per-axis lattice radius whose omitted tail is below 1e-14 for
/// kernel variance 2 tau.
int automatic_image_radius(double tau);

/// Throws DomainError unless t < terminal_s.
double heat_kernel_eval(const Point& x, double t, const KernelSpec& spec, int d);

ScalarField heat_kernel_field(const GridSpec& grid, double t, const KernelSpec& spec);
/// Analytic gradient: sum over images of -rho (x - y + z) / (2 (s - t)).
VectorField heat_kernel_gradient(const GridSpec& grid, double t, const KernelSpec& spec);

/// int rho(., t) d mu_t^eps, with t = state.time.
double gaussian_density(const PhaseField& state, double eps, const KernelSpec& spec);

struct MonotonicitySample {
  double time = 0.0;
  double gaussian_density = 0.0;
  /// (1 / (2 (s - t))) int rho d xi_t^eps, summed over phases (signed).
  double rhs_bound = 0.0;
  /// sum_i sigma^{-1} int m (rho d_t P(u_i) + grad rho . grad P(u_i)) dx with
  /// P' the coupling weight; vanishes when sum_i P(u_i) is conserved.
  double multiplier_cancellation = 0.0;
  /// Sum of the magnitudes of the individual terms above.
  double multiplier_scale = 0.0;
  /// -sigma^{-1} sum_i int eps rho (u_t,i + grad u_i . grad rho / rho)^2 dx <= 0.
  double square_term = 0.0;
};

/// Evaluates every monotonicity ingredient at one state; u_t from rhs().
MonotonicitySample monotonicity_sample(const PhaseField& state, const ModelSpec& model,
                                       const KernelSpec& spec, const PhaseRates* rates = nullptr);

struct MonotonicityTrace {
  std::vector<double> times;
  std::vector<double> gaussian_density;
  std::vector<double> rhs_bound;
  std::vector<double> multiplier_cancellation;
  std::vector<double> multiplier_scale;
  std::vector<double> square_term;
  /// Centered differences at interior samples; index k refers to times[k + 1].
  std::vector<double> derivative;
  /// derivative - rhs_bound at interior samples.
  std::vector<double> slack;
  /// Estimated truncation of the centered difference at interior samples.
  std::vector<double> fd_truncation;
  double tolerance = 0.0;
  /// max_k (slack_k - tolerance); <= 0 on PASS.
  double worst_excess = 0.0;
  bool pass = false;
};

/// Builds the trace from samples at uniformly spaced times. Throws InputError
/// for fewer than three samples, non-uniform spacing or times not below s.
MonotonicityTrace monotonicity_trace(std::span<const MonotonicitySample> samples,
                                     const KernelSpec& spec, double tol_fd);

MonotonicityTrace monotonicity_check(std::span<const PhaseField> run, const ModelSpec& model,
                                     const KernelSpec& spec, double tol_fd);

/// Calibrated tolerance C_fd dt + C_h h^2 + centered-difference truncation.
/// `half_dt` must sample the same times with dt halved (first order in dt);
/// `coarse_h`, when given, the same times with n halved (second order in h).
double calibrate_monotonicity_tolerance(const MonotonicityTrace& base,
                                        const MonotonicityTrace& half_dt,
                                        const MonotonicityTrace* coarse_h);

/// Re-evaluates the verdict of `trace` against `tol_fd`.
void apply_tolerance(MonotonicityTrace& trace, double tol_fd);

// Brakke balance at fixed eps:
//   d/dt int phi d mu = int phi_t d mu
//                       + sigma^{-1} int (-eps phi |u_t|^2 - eps sum_i grad phi . grad u_i u_t,i) dx.
// grad phi . grad u_i uses the Dirichlet-form pairing grad_dot(), which makes
// the bracket the exact time derivative of the discrete measure.

struct SpaceTimeTestFunction {
  std::string name;
  std::function<double(const Point&, double)> value;
  std::function<double(const Point&, double)> time_derivative;
};

SpaceTimeTestFunction unit_test_function();
/// (1 + growth t) (1 - |x - c|^2 / R^2)^4 inside the periodic ball, 0 outside.
SpaceTimeTestFunction bump_test_function(const Point& center, double radius, double growth = 1.0);
/// Parses "one" or "bump[:x,y[,z],r]"; throws ConfigError.
SpaceTimeTestFunction parse_test_function(const std::string& text, int d);

struct BrakkeInterval {
  double t0 = 0.0;
  double t1 = 0.0;
  double lhs = 0.0;  // mu(phi) at t1 minus mu(phi) at t0
  double rhs = 0.0;  // time integral of the bracket
  double residual = 0.0;
  /// sigma^{-1} int phi m sum_i a(u_i) u_t,i integrated over the interval.
  /// Not part of the residual; nonzero only for WeightedSum.
  double multiplier_power = 0.0;
};

/// Online accumulator: feed every time step as a quadrature node and close
/// intervals where the balance should be reported.
class BrakkeBalance {
 public:
  BrakkeBalance(ModelSpec model, SpaceTimeTestFunction phi);

  /// Throws InputError if phi is negative anywhere at this time.
  void add_node(const PhaseField& state, const PhaseRates* rates = nullptr);
  /// Ends the open interval at the last node; no-op if it has zero length.
  void close_interval();

  const std::vector<BrakkeInterval>& intervals() const noexcept { return intervals_; }
  double total_residual() const;
  const SpaceTimeTestFunction& test_function() const noexcept { return phi_; }

 private:
  ModelSpec model_;
  SpaceTimeTestFunction phi_;
  std::vector<BrakkeInterval> intervals_;
  bool has_node_ = false;
  double last_time_ = 0.0;
  double last_mass_ = 0.0;
  double last_integrand_ = 0.0;
  double last_power_ = 0.0;
  double open_t0_ = 0.0;
  double open_mass0_ = 0.0;
  double open_integral_ = 0.0;
  double open_power_ = 0.0;
};

/// Offline variant: each pair of consecutive states is one interval with the
/// trapezoid over its two endpoints. Its residual therefore includes the
/// quadrature error of the snapshot spacing; feed BrakkeBalance every step to
/// isolate the time-stepping error.
std::vector<BrakkeInterval> brakke_residual(std::span<const PhaseField> run,
                                            const ModelSpec& model,
                                            const SpaceTimeTestFunction& phi);

}  // namespace mpfc
