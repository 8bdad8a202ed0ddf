#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpfc/grid.hpp"

namespace mpfc {

/// The four constrained Allen-Cahn systems.
///
///  - SphereLL:       eps u_t = eps Lap u - W'(u)/eps + lambda u,        sum u_i^2 = 1
///  - WeightedSum:    eps u_t = ... + Lambda sqrt(2W(u_i)),              sum u_i = 1
///  - MeanShift:      eps u_t = ... + Lambda_1,                          sum u_i = 1
///  - WeightedSquare: eps u_t = ... + Lambda_2 sqrt(2W(u_i)),            sum k(u_i) = 1/6
///
/// SphereLL is the Lagrange-multiplier form of the Landau-Lifshitz flow
/// u x (u x grad E); the two agree whenever |u| = 1, so only this form is
/// integrated.
enum class ModelKind { SphereLL, WeightedSum, MeanShift, WeightedSquare };

std::string_view to_string(ModelKind kind) noexcept;
/// Throws ConfigError for unknown names.
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::MeanShift;
  double eps = 1.0 / 32.0;
  int n_phases = 2;
  /// Quotient multipliers are zeroed where their denominator drops below this.
  double denom_floor = 1e-10;

  /// Throws ConfigError unless eps in (0, 1), n_phases >= 2, denom_floor >= 0.
  void validate() const;
  /// SphereLL with N != 3 has no cross-product reading; it is still integrated.
  bool formal() const noexcept { return kind == ModelKind::SphereLL && n_phases != 3; }
};

struct PhaseField {
  GridSpec spec;
  std::vector<ScalarField> phases;
  double time = 0.0;

  PhaseField() = default;
  PhaseField(const GridSpec& g, int n_phases, double t = 0.0)
      : spec(g), phases(static_cast<std::size_t>(n_phases), ScalarField(g)), time(t) {}

  int n_phases() const noexcept { return static_cast<int>(phases.size()); }
  ScalarField& operator[](int i) noexcept { return phases[static_cast<std::size_t>(i)]; }
  const ScalarField& operator[](int i) const noexcept { return phases[static_cast<std::size_t>(i)]; }
  bool all_finite() const noexcept;
};

struct MultiplierField {
  ScalarField values;
  double floored_fraction = 0.0;
  /// Set when the input state was more than 1e-3 away from its constraint.
  bool off_manifold = false;
};

/// Weight a_i(u) multiplying the multiplier in phase i's equation.
double coupling_weight(ModelKind kind, double u) noexcept;
/// Primitive P of coupling_weight; sum_i P(u_i) is what the model conserves.
double constraint_primitive(ModelKind kind, double u) noexcept;
/// Value of sum_i P(u_i) on the constraint manifold.
double constraint_target(ModelKind kind) noexcept;

/// -eps Lap u + W'(u)/eps.
ScalarField chemical_potential(const ScalarField& u, double eps);

MultiplierField compute_multiplier(const PhaseField& state, const ModelSpec& model);

/// Time derivative of every phase together with the pieces it was built from.
struct PhaseRates {
  std::vector<ScalarField> rates;
  std::vector<ScalarField> chemical;
  std::vector<ScalarField> laplacians;
  MultiplierField multiplier;
};

/// u_t = Lap u - W'(u)/eps^2 + m a(u)/eps (the eps-scaled equation divided by eps).
PhaseRates rhs(const PhaseField& state, const ModelSpec& model);

/// Max-norm distance of the state from the model's constraint manifold.
double constraint_violation(const PhaseField& state, const ModelSpec& model);

/// Pointwise projection back onto the constraint manifold.
PhaseField project_constraint(const PhaseField& state, const ModelSpec& model);

enum class Scheme { ExplicitEuler, IMEX };
enum class Projection { Off, EveryStep };

std::string_view to_string(Scheme s) noexcept;
std::string_view to_string(Projection p) noexcept;
Scheme parse_scheme(std::string_view name);
Projection parse_projection(std::string_view name);

/// Stability policy: ExplicitEuler needs dt <= min(h^2/(4d), eps^2/10);
/// IMEX (diffusion implicit, reaction explicit) needs dt <= eps^2/4.
void check_stability(const GridSpec& grid, const ModelSpec& model, double dt, Scheme scheme);

/// Rejects raw indicator data: any neighbour jump above 0.5 throws ScenarioError.
void require_smooth(const PhaseField& state);

/// sigma^{-1} int eps |u_t|^2 dx.
double dissipation_rate(const PhaseRates& rates, double eps);

/// sigma^{-1} int sum_i m a(u_i) u_t,i dx: power of the multiplier term. It
/// vanishes identically for SphereLL (on the sphere), MeanShift and
/// WeightedSquare, but not for WeightedSum.
double coupling_power(const PhaseField& state, const PhaseRates& rates, const ModelSpec& model);

struct StepInfo {
  long step = 0;
  double dissipation_rate = 0.0;
  double coupling_power = 0.0;
  double floored_fraction = 0.0;
};

/// Time integrator for one (grid, model, dt, scheme) configuration.
class Stepper {
 public:
  /// Throws ConfigError on a stability-policy violation.
  Stepper(const GridSpec& grid, const ModelSpec& model, double dt, Scheme scheme,
          Projection projection);

  /// Advances by dt; `rates` must equal rhs(state, model). Throws BlowUpError
  /// if the new state is not finite.
  PhaseField advance(const PhaseField& state, const PhaseRates& rates);
  PhaseField advance(const PhaseField& state);

  const StepInfo& last() const noexcept { return last_; }
  long steps_taken() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  const ModelSpec& model() const noexcept { return model_; }

 private:
  GridSpec grid_;
  ModelSpec model_;
  double dt_;
  Scheme scheme_;
  Projection projection_;
  std::optional<HelmholtzSolver> solver_;
  long steps_ = 0;
  StepInfo last_;
};

/// Single step without reusing solver state.
PhaseField step(const PhaseField& state, const ModelSpec& model, double dt, Scheme scheme,
                Projection projection = Projection::Off, StepInfo* info = nullptr);

}  // namespace mpfc
