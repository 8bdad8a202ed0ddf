#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mpfc/dynamics.hpp"
#include "mpfc/error.hpp"
#include "mpfc/potential.hpp"
#include "test_support.hpp"

using namespace mpfc;
using mpfc::testing::random_smooth;
using mpfc::testing::strip_profile;
using mpfc::testing::two_phase;

namespace {

ModelSpec make_model(ModelKind kind, double eps, int n_phases = 2) {
  ModelSpec m;
  m.kind = kind;
  m.eps = eps;
  m.n_phases = n_phases;
  return m;
}

PhaseField constant_state(const GridSpec& g, std::initializer_list<double> values) {
  PhaseField s(g, static_cast<int>(values.size()));
  int p = 0;
  for (double v : values) s[p++] = ScalarField(g, v);
  return s;
}

// Smooth state near the manifold of each model, then projected onto it.
PhaseField smooth_state(const GridSpec& g, const ModelSpec& m, std::uint64_t seed) {
  PhaseField s(g, m.n_phases);
  for (int p = 0; p < m.n_phases; ++p) {
    const double base = m.kind == ModelKind::SphereLL ? 1.0 / std::sqrt(m.n_phases) : 1.0 / m.n_phases;
    s[p] = random_smooth(g, seed + static_cast<std::uint64_t>(p), base, 0.3, 3);
  }
  return project_constraint(s, m);
}

double max_diff(const PhaseField& a, const PhaseField& b) {
  double m = 0.0;
  for (int p = 0; p < a.n_phases(); ++p) {
    for (std::size_t i = 0; i < a[p].size(); ++i) m = std::max(m, std::abs(a[p][i] - b[p][i]));
  }
  return m;
}

double profile_chemical_residual(int n, double eps) {
  // The strip profile is not C1 across the wrap at x = 0, so only the interface bands count.
  const GridSpec g(1, n);
  const ScalarField mu = chemical_potential(strip_profile(g, eps), eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (std::abs(g.position(i)[0] - 0.5) <= 0.4) worst = std::max(worst, std::abs(mu[i]));
  }
  return worst;
}

}  // namespace

TEST(ModelSpec, Validation) {
  EXPECT_NO_THROW(make_model(ModelKind::SphereLL, 0.1, 3).validate());
  EXPECT_THROW(make_model(ModelKind::SphereLL, 0.0).validate(), ConfigError);
  EXPECT_THROW(make_model(ModelKind::SphereLL, 1.0).validate(), ConfigError);
  EXPECT_THROW(make_model(ModelKind::MeanShift, 0.1, 1).validate(), ConfigError);
  ModelSpec m = make_model(ModelKind::WeightedSum, 0.1);
  m.denom_floor = -1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_TRUE(make_model(ModelKind::SphereLL, 0.1, 2).formal());
  EXPECT_FALSE(make_model(ModelKind::SphereLL, 0.1, 3).formal());
  EXPECT_FALSE(make_model(ModelKind::MeanShift, 0.1, 2).formal());
}

TEST(ModelSpec, Names) {
  for (ModelKind k : {ModelKind::SphereLL, ModelKind::WeightedSum, ModelKind::MeanShift,
                      ModelKind::WeightedSquare}) {
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_model_kind("ac"), ModelKind::SphereLL);
  EXPECT_EQ(parse_model_kind("ac3"), ModelKind::WeightedSum);
  EXPECT_EQ(parse_model_kind("ac5"), ModelKind::MeanShift);
  EXPECT_EQ(parse_model_kind("ac4"), ModelKind::WeightedSquare);
  EXPECT_THROW(parse_model_kind("ac2"), ConfigError);
  EXPECT_EQ(parse_scheme("IMEX"), Scheme::IMEX);
  EXPECT_EQ(parse_scheme(to_string(Scheme::ExplicitEuler)), Scheme::ExplicitEuler);
  EXPECT_THROW(parse_scheme("rk4"), ConfigError);
  EXPECT_EQ(parse_projection(to_string(Projection::Off)), Projection::Off);
  EXPECT_EQ(parse_projection("every_step"), Projection::EveryStep);
  EXPECT_THROW(parse_projection("sometimes"), ConfigError);
}

TEST(ChemicalPotential, WellsAndMidpointAreEquilibria) {
  const GridSpec g(2, 16);
  for (double c : {0.0, 1.0, 0.5}) {
    EXPECT_EQ(chemical_potential(ScalarField(g, c), 0.1).max_abs(), 0.0) << c;
  }
}

TEST(ChemicalPotential, ProfileResidualIsSecondOrder) {
  // eps held fixed: the stencil error of -eps q'' + W'(q)/eps is eps h^2 q''''/12 ~ h^2/eps^3.
  const double eps = 1.0 / 32.0;
  const double r256 = profile_chemical_residual(256, eps);
  const double r512 = profile_chemical_residual(512, eps);
  const double r1024 = profile_chemical_residual(1024, eps);
  EXPECT_GE(r256 / r512, 3.5);
  EXPECT_LE(r256 / r512, 4.5);
  EXPECT_GE(r512 / r1024, 3.5);
  EXPECT_LE(r512 / r1024, 4.5);
}

TEST(ChemicalPotential, ProfileResidualWithFixedRatioDoesNotDecay) {
  // With eps = 8h the residual scales like h^2/eps^3 ~ 1/h and grows.
  const double r256 = profile_chemical_residual(256, 8.0 / 256);
  const double r512 = profile_chemical_residual(512, 8.0 / 512);
  EXPECT_NEAR(r512 / r256, 2.0, 0.2);
}

TEST(Multiplier, SphereEquilibriumVanishes) {
  const GridSpec g(2, 16);
  const PhaseField s = constant_state(g, {0.0, 0.0, 1.0});
  const MultiplierField m = compute_multiplier(s, make_model(ModelKind::SphereLL, 0.1, 3));
  EXPECT_EQ(m.values.max_abs(), 0.0);
  EXPECT_FALSE(m.off_manifold);
}

TEST(Multiplier, MeanShiftSymmetricPoint) {
  const GridSpec g(2, 16);
  const double eps = 0.1;
  {
    const MultiplierField m = compute_multiplier(constant_state(g, {0.5, 0.5}),
                                                 make_model(ModelKind::MeanShift, eps));
    EXPECT_EQ(m.values.max_abs(), 0.0);
  }
  {
    const double v = 1.0 / 3.0;
    const MultiplierField m = compute_multiplier(constant_state(g, {v, v, v}),
                                                 make_model(ModelKind::MeanShift, eps, 3));
    for (double x : m.values.values()) EXPECT_NEAR(x, w_prime(v) / eps, 1e-14);
  }
}

TEST(Multiplier, WeightedSumProfilePairCancels) {
  const GridSpec g(1, 256);
  const double eps = 8.0 / 256;
  const PhaseField s = two_phase(strip_profile(g, eps));
  const ModelSpec model = make_model(ModelKind::WeightedSum, eps);
  const MultiplierField m = compute_multiplier(s, model);
  // mu(1 - q) = -mu(q) term by term, so the numerator vanishes up to rounding.
  double num = 0.0;
  double scale = 0.0;
  const ScalarField mu0 = chemical_potential(s[0], eps);
  for (std::size_t i = 0; i < s[0].size(); ++i) {
    const double den = sqrt_two_w(s[0][i]) + sqrt_two_w(s[1][i]);
    num = std::max(num, std::abs(m.values[i] * den));
    scale = std::max(scale, std::abs(mu0[i]));
  }
  EXPECT_LE(num, 1e-12 * (1.0 + scale));
  EXPECT_GE(m.floored_fraction, 0.0);
  EXPECT_LE(m.floored_fraction, 1.0);
}

TEST(Multiplier, FlooringAndDegenerateDenominator) {
  const GridSpec g(1, 16);
  PhaseField s = constant_state(g, {1.0, 0.0});
  s[0][3] = 0.6;
  s[1][3] = 0.4;
  ModelSpec model = make_model(ModelKind::WeightedSum, 0.2);
  const MultiplierField m = compute_multiplier(s, model);
  EXPECT_DOUBLE_EQ(m.floored_fraction, 15.0 / 16.0);
  EXPECT_EQ(m.values[0], 0.0);
  model.denom_floor = 0.0;
  try {
    compute_multiplier(s, model);
    FAIL() << "expected DegenerateDenominatorError";
  } catch (const DegenerateDenominatorError& e) {
    EXPECT_EQ(e.cell(), 0u);
  }
  model.kind = ModelKind::WeightedSquare;
  EXPECT_THROW(compute_multiplier(s, model), DegenerateDenominatorError);
}

TEST(Multiplier, OffManifoldFlag) {
  const GridSpec g(1, 16);
  const MultiplierField m =
      compute_multiplier(constant_state(g, {0.6, 0.6}), make_model(ModelKind::MeanShift, 0.1));
  EXPECT_TRUE(m.off_manifold);
}

TEST(Rhs, EquilibriaHaveZeroRate) {
  const GridSpec g(2, 16);
  const PhaseField sphere = constant_state(g, {0.0, 1.0, 0.0});
  const PhaseField sum = constant_state(g, {1.0, 0.0, 0.0});
  for (ModelKind k : {ModelKind::SphereLL, ModelKind::WeightedSum, ModelKind::MeanShift,
                      ModelKind::WeightedSquare}) {
    const PhaseField& s = k == ModelKind::SphereLL ? sphere : sum;
    const PhaseRates r = rhs(s, make_model(k, 0.1, 3));
    for (const auto& rate : r.rates) EXPECT_EQ(rate.max_abs(), 0.0) << to_string(k);
  }
}

TEST(Rhs, SphereOrthogonality) {
  const GridSpec g(2, 32);
  for (int n_phases : {2, 3, 4}) {
    const ModelSpec model = make_model(ModelKind::SphereLL, 0.1, n_phases);
    const PhaseField s = smooth_state(g, model, 100 + n_phases);
    ASSERT_LE(constraint_violation(s, model), 1e-14);
    const PhaseRates r = rhs(s, model);
    double worst = 0.0;
    for (std::size_t i = 0; i < s[0].size(); ++i) {
      double dot = 0.0;
      for (int p = 0; p < n_phases; ++p) dot += s[p][i] * r.rates[static_cast<std::size_t>(p)][i];
      worst = std::max(worst, std::abs(dot));
    }
    EXPECT_LE(worst, 1e-12) << "N = " << n_phases;
  }
}

TEST(Rhs, MeanShiftSumVanishes) {
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::MeanShift, 0.1, 3);
  const PhaseField s = smooth_state(g, model, 5);
  const PhaseRates r = rhs(s, model);
  double scale = 0.0;
  for (const auto& rate : r.rates) scale = std::max(scale, rate.max_abs());
  for (std::size_t i = 0; i < s[0].size(); ++i) {
    double sum = 0.0;
    for (const auto& rate : r.rates) sum += rate[i];
    EXPECT_LE(std::abs(sum), 1e-14 * (1.0 + scale));
  }
}

TEST(Rhs, WeightedSquareTangency) {
  // sum_i sqrt(2W(u_i)) u_t,i = 0: the k-sum is stationary along the flow.
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::WeightedSquare, 0.1, 3);
  const PhaseField s = smooth_state(g, model, 9);
  const PhaseRates r = rhs(s, model);
  double scale = 0.0;
  for (const auto& rate : r.rates) scale = std::max(scale, rate.max_abs());
  for (std::size_t i = 0; i < s[0].size(); ++i) {
    double dot = 0.0;
    for (int p = 0; p < 3; ++p) dot += sqrt_two_w(s[p][i]) * r.rates[static_cast<std::size_t>(p)][i];
    EXPECT_LE(std::abs(dot), 1e-13 * (1.0 + scale));
  }
}

TEST(Rhs, CouplingPowerVanishesExceptWeightedSum) {
  const GridSpec g(2, 32);
  for (ModelKind k : {ModelKind::SphereLL, ModelKind::MeanShift, ModelKind::WeightedSquare}) {
    const ModelSpec model = make_model(k, 0.1, 3);
    const PhaseField s = smooth_state(g, model, 21);
    const PhaseRates r = rhs(s, model);
    EXPECT_LE(std::abs(coupling_power(s, r, model)), 1e-10 * (1.0 + dissipation_rate(r, 0.1)))
        << to_string(k);
  }
}

TEST(Step, EquilibriumUnchanged) {
  const GridSpec g(2, 16);
  const PhaseField sphere = constant_state(g, {0.0, 0.0, 1.0});
  const PhaseField sum = constant_state(g, {0.0, 1.0, 0.0});
  for (Scheme scheme : {Scheme::ExplicitEuler, Scheme::IMEX}) {
    for (ModelKind k : {ModelKind::SphereLL, ModelKind::WeightedSum, ModelKind::MeanShift,
                        ModelKind::WeightedSquare}) {
      const PhaseField& s = k == ModelKind::SphereLL ? sphere : sum;
      const PhaseField next = step(s, make_model(k, 0.1, 3), 1e-4, scheme, Projection::EveryStep);
      EXPECT_LE(max_diff(s, next), 1e-15);
      EXPECT_DOUBLE_EQ(next.time, 1e-4);
    }
  }
}

TEST(Step, MidpointStateUnchanged) {
  const GridSpec g(2, 16);
  const PhaseField s = constant_state(g, {0.5, 0.5});
  const PhaseField next = step(s, make_model(ModelKind::MeanShift, 0.1), 1e-4, Scheme::ExplicitEuler);
  EXPECT_EQ(max_diff(s, next), 0.0);
}

TEST(Step, ImexAgreesWithEulerToSecondOrder) {
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::MeanShift, 0.1);
  const PhaseField s = smooth_state(g, model, 77);
  auto diff = [&](double dt) {
    return max_diff(step(s, model, dt, Scheme::IMEX), step(s, model, dt, Scheme::ExplicitEuler));
  };
  const double d1 = diff(1e-4);
  const double d2 = diff(5e-5);
  const double d3 = diff(2.5e-5);
  EXPECT_GE(d1 / d2, 3.0);
  EXPECT_LE(d1 / d2, 5.0);
  EXPECT_GE(d2 / d3, 3.0);
  EXPECT_LE(d2 / d3, 5.0);
}

TEST(Step, StabilityPolicy) {
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::MeanShift, 0.1);
  const PhaseField s = constant_state(g, {0.5, 0.5});
  const double h = g.spacing();
  EXPECT_NO_THROW(check_stability(g, model, h * h / 8.0, Scheme::ExplicitEuler));
  EXPECT_THROW(step(s, model, h * h / 4.0, Scheme::ExplicitEuler), ConfigError);
  EXPECT_THROW(step(s, model, 0.0, Scheme::IMEX), ConfigError);
  EXPECT_NO_THROW(check_stability(g, model, 0.0025, Scheme::IMEX));
  EXPECT_THROW(check_stability(g, model, 0.0026, Scheme::IMEX), ConfigError);
}

TEST(Step, BlowUpReportsStepIndex) {
  const GridSpec g(1, 16);
  const ModelSpec model = make_model(ModelKind::MeanShift, 0.5);
  PhaseField s = constant_state(g, {0.5, 0.5});
  s[0][4] = 1e30;
  s[1][4] = 1.0 - 1e30;
  Stepper stepper(g, model, 5e-4, Scheme::ExplicitEuler, Projection::Off);
  long attempts = 0;
  try {
    for (; attempts < 50; ++attempts) s = stepper.advance(s);
    FAIL() << "state never blew up";
  } catch (const BlowUpError& e) {
    EXPECT_EQ(e.step(), attempts + 1);
    EXPECT_GE(e.step(), 1);
  }
}

TEST(Step, MeanShiftConservesMassWithoutProjection) {
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::MeanShift, 0.1, 3);
  PhaseField s = smooth_state(g, model, 3);
  auto total = [](const PhaseField& st) {
    double v = 0.0;
    for (const auto& u : st.phases) v += integrate(u);
    return v;
  };
  const double m0 = total(s);
  Stepper stepper(g, model, 1e-4, Scheme::IMEX, Projection::Off);
  for (int k = 0; k < 50; ++k) s = stepper.advance(s);
  EXPECT_NEAR(total(s), m0, 1e-12);
  EXPECT_LE(constraint_violation(s, model), 1e-12);
}

TEST(Projection, SphereRadial) {
  const GridSpec g(1, 8);
  const ModelSpec model = make_model(ModelKind::SphereLL, 0.1, 3);
  const PhaseField out = project_constraint(constant_state(g, {0.0, 0.0, 2.0}), model);
  EXPECT_EQ(out[0][0], 0.0);
  EXPECT_EQ(out[2][5], 1.0);
  PhaseField zero = constant_state(g, {1.0, 0.0, 0.0});
  zero[0][6] = 0.0;
  try {
    project_constraint(zero, model);
    FAIL() << "expected ProjectionError";
  } catch (const ProjectionError& e) {
    EXPECT_EQ(e.cell(), 6u);
  }
}

TEST(Projection, MeanShiftFormula) {
  const GridSpec g(1, 8);
  for (ModelKind k : {ModelKind::MeanShift, ModelKind::WeightedSum}) {
    const PhaseField out = project_constraint(constant_state(g, {0.5, 0.6}), make_model(k, 0.1));
    EXPECT_NEAR(out[0][0], 0.45, 1e-15);
    EXPECT_NEAR(out[1][0], 0.55, 1e-15);
    EXPECT_NEAR(out[0][0] + out[1][0], 1.0, 1e-15);
  }
}

TEST(Projection, WeightedSquareBisection) {
  const GridSpec g(2, 32);
  const ModelSpec model = make_model(ModelKind::WeightedSquare, 0.1, 3);
  PhaseField s(g, 3);
  for (int p = 0; p < 3; ++p) s[p] = random_smooth(g, 50 + p, p == 0 ? 0.8 : 0.1, 0.15, 3);
  const PhaseField out = project_constraint(s, model);
  EXPECT_LE(constraint_violation(out, model), 1e-12);
  // The correction is a common shift per cell.
  for (std::size_t i = 0; i < s[0].size(); i += 37) {
    EXPECT_NEAR(out[0][i] - s[0][i], out[2][i] - s[2][i], 1e-15);
  }
}

TEST(Projection, IdempotentOnManifold) {
  const GridSpec g(2, 16);
  for (ModelKind k : {ModelKind::SphereLL, ModelKind::WeightedSum, ModelKind::MeanShift,
                      ModelKind::WeightedSquare}) {
    const ModelSpec model = make_model(k, 0.1, 3);
    const PhaseField s = smooth_state(g, model, 4);
    EXPECT_LE(max_diff(s, project_constraint(s, model)), 1e-14) << to_string(k);
  }
}

TEST(Smoothness, RejectsIndicatorData) {
  const GridSpec g(2, 16);
  PhaseField s = constant_state(g, {1.0, 0.0});
  EXPECT_NO_THROW(require_smooth(s));
  s[0][10] = 0.0;
  s[1][10] = 1.0;
  EXPECT_THROW(require_smooth(s), ScenarioError);
}
