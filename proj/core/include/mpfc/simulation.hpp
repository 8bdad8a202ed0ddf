#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpfc/diagnostics.hpp"
#include "mpfc/dynamics.hpp"
#include "mpfc/scenario.hpp"

namespace mpfc {

struct SnapshotRef {
  double time = 0.0;
  std::filesystem::path path;
};

/// Per-step energy rise allowed between samples, relative to the initial energy.
inline constexpr double kEnergyIncreaseTolerance = 1e-8;
/// Bound on the constraint violation when projecting every step.
inline constexpr double kProjectedConstraintTolerance = 1e-10;

struct RunRecord {
  Scenario scenario;
  std::vector<MeasureSample> samples;
  std::vector<SnapshotRef> snapshots;
  /// "energy_nonincreasing" always; "constraint" when projecting every step.
  std::map<std::string, bool> verdicts;
  /// Sampled states, filled only with RunOptions::keep_states.
  std::vector<PhaseField> states;

  long steps = 0;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  /// Trapezoid rule over every step of sigma^{-1} int eps |u_t|^2 dx.
  double dissipation_integral = 0.0;
  /// energy_final - energy_initial + dissipation_integral.
  double dissipation_residual = 0.0;
  /// Trapezoid integral of coupling_power(); nonzero only for WeightedSum.
  double coupling_power_integral = 0.0;
  /// Max over every step (including t = 0) of constraint_violation().
  double max_constraint_violation = 0.0;
  /// Largest energy increase between consecutive samples divided by the
  /// number of steps between them (negative when energy always decreases).
  double max_energy_increase_per_step = 0.0;
  double max_floored_fraction = 0.0;
};

struct RunOptions {
  /// When non-empty, sampled states go to <dir>/snapshots/ and a blow-up
  /// leaves <dir>/last_good.mpfc behind.
  std::filesystem::path output_dir;
  bool keep_states = false;
  /// Called at every time level (before stepping) with the rates used for it.
  std::function<void(const PhaseField&, const PhaseRates&, bool is_sample)> observer;
};

/// Integrates the scenario to t_end. Deterministic for a given scenario,
/// independent of the thread count. Throws BlowUpError (after persisting the
/// last good state) or ConfigError.
RunRecord run_simulation(const Scenario& s, const RunOptions& options = {});

std::vector<std::string> timeseries_header(int n_phases);
/// CSV: t, energy_total, energy_i, discrepancy_abs, discrepancy_i, bv_proxy_i,
/// assumption_a_residual, dissipation_rate, constraint_drift (%.17g).
void emit_timeseries(const RunRecord& record, const std::filesystem::path& path);

/// Least-squares slope of int u_phase dx over samples with t in [t0, t1].
double volume_slope(const std::vector<MeasureSample>& samples, int phase, double t0, double t1);
/// First sample time at which max u_phase < 1/2, or a negative value if none.
double extinction_time(const std::vector<MeasureSample>& samples, int phase);

enum class StudyAxis { Dt, H, Eps };
std::string_view to_string(StudyAxis a) noexcept;
StudyAxis parse_study_axis(std::string_view text);

struct StudyRow {
  int level = 0;
  int n = 0;
  double eps = 0.0;
  double dt = 0.0;
  double t_end = 0.0;
  long steps = 0;
  double dissipation_residual = 0.0;  // |mu_T - mu_0 + dissipation integral|
  double discrepancy_fraction = 0.0;  // discrepancy_abs / energy_total at t_end
  double volume_rate = 0.0;           // phase-0 volume slope on [0.005, 0.02], Disk only
  double laplacian_error = 0.0;       // max error on cos(2 pi x_0) at this n
  double primary = 0.0;
};

struct StudyTable {
  StudyAxis axis = StudyAxis::Dt;
  std::string residual_name;
  std::vector<StudyRow> rows;
  /// primary[k] / primary[k + 1].
  std::vector<double> ratios;
};

/// Reruns the scenario with one parameter refined per level:
///  - dt:  dt halves, snapshot_every doubles; residual = dissipation residual.
///  - h:   n doubles with eps and dt fixed; residual = Laplacian test error.
///  - eps: eps halves and n doubles (eps/h fixed), dt and t_end shrink by 4
///         (parabolic scaling); residual = final discrepancy fraction.
/// Throws ConfigError for levels < 3; sub-run errors carry the level index.
StudyTable convergence_study(const Scenario& base, StudyAxis axis, int levels,
                             bool run_simulations = true);

/// Max-norm error of laplacian(cos(2 pi x_0)) against -(2 pi)^2 cos(2 pi x_0).
double laplacian_test_error(const GridSpec& grid);

struct JunctionMeasurement {
  Point location{};
  /// Opening angle (degrees) of the sector owned by phases 0, 1, 2.
  std::array<double, 3> angles{};
  /// Number of boundary points per phase pair used in the ray fits.
  std::array<int, 3> points_per_pair{};
};

/// Locates up to `count` triple junctions (cells closest to u = (1/3, 1/3, 1/3),
/// mutually at least 0.1 apart) and measures their angles: along circles of
/// radius 5h..15h around each, phase boundaries (argmax switches, refined by
/// linear interpolation of u_a - u_b) are collected per phase pair, a line is
/// fitted to each pair's points, and the sector angles are the angles between
/// the three fitted rays. Requires d = 2 and at least three phases.
std::vector<JunctionMeasurement> measure_junctions(const PhaseField& state, int count = 2);

}  // namespace mpfc
