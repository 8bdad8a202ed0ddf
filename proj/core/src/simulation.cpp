#include "mpfc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/snapshot.hpp"

namespace mpfc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, long step) {
  char name[40];
  std::snprintf(name, sizeof name, "snap_%08ld.mpfc", step);
  return dir / "snapshots" / name;
}

}  // namespace

RunRecord run_simulation(const Scenario& s, const RunOptions& options) {
  s.validate();
  RunRecord rec;
  rec.scenario = s;
  if (!options.output_dir.empty()) {
    std::filesystem::create_directories(options.output_dir / "snapshots");
  }

  Stepper stepper(s.grid, s.model, s.dt, s.scheme, s.projection);
  const long total = s.step_count();
  PhaseField state = build_scenario(s);
  double prev_rate = 0.0;
  double prev_power = 0.0;
  long last_sample_step = 0;

  for (long k = 0;; ++k) {
    const PhaseRates rates = rhs(state, s.model);
    const bool is_sample = k % s.snapshot_every == 0 || k == total;
    if (options.observer) options.observer(state, rates, is_sample);

    const double rate = dissipation_rate(rates, s.model.eps);
    const double power = coupling_power(state, rates, s.model);
    if (k > 0) {
      rec.dissipation_integral += 0.5 * s.dt * (prev_rate + rate);
      rec.coupling_power_integral += 0.5 * s.dt * (prev_power + power);
    }
    prev_rate = rate;
    prev_power = power;
    rec.max_constraint_violation =
        std::max(rec.max_constraint_violation, constraint_violation(state, s.model));
    rec.max_floored_fraction =
        std::max(rec.max_floored_fraction, rates.multiplier.floored_fraction);

    if (is_sample) {
      MeasureSample sample = sample_measures(state, s.model, &rates);
      if (!rec.samples.empty()) {
        const double rise = (sample.energy_total - rec.samples.back().energy_total) /
                            static_cast<double>(k - last_sample_step);
        rec.max_energy_increase_per_step =
            rec.samples.size() == 1 ? rise : std::max(rec.max_energy_increase_per_step, rise);
      }
      last_sample_step = k;
      rec.samples.push_back(std::move(sample));
      if (!options.output_dir.empty()) {
        const auto path = snapshot_path(options.output_dir, k);
        write_snapshot(state, s.model, path);
        rec.snapshots.push_back({state.time, path});
      }
      if (options.keep_states) rec.states.push_back(state);
    }
    if (k == total) break;

    try {
      state = stepper.advance(state, rates);
    } catch (const BlowUpError&) {
      if (!options.output_dir.empty()) {
        write_snapshot(state, s.model, options.output_dir / "last_good.mpfc");
      }
      throw;
    }
  }

  rec.steps = total;
  rec.energy_initial = rec.samples.front().energy_total;
  rec.energy_final = rec.samples.back().energy_total;
  rec.dissipation_residual = rec.energy_final - rec.energy_initial + rec.dissipation_integral;
  rec.verdicts["energy_nonincreasing"] =
      rec.samples.size() < 2 ||
      rec.max_energy_increase_per_step <= kEnergyIncreaseTolerance * std::abs(rec.energy_initial);
  if (s.projection == Projection::EveryStep) {
    rec.verdicts["constraint"] = rec.max_constraint_violation <= kProjectedConstraintTolerance;
  }
  return rec;
}

std::vector<std::string> timeseries_header(int n_phases) {
  std::vector<std::string> h{"t", "energy_total"};
  for (int i = 1; i <= n_phases; ++i) h.push_back("energy_" + std::to_string(i));
  h.push_back("discrepancy_abs");
  for (int i = 1; i <= n_phases; ++i) h.push_back("discrepancy_" + std::to_string(i));
  for (int i = 1; i <= n_phases; ++i) h.push_back("bv_proxy_" + std::to_string(i));
  h.push_back("assumption_a_residual");
  h.push_back("dissipation_rate");
  h.push_back("constraint_drift");
  return h;
}

void emit_timeseries(const RunRecord& record, const std::filesystem::path& path) {
  if (record.samples.empty()) throw InputError("cannot emit an empty run record");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const int n_ph = static_cast<int>(record.samples.front().energy_per_phase.size());
  const auto header = timeseries_header(n_ph);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& s : record.samples) {
    out << fmt(s.time) << ',' << fmt(s.energy_total);
    for (double v : s.energy_per_phase) out << ',' << fmt(v);
    out << ',' << fmt(s.discrepancy_abs);
    for (double v : s.discrepancy_per_phase) out << ',' << fmt(v);
    for (double v : s.bv_proxy_per_phase) out << ',' << fmt(v);
    out << ',' << fmt(assumption_a_residual(s)) << ',' << fmt(s.dissipation_rate) << ','
        << fmt(s.constraint_drift) << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

double volume_slope(const std::vector<MeasureSample>& samples, int phase, double t0, double t1) {
  double st = 0.0, sv = 0.0, stt = 0.0, stv = 0.0;
  int count = 0;
  for (const auto& s : samples) {
    if (s.time < t0 - 1e-12 || s.time > t1 + 1e-12) continue;
    const double v = s.phase_volume.at(static_cast<std::size_t>(phase));
    st += s.time;
    sv += v;
    stt += s.time * s.time;
    stv += s.time * v;
    ++count;
  }
  if (count < 2) throw InputError("volume slope needs two samples inside the window");
  const double denom = count * stt - st * st;
  return (count * stv - st * sv) / denom;
}

double extinction_time(const std::vector<MeasureSample>& samples, int phase) {
  for (const auto& s : samples) {
    if (s.phase_max.at(static_cast<std::size_t>(phase)) < 0.5) return s.time;
  }
  return -1.0;
}

std::string_view to_string(StudyAxis a) noexcept {
  switch (a) {
    case StudyAxis::Dt: return "dt";
    case StudyAxis::H: return "h";
    case StudyAxis::Eps: return "eps";
  }
  return "?";
}

StudyAxis parse_study_axis(std::string_view text) {
  if (text == "dt") return StudyAxis::Dt;
  if (text == "h") return StudyAxis::H;
  if (text == "eps") return StudyAxis::Eps;
  throw ConfigError("unknown study axis '" + std::string(text) + "' (expected dt, h or eps)");
}

double laplacian_test_error(const GridSpec& grid) {
  const double k2 = 4.0 * std::numbers::pi * std::numbers::pi;
  const ScalarField f =
      ScalarField::sample(grid, [](const Point& x) { return std::cos(2.0 * std::numbers::pi * x[0]); });
  const ScalarField lap = laplacian(f);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) err = std::max(err, std::abs(lap[i] + k2 * f[i]));
  return err;
}

StudyTable convergence_study(const Scenario& base, StudyAxis axis, int levels,
                             bool run_simulations) {
  if (levels < 3) throw ConfigError("a convergence study needs at least three levels");
  StudyTable table;
  table.axis = axis;
  table.residual_name = axis == StudyAxis::Dt  ? "dissipation_residual"
                        : axis == StudyAxis::H ? "laplacian_error"
                                               : "discrepancy_fraction";
  for (int level = 0; level < levels; ++level) {
    Scenario s = base;
    const int factor = 1 << level;
    switch (axis) {
      case StudyAxis::Dt:
        s.dt = base.dt / factor;
        s.snapshot_every = base.snapshot_every * factor;
        break;
      case StudyAxis::H:
        s.grid = GridSpec(base.grid.dim(), base.grid.points_per_axis() * factor);
        break;
      case StudyAxis::Eps:
        s.grid = GridSpec(base.grid.dim(), base.grid.points_per_axis() * factor);
        s.model.eps = base.model.eps / factor;
        s.dt = base.dt / (factor * factor);
        s.t_end = base.t_end / (factor * factor);
        break;
    }
    StudyRow row;
    row.level = level;
    row.n = s.grid.points_per_axis();
    row.eps = s.model.eps;
    row.dt = s.dt;
    row.t_end = s.t_end;
    row.steps = s.step_count();
    row.laplacian_error = laplacian_test_error(s.grid);
    if (run_simulations) {
      try {
        const RunRecord rec = run_simulation(s);
        row.dissipation_residual = std::abs(rec.dissipation_residual);
        const auto& last = rec.samples.back();
        row.discrepancy_fraction = last.discrepancy_abs / last.energy_total;
        if (s.geometry.kind == GeometryKind::Disk && s.t_end >= 0.02 - 1e-12) {
          row.volume_rate = volume_slope(rec.samples, 0, 0.005, 0.02);
        }
      } catch (const ConfigError& e) {
        throw ConfigError("study level " + std::to_string(level) + ": " + e.what());
      } catch (const Error& e) {
        throw Error("study level " + std::to_string(level) + ": " + e.what());
      }
    }
    row.primary = axis == StudyAxis::Dt  ? row.dissipation_residual
                  : axis == StudyAxis::H ? row.laplacian_error
                                         : row.discrepancy_fraction;
    table.rows.push_back(row);
  }
  for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
    const double next = table.rows[k + 1].primary;
    table.ratios.push_back(next != 0.0 ? table.rows[k].primary / next
                                       : std::numeric_limits<double>::infinity());
  }
  return table;
}

namespace {

double interpolate(const ScalarField& f, double x, double y) {
  const GridSpec& g = f.spec();
  const int n = g.points_per_axis();
  const double fx = x * n;
  const double fy = y * n;
  const double ix = std::floor(fx);
  const double iy = std::floor(fy);
  const double tx = fx - ix;
  const double ty = fy - iy;
  auto at = [&](long a, long b) {
    const long aa = ((a % n) + n) % n;
    const long bb = ((b % n) + n) % n;
    return f[static_cast<std::size_t>(aa) * g.stride(0) + static_cast<std::size_t>(bb) * g.stride(1)];
  };
  const long a = static_cast<long>(ix);
  const long b = static_cast<long>(iy);
  return (1 - tx) * (1 - ty) * at(a, b) + tx * (1 - ty) * at(a + 1, b) + (1 - tx) * ty * at(a, b + 1) +
         tx * ty * at(a + 1, b + 1);
}

double periodic_gap(const Point& a, const Point& b) {
  double r2 = 0.0;
  for (int k = 0; k < 2; ++k) {
    double v = a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)];
    v -= std::floor(v + 0.5);
    r2 += v * v;
  }
  return std::sqrt(r2);
}

}  // namespace

std::vector<JunctionMeasurement> measure_junctions(const PhaseField& state, int count) {
  const GridSpec& grid = state.spec;
  if (grid.dim() != 2) throw InputError("junction measurement needs d = 2");
  if (state.n_phases() < 3) throw InputError("junction measurement needs three phases");
  const double h = grid.spacing();

  // Candidate cells ordered by distance from the symmetric point (1/3, 1/3, 1/3).
  std::vector<std::pair<double, std::size_t>> scored(grid.cell_count());
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    double s = 0.0;
    for (int p = 0; p < 3; ++p) s += (state[p][i] - 1.0 / 3.0) * (state[p][i] - 1.0 / 3.0);
    scored[i] = {s, i};
  }
  std::sort(scored.begin(), scored.end());
  std::vector<Point> centers;
  for (const auto& [score, cell] : scored) {
    if (static_cast<int>(centers.size()) >= count || score > 0.1) break;
    const Point p = grid.position(cell);
    bool far = true;
    for (const auto& c : centers) far = far && periodic_gap(p, c) >= 0.1;
    if (far) centers.push_back(p);
  }

  std::vector<JunctionMeasurement> out;
  constexpr int kAngles = 1440;
  for (const Point& c : centers) {
    // Boundary points per unordered pair (0,1), (0,2), (1,2).
    std::array<std::vector<std::array<double, 2>>, 3> pts;
    auto pair_index = [](int a, int b) { return a + b - 1; };
    for (double r = 5.0 * h; r <= 15.0 * h + 1e-12; r += 0.5 * h) {
      std::vector<std::array<double, 3>> vals(kAngles);
      std::vector<int> label(kAngles);
      for (int j = 0; j < kAngles; ++j) {
        const double th = 2.0 * std::numbers::pi * j / kAngles;
        const double x = c[0] + r * std::cos(th);
        const double y = c[1] + r * std::sin(th);
        for (int p = 0; p < 3; ++p) vals[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)] =
            interpolate(state[p], x, y);
        const auto& v = vals[static_cast<std::size_t>(j)];
        label[static_cast<std::size_t>(j)] =
            static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
      }
      for (int j = 0; j < kAngles; ++j) {
        const int jn = (j + 1) % kAngles;
        const int a = label[static_cast<std::size_t>(j)];
        const int b = label[static_cast<std::size_t>(jn)];
        if (a == b) continue;
        const auto& v0 = vals[static_cast<std::size_t>(j)];
        const auto& v1 = vals[static_cast<std::size_t>(jn)];
        const double f0 = v0[static_cast<std::size_t>(a)] - v0[static_cast<std::size_t>(b)];
        const double f1 = v1[static_cast<std::size_t>(a)] - v1[static_cast<std::size_t>(b)];
        const double t = f0 != f1 ? f0 / (f0 - f1) : 0.5;
        const double th = 2.0 * std::numbers::pi * (j + t) / kAngles;
        pts[static_cast<std::size_t>(pair_index(std::min(a, b), std::max(a, b)))].push_back(
            {r * std::cos(th), r * std::sin(th)});
      }
    }

    JunctionMeasurement m;
    m.location = c;
    std::array<double, 3> ray{};
    bool ok = true;
    for (int q = 0; q < 3; ++q) {
      const auto& P = pts[static_cast<std::size_t>(q)];
      m.points_per_pair[static_cast<std::size_t>(q)] = static_cast<int>(P.size());
      if (P.size() < 5) {
        ok = false;
        continue;
      }
      double mx = 0.0, my = 0.0;
      for (const auto& p : P) {
        mx += p[0];
        my += p[1];
      }
      mx /= P.size();
      my /= P.size();
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (const auto& p : P) {
        sxx += (p[0] - mx) * (p[0] - mx);
        sxy += (p[0] - mx) * (p[1] - my);
        syy += (p[1] - my) * (p[1] - my);
      }
      const double phi = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
      double dx = std::cos(phi);
      double dy = std::sin(phi);
      if (dx * mx + dy * my < 0.0) {
        dx = -dx;
        dy = -dy;
      }
      ray[static_cast<std::size_t>(q)] = std::atan2(dy, dx);
    }
    if (!ok) {
      m.angles = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()};
      out.push_back(m);
      continue;
    }
    // The sector of phase p lies between the rays of the two pairs containing p.
    // Phase 0: pairs (0,1)=0, (0,2)=1; phase 1: 0, 2; phase 2: 1, 2.
    const std::array<std::array<int, 2>, 3> sector_rays{{{0, 1}, {0, 2}, {1, 2}}};
    for (int p = 0; p < 3; ++p) {
      const double a = ray[static_cast<std::size_t>(sector_rays[static_cast<std::size_t>(p)][0])];
      const double b = ray[static_cast<std::size_t>(sector_rays[static_cast<std::size_t>(p)][1])];
      // Orient the opening so that it contains the probe direction owned by p.
      double open = std::fmod(b - a + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
      const double mid = a + 0.5 * open;
      const double r = 10.0 * h;
      std::array<double, 3> v{};
      for (int q = 0; q < 3; ++q) {
        v[static_cast<std::size_t>(q)] =
            interpolate(state[q], c[0] + r * std::cos(mid), c[1] + r * std::sin(mid));
      }
      const int owner = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
      if (owner != p) open = 2.0 * std::numbers::pi - open;
      m.angles[static_cast<std::size_t>(p)] = open * 180.0 / std::numbers::pi;
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace mpfc
