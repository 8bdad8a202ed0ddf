// mpfc: batch driver for the multi-phase Allen-Cahn simulator.
//
// Exit codes: 0 when every verdict passes, 1 when a check fails or a run
// breaks down, 2 on usage, configuration or input-format errors.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpfc/analysis.hpp"
#include "mpfc/diagnostics.hpp"
#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/scenario.hpp"
#include "mpfc/simulation.hpp"
#include "mpfc/snapshot.hpp"

namespace fs = std::filesystem;
using namespace mpfc;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad number '" + item + "' in '" + text + "'");
    out.push_back(v);
  }
  return out;
}

// Output sink: a file when a path is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::trunc);
      if (!file_) throw InputError("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

struct RunDir {
  Scenario scenario;
  std::vector<PhaseField> states;
};

// A run directory as written by `simulate`: scenario.cfg plus snapshots/*.mpfc.
RunDir load_run_dir(const fs::path& dir) {
  RunDir rd;
  rd.scenario = load_scenario(dir / "scenario.cfg");
  std::vector<fs::path> files;
  if (fs::is_directory(dir / "snapshots")) {
    for (const auto& e : fs::directory_iterator(dir / "snapshots")) {
      if (e.path().extension() == ".mpfc") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no snapshots under " + (dir / "snapshots").string());
  for (const auto& f : files) rd.states.push_back(read_snapshot(f));
  return rd;
}

// Drops trailing states whose spacing differs from the first gap (the final
// sample lands on t_end, which need not be a multiple of the spacing).
void keep_uniform_prefix(std::vector<PhaseField>& states) {
  if (states.size() < 3) return;
  const double step = states[1].time - states[0].time;
  std::size_t keep = 2;
  while (keep < states.size() &&
         std::abs(states[keep].time - states[keep - 1].time - step) <= 1e-9 * step) {
    ++keep;
  }
  states.resize(keep);
}

// "radial[:x,y[,z]]" (inward unit field with cutoffs at 0.05..0.1 and
// 0.4..0.45 from the center), "random[:seed]", or "translation:axis".
VectorField make_test_field(const std::string& text, const GridSpec& g) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "radial") {
    Point c{};
    for (int k = 0; k < g.dim(); ++k) c[static_cast<std::size_t>(k)] = 0.5;
    if (!args.empty()) {
      const std::vector<double> v = parse_list(args);
      if (static_cast<int>(v.size()) != g.dim()) throw ConfigError("radial center needs d coordinates");
      for (int k = 0; k < g.dim(); ++k) c[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)];
    }
    auto smoothstep = [](double a, double b, double x) {
      const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
      return t * t * (3.0 - 2.0 * t);
    };
    return VectorField::sample(g, [&](const Point& x) {
      Point dx{};
      double r2 = 0.0;
      for (int k = 0; k < g.dim(); ++k) {
        double d = x[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(k)];
        d -= std::round(d);
        dx[static_cast<std::size_t>(k)] = d;
        r2 += d * d;
      }
      const double r = std::sqrt(r2);
      Point out{};
      if (r == 0.0) return out;
      const double cut = smoothstep(0.05, 0.1, r) * (1.0 - smoothstep(0.4, 0.45, r));
      for (int k = 0; k < g.dim(); ++k) out[static_cast<std::size_t>(k)] = -cut * dx[static_cast<std::size_t>(k)] / r;
      return out;
    });
  }
  if (kind == "random") {
    const unsigned long seed = args.empty() ? 0UL : std::stoul(args);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    VectorField v(g);
    for (int a = 0; a < g.dim(); ++a) {
      for (int m = 0; m < 4; ++m) {
        std::array<int, 3> wave{};
        for (int k = 0; k < g.dim(); ++k) wave[static_cast<std::size_t>(k)] = static_cast<int>(std::lround(2.0 * unit(gen)));
        if (wave == std::array<int, 3>{}) wave[0] = 1;
        const double amp = unit(gen) / 4.0;
        const double phase = 3.141592653589793 * unit(gen);
        const ScalarField f = ScalarField::sample(g, [&](const Point& x) {
          double arg = phase;
          for (int k = 0; k < g.dim(); ++k) arg += 2.0 * 3.141592653589793 * wave[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
          return amp * std::sin(arg);
        });
        for (std::size_t i = 0; i < g.cell_count(); ++i) v[a][i] += f[i];
      }
    }
    return v;
  }
  if (kind == "translation") {
    const int axis = args.empty() ? 0 : std::stoi(args);
    if (axis < 0 || axis >= g.dim()) throw ConfigError("translation axis out of range");
    VectorField v(g);
    v[axis] = ScalarField(g, 1.0);
    return v;
  }
  throw ConfigError("unknown test field '" + text + "'");
}

int cmd_simulate(const std::string& config, const std::string& out_dir) {
  const Scenario s = load_scenario(config);
  const fs::path dir(out_dir);
  if (fs::is_directory(dir / "snapshots")) {
    for (const auto& e : fs::directory_iterator(dir / "snapshots")) {
      if (e.path().extension() == ".mpfc") {
        throw InputError(dir.string() + " already holds snapshots; use an empty output directory");
      }
    }
  }
  fs::create_directories(dir);
  save_scenario(s, dir / "scenario.cfg");
  RunOptions opt;
  opt.output_dir = dir;
  const RunRecord rec = run_simulation(s, opt);
  emit_timeseries(rec, dir / "timeseries.csv");

  std::ofstream summary(dir / "summary.txt", std::ios::trunc);
  bool pass = true;
  auto line = [&](const std::string& key, const std::string& value) {
    summary << key << " = " << value << '\n';
    std::cout << key << " = " << value << '\n';
  };
  line("steps", std::to_string(rec.steps));
  line("energy_initial", num(rec.energy_initial));
  line("energy_final", num(rec.energy_final));
  line("dissipation_integral", num(rec.dissipation_integral));
  line("dissipation_residual", num(rec.dissipation_residual));
  line("coupling_power_integral", num(rec.coupling_power_integral));
  line("max_constraint_violation", num(rec.max_constraint_violation));
  line("max_energy_increase_per_step", num(rec.max_energy_increase_per_step));
  line("max_floored_fraction", num(rec.max_floored_fraction));
  for (const auto& [name, ok] : rec.verdicts) {
    line("verdict." + name, ok ? "PASS" : "FAIL");
    pass = pass && ok;
  }
  return pass ? kExitPass : kExitFail;
}

int cmd_diagnose(const std::string& snapshot, const std::string& field, double gradient_floor,
                 const std::string& out_path) {
  SnapshotHeader header;
  const PhaseField state = read_snapshot(snapshot, &header);
  ModelSpec model;
  model.kind = header.model;
  model.eps = header.eps;
  model.n_phases = header.n_phases;
  model.validate();

  Sink sink(out_path);
  std::ostream& out = sink.out();
  const PhaseRates rates = rhs(state, model);
  const MeasureSample m = sample_measures(state, model, &rates);
  out << "time = " << num(m.time) << '\n';
  out << "model = " << to_string(model.kind) << '\n';
  out << "energy_total = " << num(m.energy_total) << '\n';
  bool pass = true;
  for (int i = 0; i < state.n_phases(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const std::string p = std::to_string(i + 1);
    out << "energy_" << p << " = " << num(m.energy_per_phase[k]) << '\n';
    out << "discrepancy_" << p << " = " << num(m.discrepancy_per_phase[k]) << '\n';
    out << "bv_proxy_" << p << " = " << num(m.bv_proxy_per_phase[k]) << '\n';
    const double slack = 1e-12 * (1.0 + m.energy_per_phase[k]);
    pass = pass && std::abs(m.discrepancy_per_phase[k]) <= m.energy_per_phase[k] + slack &&
           m.bv_proxy_per_phase[k] <= m.energy_per_phase[k] + slack;
  }
  out << "discrepancy_abs = " << num(m.discrepancy_abs) << '\n';
  out << "assumption_a_residual = " << num(assumption_a_residual(m)) << '\n';
  out << "dissipation_rate = " << num(m.dissipation_rate) << '\n';
  out << "constraint_drift = " << num(m.constraint_drift) << '\n';
  out << "verdict.domination = " << (pass ? "PASS" : "FAIL") << '\n';

  if (!field.empty()) {
    const VectorField g = make_test_field(field, state.spec);
    const VariationReport r = first_variation(state, model, g, field, gradient_floor);
    const CurvatureProxy c = mean_curvature_proxy(state, model, &rates);
    const double p = pairing(c.density, g);
    const double bound = std::sqrt(c.kinetic_bound) * test_field_norm(state, model, g);
    out << "test_field = " << field << '\n';
    out << "first_variation = " << num(r.first_variation) << '\n';
    out << "kinetic_form = " << num(r.kinetic_form) << '\n';
    out << "chemical_form = " << num(r.chemical_form) << '\n';
    out << "xi_correction = " << num(r.xi_correction) << '\n';
    out << "varifold_residual = " << num(r.varifold_residual) << '\n';
    out << "kinetic_chemical_residual = " << num(r.kinetic_chemical_residual) << '\n';
    out << "floored_fraction = " << num(r.floored_fraction) << '\n';
    out << "curvature_pairing = " << num(p) << '\n';
    out << "cauchy_schwarz_bound = " << num(bound) << '\n';
    const bool cs = std::abs(p) <= bound * (1.0 + 1e-12) + 1e-300;
    out << "verdict.cauchy_schwarz = " << (cs ? "PASS" : "FAIL") << '\n';
    pass = pass && cs;
  }
  return pass ? kExitPass : kExitFail;
}

int cmd_monotonicity(const std::string& run_dir, const std::string& center, double terminal,
                     std::optional<double> tol, const std::string& out_path) {
  RunDir rd = load_run_dir(run_dir);
  const Scenario& s = rd.scenario;
  KernelSpec spec;
  const std::vector<double> c = parse_list(center);
  if (static_cast<int>(c.size()) != s.grid.dim()) throw ConfigError("--center needs d coordinates");
  for (std::size_t k = 0; k < c.size(); ++k) spec.center[k] = c[k];
  spec.terminal_s = terminal;

  std::erase_if(rd.states, [&](const PhaseField& st) { return !(st.time < terminal); });
  keep_uniform_prefix(rd.states);
  std::vector<MonotonicitySample> samples;
  for (const auto& st : rd.states) samples.push_back(monotonicity_sample(st, s.model, spec));
  MonotonicityTrace trace = monotonicity_trace(samples, spec, 0.0);

  double tol_fd = 0.0;
  if (tol) {
    tol_fd = *tol;
  } else {
    // Calibration pre-pass: the same sample times with dt halved.
    Scenario half = s;
    half.dt = s.dt / 2.0;
    half.snapshot_every = 2 * s.snapshot_every;
    half.t_end = rd.states.back().time;
    std::vector<MonotonicitySample> refined;
    RunOptions opt;
    opt.observer = [&](const PhaseField& st, const PhaseRates& rates, bool is_sample) {
      if (is_sample && refined.size() < samples.size()) {
        refined.push_back(monotonicity_sample(st, s.model, spec, &rates));
      }
    };
    run_simulation(half, opt);
    tol_fd = calibrate_monotonicity_tolerance(trace, monotonicity_trace(refined, spec, 0.0), nullptr);
  }
  apply_tolerance(trace, tol_fd);

  Sink sink(out_path);
  std::ostream& out = sink.out();
  out << "t,gaussian_density,derivative,rhs_bound,slack,multiplier_cancellation,square_term\n";
  for (std::size_t k = 0; k < trace.derivative.size(); ++k) {
    out << num(trace.times[k + 1]) << ',' << num(trace.gaussian_density[k + 1]) << ','
        << num(trace.derivative[k]) << ',' << num(trace.rhs_bound[k + 1]) << ',' << num(trace.slack[k])
        << ',' << num(trace.multiplier_cancellation[k + 1]) << ',' << num(trace.square_term[k + 1]) << '\n';
  }
  std::cerr << "tolerance = " << num(trace.tolerance) << "\nworst_excess = " << num(trace.worst_excess)
            << "\nverdict.monotonicity = " << (trace.pass ? "PASS" : "FAIL") << '\n';
  return trace.pass ? kExitPass : kExitFail;
}

int cmd_brakke(const std::string& run_dir, const std::string& phi_name, double tol,
               const std::string& out_path) {
  const RunDir rd = load_run_dir(run_dir);
  const SpaceTimeTestFunction phi = parse_test_function(phi_name, rd.scenario.grid.dim());
  const std::vector<BrakkeInterval> iv = brakke_residual(rd.states, rd.scenario.model, phi);

  Sink sink(out_path);
  std::ostream& out = sink.out();
  out << "t0,t1,lhs,rhs,residual,multiplier_power\n";
  bool pass = true;
  double total = 0.0;
  for (const auto& b : iv) {
    out << num(b.t0) << ',' << num(b.t1) << ',' << num(b.lhs) << ',' << num(b.rhs) << ','
        << num(b.residual) << ',' << num(b.multiplier_power) << '\n';
    pass = pass && std::abs(b.residual) <= tol * (std::abs(b.lhs) + std::abs(b.rhs));
    total += b.residual;
  }
  std::cerr << "intervals = " << iv.size() << "\ntotal_residual = " << num(total)
            << "\nverdict.brakke = " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitPass : kExitFail;
}

int cmd_study(const std::string& config, const std::string& axis_name, int levels,
              const std::string& out_path) {
  const Scenario s = load_scenario(config);
  const StudyAxis axis = parse_study_axis(axis_name);
  const StudyTable t = convergence_study(s, axis, levels);

  Sink sink(out_path);
  std::ostream& out = sink.out();
  out << "level,n,eps,dt,t_end,steps,dissipation_residual,discrepancy_fraction,volume_rate,"
         "laplacian_error,"
      << t.residual_name << ",ratio\n";
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const StudyRow& r = t.rows[k];
    out << r.level << ',' << r.n << ',' << num(r.eps) << ',' << num(r.dt) << ',' << num(r.t_end) << ','
        << r.steps << ',' << num(r.dissipation_residual) << ',' << num(r.discrepancy_fraction) << ','
        << num(r.volume_rate) << ',' << num(r.laplacian_error) << ',' << num(r.primary) << ','
        << (k == 0 ? std::string() : num(t.ratios[k - 1])) << '\n';
  }
  bool pass = true;
  switch (axis) {
    case StudyAxis::Dt:
      for (double q : t.ratios) pass = pass && q >= 1.6 && q <= 2.6;
      break;
    case StudyAxis::H:
      for (double q : t.ratios) pass = pass && q >= 3.5 && q <= 4.5;
      break;
    case StudyAxis::Eps:
      // No rate is asserted, only the trend.
      for (double q : t.ratios) pass = pass && q > 1.0;
      break;
  }
  std::cerr << "verdict.study = " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-phase Allen-Cahn simulator with Lagrange-multiplier constraints"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 keeps the OpenMP default)")->check(CLI::NonNegativeNumber);

  std::string config, out, snapshot, field, run_dir, center, phi = "one", axis;
  double terminal = 0.0;
  double floor = 1e-12;
  double brakke_tol = 0.05;
  double mono_tol = 0.0;
  int levels = 3;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write snapshots, timeseries.csv and summary.txt");
  sim->add_option("config", config, "Scenario config file")->required();
  sim->add_option("-o,--out", out, "Run directory")->required();

  auto* diag = app.add_subcommand("diagnose", "Measures and first variation of one snapshot");
  diag->add_option("snapshot", snapshot, "Snapshot file")->required();
  diag->add_option("--test-field", field, "radial[:x,y], random[:seed] or translation:axis");
  diag->add_option("--gradient-floor", floor, "Normal floor for the varifold form");
  diag->add_option("-o,--out", out, "Report file (default stdout)");

  auto* mono = app.add_subcommand("check-monotonicity", "Gaussian density against its monotonicity bound");
  mono->add_option("run_dir", run_dir, "Directory written by simulate")->required();
  mono->add_option("--center", center, "Kernel center y as x,y[,z]")->required();
  mono->add_option("--terminal", terminal, "Terminal time s")->required();
  auto* tol_opt = mono->add_option("--tol", mono_tol, "Fixed tolerance instead of the dt/2 calibration pass");
  mono->add_option("-o,--out", out, "Trace CSV (default stdout)");

  auto* brakke = app.add_subcommand("check-brakke", "Brakke balance between consecutive snapshots");
  brakke->add_option("run_dir", run_dir, "Directory written by simulate")->required();
  brakke->add_option("--phi", phi, "one or bump[:x,y[,z],r]");
  brakke->add_option("--tol", brakke_tol, "Relative residual bound per interval");
  brakke->add_option("-o,--out", out, "Interval CSV (default stdout)");

  auto* study = app.add_subcommand("study", "Refinement study along one axis");
  study->add_option("config", config, "Scenario config file")->required();
  study->add_option("--axis", axis, "dt, h or eps")->required()->check(CLI::IsMember({"dt", "h", "eps"}));
  study->add_option("--levels", levels, "Number of levels (>= 3)");
  study->add_option("-o,--out", out, "Table CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (sim->parsed()) return cmd_simulate(config, out);
    if (diag->parsed()) return cmd_diagnose(snapshot, field, floor, out);
    if (mono->parsed()) {
      return cmd_monotonicity(run_dir, center, terminal,
                              tol_opt->count() > 0 ? std::optional<double>(mono_tol) : std::nullopt, out);
    }
    if (brakke->parsed()) return cmd_brakke(run_dir, phi, brakke_tol, out);
    if (study->parsed()) return cmd_study(config, axis, levels, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitUsage;
}
