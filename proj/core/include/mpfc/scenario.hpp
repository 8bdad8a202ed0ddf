#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "mpfc/dynamics.hpp"
#include "mpfc/grid.hpp"

namespace mpfc {

enum class GeometryKind { FlatStrip, Disk, TripleJunction, DoubleStrip, TwoDisks, Constant };

/// Initial partition of the torus. Phase 0 is the distinguished region; the
/// remaining phases share its complement (phase 1, or phases 0/1/2 for the
/// triple junction).
///
///  - FlatStrip:      phase 0 on x_0 in (0.25, 0.75).
///  - Disk:           phase 0 inside the (periodic) ball of `radius` around `center`.
///  - TripleJunction: periodic hexagonal network with straight edges, one
///                    hexagon per phase and six junctions per period. Every
///                    junction has sector angles (A, B, C) in degrees,
///                    counter-clockwise; the owning phase rotates from junction
///                    to junction (phases 0, 1, 2 at the junction at the center).
///                    (120, 120, 120) is a stationary network.
///  - DoubleStrip:    phase 0 on x_0 in (0.1, 0.35) and (0.55, 0.9).
///  - TwoDisks:       two balls of radius 0.12 near (0.25, 0.5) and (0.75, 0.5),
///                    centers jittered by up to 0.02 from `seed`.
///  - Constant:       phase 0 everywhere (an equilibrium).
struct Geometry {
  GeometryKind kind = GeometryKind::Disk;
  Point center{0.5, 0.5, 0.5};
  double radius = 0.3;
  std::array<double, 3> angles{120.0, 120.0, 120.0};
};

std::string to_string(const Geometry& g);
/// Parses "Disk(0.5, 0.5, 0.3)", "FlatStrip", "TripleJunction(120, 120, 120)", ...
Geometry parse_geometry(std::string_view text, int d);

struct Scenario {
  Geometry geometry;
  ModelSpec model;
  GridSpec grid{2, 256};
  double dt = 1.0 / (256.0 * 256.0);
  double t_end = 0.02;
  int snapshot_every = 100;
  Projection projection = Projection::EveryStep;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::IMEX;

  /// Baseline: d=2, n=256, eps=8h, dt=h^2, t_end=0.02, IMEX, projection every step.
  static Scenario baseline(Geometry geometry, ModelKind kind, int n_phases = 2);

  /// Number of time steps to reach t_end.
  long step_count() const;
  /// Throws ConfigError / ScenarioError on inconsistent settings.
  void validate() const;
};

/// Reads "key = value" lines; '#' starts a comment. Keys: geometry, model.kind,
/// model.eps, model.n_phases, model.denom_floor, grid.d, grid.n, dt, t_end,
/// snapshot_every, projection, seed, scheme. Numeric values may carry a grid
/// unit suffix: "8h", "2*h", "h^2", "0.5*h^2". Unknown keys throw ConfigError.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);
/// Writes a config that parse_scenario reads back to an equal scenario.
void write_scenario(const Scenario& s, std::ostream& out);
void save_scenario(const Scenario& s, const std::filesystem::path& path);

/// Smallest distance between distinct interfaces of the geometry.
double interface_separation(const Geometry& g, int d, int n_phases);

/// Profiles q(d_i / eps) of the signed distance to each phase region, then
/// exact projection onto the model's constraint. Throws ScenarioError when
/// interfacial bands closer than 6 eps would overlap.
PhaseField build_scenario(const Scenario& s);

}  // namespace mpfc
