#include "mpfc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "mpfc/error.hpp"
#include "mpfc/parallel.hpp"
#include "mpfc/potential.hpp"

namespace mpfc {

namespace {

constexpr double kTwoDiskRadius = 0.12;
constexpr double kTwoDiskJitter = 0.02;

double wrap(double v) { return v - std::floor(v + 0.5); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("cannot parse integer " + std::string(what) + " from '" + std::string(text) +
                      "'");
  }
  return v;
}

// "<coef>", "<coef>h", "<coef>*h", "h^2", "<coef>*h^2"; <coef> may be "a/b".
double parse_quantity(std::string_view raw, double h, std::string_view what) {
  std::string t = trim(raw);
  double unit = 1.0;
  auto strip_suffix = [&](std::string_view suffix, double factor) {
    if (t.size() >= suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
      t = trim(std::string_view(t).substr(0, t.size() - suffix.size()));
      if (!t.empty() && t.back() == '*') t = trim(std::string_view(t).substr(0, t.size() - 1));
      unit = factor;
      return true;
    }
    return false;
  };
  if (!strip_suffix("h^2", h * h)) strip_suffix("h", h);
  if (t.empty()) return unit;
  const auto slash = t.find('/');
  if (slash != std::string::npos) {
    const double num = parse_double(std::string_view(t).substr(0, slash), what);
    const double den = parse_double(std::string_view(t).substr(slash + 1), what);
    if (den == 0.0) throw ConfigError("zero denominator in " + std::string(what));
    return unit * num / den;
  }
  return unit * parse_double(t, what);
}

std::vector<double> parse_arguments(std::string_view text) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, "geometry argument"));
  return out;
}

struct Vec2 {
  double x;
  double y;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

double segment_distance(Vec2 p, const Segment& s) {
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - s.a.x) * dx + (p.y - s.a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (s.a.x + t * dx);
  const double ey = p.y - (s.a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

using Hexagon = std::array<Vec2, 6>;

// Three-coloured hexagonal network with straight edges. The Y junction at
// the origin has edges P1, P2, P3 (counter-clockwise, sectors A, B, C between
// them); the translation lattice is spanned by g1 = P1 - P2, g2 = P2 - P3 and
// colour (m + n) mod 3 of the cell shifted by m g1 + n g2 is periodic on the
// index-3 sublattice, which is required to be Z^2.
struct Honeycomb {
  std::array<Hexagon, 3> cells{};  // one cell per phase, in [0, 1)^2 up to a lattice shift
  double separation = 0.0;         // closest approach of edges without a common junction
  bool valid = false;
};

double segment_gap(const Segment& s, const Segment& t) {
  return std::min({segment_distance(s.a, t), segment_distance(s.b, t), segment_distance(t.a, s),
                   segment_distance(t.b, s)});
}

double network_separation(const std::array<Hexagon, 3>& cells) {
  std::vector<Segment> base;
  for (const auto& c : cells) {
    for (std::size_t k = 0; k < c.size(); ++k) base.push_back({c[k], c[(k + 1) % c.size()]});
  }
  auto same = [](Vec2 a, Vec2 b) { return norm(a - b) < 1e-9; };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : base) {
    for (const auto& t0 : base) {
      for (int ix = -2; ix <= 2; ++ix) {
        for (int iy = -2; iy <= 2; ++iy) {
          const Vec2 off{static_cast<double>(ix), static_cast<double>(iy)};
          const Segment t{t0.a + off, t0.b + off};
          if (same(s.a, t.a) || same(s.a, t.b) || same(s.b, t.a) || same(s.b, t.b)) continue;
          best = std::min(best, segment_gap(s, t));
        }
      }
    }
  }
  return best;
}

// Junction X seeing Q1, Q2 under directed angle a and Q2, Q3 under b: the second
// intersection of the two inscribed-angle circles through Q2.
bool solve_junction(Vec2 q1, Vec2 q2, Vec2 q3, double a, double b, Vec2& x) {
  const Vec2 o1 = 0.5 * (q1 + q2) + (0.5 / std::tan(a)) * perp(q2 - q1);
  const Vec2 o2 = 0.5 * (q2 + q3) + (0.5 / std::tan(b)) * perp(q3 - q2);
  const double len = norm(o2 - o1);
  if (!(len > 1e-12)) return false;
  const Vec2 e = (1.0 / len) * (o2 - o1);
  const Vec2 r = q2 - o1;
  x = o1 + (2.0 * dot(r, e)) * e - r;
  auto directed = [](Vec2 u, Vec2 v) { return std::atan2(cross(u, v), dot(u, v)); };
  auto off = [](double d) { return std::abs(std::remainder(d, 2.0 * std::numbers::pi)); };
  const Vec2 p1 = q1 - x, p2 = q2 - x, p3 = q3 - x;
  if (std::min({norm(p1), norm(p2), norm(p3)}) < 1e-6) return false;
  return off(directed(p1, p2) - a) < 1e-9 && off(directed(p2, p3) - b) < 1e-9;
}

Honeycomb honeycomb(const Geometry& g) {
  const double deg = std::numbers::pi / 180.0;
  const double a = g.angles[0] * deg;
  const double b = g.angles[1] * deg;
  Honeycomb best;
  // Unimodular bases (u, v) of Z^2 with small entries; keep the widest network.
  for (int u0 = -2; u0 <= 2; ++u0)
    for (int u1 = -2; u1 <= 2; ++u1)
      for (int v0 = -2; v0 <= 2; ++v0)
        for (int v1 = -2; v1 <= 2; ++v1) {
          if (std::abs(u0 * v1 - u1 * v0) != 1) continue;
          const Vec2 u{static_cast<double>(u0), static_cast<double>(u1)};
          const Vec2 v{static_cast<double>(v0), static_cast<double>(v1)};
          const Vec2 g1 = (1.0 / 3.0) * (2.0 * u + v);
          const Vec2 g2 = (1.0 / 3.0) * (v - u);
          Vec2 x{};
          if (!solve_junction(g1 + g2, g2, {0.0, 0.0}, a, b, x)) continue;
          const Vec2 p1 = g1 + g2 - x, p2 = g2 - x, p3 = Vec2{0.0, 0.0} - x;
          // Cell between P1 and P2 at a junction placed at the domain center.
          const Vec2 y0{0.5, 0.5};
          const Hexagon h0{y0, y0 + p1, y0 + p1 - p3, y0 + p1 - p3 + p2, y0 + p2 - p3, y0 + p2};
          Honeycomb c;
          const std::array<Vec2, 3> shift{Vec2{0.0, 0.0}, Vec2{0.0, 0.0} - g1 - g2,
                                          Vec2{0.0, 0.0} - g2};
          for (std::size_t k = 0; k < 3; ++k) {
            Vec2 mean{0.0, 0.0};
            for (const Vec2& q : h0) mean = mean + (1.0 / 6.0) * (q + shift[k]);
            const Vec2 back{std::floor(mean.x), std::floor(mean.y)};
            for (std::size_t j = 0; j < 6; ++j) c.cells[k][j] = h0[j] + shift[k] - back;
          }
          c.separation = network_separation(c.cells);
          c.valid = true;
          if (!best.valid || c.separation > best.separation + 1e-12) best = c;
        }
  return best;
}

bool inside_convex(Vec2 p, const Hexagon& poly) {
  int sign = 0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const double c = cross(poly[(k + 1) % poly.size()] - poly[k], p - poly[k]);
    const int s = c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

// Signed distance to the periodic copies of one convex cell, positive inside.
double cell_distance(Vec2 p, const Hexagon& cell) {
  double best = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (int ix = -2; ix <= 2; ++ix) {
    for (int iy = -2; iy <= 2; ++iy) {
      const Vec2 q{p.x + ix, p.y + iy};
      inside = inside || inside_convex(q, cell);
      for (std::size_t k = 0; k < cell.size(); ++k) {
        best = std::min(best, segment_distance(q, {cell[k], cell[(k + 1) % cell.size()]}));
      }
    }
  }
  return inside ? best : -best;
}

std::array<Point, 2> two_disk_centers(std::uint64_t seed, int d) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> jitter(-kTwoDiskJitter, kTwoDiskJitter);
  std::array<Point, 2> c{};
  for (int k = 0; k < 2; ++k) {
    auto& ck = c[static_cast<std::size_t>(k)];
    ck = {k == 0 ? 0.25 : 0.75, 0.5, 0.5};
    for (int a = 0; a < d; ++a) ck[static_cast<std::size_t>(a)] += jitter(gen);
  }
  return c;
}

double periodic_norm(const Point& x, const Point& c, int d) {
  double r2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const double v = wrap(x[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(k)]);
    r2 += v * v;
  }
  return std::sqrt(r2);
}

}  // namespace

std::string to_string(const Geometry& g) {
  switch (g.kind) {
    case GeometryKind::FlatStrip: return "FlatStrip";
    case GeometryKind::DoubleStrip: return "DoubleStrip";
    case GeometryKind::TwoDisks: return "TwoDisks";
    case GeometryKind::Constant: return "Constant";
    case GeometryKind::Disk:
      return "Disk(" + fmt(g.center[0]) + ", " + fmt(g.center[1]) + ", " + fmt(g.center[2]) +
             ", " + fmt(g.radius) + ")";
    case GeometryKind::TripleJunction:
      return "TripleJunction(" + fmt(g.angles[0]) + ", " + fmt(g.angles[1]) + ", " +
             fmt(g.angles[2]) + ")";
  }
  return "?";
}

Geometry parse_geometry(std::string_view text, int d) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  const std::string name = trim(std::string_view(t).substr(0, open));
  std::vector<double> args;
  if (open != std::string::npos) {
    if (t.back() != ')') throw ConfigError("missing ')' in geometry '" + t + "'");
    args = parse_arguments(std::string_view(t).substr(open + 1, t.size() - open - 2));
  }
  Geometry g;
  auto no_args = [&](GeometryKind k) {
    if (!args.empty()) throw ConfigError("geometry " + name + " takes no arguments");
    g.kind = k;
    return g;
  };
  if (name == "FlatStrip") return no_args(GeometryKind::FlatStrip);
  if (name == "DoubleStrip") return no_args(GeometryKind::DoubleStrip);
  if (name == "TwoDisks") return no_args(GeometryKind::TwoDisks);
  if (name == "Constant") return no_args(GeometryKind::Constant);
  if (name == "Disk") {
    g.kind = GeometryKind::Disk;
    if (args.empty()) return g;
    // Either (r), (c_0, ..., c_{d-1}, r) or the three-coordinate form to_string writes.
    if (args.size() == 1) {
      g.radius = args[0];
    } else if (static_cast<int>(args.size()) == d + 1 || args.size() == 4) {
      const std::size_t nc = args.size() - 1;
      for (std::size_t k = 0; k < nc && k < 3; ++k) g.center[k] = args[k];
      g.radius = args.back();
    } else {
      throw ConfigError("Disk takes (r) or (center..., r)");
    }
    return g;
  }
  if (name == "TripleJunction") {
    g.kind = GeometryKind::TripleJunction;
    if (args.empty()) return g;
    if (args.size() != 3) throw ConfigError("TripleJunction takes three sector angles");
    g.angles = {args[0], args[1], args[2]};
    return g;
  }
  throw ConfigError("unknown geometry '" + name + "'");
}

Scenario Scenario::baseline(Geometry geometry, ModelKind kind, int n_phases) {
  Scenario s;
  s.geometry = geometry;
  s.grid = GridSpec(2, 256);
  s.model.kind = kind;
  s.model.n_phases = n_phases;
  s.model.eps = 8.0 * s.grid.spacing();
  s.dt = s.grid.spacing() * s.grid.spacing();
  s.t_end = 0.02;
  s.snapshot_every = 100;
  s.projection = Projection::EveryStep;
  s.scheme = Scheme::IMEX;
  return s;
}

long Scenario::step_count() const {
  if (t_end <= 0.0) return 0;
  return static_cast<long>(std::ceil(t_end / dt - 1e-9));
}

double interface_separation(const Geometry& g, int d, int n_phases) {
  (void)n_phases;
  switch (g.kind) {
    case GeometryKind::FlatStrip: return 0.5;
    case GeometryKind::DoubleStrip: return 0.2;
    case GeometryKind::Constant: return std::numeric_limits<double>::infinity();
    case GeometryKind::Disk: return std::min(2.0 * g.radius, 1.0 - 2.0 * g.radius);
    case GeometryKind::TwoDisks: {
      // Worst case over all jitters, so the check does not depend on the seed.
      const double nominal_gap = 0.5 - 2.0 * kTwoDiskRadius;
      const double worst_shift = 2.0 * kTwoDiskJitter * std::sqrt(static_cast<double>(d));
      return std::min(2.0 * kTwoDiskRadius, nominal_gap - worst_shift);
    }
    case GeometryKind::TripleJunction: {
      const Honeycomb net = honeycomb(g);
      return net.valid ? net.separation : 0.0;
    }
  }
  return 0.0;
}

void Scenario::validate() const {
  model.validate();
  if (grid.dim() < 2) throw ConfigError("scenarios need grid.d >= 2");
  check_stability(grid, model, dt, scheme);
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be >= 0");
  if (snapshot_every < 1) throw ConfigError("snapshot_every must be >= 1");
  if (geometry.kind == GeometryKind::TripleJunction) {
    if (model.n_phases < 3) throw ScenarioError("TripleJunction needs n_phases >= 3");
    const auto& a = geometry.angles;
    if (std::abs(a[0] + a[1] + a[2] - 360.0) > 1e-6) {
      throw ScenarioError("TripleJunction sector angles must sum to 360");
    }
    for (double ak : a) {
      if (!(ak > 0.0 && ak < 180.0)) {
        throw ScenarioError("TripleJunction sector angles must lie in (0, 180)");
      }
    }
    if (!honeycomb(geometry).valid) {
      throw ScenarioError("no periodic hexagonal network has these sector angles");
    }
  }
  if (geometry.kind == GeometryKind::Disk) {
    const double e = model.eps;
    if (!(geometry.radius > 3.0 * e && geometry.radius < 0.5 - 3.0 * e)) {
      throw ScenarioError("Disk radius must lie in (3 eps, 0.5 - 3 eps)");
    }
  }
  const double sep = interface_separation(geometry, grid.dim(), model.n_phases);
  if (sep < 6.0 * model.eps) {
    throw ScenarioError("interfaces " + fmt(sep) + " apart overlap their 6 eps = " +
                        fmt(6.0 * model.eps) + " bands");
  }
}

Scenario parse_scenario(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  static const std::vector<std::string> known = {
      "geometry", "model.kind", "model.eps", "model.n_phases", "model.denom_floor", "grid.d",
      "grid.n",   "dt",         "t_end",     "snapshot_every", "projection",        "seed",
      "scheme"};
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (kv.count(key) != 0) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv[key] = value;
  }

  Scenario s;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  int d = 2;
  int n = 256;
  if (const auto* v = get("grid.d")) d = static_cast<int>(parse_integer(*v, "grid.d"));
  if (const auto* v = get("grid.n")) n = static_cast<int>(parse_integer(*v, "grid.n"));
  s.grid = GridSpec(d, n);
  const double h = s.grid.spacing();
  s.model.eps = 8.0 * h;
  s.dt = h * h;
  if (const auto* v = get("model.kind")) s.model.kind = parse_model_kind(*v);
  if (const auto* v = get("model.eps")) s.model.eps = parse_quantity(*v, h, "model.eps");
  if (const auto* v = get("model.n_phases")) {
    s.model.n_phases = static_cast<int>(parse_integer(*v, "model.n_phases"));
  }
  if (const auto* v = get("model.denom_floor")) {
    s.model.denom_floor = parse_double(*v, "model.denom_floor");
  }
  if (const auto* v = get("dt")) s.dt = parse_quantity(*v, h, "dt");
  if (const auto* v = get("t_end")) s.t_end = parse_quantity(*v, h, "t_end");
  if (const auto* v = get("snapshot_every")) {
    s.snapshot_every = static_cast<int>(parse_integer(*v, "snapshot_every"));
  }
  if (const auto* v = get("projection")) s.projection = parse_projection(*v);
  if (const auto* v = get("seed")) {
    s.seed = static_cast<std::uint64_t>(parse_integer(*v, "seed"));
  }
  if (const auto* v = get("scheme")) s.scheme = parse_scheme(*v);
  if (const auto* v = get("geometry")) s.geometry = parse_geometry(*v, d);
  if (s.geometry.kind == GeometryKind::TripleJunction && get("model.n_phases") == nullptr) {
    s.model.n_phases = 3;
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_scenario(in);
}

void write_scenario(const Scenario& s, std::ostream& out) {
  out << "geometry = " << to_string(s.geometry) << '\n'
      << "model.kind = " << to_string(s.model.kind) << '\n'
      << "model.eps = " << fmt(s.model.eps) << '\n'
      << "model.n_phases = " << s.model.n_phases << '\n'
      << "model.denom_floor = " << fmt(s.model.denom_floor) << '\n'
      << "grid.d = " << s.grid.dim() << '\n'
      << "grid.n = " << s.grid.points_per_axis() << '\n'
      << "dt = " << fmt(s.dt) << '\n'
      << "t_end = " << fmt(s.t_end) << '\n'
      << "snapshot_every = " << s.snapshot_every << '\n'
      << "projection = " << to_string(s.projection) << '\n'
      << "seed = " << s.seed << '\n'
      << "scheme = " << to_string(s.scheme) << '\n';
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config '" + path.string() + "'");
  write_scenario(s, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

PhaseField build_scenario(const Scenario& s) {
  s.validate();
  const GridSpec& grid = s.grid;
  const int d = grid.dim();
  const int n_ph = s.model.n_phases;
  const double eps = s.model.eps;
  const Geometry& geo = s.geometry;
  PhaseField state(grid, n_ph, 0.0);

  // Signed distances (positive inside) for phases 0..2; other phases stay empty.
  constexpr double kEmpty = -std::numeric_limits<double>::infinity();
  std::function<std::array<double, 3>(const Point&)> distances;
  switch (geo.kind) {
    case GeometryKind::FlatStrip:
      distances = [](const Point& x) {
        const double d0 = 0.25 - std::abs(wrap(x[0] - 0.5));
        return std::array<double, 3>{d0, -d0, kEmpty};
      };
      break;
    case GeometryKind::DoubleStrip:
      distances = [](const Point& x) {
        const double d0 = std::max(0.125 - std::abs(wrap(x[0] - 0.225)),
                                   0.175 - std::abs(wrap(x[0] - 0.725)));
        return std::array<double, 3>{d0, -d0, kEmpty};
      };
      break;
    case GeometryKind::Disk:
      distances = [&geo, d](const Point& x) {
        const double d0 = geo.radius - periodic_norm(x, geo.center, d);
        return std::array<double, 3>{d0, -d0, kEmpty};
      };
      break;
    case GeometryKind::TwoDisks: {
      const auto centers = two_disk_centers(s.seed, d);
      distances = [centers, d](const Point& x) {
        const double d0 = std::max(kTwoDiskRadius - periodic_norm(x, centers[0], d),
                                   kTwoDiskRadius - periodic_norm(x, centers[1], d));
        return std::array<double, 3>{d0, -d0, kEmpty};
      };
      break;
    }
    case GeometryKind::Constant:
      distances = [](const Point&) {
        return std::array<double, 3>{std::numeric_limits<double>::infinity(), kEmpty, kEmpty};
      };
      break;
    case GeometryKind::TripleJunction: {
      const Honeycomb net = honeycomb(geo);
      distances = [net](const Point& x) {
        const Vec2 p{x[0] - std::floor(x[0]), x[1] - std::floor(x[1])};
        std::array<double, 3> out{};
        for (std::size_t k = 0; k < 3; ++k) out[k] = cell_distance(p, net.cells[k]);
        return out;
      };
      break;
    }
  }

  parallel_for(grid.cell_count(), [&](std::size_t i) {
    const Point x = grid.position(i);
    const auto dist = distances(x);
    for (int p = 0; p < n_ph; ++p) {
      const double di = p < 3 ? dist[static_cast<std::size_t>(p)] : kEmpty;
      state[p][i] = optimal_profile(di, eps);
    }
  });
  return project_constraint(state, s.model);
}

}  // namespace mpfc
