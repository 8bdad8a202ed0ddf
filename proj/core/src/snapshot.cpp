#include "mpfc/snapshot.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "mpfc/error.hpp"

namespace mpfc {

namespace {

constexpr char kMagic[] = "MPFC0001";
constexpr std::size_t kMagicLength = 8;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int k = 0; k < 8; ++k) out |= ((v >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return out;
  }
}

template <typename T>
T parse_header_value(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("snapshot header lacks '" + key + "'");
  const std::string& s = it->second;
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("snapshot header value '" + s + "' for '" + key + "' is malformed");
  }
  return v;
}

}  // namespace

void write_snapshot(const PhaseField& state, const ModelSpec& model,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open snapshot '" + path.string() + "' for writing");
  out << kMagic << '\n'
      << "d=" << state.spec.dim() << '\n'
      << "n=" << state.spec.points_per_axis() << '\n'
      << "N=" << state.n_phases() << '\n'
      << "eps=" << fmt(model.eps) << '\n'
      << "time=" << fmt(state.time) << '\n'
      << "model=" << to_string(model.kind) << '\n'
      << '\n';
  std::vector<std::uint64_t> buffer(state.spec.cell_count());
  for (const auto& u : state.phases) {
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      buffer[i] = to_little(std::bit_cast<std::uint64_t>(u[i]));
    }
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(std::uint64_t)));
  }
  if (!out) throw Error("write failed for snapshot '" + path.string() + "'");
}

PhaseField read_snapshot(const std::filesystem::path& path, SnapshotHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open snapshot '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.size() != kMagicLength ||
      std::memcmp(line.data(), kMagic, kMagicLength) != 0) {
    throw FormatError("'" + path.string() + "' is not an MPFC0001 snapshot");
  }
  std::map<std::string, std::string> kv;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed snapshot header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!terminated) throw FormatError("snapshot header is not terminated");

  SnapshotHeader h;
  h.d = parse_header_value<int>(kv, "d");
  h.n = parse_header_value<int>(kv, "n");
  h.n_phases = parse_header_value<int>(kv, "N");
  h.eps = parse_header_value<double>(kv, "eps");
  h.time = parse_header_value<double>(kv, "time");
  const auto model_it = kv.find("model");
  if (model_it == kv.end()) throw FormatError("snapshot header lacks 'model'");
  try {
    h.model = parse_model_kind(model_it->second);
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  if (h.n_phases < 1) throw FormatError("snapshot declares no phases");

  GridSpec grid;
  try {
    grid = GridSpec(h.d, h.n);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("snapshot grid: ") + e.what());
  }

  PhaseField state(grid, h.n_phases, h.time);
  std::vector<std::uint64_t> buffer(grid.cell_count());
  const auto bytes = static_cast<std::streamsize>(buffer.size() * sizeof(std::uint64_t));
  for (int p = 0; p < h.n_phases; ++p) {
    in.read(reinterpret_cast<char*>(buffer.data()), bytes);
    if (in.gcount() != bytes) throw FormatError("snapshot payload is truncated");
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      state[p][i] = std::bit_cast<double>(to_little(buffer[i]));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("snapshot payload is longer than its header declares");
  }
  if (header != nullptr) *header = h;
  return state;
}

}  // namespace mpfc
