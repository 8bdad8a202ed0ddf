#pragma once

#include <filesystem>
#include <string>

#include "mpfc/dynamics.hpp"

namespace mpfc {

// Snapshot file layout:
//   "MPFC0001\n"
//   key=value lines for d, n, N, eps, time, model (doubles as %.17g)
//   an empty line
//   N * n^d little-endian IEEE doubles, phase-major, last axis fastest.

struct SnapshotHeader {
  int d = 0;
  int n = 0;
  int n_phases = 0;
  double eps = 0.0;
  double time = 0.0;
  ModelKind model = ModelKind::MeanShift;
};

void write_snapshot(const PhaseField& state, const ModelSpec& model,
                    const std::filesystem::path& path);

/// Throws FormatError on bad magic, malformed or missing header keys, a
/// shape that does not match the payload, or a short read.
PhaseField read_snapshot(const std::filesystem::path& path, SnapshotHeader* header = nullptr);

}  // namespace mpfc
