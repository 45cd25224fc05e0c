#pragma once

// Binary field snapshots.
//
// Layout (little-endian):
//   char[8]  magic "KVSNAP\0\0"
//   u32      version (1)
//   u32      Nx, Ny, Mx, My
//   f64      Lx, Ly, t
//   u32      field count n
//   n times: u32 name length, name bytes
//   n times: Mx*My f64 grid values, row-major (x index outer)

#include "kvflow/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kvflow {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct Snapshot {
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t mx = 0;
  std::uint32_t my = 0;
  double lx = 1.0;
  double ly = 1.0;
  double t = 0.0;
  std::vector<std::string> names;
  std::vector<Grid> fields;  ///< each mx x my
};

std::string encode_snapshot(const Snapshot& s);
/// Throws ValidationError on bad magic, version, or size mismatch.
Snapshot decode_snapshot(const std::string& bytes);

void write_snapshot(const std::string& path, const Snapshot& s);
Snapshot read_snapshot(const std::string& path);

}  // namespace kvflow
