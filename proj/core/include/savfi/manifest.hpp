#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "savfi/common.hpp"

namespace savfi {

// Line-oriented dataset index. Header lines `pitch_m=` and `frame_dt_s=`,
// then one entry per line:
//   input=<path> truth=<path> mask=<path|-> tag=<string> seed=<u64>
// Paths are resolved relative to the manifest's directory. Two entry shapes
// are accepted:
//   window datasets:   input [F,H,W] complex, truth [F,2,H,W] float32
//   estimate datasets: input [2,H,W] float32, truth [2,H,W] float32
// with mask always [H,W] float32 when present.
struct ManifestEntry {
  std::filesystem::path input;
  std::filesystem::path truth;
  std::optional<std::filesystem::path> mask;
  std::string tag;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  double pitch_m = 0.0;
  double frame_dt_s = 0.0;
  std::vector<ManifestEntry> entries;
};

// Parses and validates: referenced files must exist and have mutually
// consistent dims; frame_dt_s must be positive when entries are present.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes entries with paths as given (callers normally pass paths relative
// to the manifest's own directory).
void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest);

}  // namespace savfi
