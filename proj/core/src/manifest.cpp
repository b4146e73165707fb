#include "savfi/manifest.hpp"

#include <fstream>
#include <sstream>

#include "savfi/tensorfile.hpp"

namespace savfi {
namespace {

bool dims_tail_match(const std::vector<std::uint64_t>& a, std::size_t ai,
                     const std::vector<std::uint64_t>& b, std::size_t bi) {
  if (a.size() - ai != b.size() - bi) {
    return false;
  }
  for (; ai < a.size(); ++ai, ++bi) {
    if (a[ai] != b[bi]) {
      return false;
    }
  }
  return true;
}

void validate_entry(const ManifestEntry& e) {
  for (const auto* p : {&e.input, &e.truth}) {
    if (!std::filesystem::exists(*p)) {
      throw DataError("missing file: " + p->string());
    }
  }
  if (e.mask && !std::filesystem::exists(*e.mask)) {
    throw DataError("missing file: " + e.mask->string());
  }
  const TensorHeader in = read_tensor_header(e.input);
  const TensorHeader tr = read_tensor_header(e.truth);

  std::uint64_t h = 0;
  std::uint64_t w = 0;
  if (in.dims.size() == 3 && in.dtype == Dtype::C64 && tr.dims.size() == 4 &&
      tr.dims[0] == in.dims[0] && tr.dims[1] == 2) {
    // window dataset: input [F,H,W] complex, truth [F,2,H,W]
    h = in.dims[1];
    w = in.dims[2];
    if (tr.dims[2] != h || tr.dims[3] != w) {
      throw DataError("inconsistent dims between " + e.input.string() +
                      " and " + e.truth.string());
    }
  } else if (in.dims.size() == 3 && in.dims[0] == 2 &&
             tr.dims.size() == 3 && tr.dims[0] == 2) {
    // estimate dataset: both [2,H,W]
    h = in.dims[1];
    w = in.dims[2];
    if (!dims_tail_match(in.dims, 1, tr.dims, 1)) {
      throw DataError("inconsistent dims between " + e.input.string() +
                      " and " + e.truth.string());
    }
  } else {
    throw DataError("unrecognized entry shape for " + e.input.string());
  }
  if (e.mask) {
    const TensorHeader m = read_tensor_header(*e.mask);
    if (m.dims.size() != 2 || m.dims[0] != h || m.dims[1] != w) {
      throw DataError("mask dims inconsistent for " + e.mask->string());
    }
  }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw DataError("missing file: " + path.string());
  }
  const std::filesystem::path base = path.parent_path();
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const auto fail = [&](const std::string& why) {
      throw DataError("manifest " + path.string() + " line " +
                      std::to_string(line_no) + ": " + why);
    };
    if (line.rfind("pitch_m=", 0) == 0) {
      m.pitch_m = std::stod(line.substr(8));
      continue;
    }
    if (line.rfind("frame_dt_s=", 0) == 0) {
      m.frame_dt_s = std::stod(line.substr(11));
      continue;
    }
    ManifestEntry e;
    bool have_input = false;
    bool have_truth = false;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        fail("malformed field '" + field + "'");
      }
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "input") {
        e.input = base / value;
        have_input = true;
      } else if (key == "truth") {
        e.truth = base / value;
        have_truth = true;
      } else if (key == "mask") {
        if (value != "-") {
          e.mask = base / value;
        }
      } else if (key == "tag") {
        e.tag = value;
      } else if (key == "seed") {
        e.seed = std::stoull(value);
      } else {
        fail("unknown field '" + key + "'");
      }
    }
    if (!have_input || !have_truth) {
      fail("entry needs input= and truth=");
    }
    validate_entry(e);
    m.entries.push_back(std::move(e));
  }
  if (!m.entries.empty()) {
    if (m.frame_dt_s <= 0.0) {
      throw DataError("manifest " + path.string() +
                      ": frame_dt_s must be > 0");
    }
    if (m.pitch_m <= 0.0) {
      throw DataError("manifest " + path.string() + ": pitch_m must be > 0");
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string());
  }
  os.precision(17);
  os << "pitch_m=" << manifest.pitch_m << "\n";
  os << "frame_dt_s=" << manifest.frame_dt_s << "\n";
  for (const auto& e : manifest.entries) {
    os << "input=" << e.input.generic_string()
       << " truth=" << e.truth.generic_string() << " mask="
       << (e.mask ? e.mask->generic_string() : std::string("-"))
       << " tag=" << e.tag << " seed=" << e.seed << "\n";
  }
  if (!os) {
    throw DataError("write failed for " + path.string());
  }
}

}  // namespace savfi
