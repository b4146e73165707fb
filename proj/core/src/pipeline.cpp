#include "savfi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dataset_io.hpp"
#include "savfi/clutter.hpp"
#include "savfi/cnn/dataset.hpp"
#include "savfi/cnn/model_io.hpp"
#include "savfi/phantom.hpp"
#include "savfi/plot.hpp"
#include "savfi/rng.hpp"
#include "savfi/tensorfile.hpp"

namespace savfi {
namespace {

namespace fs = std::filesystem;

void write_kv_file(const fs::path& path,
                   const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string());
  }
  for (const auto& [k, v] : kv) {
    os << k << "=" << v << "\n";
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

namespace detail {

std::string window_name(int index, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "win%04d_%s", index, suffix);
  return buf;
}

void save_window_index(const fs::path& path, const WindowIndex& index) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw DataError("cannot open " + path.string());
  }
  os.precision(17);
  os << "scene=" << index.scene << "\n";
  os << "size=" << index.window.size << "\n";
  os << "n_frames=" << index.window.n_frames << "\n";
  os << "pitch_m=" << index.window.pitch_m << "\n";
  os << "frame_dt_s=" << index.window.frame_dt_s << "\n";
  os << "depth_top_m=" << index.depth_top_m << "\n";
  os << "margin_m=" << index.margin_m << "\n";
  for (const WindowRecord& r : index.records) {
    os << "window=" << r.index << " seed=" << r.seed
       << " cx=" << r.pose.center.x << " cz=" << r.pose.center.z
       << " theta=" << r.pose.theta << " t0=" << r.pose.t_start
       << " tag=" << r.tag << "\n";
  }
}

WindowIndex load_window_index(const fs::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw DataError("missing window index: " + path.string());
  }
  WindowIndex index;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (line.rfind("window=", 0) == 0) {
      WindowRecord r;
      std::istringstream fields(line);
      std::string field;
      while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
          throw DataError("malformed windows.txt line: " + line);
        }
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "window") {
          r.index = std::stoi(value);
        } else if (key == "seed") {
          r.seed = std::stoull(value);
        } else if (key == "cx") {
          r.pose.center.x = std::stod(value);
        } else if (key == "cz") {
          r.pose.center.z = std::stod(value);
        } else if (key == "theta") {
          r.pose.theta = std::stod(value);
        } else if (key == "t0") {
          r.pose.t_start = std::stod(value);
        } else if (key == "tag") {
          r.tag = value;
        }
      }
      index.records.push_back(r);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "scene") {
      index.scene = value;
    } else if (key == "size") {
      index.window.size = std::stoi(value);
    } else if (key == "n_frames") {
      index.window.n_frames = std::stoi(value);
    } else if (key == "pitch_m") {
      index.window.pitch_m = std::stod(value);
    } else if (key == "frame_dt_s") {
      index.window.frame_dt_s = std::stod(value);
    } else if (key == "depth_top_m") {
      index.depth_top_m = std::stod(value);
    } else if (key == "margin_m") {
      index.margin_m = std::stod(value);
    }
  }
  return index;
}

void write_window_truth(const fs::path& dir, int index,
                        const WindowSample& sample) {
  const auto n = static_cast<std::uint64_t>(sample.size);
  write_tensor(dir / window_name(index, "truth.vfit"),
               make_tensor({static_cast<std::uint64_t>(sample.n_frames), 2,
                            n, n},
                           sample.frames));
  // vessel mask: moving pixels of the first frame
  const std::size_t plane = static_cast<std::size_t>(sample.size) *
                            static_cast<std::size_t>(sample.size);
  std::vector<float> mask(plane, 0.0f);
  for (std::size_t i = 0; i < plane; ++i) {
    const float vz = sample.frames[i];
    const float vx = sample.frames[plane + i];
    if (vz != 0.0f || vx != 0.0f) {
      mask[i] = 1.0f;
    }
  }
  write_tensor(dir / window_name(index, "mask.vfit"),
               make_tensor({n, n}, std::move(mask)));
}

double window_peak_speed(const WindowSample& sample) {
  const std::size_t plane = static_cast<std::size_t>(sample.size) *
                            static_cast<std::size_t>(sample.size);
  double peak = 0.0;
  for (int f = 0; f < sample.n_frames; ++f) {
    const float* vz = sample.frames.data() + 2 * plane * f;
    const float* vx = vz + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      peak = std::max(peak, std::hypot(static_cast<double>(vz[i]),
                                       static_cast<double>(vx[i])));
    }
  }
  return peak;
}

void save_channel_data(const fs::path& dir, int index,
                       const ChannelData& data) {
  write_tensor(dir / window_name(index, "rf.vfit"),
               make_tensor({static_cast<std::uint64_t>(data.n_events),
                            static_cast<std::uint64_t>(data.n_elements),
                            static_cast<std::uint64_t>(data.n_time)},
                           data.samples));
  std::ostringstream sources;
  sources.precision(17);
  for (std::size_t s = 0; s < data.sources.size(); ++s) {
    sources << (s != 0 ? ";" : "") << data.sources[s].x << ":"
            << data.sources[s].z;
  }
  write_kv_file(dir / window_name(index, "rf.hdr"),
                {{"fs_hz", fmt(data.fs_hz)},
                 {"t0_s", fmt(data.t0_s)},
                 {"prf_hz", fmt(data.prf_hz)},
                 {"c_mps", fmt(data.c_mps)},
                 {"f0_hz", fmt(data.f0_hz)},
                 {"element_pitch_m", fmt(data.element_pitch_m)},
                 {"sources", sources.str()}});
}

ChannelData load_channel_data(const fs::path& dir, int index) {
  const TensorData t = read_tensor(dir / window_name(index, "rf.vfit"));
  if (t.dtype() != Dtype::F32 || t.dims.size() != 3) {
    throw DataError("unexpected RF tensor layout");
  }
  ChannelData data;
  data.n_events = static_cast<int>(t.dims[0]);
  data.n_elements = static_cast<int>(t.dims[1]);
  data.n_time = static_cast<int>(t.dims[2]);
  data.samples = t.f32();

  std::ifstream is(dir / window_name(index, "rf.hdr"));
  if (!is) {
    throw DataError("missing RF sidecar for window " + std::to_string(index));
  }
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "fs_hz") {
      data.fs_hz = std::stod(value);
    } else if (key == "t0_s") {
      data.t0_s = std::stod(value);
    } else if (key == "prf_hz") {
      data.prf_hz = std::stod(value);
    } else if (key == "c_mps") {
      data.c_mps = std::stod(value);
    } else if (key == "f0_hz") {
      data.f0_hz = std::stod(value);
    } else if (key == "element_pitch_m") {
      data.element_pitch_m = std::stod(value);
    } else if (key == "sources") {
      std::istringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ';')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
          throw DataError("malformed sources list in RF sidecar");
        }
        data.sources.push_back({std::stod(item.substr(0, colon)),
                                std::stod(item.substr(colon + 1))});
      }
    }
  }
  return data;
}

void save_iq_stack(const fs::path& dir, const std::string& stem,
                   const IqStack& stack) {
  write_tensor(dir / (stem + ".vfit"),
               make_tensor({static_cast<std::uint64_t>(stack.n_frames),
                            static_cast<std::uint64_t>(stack.height),
                            static_cast<std::uint64_t>(stack.width)},
                           stack.data));
  write_kv_file(dir / (stem + ".hdr"),
                {{"pitch_m", fmt(stack.grid.pitch_m)},
                 {"frame_dt_s", fmt(stack.frame_dt_s)},
                 {"x0_m", fmt(stack.grid.x0_m)},
                 {"z0_m", fmt(stack.grid.z0_m)}});
}

IqStack load_iq_stack(const fs::path& path) {
  const TensorData t = read_tensor(path);
  if (t.dtype() != Dtype::C64 || t.dims.size() != 3) {
    throw DataError("expected complex [F,H,W] stack: " + path.string());
  }
  IqStack stack;
  stack.n_frames = static_cast<int>(t.dims[0]);
  stack.height = static_cast<int>(t.dims[1]);
  stack.width = static_cast<int>(t.dims[2]);
  stack.data = t.c64();
  stack.grid.width = stack.width;
  stack.grid.height = stack.height;

  fs::path hdr = path;
  hdr.replace_extension(".hdr");
  std::ifstream is(hdr);
  if (is) {
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        continue;
      }
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "pitch_m") {
        stack.grid.pitch_m = std::stod(value);
      } else if (key == "frame_dt_s") {
        stack.frame_dt_s = std::stod(value);
      } else if (key == "x0_m") {
        stack.grid.x0_m = std::stod(value);
      } else if (key == "z0_m") {
        stack.grid.z0_m = std::stod(value);
      }
    }
  }
  return stack;
}

std::vector<float> envelope_image(const IqStack& stack, int frame,
                                  bool log_compressed, double dr_db) {
  const std::size_t plane =
      static_cast<std::size_t>(stack.height) * stack.width;
  std::vector<float> img(plane);
  const std::complex<float>* src = stack.frame(frame);
  if (!log_compressed) {
    for (std::size_t i = 0; i < plane; ++i) {
      img[i] = std::abs(src[i]);
    }
    return img;
  }
  IqImage iq;
  iq.grid = stack.grid;
  iq.pixels.assign(src, src + plane);
  return bmode(iq, dr_db);
}

WindowSample sample_flow_window(const FlowField& scene, Rng& rng,
                                const WindowParams& params,
                                double min_peak_speed) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    WindowSample sample = sample_window(scene, rng, params);
    if (window_peak_speed(sample) >= min_peak_speed) {
      return sample;
    }
  }
  throw DataError(
      "could not sample a window containing flow; lower "
      "gen.min_peak_fraction or enlarge the scene");
}

IqStack simulate_window_stack(const PipelineConfig& config,
                              std::shared_ptr<const FlowField> scene,
                              const Pose& pose, std::uint64_t window_seed) {
  const double extent = config.window.size * config.window.pitch_m;
  const WindowView view(std::move(scene), pose, extent, config.depth_top_m,
                        config.phantom_margin_m);
  ScattererCloud cloud =
      seed_scatterers(view.region(), config.resolved_density_per_mm2(),
                      Rng(hash64(window_seed, "scatter")));
  SimOptions options;
  options.threads = config.threads;
  options.noise_snr_db = config.noise_snr_db;
  options.noise_seed = hash64(window_seed, "noise");
  const ChannelData data =
      simulate_sequence(view, std::move(cloud), config.probe,
                        config.window.n_frames, 0.0, options);
  const ImageGrid grid = ImageGrid::centered(
      config.window.size, config.window.pitch_m, config.depth_top_m);
  return beamform_frames(data, grid, config.f_number, config.threads);
}

double scene_peak_speed(const PipelineConfig& config,
                        const std::string& scene_name) {
  if (scene_name == "disk") {
    const double radius =
        config.scene_radius_m > 2e-3 ? config.scene_radius_m : 2.2e-3;
    return config.scene_omega_rad_s * radius;
  }
  return config.scene_peak_mps;
}

}  // namespace detail

using detail::load_channel_data;
using detail::load_iq_stack;
using detail::load_window_index;
using detail::save_channel_data;
using detail::save_iq_stack;
using detail::save_window_index;
using detail::window_name;
using detail::WindowIndex;
using detail::WindowRecord;

// -------- configuration --------

PipelineConfig PipelineConfig::from_config(const Config& c) {
  PipelineConfig p;
  p.seed = c.get_u64("seed", p.seed);
  p.threads = c.get_int("threads", p.threads);

  p.scene_name = c.get_string("scene.name", p.scene_name);
  p.scene_radius_m = c.get_double("scene.radius_m", p.scene_radius_m);
  p.scene_peak_mps = c.get_double("scene.peak_mps", p.scene_peak_mps);
  p.scene_omega_rad_s = c.get_double("scene.omega_rad_s", p.scene_omega_rad_s);
  p.scene_pulsatile = c.get_bool("scene.pulsatile", p.scene_pulsatile);
  p.scene_period_s = c.get_double("scene.period_s", p.scene_period_s);

  p.window.size = c.get_int("window.size", p.window.size);
  p.window.n_frames = c.get_int("window.n_frames", p.window.n_frames);
  p.window.pitch_m = c.get_double("window.pitch_m", p.window.pitch_m);
  p.window.frame_dt_s = c.get_double("window.frame_dt_s", p.window.frame_dt_s);
  p.window.time_horizon_s =
      c.get_double("window.time_horizon_s", p.window.time_horizon_s);
  p.depth_top_m = c.get_double("window.depth_top_m", p.depth_top_m);
  p.phantom_margin_m = c.get_double("phantom.margin_m", p.phantom_margin_m);
  p.density_per_mm2 = c.get_double("phantom.density_per_mm2", 0.0);
  p.min_peak_fraction =
      c.get_double("gen.min_peak_fraction", p.min_peak_fraction);

  p.probe.n_elements = c.get_int("probe.n_elements", p.probe.n_elements);
  p.probe.element_pitch_m =
      c.get_double("probe.element_pitch_m", p.probe.element_pitch_m);
  p.probe.f0_hz = c.get_double("probe.f0_hz", p.probe.f0_hz);
  p.probe.fractional_bandwidth =
      c.get_double("probe.fractional_bandwidth", p.probe.fractional_bandwidth);
  p.probe.c_mps = c.get_double("probe.c_mps", p.probe.c_mps);
  p.probe.fs_hz = c.get_double("probe.fs_hz", p.probe.fs_hz);
  p.probe.prf_hz = c.get_double("probe.prf_hz", p.probe.prf_hz);
  p.probe.n_virtual_sources =
      c.get_int("probe.n_virtual_sources", p.probe.n_virtual_sources);
  p.probe.source_depth_m =
      c.get_double("probe.source_depth_m", p.probe.source_depth_m);
  if (c.has("sim.noise_snr_db")) {
    p.noise_snr_db = c.get_double("sim.noise_snr_db", 0.0);
  }
  p.f_number = c.get_double("beamform.f_number", p.f_number);
  p.dynamic_range_db =
      c.get_double("beamform.dynamic_range_db", p.dynamic_range_db);

  p.piv.initial_window = c.get_int("piv.window", p.piv.initial_window);
  p.piv.iterations = c.get_int("piv.iterations", p.piv.iterations);
  p.piv.overlap = c.get_double("piv.overlap", p.piv.overlap);
  p.piv.validation_threshold =
      c.get_double("piv.validation_threshold", p.piv.validation_threshold);
  p.piv_on_bmode = c.get_bool("piv.on_bmode", p.piv_on_bmode);

  const auto channels = [&c](const std::string& key,
                             const std::vector<int>& fallback) {
    if (!c.has(key)) {
      return fallback;
    }
    std::vector<int> out;
    std::istringstream is(c.get_string(key, ""));
    std::string item;
    while (std::getline(is, item, ',')) {
      out.push_back(std::stoi(item));
    }
    return out;
  };
  p.net.encoder_channels =
      channels("net.encoder_channels", p.net.encoder_channels);
  p.net.decoder_channels =
      channels("net.decoder_channels", p.net.decoder_channels);

  p.train.learning_rate =
      c.get_double("train.learning_rate", p.train.learning_rate);
  p.train.momentum = c.get_double("train.momentum", p.train.momentum);
  p.train.batch_size = c.get_int("train.batch_size", p.train.batch_size);
  p.train.epochs = c.get_int("train.epochs", p.train.epochs);
  p.train.use_masks = c.get_bool("train.use_masks", p.train.use_masks);
  p.train.val_fraction =
      c.get_double("train.val_fraction", p.train.val_fraction);
  p.train.verbose = c.get_bool("train.verbose", p.train.verbose);

  p.svd_low_cut = c.get_int("svd.low_cut", p.svd_low_cut);
  p.svd_high_cut = c.get_int("svd.high_cut", p.svd_high_cut);
  return p;
}

double PipelineConfig::resolved_density_per_mm2() const {
  if (density_per_mm2 > 0.0) {
    return density_per_mm2;
  }
  const double lambda_mm = 1e3 * probe.c_mps / probe.f0_hz;
  return 20.0 / (lambda_mm * lambda_mm);
}

std::shared_ptr<const FlowField> PipelineConfig::make_scene() const {
  return make_scene(scene_name);
}

std::shared_ptr<const FlowField> PipelineConfig::make_scene(
    const std::string& name) const {
  std::optional<PulseWaveform> waveform;
  if (scene_pulsatile) {
    waveform = PulseWaveform{scene_period_s};
  }
  if (name == "straight90" || name == "straight105") {
    const double angle = name == "straight90" ? 90.0 : 105.0;
    return std::make_shared<StraightVessel>(
        angle, scene_radius_m, scene_peak_mps, Vec2{0.0, 0.0},
        Rect{-10e-3, -7e-3, 10e-3, 7e-3}, waveform);
  }
  if (name == "disk") {
    const double radius = scene_radius_m > 2e-3 ? scene_radius_m : 2.2e-3;
    return std::make_shared<SpinningDisk>(scene_omega_rad_s, radius,
                                          Vec2{0.0, 0.0},
                                          Rect{-9e-3, -9e-3, 9e-3, 9e-3});
  }
  if (name == "composite") {
    std::vector<std::shared_ptr<const FlowField>> parts;
    parts.push_back(std::make_shared<StraightVessel>(
        90.0, 1.5e-3, scene_peak_mps, Vec2{0.0, 4.5e-3},
        Rect{-10e-3, -8.5e-3, 10e-3, 8.5e-3}, waveform));
    parts.push_back(std::make_shared<SpinningDisk>(
        scene_omega_rad_s, 2.0e-3, Vec2{0.0, -4e-3},
        Rect{-10e-3, -8.5e-3, 10e-3, 8.5e-3}));
    return std::make_shared<CompositeScene>(std::move(parts));
  }
  throw ConfigError("unknown scene '" + name + "'");
}

// -------- stages --------

void stage_gen_data(const PipelineConfig& config, const fs::path& dir,
                    int count) {
  if (count < 1) {
    throw ConfigError("gen-data count must be >= 1");
  }
  fs::create_directories(dir);
  const std::shared_ptr<const FlowField> scene = config.make_scene();

  WindowIndex index;
  index.scene = config.scene_name;
  index.window = config.window;
  index.window.margin_m = config.phantom_margin_m;
  index.depth_top_m = config.depth_top_m;
  index.margin_m = config.phantom_margin_m;

  const double min_peak =
      config.min_peak_fraction *
      detail::scene_peak_speed(config, config.scene_name);
  const std::uint64_t stage_seed = config.stage_seed("gen-data");

  for (int w = 0; w < count; ++w) {
    const std::uint64_t window_seed = hash64(stage_seed, w);
    Rng rng(window_seed);
    const WindowSample sample =
        detail::sample_flow_window(*scene, rng, index.window, min_peak);
    detail::write_window_truth(dir, w, sample);
    index.records.push_back({w, window_seed, sample.pose, config.scene_name});
  }
  save_window_index(dir / "windows.txt", index);
}

void stage_simulate(const PipelineConfig& config, const fs::path& dir) {
  const WindowIndex index = load_window_index(dir / "windows.txt");
  if (index.scene != config.scene_name) {
    throw ConfigError("windows.txt was generated for scene '" + index.scene +
                      "' but the config selects '" + config.scene_name + "'");
  }
  const std::shared_ptr<const FlowField> scene = config.make_scene();
  const double extent = index.window.size * index.window.pitch_m;

  for (const WindowRecord& record : index.records) {
    const WindowView view(scene, record.pose, extent, index.depth_top_m,
                          index.margin_m);
    ScattererCloud cloud =
        seed_scatterers(view.region(), config.resolved_density_per_mm2(),
                        Rng(hash64(record.seed, "scatter")));
    SimOptions options;
    options.threads = config.threads;
    options.noise_snr_db = config.noise_snr_db;
    options.noise_seed = hash64(record.seed, "noise");
    const ChannelData data = simulate_sequence(
        view, std::move(cloud), config.probe, index.window.n_frames, 0.0,
        options);
    save_channel_data(dir, record.index, data);
  }
}

void stage_beamform(const PipelineConfig& config, const fs::path& dir) {
  const WindowIndex index = load_window_index(dir / "windows.txt");
  const ImageGrid grid = ImageGrid::centered(
      index.window.size, index.window.pitch_m, index.depth_top_m);

  DatasetManifest manifest;
  manifest.pitch_m = index.window.pitch_m;
  manifest.frame_dt_s = index.window.frame_dt_s;
  for (const WindowRecord& record : index.records) {
    const ChannelData data = load_channel_data(dir, record.index);
    const IqStack stack =
        beamform_frames(data, grid, config.f_number, config.threads);
    save_iq_stack(dir, window_name(record.index, "iq"), stack);
    ManifestEntry entry;
    entry.input = window_name(record.index, "iq.vfit");
    entry.truth = window_name(record.index, "truth.vfit");
    entry.mask = window_name(record.index, "mask.vfit");
    entry.tag = record.tag;
    entry.seed = record.seed;
    manifest.entries.push_back(entry);
  }
  save_manifest(dir / "manifest.txt", manifest);
}

void stage_svd_filter(const PipelineConfig& config,
                      const fs::path& manifest_path,
                      const fs::path& out_dir) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  DatasetManifest out = manifest;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& entry = manifest.entries[i];
    IqStack stack = load_iq_stack(entry.input);
    const int high =
        config.svd_high_cut > 0 ? config.svd_high_cut : stack.n_frames;
    stack = svd_filter(stack, config.svd_low_cut, high);
    const std::string stem = entry.input.stem().string();
    save_iq_stack(out_dir, stem, stack);
    fs::copy_file(entry.truth, out_dir / entry.truth.filename(),
                  fs::copy_options::overwrite_existing);
    out.entries[i].input = entry.input.filename();
    out.entries[i].truth = entry.truth.filename();
    if (entry.mask) {
      fs::copy_file(*entry.mask, out_dir / entry.mask->filename(),
                    fs::copy_options::overwrite_existing);
      out.entries[i].mask = entry.mask->filename();
    }
  }
  save_manifest(out_dir / "manifest.txt", out);
}

namespace {

// Writes one frame-pair estimate plus its truth slice and appends the
// manifest entry. Shared by the PIV and CNN stages.
void emit_pair_estimate(const fs::path& out_dir, const std::string& stem,
                        const VelocityEstimate& estimate,
                        const TensorData& truth, int pair,
                        const std::optional<fs::path>& mask_src,
                        const std::string& tag, std::uint64_t seed,
                        DatasetManifest& manifest) {
  const auto h = static_cast<std::uint64_t>(estimate.height);
  const auto w = static_cast<std::uint64_t>(estimate.width);
  const std::size_t plane =
      static_cast<std::size_t>(estimate.height) * estimate.width;

  const std::string est_name = stem + "_est.vfit";
  write_tensor(out_dir / est_name, make_tensor({2, h, w}, estimate.v));
  std::vector<float> valid(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    valid[i] = estimate.valid[i] != 0 ? 1.0f : 0.0f;
  }
  write_tensor(out_dir / (stem + "_valid.vfit"),
               make_tensor({h, w}, std::move(valid)));

  const std::string truth_name = stem + "_truth.vfit";
  std::vector<float> slice(2 * plane);
  std::copy(truth.f32().begin() + static_cast<std::ptrdiff_t>(2 * plane * pair),
            truth.f32().begin() +
                static_cast<std::ptrdiff_t>(2 * plane * (pair + 1)),
            slice.begin());
  write_tensor(out_dir / truth_name,
               make_tensor({2, h, w}, std::move(slice)));

  ManifestEntry entry;
  entry.input = est_name;
  entry.truth = truth_name;
  entry.tag = tag;
  entry.seed = seed;
  if (mask_src) {
    const fs::path dst = out_dir / mask_src->filename();
    if (!fs::exists(dst)) {
      fs::copy_file(*mask_src, dst);
    }
    entry.mask = mask_src->filename();
  }
  manifest.entries.push_back(entry);
}

}  // namespace

void stage_piv(const PipelineConfig& config, const fs::path& manifest_path,
               const fs::path& out_dir) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  DatasetManifest out;
  out.pitch_m = manifest.pitch_m;
  out.frame_dt_s = manifest.frame_dt_s;

  for (const ManifestEntry& entry : manifest.entries) {
    const IqStack stack = load_iq_stack(entry.input);
    const TensorData truth = read_tensor(entry.truth);
    for (int pair = 0; pair + 1 < stack.n_frames; ++pair) {
      const std::vector<float> env_a = detail::envelope_image(
          stack, pair, config.piv_on_bmode, config.dynamic_range_db);
      const std::vector<float> env_b = detail::envelope_image(
          stack, pair + 1, config.piv_on_bmode, config.dynamic_range_db);
      const VelocityEstimate estimate = piv_pyramid(
          env_a.data(), env_b.data(), stack.height, stack.width, config.piv,
          manifest.pitch_m, manifest.frame_dt_s);
      const std::string stem =
          entry.input.stem().string() + "_p" + std::to_string(pair);
      emit_pair_estimate(out_dir, stem, estimate, truth, pair, entry.mask,
                         entry.tag, entry.seed, out);
    }
  }
  save_manifest(out_dir / "manifest.txt", out);
}

cnn::TrainResult stage_train(const PipelineConfig& config,
                             const fs::path& manifest_path,
                             const fs::path& val_manifest_path,
                             const fs::path& model_dir) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  std::optional<DatasetManifest> val;
  if (!val_manifest_path.empty()) {
    val = load_manifest(val_manifest_path);
  }
  cnn::TrainConfig train_config = config.train;
  train_config.seed = config.stage_seed("train");
  train_config.threads = config.threads;
  const cnn::TrainResult result =
      cnn::train(manifest, val ? &*val : nullptr, config.net, train_config);
  cnn::save_model(model_dir, result.params);

  std::ofstream curve(model_dir / "train_curve.txt", std::ios::trunc);
  curve << "# epoch train_loss val_epe\n";
  for (std::size_t i = 0; i < result.train_loss.size(); ++i) {
    curve << i << " " << result.train_loss[i] << " "
          << (i < result.val_epe.size() ? result.val_epe[i] : -1.0) << "\n";
  }
  curve << "# best_epoch " << result.best_epoch << "\n";
  return result;
}

void stage_infer(const PipelineConfig& config, const fs::path& model_dir,
                 const fs::path& manifest_path, const fs::path& out_dir) {
  const cnn::ModelParams<float> params = cnn::load_model(model_dir);
  const DatasetManifest manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  DatasetManifest out;
  out.pitch_m = manifest.pitch_m;
  out.frame_dt_s = manifest.frame_dt_s;

  for (const ManifestEntry& entry : manifest.entries) {
    const IqStack stack = load_iq_stack(entry.input);
    const TensorData truth = read_tensor(entry.truth);
    for (int pair = 0; pair + 1 < stack.n_frames; ++pair) {
      const VelocityEstimate estimate = cnn::infer(
          params, stack.frame(pair), stack.frame(pair + 1), stack.height,
          stack.width, manifest.pitch_m, manifest.frame_dt_s,
          config.window.size, config.threads);
      const std::string stem =
          entry.input.stem().string() + "_p" + std::to_string(pair);
      emit_pair_estimate(out_dir, stem, estimate, truth, pair, entry.mask,
                         entry.tag, entry.seed, out);
    }
  }
  save_manifest(out_dir / "manifest.txt", out);
}

EvalResult stage_eval(const fs::path& manifest_path, bool masked) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.entries.empty()) {
    throw DataError("eval manifest has no entries");
  }
  EvalResult result;
  result.masked = masked;
  std::map<std::string, std::vector<double>> per_tag;
  std::vector<double> all;
  for (const ManifestEntry& entry : manifest.entries) {
    const TensorData est = read_tensor(entry.input);
    const TensorData truth = read_tensor(entry.truth);
    if (est.dims != truth.dims || est.dims.size() != 3 || est.dims[0] != 2) {
      throw DataError("eval entry dims mismatch: " + entry.input.string());
    }
    const int h = static_cast<int>(est.dims[1]);
    const int w = static_cast<int>(est.dims[2]);
    std::vector<float> mask;
    if (masked && entry.mask) {
      const TensorData m = read_tensor(*entry.mask);
      mask = m.f32();
    }
    const double epe =
        epe_percent(truth.f32().data(), est.f32().data(), h, w,
                    mask.empty() ? nullptr : mask.data());
    per_tag[entry.tag.empty() ? "all" : entry.tag].push_back(epe);
    all.push_back(epe);
  }
  for (auto& [tag, values] : per_tag) {
    result.per_tag[tag] = summarize(values);
    result.per_tag[tag].masked = masked;
  }
  result.overall = summarize(all);
  result.overall.masked = masked;
  return result;
}

std::string format_eval(const EvalResult& result) {
  std::ostringstream os;
  os.precision(6);
  const auto line = [&os](const std::string& tag, const EpeReport& r) {
    os << "tag=" << tag << " n=" << r.samples.size()
       << " median=" << r.median << " q1=" << r.q1 << " q3=" << r.q3
       << " lo=" << r.lo_whisker << " hi=" << r.hi_whisker
       << " outliers=" << r.outliers << "\n";
  };
  for (const auto& [tag, report] : result.per_tag) {
    line(tag, report);
  }
  line("OVERALL", result.overall);
  return os.str();
}

int stage_plot(const PipelineConfig& config, const fs::path& estimate_path,
               const fs::path& iq_path, int frame, const fs::path& out_prefix,
               int decimate) {
  const TensorData est_tensor = read_tensor(estimate_path);
  if (est_tensor.dims.size() != 3 || est_tensor.dims[0] != 2) {
    throw DataError("estimate tensor must be [2,H,W]");
  }
  VelocityEstimate estimate;
  estimate.height = static_cast<int>(est_tensor.dims[1]);
  estimate.width = static_cast<int>(est_tensor.dims[2]);
  estimate.v = est_tensor.f32();
  estimate.valid.assign(
      static_cast<std::size_t>(estimate.height) * estimate.width, 1);

  const std::size_t plane =
      static_cast<std::size_t>(estimate.height) * estimate.width;
  std::vector<float> background(plane, 0.5f);
  if (!iq_path.empty()) {
    const IqStack stack = load_iq_stack(iq_path);
    if (stack.height != estimate.height || stack.width != estimate.width) {
      throw DataError("IQ stack dims do not match the estimate");
    }
    if (frame < 0 || frame >= stack.n_frames) {
      throw DataError("background frame index out of range");
    }
    const std::vector<float> db =
        detail::envelope_image(stack, frame, true, config.dynamic_range_db);
    for (std::size_t i = 0; i < plane; ++i) {
      background[i] =
          static_cast<float>(1.0 + db[i] / config.dynamic_range_db);
    }
  } else {
    double peak = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      peak = std::max(peak,
                      std::hypot(static_cast<double>(estimate.v[i]),
                                 static_cast<double>(estimate.v[plane + i])));
    }
    if (peak > 0.0) {
      for (std::size_t i = 0; i < plane; ++i) {
        background[i] = static_cast<float>(
            std::hypot(static_cast<double>(estimate.v[i]),
                       static_cast<double>(estimate.v[plane + i])) /
            peak);
      }
    }
  }

  const fs::path bg_path = out_prefix.string() + "_bg.pgm";
  write_pgm(bg_path, background, estimate.width, estimate.height);
  return write_quiver_svg(out_prefix.string() + "_vec.svg", estimate,
                          decimate, bg_path.filename());
}

int run_repro_smoke(const PipelineConfig& base, const fs::path& out_dir) {
  PipelineConfig config = base;
  config.scene_name = "straight90";
  // light but exercises every stage
  config.density_per_mm2 = 60.0;
  config.train.epochs = std::min(config.train.epochs, 1);
  config.train.batch_size = 4;
  config.train.val_fraction = 0.25;

  fs::create_directories(out_dir);
  const fs::path data = out_dir / "data";
  stage_gen_data(config, data, 2);
  stage_simulate(config, data);
  stage_beamform(config, data);
  stage_svd_filter(config, data / "manifest.txt", out_dir / "svd");
  stage_piv(config, data / "manifest.txt", out_dir / "piv");
  const cnn::TrainResult trained =
      stage_train(config, data / "manifest.txt", fs::path{},
                  out_dir / "model");
  stage_infer(config, out_dir / "model", data / "manifest.txt",
              out_dir / "cnn");
  const EvalResult piv_eval =
      stage_eval(out_dir / "piv" / "manifest.txt", false);
  const EvalResult cnn_eval =
      stage_eval(out_dir / "cnn" / "manifest.txt", false);
  const int arrows =
      stage_plot(config, out_dir / "piv" / "win0000_iq_p0_est.vfit",
                 data / "win0000_iq.vfit", 0, out_dir / "plot", 8);

  std::ofstream summary(out_dir / "summary.txt", std::ios::trunc);
  summary << "seed=" << config.seed << " threads=" << config.threads << "\n";
  summary << "train_final_loss="
          << (trained.train_loss.empty() ? 0.0 : trained.train_loss.back())
          << "\n";
  summary << "piv_eval:\n" << format_eval(piv_eval);
  summary << "cnn_eval:\n" << format_eval(cnn_eval);
  summary << "plot_arrows=" << arrows << "\n";
  return summary ? 0 : 1;
}

}  // namespace savfi
