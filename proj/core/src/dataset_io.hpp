#pragma once

// Internal dataset-file helpers shared by the pipeline stages and the
// experiment runners. Not installed.

#include <filesystem>
#include <string>
#include <vector>

#include "savfi/beamform.hpp"
#include "savfi/flowfield.hpp"
#include "savfi/pipeline.hpp"
#include "savfi/ussim.hpp"

namespace savfi::detail {

std::string window_name(int index, const char* suffix);

struct WindowRecord {
  int index = 0;
  std::uint64_t seed = 0;
  Pose pose;
  std::string tag;
};

struct WindowIndex {
  std::string scene;
  WindowParams window;
  double depth_top_m = 0.0;
  double margin_m = 0.0;
  std::vector<WindowRecord> records;
};

void save_window_index(const std::filesystem::path& path,
                       const WindowIndex& index);
WindowIndex load_window_index(const std::filesystem::path& path);

void write_window_truth(const std::filesystem::path& dir, int index,
                        const WindowSample& sample);
double window_peak_speed(const WindowSample& sample);

void save_channel_data(const std::filesystem::path& dir, int index,
                       const ChannelData& data);
ChannelData load_channel_data(const std::filesystem::path& dir, int index);

void save_iq_stack(const std::filesystem::path& dir, const std::string& stem,
                   const IqStack& stack);
IqStack load_iq_stack(const std::filesystem::path& path);

std::vector<float> envelope_image(const IqStack& stack, int frame,
                                  bool log_compressed, double dr_db);

// Rejection-samples one window that actually contains flow (peak speed at
// least min_peak_fraction of scene_peak).
WindowSample sample_flow_window(const FlowField& scene, Rng& rng,
                                const WindowParams& params,
                                double min_peak_speed);

// Simulates and beamforms the 5-frame stack of one posed window.
IqStack simulate_window_stack(const PipelineConfig& config,
                              std::shared_ptr<const FlowField> scene,
                              const Pose& pose, std::uint64_t window_seed);

double scene_peak_speed(const PipelineConfig& config,
                        const std::string& scene_name);

}  // namespace savfi::detail
