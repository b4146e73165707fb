#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "savfi/beamform.hpp"
#include "savfi/cnn/train.hpp"
#include "savfi/config.hpp"
#include "savfi/echopiv.hpp"
#include "savfi/flowfield.hpp"
#include "savfi/manifest.hpp"
#include "savfi/metrics.hpp"
#include "savfi/ussim.hpp"

namespace savfi {

// Everything a pipeline run needs, assembled from the flat config file plus
// defaults. One global seed; each stage derives its own via
// hash64(seed, stage name).
struct PipelineConfig {
  std::uint64_t seed = 42;
  int threads = 1;

  std::string scene_name = "straight90";
  double scene_radius_m = 1.8e-3;
  double scene_peak_mps = 0.12;
  double scene_omega_rad_s = 50.0;
  bool scene_pulsatile = true;
  double scene_period_s = 0.9;

  WindowParams window;            // 128 px, 5 frames, 0.05 mm, 1 ms
  double depth_top_m = 15e-3;     // imaging depth of the window's top edge
  double phantom_margin_m = 1e-3;
  double density_per_mm2 = 0.0;   // 0 -> 20 per lambda^2 cell
  double min_peak_fraction = 0.3; // window resampling floor on max |v|

  ProbeConfig probe;
  std::optional<double> noise_snr_db;
  double f_number = 1.5;
  double dynamic_range_db = 60.0;

  PivConfig piv;
  bool piv_on_bmode = false;

  cnn::NetSpec net;
  cnn::TrainConfig train;

  int svd_low_cut = 1;
  int svd_high_cut = 0;  // 0 -> n_frames

  static PipelineConfig from_config(const Config& config);

  std::uint64_t stage_seed(std::string_view stage) const {
    return hash64(seed, stage);
  }
  double resolved_density_per_mm2() const;
  std::shared_ptr<const FlowField> make_scene() const;
  std::shared_ptr<const FlowField> make_scene(const std::string& name) const;
};

// ---- pipeline stages (each reads/writes files under a dataset dir) ----

// Samples `count` ground-truth windows; writes win%04d_truth.vfit,
// win%04d_mask.vfit and a windows.txt pose index. Windows whose peak speed
// falls below min_peak_fraction * scene peak are redrawn.
void stage_gen_data(const PipelineConfig& config,
                    const std::filesystem::path& dir, int count);

// Speckle phantom + SA acquisition for every window listed in windows.txt;
// writes win%04d_rf.vfit plus a text sidecar.
void stage_simulate(const PipelineConfig& config,
                    const std::filesystem::path& dir);

// DAS + compounding + analytic signal; writes win%04d_iq.vfit stacks and
// the dataset manifest.txt.
void stage_beamform(const PipelineConfig& config,
                    const std::filesystem::path& dir);

// SVD clutter filter over every stack of a manifest; writes the filtered
// dataset (IQ, truth, mask copies, manifest) into out_dir.
void stage_svd_filter(const PipelineConfig& config,
                      const std::filesystem::path& manifest_path,
                      const std::filesystem::path& out_dir);

// Echo-PIV over every consecutive frame pair of every stack; writes
// per-pair estimates, truth slices and an estimate manifest into out_dir.
void stage_piv(const PipelineConfig& config,
               const std::filesystem::path& manifest_path,
               const std::filesystem::path& out_dir);

// Network training; writes the model directory and train_curve.txt.
cnn::TrainResult stage_train(const PipelineConfig& config,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& val_manifest_path,
                             const std::filesystem::path& model_dir);

// Network inference over every pair; same outputs as stage_piv.
void stage_infer(const PipelineConfig& config,
                 const std::filesystem::path& model_dir,
                 const std::filesystem::path& manifest_path,
                 const std::filesystem::path& out_dir);

// Per-tag EPE reports over an estimate manifest.
struct EvalResult {
  std::map<std::string, EpeReport> per_tag;
  EpeReport overall;
  bool masked = false;
};
EvalResult stage_eval(const std::filesystem::path& manifest_path,
                      bool masked);
std::string format_eval(const EvalResult& result);

// Quiver plot of an estimate tensor; writes <prefix>_bg.pgm and
// <prefix>_vec.svg. Background comes from the IQ stack when given (B-mode),
// otherwise from the velocity magnitude. Returns the arrow count.
int stage_plot(const PipelineConfig& config,
               const std::filesystem::path& estimate_path,
               const std::filesystem::path& iq_path, int frame,
               const std::filesystem::path& out_prefix, int decimate);

// End-to-end reproduction run (all stages, smoke scale). Writes every
// stage's outputs plus summary.txt under out_dir. Returns 0 on success.
int run_repro_smoke(const PipelineConfig& config,
                    const std::filesystem::path& out_dir);

// Scaled-down quantitative reproduction: runs the pipeline-level gates and
// writes repro_report.txt. Returns 0 iff every gate passes.
int run_repro_full(const PipelineConfig& config,
                   const std::filesystem::path& out_dir);

}  // namespace savfi
