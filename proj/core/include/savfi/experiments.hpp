#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "savfi/pipeline.hpp"

namespace savfi {

// Quantitative pipeline experiments shared by the acceptance suite and
// `repro`. Thresholds live with the callers; these only measure.

struct PsfResult {
  double axial_error_m = 0.0;
  double lateral_error_m = 0.0;
  double axial_minus6db_m = 0.0;
};
// Single scatterer at (0, 20 mm), 5-event compound, envelope argmax offset
// from the true position.
PsfResult psf_localization_experiment(const ProbeConfig& probe,
                                      double f_number);

struct SvdRejectionResult {
  double residual_static_fraction = 0.0;  // energy vs original static
  double speckle_retention = 0.0;         // energy vs original speckle
};
// Rank-1 static pattern at 10x speckle RMS plus independent per-frame
// speckle; filtered with low_cut = 1.
SvdRejectionResult svd_rejection_experiment(std::uint64_t seed);

struct ShiftRecoveryResult {
  double axial_median_error_px = 0.0;    // 4 px integer axial shift
  double lateral_median_error_px = 0.0;  // 2.5 px Fourier lateral shift
};
ShiftRecoveryResult piv_shift_recovery_experiment(std::uint64_t seed,
                                                  const PivConfig& config);

// Simulated straight-vessel-at-90 sequences -> Echo-PIV EPE per frame pair.
std::vector<double> piv_vessel_epes(const PipelineConfig& config,
                                    int n_windows);

// Simulated spinning-disk pair -> |omega_fit - omega| / omega via least
// squares v = omega x r over the disk support.
double disk_omega_fit_error(const PipelineConfig& config);

// Window dataset written straight to disk (truth, mask, IQ, manifest; RF is
// not persisted). Scenes rotate over `scene_names` per window.
std::filesystem::path build_window_dataset(
    const PipelineConfig& config, const std::vector<std::string>& scene_names,
    int n_windows, const std::filesystem::path& dir,
    std::string_view seed_salt);

struct CnnAnalogResult {
  double trained_median_epe = 0.0;    // held-out, unmasked
  double untrained_median_epe = 0.0;  // same net at initialization
  double masked_median_epe = 0.0;     // held-out, mask-weighted eval
  int train_sample_count = 0;         // augmented
  int heldout_count = 0;
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path model_dir;
};
// Desk-scale training analog: train_windows/val_windows/test_windows
// windows over straight90, straight105 and disk; trains the configured
// net and evaluates the held-out patches.
CnnAnalogResult cnn_training_analog(const PipelineConfig& config,
                                    const std::filesystem::path& work_dir,
                                    int train_windows, int val_windows,
                                    int test_windows);

struct GeneralizationResult {
  double disk_median_epe = 0.0;
  bool finite = false;
};
// Trains on the straight-vessel tags only (reusing the analog's datasets)
// and reports the median EPE on held-out spinning-disk patches.
GeneralizationResult cnn_generalization_probe(
    const PipelineConfig& config, const CnnAnalogResult& analog,
    int epochs);

}  // namespace savfi
