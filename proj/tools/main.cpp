// savfi: synthetic-aperture vector flow imaging pipeline driver.
//
// Stages communicate through TensorFiles and text manifests, so any
// subcommand can be re-run in isolation. Exit codes: 1 usage, 2 config,
// 3 data.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "savfi/experiments.hpp"
#include "savfi/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "flat key = value configuration file");
  cmd->add_option("--set", opts.overrides,
                  "override a config key (key=value), repeatable");
  cmd->add_option("--seed", opts.seed, "global seed")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--threads", opts.threads,
                  "worker threads (1 = deterministic reference mode)");
}

savfi::PipelineConfig resolve(const CommonOpts& opts) {
  savfi::Config config;
  if (!opts.config_path.empty()) {
    config = savfi::Config::from_file(opts.config_path);
  }
  for (const std::string& assignment : opts.overrides) {
    config.set(assignment);
  }
  savfi::PipelineConfig pipeline = savfi::PipelineConfig::from_config(config);
  if (opts.seed_given) {
    pipeline.seed = opts.seed;
  }
  if (opts.threads > 0) {
    pipeline.threads = opts.threads;
  }
  return pipeline;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-aperture vector flow imaging pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;

  // gen-data
  auto* gen = app.add_subcommand(
      "gen-data", "sample ground-truth flow windows from a scene");
  std::string scene;
  int count = 4;
  std::string out_dir;
  add_common(gen, opts);
  gen->add_option("--scene", scene, "straight90|straight105|disk|composite");
  gen->add_option("--count", count, "number of windows")->required();
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "speckle phantom + SA acquisition for sampled windows");
  std::string sim_dir;
  add_common(simulate, opts);
  simulate->add_option("--dir", sim_dir, "dataset directory (from gen-data)")
      ->required();

  // beamform
  auto* beamform =
      app.add_subcommand("beamform", "DAS + compounding + analytic signal");
  std::string bf_dir;
  add_common(beamform, opts);
  beamform->add_option("--dir", bf_dir, "dataset directory (from simulate)")
      ->required();

  // svd-filter
  auto* svd = app.add_subcommand("svd-filter",
                                 "SVD clutter filter over IQ stacks");
  std::string svd_manifest;
  std::string svd_out;
  int low_cut = -1;
  int high_cut = -1;
  add_common(svd, opts);
  svd->add_option("--manifest", svd_manifest, "input dataset manifest")
      ->required();
  svd->add_option("--out", svd_out, "output dataset directory")->required();
  svd->add_option("--low-cut", low_cut, "first kept singular component");
  svd->add_option("--high-cut", high_cut, "one past the last kept component");

  // piv
  auto* piv = app.add_subcommand("piv", "iterative Echo-PIV velocimetry");
  std::string piv_manifest;
  std::string piv_out;
  int piv_window = 0;
  int piv_iterations = 0;
  bool on_bmode = false;
  add_common(piv, opts);
  piv->add_option("--manifest", piv_manifest, "input dataset manifest")
      ->required();
  piv->add_option("--out", piv_out, "output estimate directory")->required();
  piv->add_option("--window", piv_window, "initial interrogation window");
  piv->add_option("--iterations", piv_iterations, "refinement iterations");
  piv->add_flag("--on-bmode", on_bmode,
                "correlate log-compressed images instead of envelopes");

  // train
  auto* train = app.add_subcommand("train", "train the velocity network");
  std::string train_manifest;
  std::string val_manifest;
  std::string model_dir;
  int epochs = 0;
  add_common(train, opts);
  train->add_option("--manifest", train_manifest, "training dataset manifest")
      ->required();
  train->add_option("--val-manifest", val_manifest,
                    "validation dataset manifest");
  train->add_option("--out", model_dir, "model output directory")->required();
  train->add_option("--epochs", epochs, "override train.epochs");

  // infer
  auto* infer = app.add_subcommand("infer", "network velocity estimation");
  std::string infer_model;
  std::string infer_manifest;
  std::string infer_out;
  add_common(infer, opts);
  infer->add_option("--model", infer_model, "model directory")->required();
  infer->add_option("--manifest", infer_manifest, "input dataset manifest")
      ->required();
  infer->add_option("--out", infer_out, "output estimate directory")
      ->required();

  // eval
  auto* eval = app.add_subcommand("eval", "EPE report over an estimate set");
  std::string eval_manifest;
  std::string eval_out;
  bool masked = false;
  add_common(eval, opts);
  eval->add_option("--manifest", eval_manifest, "estimate manifest")
      ->required();
  eval->add_option("--out", eval_out, "also write the report to this file");
  eval->add_flag("--masked", masked, "restrict EPE to the vessel mask");

  // plot
  auto* plot = app.add_subcommand(
      "plot", "quiver plot (SVG) over a B-mode background (PGM)");
  std::string plot_estimate;
  std::string plot_iq;
  std::string plot_prefix;
  int plot_frame = 0;
  int decimate = 8;
  add_common(plot, opts);
  plot->add_option("--estimate", plot_estimate, "velocity estimate tensor")
      ->required();
  plot->add_option("--iq", plot_iq, "IQ stack for the background");
  plot->add_option("--frame", plot_frame, "background frame index");
  plot->add_option("--out", plot_prefix, "output file prefix")->required();
  plot->add_option("--decimate", decimate, "arrow spacing in pixels");

  // repro
  auto* repro = app.add_subcommand(
      "repro", "end-to-end reproduction run with a pass/fail summary");
  std::string repro_out;
  std::string scale = "smoke";
  add_common(repro, opts);
  repro->add_option("--out", repro_out, "output directory")->required();
  repro->add_option("--scale", scale,
                    "smoke (fast, all stages) or full (quantitative gates)")
      ->check(CLI::IsMember({"smoke", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return 1;
  }

  try {
    savfi::PipelineConfig config = resolve(opts);
    if (*gen) {
      if (!scene.empty()) {
        config.scene_name = scene;
      }
      savfi::stage_gen_data(config, out_dir, count);
    } else if (*simulate) {
      savfi::stage_simulate(config, sim_dir);
    } else if (*beamform) {
      savfi::stage_beamform(config, bf_dir);
    } else if (*svd) {
      if (low_cut >= 0) {
        config.svd_low_cut = low_cut;
      }
      if (high_cut >= 0) {
        config.svd_high_cut = high_cut;
      }
      savfi::stage_svd_filter(config, svd_manifest, svd_out);
    } else if (*piv) {
      if (piv_window > 0) {
        config.piv.initial_window = piv_window;
      }
      if (piv_iterations > 0) {
        config.piv.iterations = piv_iterations;
      }
      if (on_bmode) {
        config.piv_on_bmode = true;
      }
      savfi::stage_piv(config, piv_manifest, piv_out);
    } else if (*train) {
      if (epochs > 0) {
        config.train.epochs = epochs;
      }
      config.train.verbose = true;
      savfi::stage_train(config, train_manifest, val_manifest, model_dir);
    } else if (*infer) {
      savfi::stage_infer(config, infer_model, infer_manifest, infer_out);
    } else if (*eval) {
      const savfi::EvalResult result =
          savfi::stage_eval(eval_manifest, masked);
      const std::string text = savfi::format_eval(result);
      std::cout << text;
      if (!eval_out.empty()) {
        std::ofstream os(eval_out, std::ios::trunc);
        os << text;
      }
    } else if (*plot) {
      const int arrows = savfi::stage_plot(config, plot_estimate, plot_iq,
                                           plot_frame, plot_prefix, decimate);
      std::cout << "arrows=" << arrows << "\n";
    } else if (*repro) {
      const int rc = scale == "smoke"
                         ? savfi::run_repro_smoke(config, repro_out)
                         : savfi::run_repro_full(config, repro_out);
      if (rc != 0) {
        std::cerr << "reproduction gates failed; see the report in "
                  << repro_out << "\n";
        return 4;
      }
    }
  } catch (const savfi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const savfi::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
