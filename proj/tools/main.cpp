#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "commands.hpp"
#include "orthosep/errors.hpp"
#include "orthosep/run_config.hpp"

namespace {

void add_common(CLI::App* cmd, orthosep::cli::CommonOptions& opts,
                bool config_required = true) {
  auto* c = cmd->add_option("-c,--config", opts.config_path,
                            "Run configuration JSON (a manifest.json also works)");
  if (config_required) c->required();
  cmd->add_option("-o,--outdir", opts.output_dir, "Override the output directory");
  cmd->add_option("--seed", opts.seed, "Override the run seed")
      ->each([&opts](const std::string&) { opts.has_seed = true; });
  cmd->add_option("--set", opts.overrides,
                  "Override a config key, e.g. --set train.lr=1e-4");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "orthosep: decomposes a target volume into a feature-explainable "
      "component and an orthogonal residual"};
  app.set_version_flag("--version", std::string(orthosep::kVersion));
  app.require_subcommand(1);

  orthosep::cli::CommonOptions phantom_opts, train_opts, decompose_opts,
      ablate_opts, tofts_opts, ttp_opts;
  std::string ablate_name, resume_path, checkpoint_path;

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic dataset");
  add_common(phantom, phantom_opts);

  auto* train = app.add_subcommand("train", "Train the decomposition model");
  add_common(train, train_opts);
  train->add_option("--ablate", ablate_name,
                    "Train a named feature subset (e.g. minus_vp, no_dynamic)");
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  auto* decompose =
      app.add_subcommand("decompose", "Evaluate a checkpoint and export residual maps");
  add_common(decompose, decompose_opts);
  decompose->add_option("--checkpoint", checkpoint_path, "Checkpoint stem or .json")
      ->required();

  auto* ablate = app.add_subcommand("ablate", "Run the full ablation sweep");
  add_common(ablate, ablate_opts);

  auto* tofts = app.add_subcommand("tofts-fit", "Voxel-wise exchange-model fit");
  add_common(tofts, tofts_opts);

  auto* ttp = app.add_subcommand("ttp", "Time-to-peak map from a dynamic series");
  add_common(ttp, ttp_opts);

  app.add_subcommand("check", "Run the numerical self-test suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (phantom->parsed()) return orthosep::cli::cmd_phantom(phantom_opts);
    if (train->parsed()) {
      return orthosep::cli::cmd_train(train_opts, ablate_name, resume_path);
    }
    if (decompose->parsed()) {
      return orthosep::cli::cmd_decompose(decompose_opts, checkpoint_path);
    }
    if (ablate->parsed()) return orthosep::cli::cmd_ablate(ablate_opts);
    if (tofts->parsed()) return orthosep::cli::cmd_tofts_fit(tofts_opts);
    if (ttp->parsed()) return orthosep::cli::cmd_ttp(ttp_opts);
    return orthosep::cli::cmd_check();
  } catch (const orthosep::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const orthosep::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
