#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

#include "orthosep/checkpoint.hpp"
#include "orthosep/errors.hpp"
#include "orthosep/eval.hpp"
#include "orthosep/kinetics.hpp"
#include "orthosep/phantom.hpp"
#include "orthosep/preprocess.hpp"
#include "orthosep/run_config.hpp"
#include "orthosep/selftest.hpp"
#include "orthosep/stats.hpp"
#include "orthosep/training.hpp"
#include "orthosep/volume_io.hpp"

namespace fs = std::filesystem;

namespace orthosep::cli {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing config file: " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

/// Loads, overrides and validates the run configuration. The --seed flag
/// reseeds the whole run (top level, phantom and training).
RunConfig resolve_config(const CommonOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("missing -c/--config");
  std::string text = read_text_file(opts.config_path);
  if (!opts.overrides.empty()) text = apply_overrides(text, opts.overrides);
  RunConfig cfg = parse_run_config(text);
  if (!opts.output_dir.empty()) cfg.output_dir = opts.output_dir;
  if (opts.has_seed) {
    cfg.seed = opts.seed;
    cfg.train.seed = opts.seed;
    if (cfg.phantom.has_value()) cfg.phantom->seed = opts.seed;
  }
  return cfg;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

int threads_of(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct LoadedDataset {
  MultiChannelVolume features;
  ChannelVolume target;
  RegionMask mask;
  std::string target_name;
  // Pre-normalization target range over valid voxels, for raw-scale metrics.
  std::optional<std::pair<double, double>> target_raw_range;
};

LoadedDataset load_dataset(const RunConfig& cfg) {
  LoadedDataset out;
  if (cfg.dataset.has_value()) {
    const fs::path dir = cfg.dataset->dir;
    out.target_name = cfg.dataset->target;
    out.mask = load_region_mask((dir / "mask_labels").string(),
                                (dir / "mask_valid").string());
    MultiChannelVolume raw;
    for (const auto& name : cfg.dataset->channels) {
      raw.add_channel(sanitize(load_volume((dir / name).string())));
    }
    ChannelVolume target = sanitize(load_volume((dir / out.target_name).string()));

    for (const auto& ch : raw.channels) {
      NormalizationRule rule;  // none unless bound
      const auto it = cfg.normalization.find(ch.name);
      if (it != cfg.normalization.end()) rule = it->second;
      out.features.add_channel(apply_normalization(ch, out.mask.valid, rule));
    }
    NormalizationRule target_rule;
    const auto it = cfg.normalization.find(out.target_name);
    if (it != cfg.normalization.end()) target_rule = it->second;
    if (target_rule.kind == NormKind::minmax01) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = 0; i < target.data.size(); ++i) {
        if (out.mask.valid[i]) {
          lo = std::min(lo, target.data[i]);
          hi = std::max(hi, target.data[i]);
        }
      }
      out.target_raw_range = {lo, hi};
    }
    out.target = apply_normalization(target, out.mask.valid, target_rule);
  } else if (cfg.phantom.has_value()) {
    PhantomDataset d = generate_phantom(*cfg.phantom);
    out.features = std::move(d.features);
    out.target = std::move(d.target);
    out.mask = std::move(d.mask);
    out.target_name = "SUV";
  } else {
    throw ConfigError("config: either dataset or phantom is required");
  }
  return out;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epoch,mse_e,mse_par,total,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << fmt(r.loss.mse_e) << ',' << fmt(r.loss.mse_par) << ','
        << fmt(r.loss.total) << ',' << fmt(r.lr) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

FeatureSelection selection_by_name(const std::string& name) {
  for (const auto& sel : ablation_configurations()) {
    if (sel.name == name) return sel;
  }
  throw ConfigError("unknown ablation configuration '" + name + "'");
}

}  // namespace

int cmd_phantom(const CommonOptions& opts) {
  RunConfig cfg = resolve_config(opts);
  if (!cfg.phantom.has_value()) throw ConfigError("config: $.phantom: required");
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  PhantomDataset d = generate_phantom(*cfg.phantom);
  for (const auto& ch : d.features.channels) {
    save_volume(ch, (dir / ch.name).string());
  }
  save_volume(d.target, (dir / "SUV").string());
  save_region_mask(d.mask, (dir / "mask_labels").string(),
                   (dir / "mask_valid").string());

  const ChannelVolume envelope = scatter_to_volume(
      d.truth.envelope_values, d.truth.index_map, d.mask.grid, 0.0, "envelope");
  const ChannelVolume ortho = scatter_to_volume(
      d.truth.ortho_values, d.truth.index_map, d.mask.grid, 0.0, "ortho");
  save_volume(envelope, (dir / "envelope").string());
  save_volume(ortho, (dir / "ortho").string());

  std::string energy = "{";
  bool first = true;
  for (const auto& [region, value] : d.truth.ortho_energy) {
    if (!first) energy += ",";
    energy += "\"" + region + "\":" + fmt(value);
    first = false;
  }
  energy += "}";
  const std::string truth_json =
      std::string("{\n") + "  \"envelope_id\": \"" + d.truth.envelope.id + "\",\n" +
      "  \"weights\": [" +
      [&] {
        std::string w;
        for (std::size_t i = 0; i < d.truth.envelope.weights.size(); ++i) {
          if (i) w += ", ";
          w += fmt(d.truth.envelope.weights[i]);
        }
        return w;
      }() +
      "],\n" + "  \"bias\": " + fmt(d.truth.envelope.bias) + ",\n" +
      "  \"scale\": " + fmt(d.truth.envelope.scale) + ",\n" +
      "  \"offset\": " + fmt(d.truth.envelope.offset) + ",\n" +
      "  \"ortho_amplitude\": " + fmt(d.truth.ortho_amplitude) + ",\n" +
      "  \"noise_sd\": " + fmt(d.truth.noise_sd) + ",\n" +
      "  \"seed\": " + std::to_string(d.truth.seed) + ",\n" +
      "  \"ortho_energy\": " + energy + "\n}\n";
  {
    std::ofstream f(dir / "phantom_truth.json", std::ios::trunc);
    if (!f) throw IoError("cannot write phantom_truth.json");
    f << truth_json;
  }

  std::map<std::string, std::string> extra;
  extra["outputs"] =
      "[\"T1\",\"T2\",\"ADC\",\"Ktrans\",\"ve\",\"vp\",\"TTP\",\"SUV\","
      "\"mask_labels\",\"mask_valid\",\"envelope\",\"ortho\",\"phantom_truth.json\"]";

  if (cfg.phantom_dce.enabled) {
    DcePhantom dce = generate_dce_phantom(cfg.phantom_dce.spec);
    const fs::path dce_dir = dir / "dce";
    save_dce_series(DceSeries{dce.times.t, dce.frames}, dce_dir.string(), "dce");
    save_volume(dce.ktrans, (dce_dir / "true_Ktrans").string());
    save_volume(dce.ve, (dce_dir / "true_ve").string());
    save_volume(dce.vp, (dce_dir / "true_vp").string());
    save_u8_volume(dce.grid, dce.valid, (dce_dir / "valid").string());
    extra["dce_outputs"] = "\"dce/dce_manifest.json\"";
  }

  write_run_manifest((dir / "manifest.json").string(), "phantom", cfg, extra);
  return 0;
}

int cmd_train(const CommonOptions& opts, const std::string& ablate_name,
              const std::string& resume_checkpoint) {
  RunConfig cfg = resolve_config(opts);
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  LoadedDataset data = load_dataset(cfg);
  FeatureSelection sel =
      ablate_name.empty() ? cfg.features : selection_by_name(ablate_name);
  MultiChannelVolume with_target = data.features;
  if (with_target.find(data.target_name) == nullptr) {
    with_target.add_channel(data.target);
  }
  AssembledFeatures assembled =
      assemble_features(with_target, data.mask, sel, data.target_name);

  std::optional<TrainState> resume;
  if (!resume_checkpoint.empty()) {
    LoadedCheckpoint ckpt = load_checkpoint(resume_checkpoint);
    if (ckpt.feature_names != assembled.matrix.feature_names) {
      throw ConfigError("resume: checkpoint features do not match the dataset");
    }
    resume = std::move(ckpt.state);
  }

  TrainState state =
      train(Dataset{assembled.matrix, assembled.targets}, cfg.train, std::move(resume));

  save_checkpoint(state, assembled.matrix.feature_names,
                  train_config_to_json_string(cfg.train),
                  (dir / "checkpoint").string());
  write_history_csv((dir / "history.csv").string(), state.history);

  std::map<std::string, std::string> extra;
  extra["selection"] = "\"" + sel.name + "\"";
  extra["rows"] = std::to_string(assembled.matrix.rows());
  extra["final_loss"] =
      state.history.empty() ? "null" : fmt(state.history.back().loss.total);
  if (!resume_checkpoint.empty()) extra["resumed_from"] = "\"" + resume_checkpoint + "\"";
  write_run_manifest((dir / "manifest.json").string(), "train", cfg, extra);
  return 0;
}

int cmd_decompose(const CommonOptions& opts, const std::string& checkpoint) {
  RunConfig cfg = resolve_config(opts);
  if (checkpoint.empty()) throw ConfigError("missing --checkpoint");
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  LoadedDataset data = load_dataset(cfg);
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint);

  FeatureSelection sel{"from_checkpoint", ckpt.feature_names};
  MultiChannelVolume with_target = data.features;
  if (with_target.find(data.target_name) == nullptr) {
    with_target.add_channel(data.target);
  }
  AssembledFeatures assembled =
      assemble_features(with_target, data.mask, sel, data.target_name);

  ResidualDecomposition decomp = predict_and_decompose(
      ckpt.state.model, assembled.matrix, assembled.targets, cfg.eval_projector);
  const RegionalErrorTable table = regional_mse(decomp, data.mask);
  write_regional_csv((dir / "regional.csv").string(), cfg.features.name, table);

  const GridSpec& grid = data.mask.grid;
  const Eigen::VectorXd yhat = decomp.e + assembled.targets;
  save_volume(scatter_to_volume(decomp.r_par.cwiseProduct(decomp.r_par),
                                decomp.index_map, grid, 0.0, "r_par_sq"),
              (dir / "r_par_sq").string());
  save_volume(scatter_to_volume(decomp.r_perp.cwiseProduct(decomp.r_perp),
                                decomp.index_map, grid, 0.0, "r_perp_sq"),
              (dir / "r_perp_sq").string());
  save_volume(scatter_to_volume(yhat, decomp.index_map, grid, 0.0, "reconstruction"),
              (dir / "reconstruction").string());
  save_volume(scatter_to_volume(assembled.targets, decomp.index_map, grid, 0.0,
                                "target"),
              (dir / "target").string());

  // Pooled sums: exact in pinv mode; per-region sums keep their cross terms
  // and are reported as-is in the CSV.
  const double sum_e2 = decomp.e.squaredNorm();
  const double sum_par2 = decomp.r_par.squaredNorm();
  const double sum_perp2 = decomp.r_perp.squaredNorm();
  std::map<std::string, std::string> extra;
  extra["checkpoint"] = "\"" + checkpoint + "\"";
  extra["pythagoras"] =
      "{\"sum_e2\":" + fmt(sum_e2) + ",\"sum_par2\":" + fmt(sum_par2) +
      ",\"sum_perp2\":" + fmt(sum_perp2) + ",\"rel_gap\":" +
      fmt(std::abs(sum_e2 - sum_par2 - sum_perp2) / std::max(sum_e2, 1e-300)) + "}";
  if (data.target_raw_range.has_value()) {
    const double span = data.target_raw_range->second - data.target_raw_range->first;
    extra["target_scale"] = "{\"min\":" + fmt(data.target_raw_range->first) +
                            ",\"max\":" + fmt(data.target_raw_range->second) +
                            ",\"raw_mse_factor\":" + fmt(span * span) + "}";
  }
  write_run_manifest((dir / "manifest.json").string(), "decompose", cfg, extra);
  return 0;
}

int cmd_ablate(const CommonOptions& opts) {
  RunConfig cfg = resolve_config(opts);
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  LoadedDataset data = load_dataset(cfg);
  AblationInput input{data.features, data.target, data.mask, data.target_name};
  if (input.features.find(data.target_name) != nullptr) {
    // The suite re-adds the target channel itself.
    MultiChannelVolume only_features;
    for (const auto& ch : input.features.channels) {
      if (ch.name != data.target_name) only_features.add_channel(ch);
    }
    input.features = std::move(only_features);
  }

  const std::vector<AblationRun> runs =
      ablation_suite(input, cfg.train, cfg.seeds, threads_of(cfg));
  write_ablation_csv((dir / "ablation.csv").string(), runs, data.mask);

  std::map<std::string, std::string> extra;
  extra["configurations"] = std::to_string(ablation_configurations().size());
  extra["runs"] = std::to_string(runs.size());
  write_run_manifest((dir / "manifest.json").string(), "ablate", cfg, extra);
  return 0;
}

int cmd_tofts_fit(const CommonOptions& opts) {
  RunConfig cfg = resolve_config(opts);
  if (!cfg.dce_input.has_value()) throw ConfigError("config: $.dce_input: required");
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  const DceSeries series = load_dce_series(cfg.dce_input->manifest);
  TimeGrid grid{series.times_s};
  grid.validate();
  const AIF aif = population_aif(grid, cfg.dce_input->aif.delay_s,
                                 cfg.dce_input->aif.amplitude,
                                 cfg.dce_input->aif.decay1, cfg.dce_input->aif.decay2);

  const GridSpec& vgrid = series.frames.front().grid;
  const std::size_t n = vgrid.voxel_count();
  std::vector<std::uint8_t> valid(n, 1);
  if (!cfg.dce_input->valid_mask.empty()) {
    auto [mgrid, mask] = load_u8_volume(cfg.dce_input->valid_mask);
    if (!(mgrid == vgrid)) throw ConfigError("tofts-fit: mask grid mismatch");
    valid = std::move(mask);
  }

  ChannelVolume ktrans{"Ktrans", vgrid, std::vector<double>(n, 0.0)};
  ChannelVolume ve{"ve", vgrid, std::vector<double>(n, 0.0)};
  ChannelVolume vp{"vp", vgrid, std::vector<double>(n, 0.0)};
  ChannelVolume offset{"offset", vgrid, std::vector<double>(n, 0.0)};
  std::vector<std::uint8_t> converged(n, 0);

  const int threads = threads_of(cfg);
  auto fit_range = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> curve(grid.size());
    for (std::size_t i = lo; i < hi; ++i) {
      if (!valid[i]) continue;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        curve[k] = series.frames[k].data[i];
      }
      const ToftsFit fit =
          fit_tofts(curve, aif, grid, cfg.dce_input->init, cfg.dce_input->init_offset);
      ktrans.data[i] = fit.params.ktrans;
      ve.data[i] = fit.params.ve;
      vp.data[i] = fit.params.vp;
      offset.data[i] = fit.offset;
      converged[i] = fit.converged && !fit.degenerate ? 1 : 0;
    }
  };
  if (threads <= 1) {
    fit_range(0, n);
  } else {
    // Voxel fits are independent; each thread writes its own slots.
    std::vector<std::future<void>> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.push_back(std::async(std::launch::async, fit_range, lo, hi));
    }
    for (auto& f : pool) f.get();
  }

  save_volume(ktrans, (dir / "Ktrans").string());
  save_volume(ve, (dir / "ve").string());
  save_volume(vp, (dir / "vp").string());
  save_volume(offset, (dir / "offset").string());
  save_u8_volume(vgrid, converged, (dir / "converged").string());

  std::map<std::string, std::string> extra;
  extra["outputs"] = "[\"Ktrans\",\"ve\",\"vp\",\"offset\",\"converged\"]";
  write_run_manifest((dir / "manifest.json").string(), "tofts-fit", cfg, extra);
  return 0;
}

int cmd_ttp(const CommonOptions& opts) {
  RunConfig cfg = resolve_config(opts);
  if (!cfg.dce_input.has_value()) throw ConfigError("config: $.dce_input: required");
  ensure_dir(cfg.output_dir);
  const fs::path dir = cfg.output_dir;

  const DceSeries series = load_dce_series(cfg.dce_input->manifest);
  std::vector<std::uint8_t> valid;
  const std::vector<std::uint8_t>* valid_ptr = nullptr;
  if (!cfg.dce_input->valid_mask.empty()) {
    auto [mgrid, mask] = load_u8_volume(cfg.dce_input->valid_mask);
    if (!(mgrid == series.frames.front().grid)) {
      throw ConfigError("ttp: mask grid mismatch");
    }
    valid = std::move(mask);
    valid_ptr = &valid;
  }
  const ChannelVolume ttp =
      ttp_map(series.frames, series.times_s, cfg.dce_input->norm_const, valid_ptr);
  save_volume(ttp, (dir / "TTP").string());

  std::map<std::string, std::string> extra;
  extra["outputs"] = "[\"TTP\"]";
  write_run_manifest((dir / "manifest.json").string(), "ttp", cfg, extra);
  return 0;
}

int cmd_check() {
  const auto results = run_selftests();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail
              << ")\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "self-test: all checks passed"
                         : "self-test: FAILURES detected")
            << std::endl;
  return all_pass ? 0 : 1;
}

}  // namespace orthosep::cli
