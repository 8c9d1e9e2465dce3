#include "orthosep/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <span>

#include "orthosep/errors.hpp"
#include "orthosep/stats.hpp"

namespace orthosep {
namespace {

struct Accum {
  std::vector<double> e2, par2, perp2;
};

RegionStats stats_from(const Accum& acc) {
  RegionStats out;
  out.n_voxels = acc.e2.size();
  auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / n);
  };
  mean_sd(acc.e2, out.total_mse, out.total_sd);
  mean_sd(acc.par2, out.mse_par, out.par_sd);
  mean_sd(acc.perp2, out.mse_perp, out.perp_sd);
  return out;
}

const char* kRegionOrder[] = {"tumour", "prostate", "surrounding", "overall"};

}  // namespace

RegionalErrorTable regional_mse(const ResidualDecomposition& decomp,
                                const RegionMask& mask) {
  if (decomp.index_map.size() != static_cast<std::size_t>(decomp.e.size())) {
    throw ConfigError("regional_mse: decomposition has no voxel index map");
  }
  mask.validate();
  std::map<std::string, Accum> acc;
  for (Eigen::Index r = 0; r < decomp.e.size(); ++r) {
    const std::size_t voxel = decomp.index_map[static_cast<std::size_t>(r)];
    if (voxel >= mask.labels.size()) {
      throw ConfigError("regional_mse: index map inconsistent with mask");
    }
    const auto label = static_cast<Region>(mask.labels[voxel]);
    const double e2 = decomp.e[r] * decomp.e[r];
    const double par2 = decomp.r_par[r] * decomp.r_par[r];
    const double perp2 = decomp.r_perp[r] * decomp.r_perp[r];
    if (label != Region::background) {
      auto& a = acc[region_name(label)];
      a.e2.push_back(e2);
      a.par2.push_back(par2);
      a.perp2.push_back(perp2);
    }
    auto& all = acc["overall"];
    all.e2.push_back(e2);
    all.par2.push_back(par2);
    all.perp2.push_back(perp2);
  }
  RegionalErrorTable table;
  for (const auto& [name, a] : acc) table.regions[name] = stats_from(a);
  return table;
}

const std::vector<FeatureSelection>& ablation_configurations() {
  static const std::vector<FeatureSelection> configs = [] {
    const std::vector<std::string> all = canonical_feature_order();
    std::vector<FeatureSelection> out;
    out.push_back({"full", all});
    const std::vector<std::pair<std::string, std::string>> leave_one = {
        {"minus_t1", "T1"},     {"minus_t2", "T2"},   {"minus_adc", "ADC"},
        {"minus_ttp", "TTP"},   {"minus_ktrans", "Ktrans"}, {"minus_ve", "ve"},
        {"minus_vp", "vp"}};
    for (const auto& [name, drop] : leave_one) {
      FeatureSelection sel{name, {}};
      for (const auto& ch : all) {
        if (ch != drop) sel.included.push_back(ch);
      }
      out.push_back(std::move(sel));
    }
    auto drop_set = [&](const std::string& name,
                        const std::vector<std::string>& dropped) {
      FeatureSelection sel{name, {}};
      for (const auto& ch : all) {
        if (std::find(dropped.begin(), dropped.end(), ch) == dropped.end()) {
          sel.included.push_back(ch);
        }
      }
      return sel;
    };
    out.push_back(drop_set("no_structural", {"T1", "T2"}));
    out.push_back(drop_set("no_tofts", {"Ktrans", "ve", "vp"}));
    out.push_back(drop_set("no_dynamic", {"TTP", "Ktrans", "ve", "vp"}));
    return out;
  }();
  return configs;
}

std::vector<AblationRun> ablation_suite(const AblationInput& input,
                                        const TrainConfig& base_config,
                                        const std::vector<std::uint64_t>& seeds,
                                        int parallel) {
  if (seeds.empty()) throw ConfigError("ablation_suite: no seeds");
  MultiChannelVolume features = input.features;
  features.add_channel(input.target);

  struct Job {
    std::size_t config_index;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  const auto& configs = ablation_configurations();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    for (std::uint64_t seed : seeds) jobs.push_back({c, seed});
  }

  auto run_job = [&](const Job& job) {
    const FeatureSelection& sel = configs[job.config_index];
    AssembledFeatures assembled =
        assemble_features(features, input.mask, sel, input.target_name);
    TrainConfig cfg = base_config;
    cfg.seed = job.seed;
    TrainState state = train(Dataset{assembled.matrix, assembled.targets}, cfg);
    ResidualDecomposition decomp = predict_and_decompose(
        state.model, assembled.matrix, assembled.targets, cfg.projector);
    AblationRun run;
    run.set_name = sel.name;
    run.seed = job.seed;
    run.table = regional_mse(decomp, input.mask);
    run.e2.resize(static_cast<std::size_t>(decomp.e.size()));
    for (Eigen::Index r = 0; r < decomp.e.size(); ++r) {
      run.e2[static_cast<std::size_t>(r)] = decomp.e[r] * decomp.e[r];
    }
    run.index_map = decomp.index_map;
    return run;
  };

  std::vector<AblationRun> results(jobs.size());
  if (parallel <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) results[j] = run_job(jobs[j]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) return;
        results[j] = run_job(jobs[j]);
      }
    };
    std::vector<std::future<void>> pool;
    const int count = std::min<int>(parallel, static_cast<int>(jobs.size()));
    for (int t = 0; t < count; ++t) {
      pool.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : pool) f.get();
  }
  return results;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_row(std::ofstream& out, const std::string& config,
               const std::string& region, const RegionStats& s,
               const std::string& p_vs_full) {
  out << config << ',' << region << ',' << s.n_voxels << ',' << fmt(s.total_mse)
      << ',' << fmt(s.total_sd) << ',' << fmt(s.mse_par) << ',' << fmt(s.par_sd)
      << ',' << fmt(s.mse_perp) << ',' << fmt(s.perp_sd) << ',' << p_vs_full
      << '\n';
}

constexpr const char* kCsvHeader =
    "config,region,n_voxels,total_mse,total_sd,mse_par,par_sd,mse_perp,perp_sd,"
    "p_vs_full\n";

}  // namespace

void write_regional_csv(const std::string& path, const std::string& config_name,
                        const RegionalErrorTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kCsvHeader;
  for (const char* region : kRegionOrder) {
    const auto it = table.regions.find(region);
    if (it == table.regions.end()) continue;  // empty regions are absent
    write_row(out, config_name, region, it->second, "nan");
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRun>& runs,
                        const RegionMask& mask) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kCsvHeader;

  auto pooled_e2_by_region = [&](const std::string& config) {
    std::map<std::string, std::vector<double>> pooled;
    for (const auto& run : runs) {
      if (run.set_name != config) continue;
      for (std::size_t r = 0; r < run.e2.size(); ++r) {
        const auto label = static_cast<Region>(mask.labels[run.index_map[r]]);
        if (label != Region::background) {
          pooled[region_name(label)].push_back(run.e2[r]);
        }
        pooled["overall"].push_back(run.e2[r]);
      }
    }
    return pooled;
  };

  std::vector<std::string> config_order;
  for (const auto& sel : ablation_configurations()) config_order.push_back(sel.name);

  const auto full_pool = pooled_e2_by_region("full");

  // Aggregate rows: across-seed mean and SD of the per-seed region means.
  for (const auto& config : config_order) {
    const auto pool = pooled_e2_by_region(config);
    for (const char* region : kRegionOrder) {
      std::vector<const RegionStats*> per_seed;
      for (const auto& run : runs) {
        if (run.set_name != config) continue;
        const auto it = run.table.regions.find(region);
        if (it != run.table.regions.end()) per_seed.push_back(&it->second);
      }
      if (per_seed.empty()) continue;
      auto across = [&](auto getter) {
        double mean = 0.0;
        for (const auto* s : per_seed) mean += getter(*s);
        mean /= static_cast<double>(per_seed.size());
        double ss = 0.0;
        for (const auto* s : per_seed) {
          ss += (getter(*s) - mean) * (getter(*s) - mean);
        }
        return std::pair<double, double>(
            mean, std::sqrt(ss / static_cast<double>(per_seed.size())));
      };
      RegionStats agg;
      agg.n_voxels = per_seed.front()->n_voxels;
      std::tie(agg.total_mse, agg.total_sd) =
          across([](const RegionStats& s) { return s.total_mse; });
      std::tie(agg.mse_par, agg.par_sd) =
          across([](const RegionStats& s) { return s.mse_par; });
      std::tie(agg.mse_perp, agg.perp_sd) =
          across([](const RegionStats& s) { return s.mse_perp; });

      std::string p = "nan";
      const auto a = pool.find(region);
      const auto b = full_pool.find(region);
      if (a != pool.end() && b != full_pool.end() && !a->second.empty() &&
          !b->second.empty()) {
        p = fmt(rank_sum_test(std::span<const double>(a->second),
                              std::span<const double>(b->second)));
      }
      write_row(out, config, region, agg, p);
    }
  }

  // Per-seed sub-rows with voxel-level SDs.
  for (const auto& config : config_order) {
    for (const auto& run : runs) {
      if (run.set_name != config) continue;
      for (const char* region : kRegionOrder) {
        const auto it = run.table.regions.find(region);
        if (it == run.table.regions.end()) continue;
        write_row(out, config + "@seed" + std::to_string(run.seed), region,
                  it->second, "nan");
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace orthosep
