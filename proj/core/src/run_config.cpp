#include "orthosep/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "orthosep/errors.hpp"
#include "orthosep/eval.hpp"

using nlohmann::json;

namespace orthosep {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& item : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      fail(path + "." + item.key(), "unknown key");
    }
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) fail(path, "must be > 0");
  return v;
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) {
    fail(path, "expected an integer seed");
  }
  return j.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

template <std::size_t N>
std::array<int, N> get_int_array(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N) {
    fail(path, "expected an array of " + std::to_string(N) + " integers");
  }
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get_int(j[i], path);
  return out;
}

template <std::size_t N>
std::array<double, N> get_double_array(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N) {
    fail(path, "expected an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get_number(j[i], path);
  return out;
}

NormalizationRule parse_norm_rule(const json& j, const std::string& path) {
  NormalizationRule rule;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "none") {
      rule.kind = NormKind::none;
    } else if (s == "minmax01") {
      rule.kind = NormKind::minmax01;
    } else {
      fail(path, "unknown normalization '" + s + "'");
    }
    return rule;
  }
  if (j.is_object()) {
    check_keys(j, path, {"divide_by", "zscore_scaled"});
    if (j.contains("divide_by") == j.contains("zscore_scaled")) {
      fail(path, "expected exactly one of divide_by/zscore_scaled");
    }
    if (j.contains("divide_by")) {
      rule.kind = NormKind::divide_by;
      rule.constant = get_positive(j["divide_by"], path + ".divide_by");
    } else {
      rule.kind = NormKind::zscore_scaled;
      rule.constant = get_positive(j["zscore_scaled"], path + ".zscore_scaled");
    }
    return rule;
  }
  fail(path, "expected a string or an object");
}

json norm_rule_to_json(const NormalizationRule& rule) {
  switch (rule.kind) {
    case NormKind::none: return "none";
    case NormKind::minmax01: return "minmax01";
    case NormKind::divide_by: return json{{"divide_by", rule.constant}};
    case NormKind::zscore_scaled: return json{{"zscore_scaled", rule.constant}};
  }
  return "none";
}

ProjectorSpec parse_projector(const json& j, const std::string& path) {
  check_keys(j, path, {"mode", "epsilon", "rcond"});
  ProjectorSpec spec;
  if (j.contains("mode")) {
    const std::string mode = get_string(j["mode"], path + ".mode");
    if (mode == "ridge") {
      spec.mode = ProjectorMode::ridge;
    } else if (mode == "pinv") {
      spec.mode = ProjectorMode::pinv;
    } else {
      fail(path + ".mode", "expected 'ridge' or 'pinv'");
    }
  }
  if (j.contains("epsilon")) spec.epsilon = get_positive(j["epsilon"], path + ".epsilon");
  if (j.contains("rcond")) spec.rcond = get_positive(j["rcond"], path + ".rcond");
  spec.validate();
  return spec;
}

json projector_to_json(const ProjectorSpec& spec) {
  return json{{"mode", spec.mode == ProjectorMode::ridge ? "ridge" : "pinv"},
              {"epsilon", spec.epsilon},
              {"rcond", spec.rcond}};
}

AifConfig parse_aif(const json& j, const std::string& path) {
  check_keys(j, path, {"delay_s", "amplitude", "decay1", "decay2"});
  AifConfig aif;
  if (j.contains("delay_s")) aif.delay_s = get_number(j["delay_s"], path + ".delay_s");
  if (j.contains("amplitude")) {
    aif.amplitude = get_positive(j["amplitude"], path + ".amplitude");
  }
  if (j.contains("decay1")) aif.decay1 = get_positive(j["decay1"], path + ".decay1");
  if (j.contains("decay2")) aif.decay2 = get_positive(j["decay2"], path + ".decay2");
  if (!(aif.decay1 > aif.decay2)) fail(path, "requires decay1 > decay2");
  if (aif.delay_s < 0.0) fail(path + ".delay_s", "must be >= 0");
  return aif;
}

json aif_to_json(const AifConfig& aif) {
  return json{{"delay_s", aif.delay_s},
              {"amplitude", aif.amplitude},
              {"decay1", aif.decay1},
              {"decay2", aif.decay2}};
}

TrainConfig parse_train(const json& j, const std::string& path) {
  check_keys(j, path,
             {"lambda", "epochs", "batch_size", "lr", "scheduler", "seed",
              "projector", "projection_scope", "model"});
  TrainConfig cfg;
  if (j.contains("lambda")) {
    cfg.lambda = get_number(j["lambda"], path + ".lambda");
    if (cfg.lambda < 0.0) fail(path + ".lambda", "must be >= 0");
  }
  if (j.contains("epochs")) cfg.epochs = get_int(j["epochs"], path + ".epochs");
  if (j.contains("batch_size")) {
    cfg.batch_size = get_int(j["batch_size"], path + ".batch_size");
  }
  if (j.contains("lr")) cfg.lr = get_positive(j["lr"], path + ".lr");
  if (j.contains("scheduler")) {
    const json& s = j["scheduler"];
    check_keys(s, path + ".scheduler",
               {"factor", "patience", "rel_threshold", "min_lr"});
    if (s.contains("factor")) {
      cfg.scheduler.factor = get_positive(s["factor"], path + ".scheduler.factor");
    }
    if (s.contains("patience")) {
      cfg.scheduler.patience = get_int(s["patience"], path + ".scheduler.patience");
    }
    if (s.contains("rel_threshold")) {
      cfg.scheduler.rel_threshold =
          get_positive(s["rel_threshold"], path + ".scheduler.rel_threshold");
    }
    if (s.contains("min_lr")) {
      cfg.scheduler.min_lr = get_positive(s["min_lr"], path + ".scheduler.min_lr");
    }
  }
  if (j.contains("seed")) cfg.seed = get_seed(j["seed"], path + ".seed");
  if (j.contains("projector")) {
    cfg.projector = parse_projector(j["projector"], path + ".projector");
  }
  if (j.contains("projection_scope")) {
    const std::string scope =
        get_string(j["projection_scope"], path + ".projection_scope");
    if (scope == "batch") {
      cfg.scope = ProjectionScope::batch;
    } else if (scope == "global") {
      cfg.scope = ProjectionScope::global;
    } else {
      fail(path + ".projection_scope", "expected 'batch' or 'global'");
    }
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, path + ".model",
               {"fourier_features", "fourier_bandwidth", "hidden_width",
                "hidden_layers", "omega0"});
    if (m.contains("fourier_features")) {
      cfg.model.fourier_features =
          get_int(m["fourier_features"], path + ".model.fourier_features");
    }
    if (m.contains("fourier_bandwidth")) {
      cfg.model.fourier_bandwidth =
          get_positive(m["fourier_bandwidth"], path + ".model.fourier_bandwidth");
    }
    if (m.contains("hidden_width")) {
      cfg.model.hidden_width = get_int(m["hidden_width"], path + ".model.hidden_width");
    }
    if (m.contains("hidden_layers")) {
      cfg.model.hidden_layers =
          get_int(m["hidden_layers"], path + ".model.hidden_layers");
    }
    if (m.contains("omega0")) {
      cfg.model.omega0 = get_positive(m["omega0"], path + ".model.omega0");
    }
  }
  return cfg;
}

json train_to_json(const TrainConfig& cfg) {
  return json{
      {"lambda", cfg.lambda},
      {"epochs", cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"lr", cfg.lr},
      {"scheduler",
       {{"factor", cfg.scheduler.factor},
        {"patience", cfg.scheduler.patience},
        {"rel_threshold", cfg.scheduler.rel_threshold},
        {"min_lr", cfg.scheduler.min_lr}}},
      {"seed", cfg.seed},
      {"projector", projector_to_json(cfg.projector)},
      {"projection_scope", cfg.scope == ProjectionScope::batch ? "batch" : "global"},
      {"model",
       {{"fourier_features", cfg.model.fourier_features},
        {"fourier_bandwidth", cfg.model.fourier_bandwidth},
        {"hidden_width", cfg.model.hidden_width},
        {"hidden_layers", cfg.model.hidden_layers},
        {"omega0", cfg.model.omega0}}}};
}

PhantomSpec parse_phantom(const json& j, const std::string& path) {
  check_keys(j, path,
             {"dims", "seed", "n_blobs", "tumour_radius_vox", "prostate_radius_vox",
              "body_semiaxes_frac", "envelope", "ortho_amplitude", "noise_sd",
              "dce"});
  PhantomSpec spec;
  if (j.contains("dims")) spec.dims = get_int_array<3>(j["dims"], path + ".dims");
  if (j.contains("seed")) spec.seed = get_seed(j["seed"], path + ".seed");
  if (j.contains("n_blobs")) spec.n_blobs = get_int(j["n_blobs"], path + ".n_blobs");
  if (j.contains("tumour_radius_vox")) {
    spec.tumour_radius_vox =
        get_positive(j["tumour_radius_vox"], path + ".tumour_radius_vox");
  }
  if (j.contains("prostate_radius_vox")) {
    spec.prostate_radius_vox =
        get_positive(j["prostate_radius_vox"], path + ".prostate_radius_vox");
  }
  if (j.contains("body_semiaxes_frac")) {
    spec.body_semiaxes_frac =
        get_double_array<3>(j["body_semiaxes_frac"], path + ".body_semiaxes_frac");
  }
  if (j.contains("envelope")) {
    const json& e = j["envelope"];
    check_keys(e, path + ".envelope", {"id", "weights", "bias", "scale", "offset"});
    if (e.contains("id")) spec.envelope.id = get_string(e["id"], path + ".envelope.id");
    if (e.contains("weights")) {
      if (!e["weights"].is_array()) fail(path + ".envelope.weights", "expected array");
      spec.envelope.weights.clear();
      for (std::size_t i = 0; i < e["weights"].size(); ++i) {
        spec.envelope.weights.push_back(
            get_number(e["weights"][i], path + ".envelope.weights"));
      }
    }
    if (e.contains("bias")) {
      spec.envelope.bias = get_number(e["bias"], path + ".envelope.bias");
    }
    if (e.contains("scale")) {
      spec.envelope.scale = get_number(e["scale"], path + ".envelope.scale");
    }
    if (e.contains("offset")) {
      spec.envelope.offset = get_number(e["offset"], path + ".envelope.offset");
    }
  }
  if (j.contains("ortho_amplitude")) {
    spec.ortho_amplitude = get_number(j["ortho_amplitude"], path + ".ortho_amplitude");
    if (spec.ortho_amplitude < 0.0) fail(path + ".ortho_amplitude", "must be >= 0");
  }
  if (j.contains("noise_sd")) {
    spec.noise_sd = get_number(j["noise_sd"], path + ".noise_sd");
    if (spec.noise_sd < 0.0) fail(path + ".noise_sd", "must be >= 0");
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
  return spec;
}

json phantom_to_json(const PhantomSpec& spec, const PhantomDceConfig& dce) {
  json j{{"dims", {spec.dims[0], spec.dims[1], spec.dims[2]}},
         {"seed", spec.seed},
         {"n_blobs", spec.n_blobs},
         {"tumour_radius_vox", spec.tumour_radius_vox},
         {"prostate_radius_vox", spec.prostate_radius_vox},
         {"body_semiaxes_frac",
          {spec.body_semiaxes_frac[0], spec.body_semiaxes_frac[1],
           spec.body_semiaxes_frac[2]}},
         {"envelope",
          {{"id", spec.envelope.id},
           {"weights", spec.envelope.weights},
           {"bias", spec.envelope.bias},
           {"scale", spec.envelope.scale},
           {"offset", spec.envelope.offset}}},
         {"ortho_amplitude", spec.ortho_amplitude},
         {"noise_sd", spec.noise_sd}};
  if (dce.enabled) {
    j["dce"] = json{{"enabled", true},
                    {"dims", {dce.spec.dims[0], dce.spec.dims[1], dce.spec.dims[2]}},
                    {"seed", dce.spec.seed},
                    {"n_times", dce.spec.n_times},
                    {"dt_s", dce.spec.dt_s},
                    {"noise_sd", dce.spec.noise_sd},
                    {"aif", aif_to_json(AifConfig{dce.spec.aif_delay_s,
                                                  dce.spec.aif_amplitude,
                                                  dce.spec.aif_decay1,
                                                  dce.spec.aif_decay2})}};
  }
  return j;
}

PhantomDceConfig parse_phantom_dce(const json& j, const std::string& path) {
  check_keys(j, path, {"enabled", "dims", "seed", "n_times", "dt_s", "noise_sd", "aif"});
  PhantomDceConfig out;
  if (j.contains("enabled")) {
    if (!j["enabled"].is_boolean()) fail(path + ".enabled", "expected a boolean");
    out.enabled = j["enabled"].get<bool>();
  }
  if (j.contains("dims")) out.spec.dims = get_int_array<3>(j["dims"], path + ".dims");
  if (j.contains("seed")) out.spec.seed = get_seed(j["seed"], path + ".seed");
  if (j.contains("n_times")) out.spec.n_times = get_int(j["n_times"], path + ".n_times");
  if (j.contains("dt_s")) out.spec.dt_s = get_positive(j["dt_s"], path + ".dt_s");
  if (j.contains("noise_sd")) {
    out.spec.noise_sd = get_number(j["noise_sd"], path + ".noise_sd");
    if (out.spec.noise_sd < 0.0) fail(path + ".noise_sd", "must be >= 0");
  }
  if (j.contains("aif")) {
    const AifConfig aif = parse_aif(j["aif"], path + ".aif");
    out.spec.aif_delay_s = aif.delay_s;
    out.spec.aif_amplitude = aif.amplitude;
    out.spec.aif_decay1 = aif.decay1;
    out.spec.aif_decay2 = aif.decay2;
  }
  return out;
}

FeatureSelection parse_features(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    for (const auto& sel : ablation_configurations()) {
      if (sel.name == name) return sel;
    }
    fail(path, "unknown feature configuration '" + name + "'");
  }
  check_keys(j, path, {"name", "channels"});
  FeatureSelection sel;
  sel.name = j.contains("name") ? get_string(j["name"], path + ".name") : "custom";
  if (!j.contains("channels") || !j["channels"].is_array()) {
    fail(path + ".channels", "expected an array of channel names");
  }
  sel.included.clear();
  for (std::size_t i = 0; i < j["channels"].size(); ++i) {
    sel.included.push_back(get_string(j["channels"][i], path + ".channels"));
  }
  try {
    sel.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
  return sel;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  // A manifest is accepted anywhere a config is.
  if (j.is_object() && j.contains("command") && j.contains("config")) {
    j = j["config"];
  }
  check_keys(j, "$",
             {"output_dir", "seed", "seeds", "threads", "dataset", "phantom",
              "normalization", "features", "train", "projector", "dce_input"});

  RunConfig cfg;
  cfg.features = FeatureSelection{"full", canonical_feature_order()};
  if (j.contains("output_dir")) cfg.output_dir = get_string(j["output_dir"], "$.output_dir");
  if (j.contains("seed")) cfg.seed = get_seed(j["seed"], "$.seed");
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array() || j["seeds"].empty()) {
      fail("$.seeds", "expected a non-empty array of seeds");
    }
    cfg.seeds.clear();
    for (std::size_t i = 0; i < j["seeds"].size(); ++i) {
      cfg.seeds.push_back(get_seed(j["seeds"][i], "$.seeds"));
    }
  }
  if (j.contains("threads")) {
    cfg.threads = get_int(j["threads"], "$.threads");
    if (cfg.threads < 0) fail("$.threads", "must be >= 0 (0 = hardware)");
  }
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "$.dataset", {"dir", "target", "channels"});
    DatasetConfig ds;
    if (!d.contains("dir")) fail("$.dataset.dir", "required");
    ds.dir = get_string(d["dir"], "$.dataset.dir");
    if (d.contains("target")) ds.target = get_string(d["target"], "$.dataset.target");
    if (d.contains("channels")) {
      if (!d["channels"].is_array()) fail("$.dataset.channels", "expected array");
      for (std::size_t i = 0; i < d["channels"].size(); ++i) {
        ds.channels.push_back(get_string(d["channels"][i], "$.dataset.channels"));
      }
    } else {
      ds.channels = canonical_feature_order();
    }
    cfg.dataset = std::move(ds);
  }
  if (j.contains("phantom")) {
    cfg.phantom = parse_phantom(j["phantom"], "$.phantom");
    if (j["phantom"].contains("dce")) {
      cfg.phantom_dce = parse_phantom_dce(j["phantom"]["dce"], "$.phantom.dce");
    }
  }
  if (j.contains("normalization")) {
    const json& n = j["normalization"];
    if (!n.is_object()) fail("$.normalization", "expected an object");
    for (const auto& item : n.items()) {
      cfg.normalization[item.key()] =
          parse_norm_rule(item.value(), "$.normalization." + item.key());
    }
  }
  if (j.contains("features")) cfg.features = parse_features(j["features"], "$.features");
  if (j.contains("train")) cfg.train = parse_train(j["train"], "$.train");
  if (j.contains("projector")) {
    cfg.eval_projector = parse_projector(j["projector"], "$.projector");
  }
  if (j.contains("dce_input")) {
    const json& d = j["dce_input"];
    check_keys(d, "$.dce_input",
               {"manifest", "valid_mask", "norm_const", "aif", "init"});
    DceInputConfig dce;
    if (!d.contains("manifest")) fail("$.dce_input.manifest", "required");
    dce.manifest = get_string(d["manifest"], "$.dce_input.manifest");
    if (d.contains("valid_mask")) {
      dce.valid_mask = get_string(d["valid_mask"], "$.dce_input.valid_mask");
    }
    if (d.contains("norm_const")) {
      dce.norm_const = get_positive(d["norm_const"], "$.dce_input.norm_const");
    }
    if (d.contains("aif")) dce.aif = parse_aif(d["aif"], "$.dce_input.aif");
    if (d.contains("init")) {
      const json& i = d["init"];
      check_keys(i, "$.dce_input.init", {"ktrans", "ve", "vp", "offset"});
      if (i.contains("ktrans")) {
        dce.init.ktrans = get_number(i["ktrans"], "$.dce_input.init.ktrans");
      }
      if (i.contains("ve")) dce.init.ve = get_number(i["ve"], "$.dce_input.init.ve");
      if (i.contains("vp")) dce.init.vp = get_number(i["vp"], "$.dce_input.init.vp");
      if (i.contains("offset")) {
        dce.init_offset = get_number(i["offset"], "$.dce_input.init.offset");
      }
    }
    cfg.dce_input = std::move(dce);
  }
  return cfg;
}

namespace {

json config_to_json(const RunConfig& cfg) {
  json j;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  j["seeds"] = cfg.seeds;
  j["threads"] = cfg.threads;
  if (cfg.dataset.has_value()) {
    j["dataset"] = {{"dir", cfg.dataset->dir},
                    {"target", cfg.dataset->target},
                    {"channels", cfg.dataset->channels}};
  }
  if (cfg.phantom.has_value()) {
    j["phantom"] = phantom_to_json(*cfg.phantom, cfg.phantom_dce);
  }
  json norm = json::object();
  for (const auto& [name, rule] : cfg.normalization) {
    norm[name] = norm_rule_to_json(rule);
  }
  j["normalization"] = norm;
  j["features"] = {{"name", cfg.features.name}, {"channels", cfg.features.included}};
  j["train"] = train_to_json(cfg.train);
  j["projector"] = projector_to_json(cfg.eval_projector);
  if (cfg.dce_input.has_value()) {
    j["dce_input"] = {{"manifest", cfg.dce_input->manifest},
                      {"valid_mask", cfg.dce_input->valid_mask},
                      {"norm_const", cfg.dce_input->norm_const},
                      {"aif", aif_to_json(cfg.dce_input->aif)},
                      {"init",
                       {{"ktrans", cfg.dce_input->init.ktrans},
                        {"ve", cfg.dce_input->init.ve},
                        {"vp", cfg.dce_input->init.vp},
                        {"offset", cfg.dce_input->init_offset}}}};
  }
  return j;
}

}  // namespace

std::string run_config_to_json_string(const RunConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

std::string train_config_to_json_string(const TrainConfig& cfg) {
  return train_to_json(cfg).dump();
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& assignments) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  for (const std::string& assignment : assignments) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw ConfigError("--set: empty path segment in '" + key + "'");
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return j.dump();
}

void write_run_manifest(const std::string& path, const std::string& command,
                        const RunConfig& cfg,
                        const std::map<std::string, std::string>& extra) {
  json j;
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  j["versions"] = {{"orthosep", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  for (const auto& [key, value] : extra) {
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;
    }
    j[key] = parsed;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace orthosep
