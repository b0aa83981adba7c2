#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pwreg/discrepancy.hpp"
#include "pwreg/io.hpp"
#include "pwreg/potential.hpp"
#include "pwreg/registration.hpp"
#include "pwreg/rng.hpp"
#include "pwreg/serialize.hpp"
#include "pwreg/synth.hpp"
#include "pwreg/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pwreg;

namespace {

constexpr const char* kToolkitVersion = "1.0.0";

// Round-trip-exact float text that always looks like a float literal.
std::string fmt_float(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";
  return s;
}

std::string resolve_out_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("PWREG_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir + ": cannot create directory");
}

json versions_json() {
  char eigen[32];
  std::snprintf(eigen, sizeof(eigen), "%d.%d.%d", EIGEN_WORLD_VERSION,
                EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  json v;
  v["toolkit"] = kToolkitVersion;
  v["eigen"] = eigen;
  v["rng"] = "splitmix64-counter/box-muller";
  return v;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& args, const json& config,
                    std::uint64_t seed) {
  json doc;
  doc["schema"] = "pwreg-manifest/1";
  doc["command"] = command;
  doc["arguments"] = args;
  doc["config"] = config;
  doc["seed"] = seed;
  doc["versions"] = versions_json();
  write_text_file(out_dir + "/manifest.json", doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

struct CorruptSpec {
  std::string mode = "none";  // none | noise | crop
  Scalar param = 0;
};

struct SynthesisRecipe {
  int pool = 2000;
  int sample = 500;
  Scalar deform_lambda = 10;
  Scalar deform_rho = 2;
  Scalar deform_noise = 0.02;
  int deform_landmarks = 100;
  CorruptSpec reference_corrupt;
  CorruptSpec source_corrupt;
};

struct ExperimentConfig {
  std::string source, reference, truth;  // file paths, empty = unset
  bool has_synthesis = false;
  SynthesisRecipe synthesis;
  bool normalize_inputs = true;
  std::string output;
  std::uint64_t seed = 0;
  RegistrationConfig reg;
  bool m_set = false, h_set = false;
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("unknown config key \"" + item.key() + "\"");
    }
  }
}

CorruptSpec parse_corrupt(const json& obj) {
  check_keys(obj, {"mode", "param"});
  CorruptSpec spec;
  spec.mode = obj.value("mode", "none");
  if (spec.mode != "none" && spec.mode != "noise" && spec.mode != "crop") {
    throw std::invalid_argument("corrupt mode must be none, noise or crop");
  }
  spec.param = obj.value("param", 0.0);
  return spec;
}

SynthesisRecipe parse_synthesis(const json& obj) {
  check_keys(obj, {"pool", "sample", "deform_lambda", "deform_rho", "deform_noise",
                   "deform_landmarks", "reference_corrupt", "source_corrupt"});
  SynthesisRecipe recipe;
  recipe.pool = obj.value("pool", recipe.pool);
  recipe.sample = obj.value("sample", recipe.sample);
  recipe.deform_lambda = obj.value("deform_lambda", recipe.deform_lambda);
  recipe.deform_rho = obj.value("deform_rho", recipe.deform_rho);
  recipe.deform_noise = obj.value("deform_noise", recipe.deform_noise);
  recipe.deform_landmarks = obj.value("deform_landmarks", recipe.deform_landmarks);
  if (obj.contains("reference_corrupt")) {
    recipe.reference_corrupt = parse_corrupt(obj.at("reference_corrupt"));
  }
  if (obj.contains("source_corrupt")) {
    recipe.source_corrupt = parse_corrupt(obj.at("source_corrupt"));
    if (recipe.source_corrupt.mode == "noise") {
      throw std::invalid_argument(
          "source corruption supports crop only (noise points have no truth)");
    }
  }
  if (recipe.pool < recipe.sample) {
    throw std::invalid_argument("pool must be >= sample");
  }
  return recipe;
}

RegistrationConfig parse_registration(const json& obj, bool& m_set, bool& h_set) {
  check_keys(obj, {"mode", "m", "h", "T", "u", "lambda", "rho", "sigma", "landmarks",
                   "kappa", "gp", "transform", "widths", "lr_net", "lr_theta",
                   "h_init", "batch", "refine_steps", "checkpoint_stride"});
  RegistrationConfig reg;
  const std::string mode = obj.value("mode", "mass");
  if (mode == "mass") {
    reg.mode = DualMode::mass;
  } else if (mode == "distance") {
    reg.mode = DualMode::distance;
  } else {
    throw std::invalid_argument("mode must be mass or distance");
  }
  m_set = obj.contains("m");
  h_set = obj.contains("h");
  if (m_set) reg.mass_threshold = obj.at("m").get<Scalar>();
  if (h_set) reg.distance_threshold = obj.at("h").get<Scalar>();
  if (reg.mode == DualMode::mass && h_set && !m_set) {
    throw std::invalid_argument("mass threshold required");
  }
  if (reg.mode == DualMode::distance && m_set && !h_set) {
    throw std::invalid_argument("distance threshold required");
  }
  reg.outer_steps = obj.value("T", reg.outer_steps);
  reg.net_updates = obj.value("u", reg.net_updates);
  reg.lambda = obj.value("lambda", reg.lambda);
  reg.rho = obj.value("rho", reg.rho);
  reg.sigma = obj.value("sigma", reg.sigma);
  reg.landmarks = obj.value("landmarks", reg.landmarks);
  reg.kappa = obj.value("kappa", reg.kappa);
  const std::string gp = obj.value("gp", "squared_max");
  if (gp == "squared_max") {
    reg.gp = GpVariant::squared_max;
  } else if (gp == "one_sided") {
    reg.gp = GpVariant::one_sided;
  } else {
    throw std::invalid_argument("gp must be squared_max or one_sided");
  }
  const std::string transform = obj.value("transform", "drift");
  if (transform == "drift") {
    reg.transform = TransformMode::drift_only;
  } else if (transform == "affine_drift") {
    reg.transform = TransformMode::affine_drift;
  } else {
    throw std::invalid_argument("transform must be drift or affine_drift");
  }
  if (obj.contains("widths")) {
    reg.widths = obj.at("widths").get<std::vector<int>>();
  }
  reg.lr_net = obj.value("lr_net", reg.lr_net);
  reg.lr_theta = obj.value("lr_theta", reg.lr_theta);
  reg.h_init = obj.value("h_init", reg.h_init);
  reg.batch = obj.value("batch", reg.batch);
  reg.refine_steps = obj.value("refine_steps", reg.refine_steps);
  reg.checkpoint_stride = obj.value("checkpoint_stride", reg.checkpoint_stride);
  return reg;
}

ExperimentConfig parse_config(const std::string& path) {
  json doc = json::parse(read_text_file(path));
  if (!doc.is_object()) throw std::invalid_argument(path + ": expected a json object");
  check_keys(doc, {"schema", "source", "reference", "truth", "synthesis", "normalize",
                   "output", "seed", "registration"});
  if (doc.value("schema", "") != "pwreg/1") {
    throw std::invalid_argument("config schema must be \"pwreg/1\"");
  }
  ExperimentConfig cfg;
  cfg.source = doc.value("source", "");
  cfg.reference = doc.value("reference", "");
  cfg.truth = doc.value("truth", "");
  if (doc.contains("synthesis")) {
    cfg.has_synthesis = true;
    cfg.synthesis = parse_synthesis(doc.at("synthesis"));
  }
  cfg.normalize_inputs = doc.value("normalize", true);
  cfg.output = doc.value("output", "");
  cfg.seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("registration")) {
    cfg.reg = parse_registration(doc.at("registration"), cfg.m_set, cfg.h_set);
  }
  cfg.reg.seed = cfg.seed;
  const bool has_files = !cfg.source.empty() || !cfg.reference.empty();
  if (cfg.has_synthesis && has_files) {
    throw std::invalid_argument("config gives both input paths and a synthesis recipe");
  }
  if (!cfg.has_synthesis && (cfg.source.empty() || cfg.reference.empty())) {
    throw std::invalid_argument("config needs source and reference paths or a synthesis recipe");
  }
  if (cfg.has_synthesis && !cfg.truth.empty()) {
    throw std::invalid_argument("truth path is only valid with file inputs");
  }
  return cfg;
}

json corrupt_to_json(const CorruptSpec& spec) {
  json obj;
  obj["mode"] = spec.mode;
  obj["param"] = spec.param;
  return obj;
}

json config_to_json(const ExperimentConfig& cfg) {
  json reg;
  reg["mode"] = cfg.reg.mode == DualMode::mass ? "mass" : "distance";
  if (cfg.reg.mode == DualMode::mass) {
    reg["m"] = cfg.reg.mass_threshold;
  } else {
    reg["h"] = cfg.reg.distance_threshold;
  }
  reg["T"] = cfg.reg.outer_steps;
  reg["u"] = cfg.reg.net_updates;
  reg["lambda"] = cfg.reg.lambda;
  reg["rho"] = cfg.reg.rho;
  reg["sigma"] = cfg.reg.sigma;
  reg["landmarks"] = cfg.reg.landmarks;
  reg["kappa"] = cfg.reg.kappa;
  reg["gp"] = cfg.reg.gp == GpVariant::squared_max ? "squared_max" : "one_sided";
  reg["transform"] =
      cfg.reg.transform == TransformMode::drift_only ? "drift" : "affine_drift";
  reg["widths"] = cfg.reg.widths;
  reg["lr_net"] = cfg.reg.lr_net;
  reg["lr_theta"] = cfg.reg.lr_theta;
  reg["h_init"] = cfg.reg.h_init;
  reg["batch"] = cfg.reg.batch;
  reg["refine_steps"] = cfg.reg.refine_steps;
  reg["checkpoint_stride"] = cfg.reg.checkpoint_stride;

  json doc;
  doc["schema"] = "pwreg/1";
  if (cfg.has_synthesis) {
    json synth;
    synth["pool"] = cfg.synthesis.pool;
    synth["sample"] = cfg.synthesis.sample;
    synth["deform_lambda"] = cfg.synthesis.deform_lambda;
    synth["deform_rho"] = cfg.synthesis.deform_rho;
    synth["deform_noise"] = cfg.synthesis.deform_noise;
    synth["deform_landmarks"] = cfg.synthesis.deform_landmarks;
    synth["reference_corrupt"] = corrupt_to_json(cfg.synthesis.reference_corrupt);
    synth["source_corrupt"] = corrupt_to_json(cfg.synthesis.source_corrupt);
    doc["synthesis"] = synth;
  } else {
    doc["source"] = cfg.source;
    doc["reference"] = cfg.reference;
    if (!cfg.truth.empty()) doc["truth"] = cfg.truth;
  }
  doc["normalize"] = cfg.normalize_inputs;
  doc["output"] = cfg.output;
  doc["seed"] = cfg.seed;
  doc["registration"] = reg;
  return doc;
}

// ---------------------------------------------------------------------------
// synthesis pipeline
// ---------------------------------------------------------------------------

struct SynthesisResult {
  PointCloud source;     // normalized source sample
  PointCloud reference;  // normalized, corrupted reference sample
  PointCloud truth;      // target position per source point, reference frame
  NormalizationRecord source_record, reference_record;
};

PointCloud take_rows(const PointCloud& cloud, const std::vector<int>& idx) {
  PointCloud out;
  out.pts.resize(static_cast<Eigen::Index>(idx.size()), cloud.dim());
  for (std::size_t s = 0; s < idx.size(); ++s) {
    out.pts.row(static_cast<Eigen::Index>(s)) = cloud.pts.row(idx[s]);
  }
  return out;
}

SynthesisResult run_synthesis(const SynthesisRecipe& recipe, std::uint64_t seed,
                              bool normalize_outputs) {
  const PointCloud base = sample_surface(recipe.pool, seed);
  const PointCloud deformed =
      synthesize_deformation(base, recipe.deform_lambda, recipe.deform_rho,
                             recipe.deform_noise, recipe.deform_landmarks, seed + 11);
  CounterRng src_rng(seed + 21), ref_rng(seed + 22);
  const std::vector<int> src_idx =
      src_rng.sample_without_replacement(recipe.pool, recipe.sample);
  const std::vector<int> ref_idx =
      ref_rng.sample_without_replacement(recipe.pool, recipe.sample);

  PointCloud source = take_rows(base, src_idx);
  PointCloud truth = take_rows(deformed, src_idx);
  PointCloud reference = take_rows(deformed, ref_idx);

  if (recipe.source_corrupt.mode == "crop") {
    const std::vector<int> keep =
        plane_crop_indices(source, recipe.source_corrupt.param, seed + 31);
    source = take_rows(source, keep);
    truth = take_rows(truth, keep);
  }
  if (recipe.reference_corrupt.mode != "none") {
    const CorruptMode mode = recipe.reference_corrupt.mode == "noise"
                                 ? CorruptMode::noise
                                 : CorruptMode::crop;
    reference = corrupt(reference, mode, recipe.reference_corrupt.param, seed + 32);
  }

  SynthesisResult out;
  if (normalize_outputs) {
    auto [src_n, src_rec] = normalize(source);
    auto [ref_n, ref_rec] = normalize(reference);
    out.source = std::move(src_n);
    out.reference = std::move(ref_n);
    out.source_record = src_rec;
    out.reference_record = ref_rec;
    out.truth.pts =
        (truth.pts.rowwise() - ref_rec.center) / ref_rec.scale;
  } else {
    out.source = std::move(source);
    out.reference = std::move(reference);
    out.truth = std::move(truth);
  }
  return out;
}

// ---------------------------------------------------------------------------
// subcommand payloads
// ---------------------------------------------------------------------------

void save_curve(const std::string& out_dir, const Vector& values, const char* name,
                const char* header) {
  std::string text = std::string(header) + "\n";
  char buf[96];
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", int(i + 1), values[i]);
    text += buf;
  }
  write_text_file(out_dir + "/" + name, text);
}

int cmd_register(const std::string& config_path, const std::string& out_override,
                 const std::vector<std::string>& args) {
  ExperimentConfig cfg = parse_config(config_path);
  const std::string out_dir =
      resolve_out_dir(!out_override.empty() ? out_override : cfg.output);
  ensure_dir(out_dir);

  PointCloud source, reference;
  PointCloud truth;
  bool has_truth = false;
  if (cfg.has_synthesis) {
    SynthesisResult synth = run_synthesis(cfg.synthesis, cfg.seed, cfg.normalize_inputs);
    source = std::move(synth.source);
    reference = std::move(synth.reference);
    truth = std::move(synth.truth);
    has_truth = true;
  } else {
    source = load_cloud(cfg.source);
    reference = load_cloud(cfg.reference);
    has_truth = !cfg.truth.empty();
    if (has_truth) truth = load_cloud(cfg.truth);
    if (cfg.normalize_inputs) {
      auto [src_n, src_rec] = normalize(source);
      auto [ref_n, ref_rec] = normalize(reference);
      source = std::move(src_n);
      reference = std::move(ref_n);
      if (has_truth) {
        truth.pts = (truth.pts.rowwise() - ref_rec.center) / ref_rec.scale;
      }
    }
  }

  const DiscreteMeasure alpha = to_measure(reference);
  const DiscreteMeasure beta = to_measure(source);
  // Resolve the mode threshold against the loaded sets.
  if (cfg.reg.mode == DualMode::mass && !cfg.m_set) {
    cfg.reg.mass_threshold = std::min(alpha.total_mass(), beta.total_mass());
  }
  if (cfg.reg.mode == DualMode::distance && !cfg.h_set) {
    cfg.reg.distance_threshold = mean_nn_distance(reference);
  }

  const json resolved = config_to_json(cfg);
  write_manifest(out_dir, "register", args, resolved, cfg.seed);

  RegistrationRun run =
      register_sets(alpha, beta, cfg.reg, has_truth ? &truth : nullptr);

  save_cloud(out_dir + "/aligned.xyz", apply(run.theta, beta.cloud));
  write_text_file(out_dir + "/theta.json", transform_to_json(run.theta));
  write_text_file(out_dir + "/net.json", net_to_json(run.net));
  save_curve(out_dir, run.loss_curve, "loss.csv", "step,objective");
  if (has_truth) {
    save_curve(out_dir, run.mse_curve, "mse.csv", "step,mse");
  }
  for (const auto& [step, theta] : run.checkpoints) {
    char name[64];
    std::snprintf(name, sizeof(name), "beta_%06d.xyz", step);
    save_cloud(out_dir + "/" + name, apply(theta, beta.cloud));
  }

  json summary;
  summary["schema"] = "pwreg-summary/1";
  summary["config"] = resolved;
  summary["final_loss"] = run.loss_curve[run.loss_curve.size() - 1];
  if (has_truth) {
    summary["initial_mse"] = run.initial_mse;
    summary["final_mse"] = mse(apply(run.theta, beta.cloud), truth);
  }
  {
    json curve = json::array();
    for (Eigen::Index i = 0; i < run.loss_curve.size(); ++i) {
      curve.push_back(run.loss_curve[i]);
    }
    summary["loss_curve"] = std::move(curve);
  }
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");

  if (has_truth) {
    std::cout << "final_mse " << fmt_float(mse(apply(run.theta, beta.cloud), truth))
              << "\n";
  }
  std::cout << "final_loss " << fmt_float(run.loss_curve[run.loss_curve.size() - 1])
            << "\n";
  std::cerr << "potential " << run.seconds_potential << "s, transform "
            << run.seconds_transform << "s\n";
  return 0;
}

struct PotOptions {
  std::string source, reference, out;
  std::string mode = "mass";
  Scalar m = -1, h = -1;
  bool dual = false;
  int steps = 3000;
  std::vector<int> widths = {64, 64, 64, 64};
  Scalar lr = 1e-4, kappa = 10;
  std::string gp = "squared_max";
  std::uint64_t seed = 0;
};

int cmd_pot(const PotOptions& opt, const std::vector<std::string>& args) {
  const PointCloud x = load_cloud(opt.reference);
  const PointCloud y = load_cloud(opt.source);
  const DiscreteMeasure alpha = to_measure(x);
  const DiscreteMeasure beta = to_measure(y);

  TransportPlan plan;
  DualTrainConfig train;
  if (opt.mode == "mass") {
    if (opt.m < 0) throw std::invalid_argument("mass threshold required");
    plan = solve_partial_mass(alpha, beta, opt.m);
    train.mode = DualMode::mass;
    train.threshold = opt.m;
  } else if (opt.mode == "distance") {
    if (opt.h <= 0) throw std::invalid_argument("distance threshold required");
    plan = solve_bounded_distance(alpha, beta, opt.h);
    train.mode = DualMode::distance;
    train.threshold = opt.h;
  } else if (opt.mode == "w1") {
    plan = wasserstein1(alpha, beta);
    train.mode = DualMode::mass;
    train.threshold = beta.total_mass();
  } else {
    throw std::invalid_argument("mode must be mass, distance or w1");
  }

  json config;
  config["source"] = opt.source;
  config["reference"] = opt.reference;
  config["mode"] = opt.mode;
  if (opt.mode == "mass") config["m"] = opt.m;
  if (opt.mode == "distance") config["h"] = opt.h;
  config["dual"] = opt.dual;

  json report;
  report["schema"] = "pwreg-pot/1";
  report["primal"] = plan.value;
  report["plan_mass"] = plan.total_mass;
  std::cout << "primal " << fmt_float(plan.value) << "\n";

  if (opt.dual) {
    train.steps = opt.steps;
    train.widths = opt.widths;
    train.lr = opt.lr;
    train.kappa = opt.kappa;
    train.gp = opt.gp == "one_sided" ? GpVariant::one_sided : GpVariant::squared_max;
    train.seed = opt.seed;
    config["steps"] = opt.steps;
    config["widths"] = opt.widths;
    config["lr"] = opt.lr;
    config["kappa"] = opt.kappa;
    config["gp"] = opt.gp;
    const DualEstimate est = train_dual(alpha, beta, train);
    const Scalar gap = std::abs(est.tail_mean - plan.value) /
                       std::max<Scalar>(std::abs(plan.value), 1e-12);
    report["dual"] = est.tail_mean;
    report["dual_final"] = est.value;
    report["relative_gap"] = gap;
    std::cout << "dual " << fmt_float(est.tail_mean) << "\n";
    std::cout << "relative_gap " << fmt_float(gap) << "\n";
  }

  const std::string out_dir = resolve_out_dir(opt.out);
  ensure_dir(out_dir);
  write_manifest(out_dir, "pot", args, config, opt.seed);
  save_plan_csv(out_dir + "/plan.csv", plan);
  write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
  return 0;
}

struct SweepOptions {
  int outliers = 1000;
  std::string source, reference, out;
  std::vector<std::string> kinds = {"kl", "l2", "pw_mass", "pw_distance"};
  Scalar m = 10, h = 2, sigma = 1, omega = 0.2;
  Scalar t_min = -1, t_max = 8, t_step = 0.05;
};

int cmd_sweep(const SweepOptions& opt, const std::vector<std::string>& args) {
  PointCloud x, y;
  if (!opt.source.empty() || !opt.reference.empty()) {
    if (opt.source.empty() || opt.reference.empty()) {
      throw std::invalid_argument("sweep needs both source and reference files");
    }
    x = load_cloud(opt.reference);
    y = load_cloud(opt.source);
  } else {
    ToyPair pair = make_toy_pair(opt.outliers);
    x = std::move(pair.x);
    y = std::move(pair.y);
  }
  if (!(opt.t_step > 0) || !(opt.t_max > opt.t_min)) {
    throw std::invalid_argument("translation grid must be strictly increasing");
  }
  const Eigen::Index n =
      static_cast<Eigen::Index>(std::floor((opt.t_max - opt.t_min) / opt.t_step + 1e-9)) + 1;
  Vector grid(n);
  for (Eigen::Index i = 0; i < n; ++i) grid[i] = opt.t_min + Scalar(i) * opt.t_step;

  const std::string out_dir = resolve_out_dir(opt.out);
  ensure_dir(out_dir);

  json config;
  config["outliers"] = opt.outliers;
  config["kinds"] = opt.kinds;
  config["m"] = opt.m;
  config["h"] = opt.h;
  config["sigma"] = opt.sigma;
  config["omega"] = opt.omega;
  config["t_min"] = opt.t_min;
  config["t_max"] = opt.t_max;
  config["t_step"] = opt.t_step;
  if (!opt.source.empty()) {
    config["source"] = opt.source;
    config["reference"] = opt.reference;
  }
  write_manifest(out_dir, "sweep", args, config, 0);

  for (const std::string& kind : opt.kinds) {
    DiscrepancySpec spec;
    spec.sigma = opt.sigma;
    spec.omega = opt.omega;
    if (kind == "kl") {
      spec.kind = DiscrepancyKind::kl;
    } else if (kind == "l2") {
      spec.kind = DiscrepancyKind::l2;
    } else if (kind == "pw_mass") {
      spec.kind = DiscrepancyKind::pw_mass;
      spec.threshold = opt.m;
    } else if (kind == "pw_distance") {
      spec.kind = DiscrepancyKind::pw_distance;
      spec.threshold = opt.h;
    } else {
      throw std::invalid_argument("unknown discrepancy \"" + kind + "\"");
    }
    const LandscapeCurve curve = landscape_sweep(x, y, spec, grid);
    save_curve_csv(curve, out_dir + "/sweep_" + kind + ".csv");
    Eigen::Index at = 0;
    curve.values.minCoeff(&at);
    std::cout << kind << " min_at " << fmt_float(curve.t_values[at]) << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& aligned_path, const std::string& truth_path,
             const std::string& out, const std::vector<std::string>& args) {
  const PointCloud aligned = load_cloud(aligned_path);
  const PointCloud truth = load_cloud(truth_path);
  const Scalar value = mse(aligned, truth);
  std::cout << fmt_float(value) << "\n";
  const std::string out_dir = resolve_out_dir(out);
  ensure_dir(out_dir);
  json config;
  config["aligned"] = aligned_path;
  config["truth"] = truth_path;
  write_manifest(out_dir, "eval", args, config, 0);
  json report;
  report["schema"] = "pwreg-eval/1";
  report["mse"] = value;
  write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
  return 0;
}

struct SynthOptions {
  SynthesisRecipe recipe;
  std::string ref_mode = "none", src_mode = "none";
  Scalar ref_param = 0, src_param = 0;
  bool no_normalize = false;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_synth(SynthOptions& opt, const std::vector<std::string>& args) {
  for (const std::string& mode : {opt.ref_mode, opt.src_mode}) {
    if (mode != "none" && mode != "noise" && mode != "crop") {
      throw std::invalid_argument("corrupt mode must be none, noise or crop");
    }
  }
  opt.recipe.reference_corrupt = {opt.ref_mode, opt.ref_param};
  opt.recipe.source_corrupt = {opt.src_mode, opt.src_param};
  if (opt.recipe.source_corrupt.mode == "noise") {
    throw std::invalid_argument(
        "source corruption supports crop only (noise points have no truth)");
  }
  if (opt.recipe.pool < opt.recipe.sample) {
    throw std::invalid_argument("pool must be >= sample");
  }
  const SynthesisResult result =
      run_synthesis(opt.recipe, opt.seed, !opt.no_normalize);

  const std::string out_dir = resolve_out_dir(opt.out);
  ensure_dir(out_dir);
  json config;
  config["pool"] = opt.recipe.pool;
  config["sample"] = opt.recipe.sample;
  config["deform_lambda"] = opt.recipe.deform_lambda;
  config["deform_rho"] = opt.recipe.deform_rho;
  config["deform_noise"] = opt.recipe.deform_noise;
  config["deform_landmarks"] = opt.recipe.deform_landmarks;
  config["reference_corrupt"] = corrupt_to_json(opt.recipe.reference_corrupt);
  config["source_corrupt"] = corrupt_to_json(opt.recipe.source_corrupt);
  config["normalize"] = !opt.no_normalize;
  write_manifest(out_dir, "synth", args, config, opt.seed);

  save_cloud(out_dir + "/source.xyz", result.source);
  save_cloud(out_dir + "/reference.xyz", result.reference);
  save_cloud(out_dir + "/truth.xyz", result.truth);
  std::cout << "source " << result.source.size() << " reference "
            << result.reference.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partial-Wasserstein point-set registration toolkit"};
  app.require_subcommand(1);
  // long-form help only, so the short threshold options --m/--h stay free
  app.set_help_flag("--help", "print usage");

  std::vector<std::string> args(argv + 1, argv + argc);

  // register
  auto* reg = app.add_subcommand("register", "run the adversarial registration loop");
  reg->set_help_flag("--help", "print usage");
  std::string reg_config, reg_out;
  reg->add_option("--config", reg_config, "experiment config json")->required();
  reg->add_option("--out", reg_out, "output directory (overrides config)");

  // pot
  auto* pot = app.add_subcommand("pot", "exact and estimated discrepancy values");
  pot->set_help_flag("--help", "print usage");
  PotOptions pot_opt;
  pot->add_option("--source", pot_opt.source, "source cloud file")->required();
  pot->add_option("--reference", pot_opt.reference, "reference cloud file")->required();
  pot->add_option("--mode", pot_opt.mode, "mass | distance | w1");
  pot->add_option("--m", pot_opt.m, "mass threshold");
  pot->add_option("--h", pot_opt.h, "distance threshold");
  pot->add_flag("--dual", pot_opt.dual, "train the potential estimate too");
  pot->add_option("--steps", pot_opt.steps, "dual training steps");
  pot->add_option("--widths", pot_opt.widths, "four hidden widths")->expected(4);
  pot->add_option("--lr", pot_opt.lr, "dual learning rate");
  pot->add_option("--kappa", pot_opt.kappa, "gradient penalty strength");
  pot->add_option("--gp", pot_opt.gp, "squared_max | one_sided");
  pot->add_option("--seed", pot_opt.seed, "rng seed");
  pot->add_option("--out", pot_opt.out, "output directory");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "1-D translation landscape");
  sweep->set_help_flag("--help", "print usage");
  SweepOptions sweep_opt;
  sweep->add_option("--outliers", sweep_opt.outliers, "outlier count for the built-in pair");
  sweep->add_option("--source", sweep_opt.source, "override: 1-D source file");
  sweep->add_option("--reference", sweep_opt.reference, "override: 1-D reference file");
  sweep->add_option("--kinds", sweep_opt.kinds, "subset of kl l2 pw_mass pw_distance");
  sweep->add_option("--m", sweep_opt.m, "pw_mass threshold");
  sweep->add_option("--h", sweep_opt.h, "pw_distance threshold");
  sweep->add_option("--sigma", sweep_opt.sigma, "kl/l2 variance");
  sweep->add_option("--omega", sweep_opt.omega, "kl outlier weight");
  sweep->add_option("--t-min", sweep_opt.t_min, "grid start");
  sweep->add_option("--t-max", sweep_opt.t_max, "grid end");
  sweep->add_option("--t-step", sweep_opt.t_step, "grid step");
  sweep->add_option("--out", sweep_opt.out, "output directory");

  // eval
  auto* eval = app.add_subcommand("eval", "MSE between two clouds");
  eval->set_help_flag("--help", "print usage");
  std::string eval_aligned, eval_truth, eval_out;
  eval->add_option("--aligned", eval_aligned, "aligned cloud file")->required();
  eval->add_option("--truth", eval_truth, "ground-truth cloud file")->required();
  eval->add_option("--out", eval_out, "output directory for the report");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic pair with truth");
  synth->set_help_flag("--help", "print usage");
  SynthOptions synth_opt;
  synth->add_option("--pool", synth_opt.recipe.pool, "surface sample pool size");
  synth->add_option("--sample", synth_opt.recipe.sample, "points per set");
  synth->add_option("--deform-lambda", synth_opt.recipe.deform_lambda, "field strength inverse");
  synth->add_option("--deform-rho", synth_opt.recipe.deform_rho, "field bandwidth");
  synth->add_option("--deform-noise", synth_opt.recipe.deform_noise, "jitter std");
  synth->add_option("--deform-landmarks", synth_opt.recipe.deform_landmarks,
                    "field factor rank");
  synth->add_option("--reference-corrupt", synth_opt.ref_mode, "none | noise | crop");
  synth->add_option("--reference-param", synth_opt.ref_param, "count or retain ratio");
  synth->add_option("--source-corrupt", synth_opt.src_mode, "none | crop");
  synth->add_option("--source-param", synth_opt.src_param, "retain ratio");
  synth->add_flag("--no-normalize", synth_opt.no_normalize, "skip normalization");
  synth->add_option("--seed", synth_opt.seed, "rng seed");
  synth->add_option("--out", synth_opt.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(reg)) return cmd_register(reg_config, reg_out, args);
    if (app.got_subcommand(pot)) return cmd_pot(pot_opt, args);
    if (app.got_subcommand(sweep)) return cmd_sweep(sweep_opt, args);
    if (app.got_subcommand(eval)) return cmd_eval(eval_aligned, eval_truth, eval_out, args);
    if (app.got_subcommand(synth)) return cmd_synth(synth_opt, args);
  } catch (const RegistrationAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    try {
      const std::string out_dir = resolve_out_dir(reg_out);
      ensure_dir(out_dir);
      write_text_file(out_dir + "/abort_theta.json", transform_to_json(e.last_theta));
      std::cerr << "last finite transform written to " << out_dir
                << "/abort_theta.json\n";
    } catch (const std::exception&) {
    }
    return 2;
  } catch (const NumericalAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
