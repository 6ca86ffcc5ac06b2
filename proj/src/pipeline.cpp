#include "ungan/pipeline.hpp"

#include "ungan/checkpoint.hpp"
#include "ungan/hash.hpp"
#include "ungan/image_io.hpp"
#include "ungan/latent_edit.hpp"
#include "ungan/plot.hpp"
#include "ungan/worker_pool.hpp"
#include "ungan/zoo.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace ungan {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Enum names

namespace {

template <typename E, std::size_t N>
std::string name_of(E value, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [v, n] : table)
    if (v == value) return n;
  throw Error("unnamed enum value");
}

template <typename E, std::size_t N>
E value_of(const std::string& name, const std::pair<E, const char*> (&table)[N], const char* what) {
  for (const auto& [v, n] : table)
    if (name == n) return v;
  std::string options;
  for (const auto& [v, n] : table) options += std::string(options.empty() ? "" : ", ") + n;
  throw RangeError(std::string("unknown ") + what + " '" + name + "' (expected one of: " + options + ")");
}

const std::pair<Pipeline, const char*> kPipelines[] = {
    {Pipeline::TrainGan, "train-gan"}, {Pipeline::TrainEncoder, "train-encoder"},
    {Pipeline::StealEncoder, "steal-encoder"}, {Pipeline::Invert, "invert"},
    {Pipeline::Cloak, "cloak"},        {Pipeline::Distort, "distort"},
    {Pipeline::Adapt, "adapt"},        {Pipeline::Edit, "edit"},
    {Pipeline::Evaluate, "evaluate"},  {Pipeline::Report, "report"}};
const std::pair<KappaPolicy, const char*> kPolicies[] = {
    {KappaPolicy::Fixed, "fixed"}, {KappaPolicy::Table, "table"}, {KappaPolicy::Grid, "grid"}};
const std::pair<InversionMethod, const char*> kMethods[] = {{InversionMethod::Auto, "auto"},
                                                            {InversionMethod::Optimization, "optimization"},
                                                            {InversionMethod::Hybrid, "hybrid"}};

}  // namespace

std::string to_string(Pipeline p) { return name_of(p, kPipelines); }
Pipeline pipeline_from_string(const std::string& name) { return value_of(name, kPipelines, "pipeline"); }
std::string to_string(KappaPolicy p) { return name_of(p, kPolicies); }
KappaPolicy kappa_policy_from_string(const std::string& name) { return value_of(name, kPolicies, "kappa policy"); }
std::string to_string(InversionMethod m) { return name_of(m, kMethods); }
InversionMethod inversion_method_from_string(const std::string& name) {
  return value_of(name, kMethods, "inversion method");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

bool uses_scenario(Pipeline p) { return p == Pipeline::Cloak || p == Pipeline::Adapt; }

bool inverts(Pipeline p) {
  return p == Pipeline::Invert || p == Pipeline::Cloak || p == Pipeline::Distort || p == Pipeline::Adapt ||
         p == Pipeline::Edit;
}

bool hybrid_inversion(const RunConfig& c) {
  if (c.inversion.method != InversionMethod::Auto) return c.inversion.method == InversionMethod::Hybrid;
  if (c.pipeline == Pipeline::Adapt && c.adapt.strategy == Strategy::EncoderEnhancement) return true;
  if (!uses_scenario(c.pipeline)) return false;
  return c.cloak.scenario != Scenario::V0 && c.cloak.scenario != Scenario::V1;
}

// Typed field access that records errors instead of throwing.
class Fields {
 public:
  Fields(const json& j, std::string prefix, std::vector<std::string>& errors)
      : j_(j), prefix_(std::move(prefix)), errors_(errors) {
    if (!j_.is_object()) {
      errors_.push_back(where("") + "expected an object");
      return;
    }
  }

  template <typename T>
  bool get(const std::string& key, T& out) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key) || j_.at(key).is_null()) return false;
    try {
      out = j_.at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      errors_.push_back(where(key) + "wrong type");
      return false;
    }
  }

  template <typename E>
  void get_enum(const std::string& key, E& out, E (*parse)(const std::string&)) {
    std::string name;
    if (!get(key, name)) return;
    try {
      out = parse(name);
    } catch (const Error& e) {
      errors_.push_back(where(key) + e.what());
    }
  }

  const json* object(const std::string& key) {
    seen_.push_back(key);
    if (!j_.is_object() || !j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  void reject_unknown() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) errors_.push_back(where(k) + "unknown field");
  }

  [[nodiscard]] std::string where(const std::string& key) const { return prefix_ + key + ": "; }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return (path.is_relative() && !base.empty() ? base / path : path).lexically_normal().string();
}

void check_range(std::vector<std::string>& errors, const std::string& field, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream o;
    o << field << ": out of range [" << lo << ", " << hi << "] (got " << v << ")";
    errors.push_back(o.str());
  }
}

}  // namespace

ConfigResult validate_config(const std::string& text, const fs::path& base) {
  ConfigResult result;
  auto& errors = result.errors;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    errors.push_back(std::string("config: not valid JSON: ") + e.what());
    return result;
  }
  if (!root.is_object()) {
    errors.push_back("config: expected a JSON object");
    return result;
  }

  RunConfig c;
  Fields top(root, "", errors);
  if (!top.get("schema_version", c.schema_version)) errors.push_back("schema_version: required");
  else if (c.schema_version != kSchemaVersion)
    errors.push_back("schema_version: unsupported version " + std::to_string(c.schema_version) + " (expected " +
                     std::to_string(kSchemaVersion) + ")");
  {
    std::string name;
    if (!top.get("pipeline", name)) errors.push_back("pipeline: required");
    else top.get_enum("pipeline", c.pipeline, pipeline_from_string);
  }
  top.get("zoo", c.zoo);
  top.get("dataset", c.dataset);
  top.get("output", c.output);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  {
    std::string mode = "deterministic";
    if (top.get("mode", mode)) {
      if (mode == "deterministic") c.deterministic = true;
      else if (mode == "fast") c.deterministic = false;
      else errors.push_back("mode: expected 'deterministic' or 'fast'");
    }
  }
  if (c.workers < 0) errors.push_back("workers: must be >= 0");

  if (const json* m = top.object("models")) {
    Fields f(*m, "models.", errors);
    f.get("generator", c.models.generator);
    f.get("discriminator", c.models.discriminator);
    f.get("encoder", c.models.encoder);
    f.get("encoder_critic", c.models.encoder_critic);
    f.get("feature_extractor", c.models.feature_extractor);
    f.get("embedder", c.models.embedder);
    f.get("shadow_encoder", c.models.shadow_encoder);
    f.get("stolen_encoder", c.models.stolen_encoder);
    f.get("calibration", c.models.calibration);
    f.reject_unknown();
  }
  if (const json* t = top.object("targets")) {
    Fields f(*t, "targets.", errors);
    f.get("source", c.targets.source);
    f.get("count", c.targets.count);
    f.get("seed", c.targets.seed);
    f.reject_unknown();
  }
  if (c.targets.source != "generated" && c.targets.source != "dataset")
    errors.push_back("targets.source: expected 'generated' or 'dataset'");
  if (c.targets.count < 1) errors.push_back("targets.count: must be >= 1");

  if (const json* s = top.object("cloak")) {
    Fields f(*s, "cloak.", errors);
    f.get_enum("scenario", c.cloak.scenario, scenario_from_string);
    f.get("levels", c.cloak.levels);
    f.get_enum("kappa_policy", c.cloak.kappa_policy, kappa_policy_from_string);
    f.get("kappa", c.cloak.kappa);
    f.get("kappa_grid", c.cloak.kappa_grid);
    f.get("grid_targets", c.cloak.grid_targets);
    f.get("iterations", c.cloak.iterations);
    f.get("step_size", c.cloak.step_size);
    f.reject_unknown();
  }
  if (c.cloak.levels.empty()) errors.push_back("cloak.levels: must not be empty");
  for (int l : c.cloak.levels) check_range(errors, "cloak.levels", l, 0, kBudgetLevels - 1);
  check_range(errors, "cloak.kappa", c.cloak.kappa, 0, 1);
  if (c.cloak.kappa_grid.empty()) errors.push_back("cloak.kappa_grid: must not be empty");
  for (double k : c.cloak.kappa_grid) check_range(errors, "cloak.kappa_grid", k, 0, 1);
  if (c.cloak.grid_targets < 1) errors.push_back("cloak.grid_targets: must be >= 1");
  if (c.cloak.iterations < 0) errors.push_back("cloak.iterations: must be >= 0");
  if (!(c.cloak.step_size >= 0)) errors.push_back("cloak.step_size: must be >= 0");

  if (const json* s = top.object("inversion")) {
    Fields f(*s, "inversion.", errors);
    f.get_enum("method", c.inversion.method, inversion_method_from_string);
    int iters = 0;
    if (f.get("iterations", iters)) c.inversion.iterations = iters;
    f.get("learning_rate", c.inversion.learning_rate);
    f.get_enum("init", c.inversion.init, init_mode_from_string);
    f.reject_unknown();
  }
  if (!c.inversion.iterations) c.inversion.iterations = hybrid_inversion(c) ? 100 : 500;
  check_range(errors, "inversion.iterations", *c.inversion.iterations, 0, kMaxInversionIterations);
  if (!(c.inversion.learning_rate > 0)) errors.push_back("inversion.learning_rate: must be > 0");
  if (c.inversion.init == InitMode::Encoder) errors.push_back("inversion.init: use method 'hybrid' for encoder init");

  if (const json* s = top.object("distort")) {
    Fields f(*s, "distort.", errors);
    f.get_enum("kind", c.distort.kind, distortion_from_string);
    f.get("magnitudes", c.distort.magnitudes);
    f.reject_unknown();
  }
  if (c.pipeline == Pipeline::Distort) {
    if (c.distort.magnitudes.empty()) errors.push_back("distort.magnitudes: must not be empty");
    for (double m : c.distort.magnitudes) {
      try {
        validate(DistortionSpec{c.distort.kind, m, 0});
      } catch (const Error& e) {
        errors.push_back(std::string("distort.magnitudes: ") + e.what());
      }
    }
  }

  if (const json* s = top.object("adapt")) {
    Fields f(*s, "adapt.", errors);
    f.get_enum("strategy", c.adapt.strategy, strategy_from_string);
    f.get("params", c.adapt.params);
    f.get("level", c.adapt.level);
    f.get("retrain_epochs", c.adapt.retrain_epochs);
    f.get("clean_count", c.adapt.clean_count);
    f.reject_unknown();
  }
  check_range(errors, "adapt.level", c.adapt.level, 0, kBudgetLevels - 1);
  if (c.pipeline == Pipeline::Adapt) {
    if (c.adapt.params.empty()) errors.push_back("adapt.params: must not be empty");
    for (double p : c.adapt.params) {
      AdaptiveConfig a;
      a.strategy = c.adapt.strategy;
      switch (a.strategy) {
        case Strategy::Overwrite: a.sigma = p; break;
        case Strategy::Purify: a.filter_width = int(p); break;
        case Strategy::MoreIterations: a.iterations = int(p); break;
        case Strategy::EncoderEnhancement: a.cloaked_count = int(p); break;
      }
      if (a.strategy != Strategy::Overwrite && p != std::floor(p))
        errors.push_back("adapt.params: expected integers for " + to_string(a.strategy));
      try {
        validate(a);
      } catch (const Error& e) {
        errors.push_back(std::string("adapt.params: ") + e.what());
      }
    }
    if (c.adapt.retrain_epochs < 1) errors.push_back("adapt.retrain_epochs: must be >= 1");
    if (c.adapt.clean_count < 1) errors.push_back("adapt.clean_count: must be >= 1");
  }

  if (const json* s = top.object("edit")) {
    Fields f(*s, "edit.", errors);
    f.get("attribute", c.edit.attribute);
    f.get("alpha", c.edit.alpha);
    f.get("fit_count", c.edit.fit_count);
    f.reject_unknown();
  }
  if (!std::isfinite(c.edit.alpha)) errors.push_back("edit.alpha: must be finite");
  if (c.edit.fit_count < 2) errors.push_back("edit.fit_count: must be >= 2");

  if (const json* s = top.object("train")) {
    Fields f(*s, "train.", errors);
    f.get("epochs", c.train.epochs);
    f.get("steps", c.train.steps);
    f.get("latent_dim", c.train.latent_dim);
    f.reject_unknown();
  }
  if (c.train.epochs < 0) errors.push_back("train.epochs: must be >= 0");
  if (c.train.steps < 0) errors.push_back("train.steps: must be >= 0");
  if (c.train.latent_dim < 1) errors.push_back("train.latent_dim: must be >= 1");

  if (const json* s = top.object("evaluate")) {
    Fields f(*s, "evaluate.", errors);
    f.get("targets", c.evaluate_targets);
    f.get("reconstructions", c.evaluate_reconstructions);
    f.reject_unknown();
  }
  if (const json* s = top.object("report")) {
    Fields f(*s, "report.", errors);
    f.get("runs", c.report_runs);
    f.reject_unknown();
  }
  top.reject_unknown();

  // Paths: resolve, fill from the zoo, require what the pipeline reads.
  c.zoo = resolve(base, c.zoo);
  c.output = resolve(base, c.output);
  c.dataset = resolve(base, c.dataset);
  c.evaluate_targets = resolve(base, c.evaluate_targets);
  c.evaluate_reconstructions = resolve(base, c.evaluate_reconstructions);
  for (auto& r : c.report_runs) r = resolve(base, r);
  struct Slot {
    const char* name;
    std::string* path;
    std::string zoo_entry;
  };
  const ZooPaths zp{c.zoo};
  Slot slots[] = {{"generator", &c.models.generator, zp.generator()},
                  {"discriminator", &c.models.discriminator, zp.discriminator()},
                  {"encoder", &c.models.encoder, zp.encoder()},
                  {"encoder_critic", &c.models.encoder_critic, zp.encoder_critic()},
                  {"feature_extractor", &c.models.feature_extractor, zp.feature_extractor()},
                  {"embedder", &c.models.embedder, zp.embedder()},
                  {"shadow_encoder", &c.models.shadow_encoder, zp.shadow_encoder()},
                  {"stolen_encoder", &c.models.stolen_encoder, zp.stolen_encoder()},
                  {"calibration", &c.models.calibration, zp.calibration()}};
  if (!c.zoo.empty() && !fs::is_directory(c.zoo)) errors.push_back("zoo: no such directory " + c.zoo);
  for (auto& s : slots) {
    *s.path = resolve(base, *s.path);
    if (s.path->empty() && !c.zoo.empty()) *s.path = s.zoo_entry;
  }
  if (c.dataset.empty() && !c.zoo.empty()) c.dataset = zp.dataset().string();

  std::vector<std::string> required;
  const Pipeline p = c.pipeline;
  if (inverts(p)) required.insert(required.end(), {"generator", "feature_extractor"});
  if (inverts(p) && p != Pipeline::Edit) required.insert(required.end(), {"embedder", "calibration"});
  if (inverts(p) && hybrid_inversion(c)) required.push_back("encoder");
  if (uses_scenario(p)) {
    if (c.cloak.scenario == Scenario::V0) required.push_back("shadow_encoder");
    if (c.cloak.scenario == Scenario::V2) required.push_back("encoder");
    if (c.cloak.scenario == Scenario::V3) required.push_back("stolen_encoder");
  }
  if (p == Pipeline::TrainEncoder) required.insert(required.end(), {"generator", "feature_extractor"});
  if (p == Pipeline::StealEncoder) required.push_back("encoder");
  if (p == Pipeline::Evaluate) required.insert(required.end(), {"embedder", "calibration"});
  for (auto& s : slots) {
    const bool needed = std::find(required.begin(), required.end(), s.name) != required.end();
    if (s.path->empty()) {
      if (needed) errors.push_back(std::string("models.") + s.name + ": required by pipeline " + to_string(p));
    } else if (!fs::exists(*s.path)) {
      if (needed || c.zoo.empty()) errors.push_back(std::string("models.") + s.name + ": no such path " + *s.path);
      else s.path->clear();
    }
  }

  const bool needs_dataset = p != Pipeline::Evaluate && p != Pipeline::Report;
  if (c.dataset.empty()) {
    if (needs_dataset) errors.push_back("dataset: required");
  } else if (!fs::is_directory(c.dataset)) {
    errors.push_back("dataset: no such directory " + c.dataset);
  }
  if (p == Pipeline::Evaluate) {
    if (c.evaluate_targets.empty()) errors.push_back("evaluate.targets: required");
    else if (!fs::is_directory(c.evaluate_targets)) errors.push_back("evaluate.targets: no such directory");
    if (c.evaluate_reconstructions.empty()) errors.push_back("evaluate.reconstructions: required");
    else if (!fs::is_directory(c.evaluate_reconstructions))
      errors.push_back("evaluate.reconstructions: no such directory");
  }
  if (p == Pipeline::Report) {
    if (c.report_runs.empty()) errors.push_back("report.runs: required");
    for (const auto& r : c.report_runs)
      if (!fs::exists(fs::path(r) / "report.json")) errors.push_back("report.runs: no report.json in " + r);
  }
  if (c.output.empty()) errors.push_back("output: required");

  if (errors.empty()) result.config = std::move(c);
  return result;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["pipeline"] = to_string(c.pipeline);
  j["zoo"] = c.zoo;
  j["models"] = {{"generator", c.models.generator},
                 {"discriminator", c.models.discriminator},
                 {"encoder", c.models.encoder},
                 {"encoder_critic", c.models.encoder_critic},
                 {"feature_extractor", c.models.feature_extractor},
                 {"embedder", c.models.embedder},
                 {"shadow_encoder", c.models.shadow_encoder},
                 {"stolen_encoder", c.models.stolen_encoder},
                 {"calibration", c.models.calibration}};
  j["dataset"] = c.dataset;
  j["output"] = c.output;
  j["seed"] = c.seed;
  j["mode"] = c.deterministic ? "deterministic" : "fast";
  j["workers"] = c.workers;
  j["targets"] = {{"source", c.targets.source}, {"count", c.targets.count}, {"seed", c.targets.seed}};
  j["cloak"] = {{"scenario", to_string(c.cloak.scenario)},
                {"levels", c.cloak.levels},
                {"kappa_policy", to_string(c.cloak.kappa_policy)},
                {"kappa", c.cloak.kappa},
                {"kappa_grid", c.cloak.kappa_grid},
                {"grid_targets", c.cloak.grid_targets},
                {"iterations", c.cloak.iterations},
                {"step_size", c.cloak.step_size}};
  j["inversion"] = {{"method", to_string(c.inversion.method)},
                    {"iterations", c.inversion.iterations.value_or(500)},
                    {"learning_rate", c.inversion.learning_rate},
                    {"init", to_string(c.inversion.init)}};
  j["distort"] = {{"kind", to_string(c.distort.kind)}, {"magnitudes", c.distort.magnitudes}};
  j["adapt"] = {{"strategy", to_string(c.adapt.strategy)},
                {"params", c.adapt.params},
                {"level", c.adapt.level},
                {"retrain_epochs", c.adapt.retrain_epochs},
                {"clean_count", c.adapt.clean_count}};
  j["edit"] = {{"attribute", c.edit.attribute}, {"alpha", c.edit.alpha}, {"fit_count", c.edit.fit_count}};
  j["train"] = {{"epochs", c.train.epochs}, {"steps", c.train.steps}, {"latent_dim", c.train.latent_dim}};
  j["evaluate"] = {{"targets", c.evaluate_targets}, {"reconstructions", c.evaluate_reconstructions}};
  j["report"] = {{"runs", c.report_runs}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json evaluation_json(const EvaluationReport& e) {
  return {{"label", e.label},
          {"keys", e.keys},
          {"count", e.count},
          {"matching_rate", e.matching_rate},
          {"mse", {{"mean", e.mse.mean}, {"std", e.mse.std}}},
          {"ssim", {{"mean", e.ssim.mean}, {"std", e.ssim.std}}},
          {"psnr", {{"mean", e.psnr.mean}, {"std", e.psnr.std}}}};
}

json report_body(const RunReport& r) {
  json evals = json::array();
  for (const auto& e : r.evaluations) evals.push_back(evaluation_json(e));
  json artifacts = json::array();
  for (const auto& a : r.artifacts) artifacts.push_back({{"path", a.path}, {"sha256", a.sha256}});
  return {{"run_id", r.run_id},
          {"config", json::parse(r.config_json)},
          {"evaluations", evals},
          {"metrics", r.metrics},
          {"artifacts", artifacts}};
}

Stat stat_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

std::string report_fingerprint(const RunReport& report) { return report_body(report).dump(); }

std::string report_to_json(const RunReport& report) {
  json j = report_body(report);
  j["timings"] = report.timings;
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.config_json = j.at("config").dump(2);
    for (const auto& e : j.at("evaluations")) {
      EvaluationReport ev;
      ev.label = e.at("label").get<std::string>();
      ev.keys = e.at("keys").get<std::map<std::string, double>>();
      ev.count = e.at("count").get<int>();
      ev.matching_rate = e.at("matching_rate").get<double>();
      ev.mse = stat_from(e.at("mse"));
      ev.ssim = stat_from(e.at("ssim"));
      ev.psnr = stat_from(e.at("psnr"));
      r.evaluations.push_back(std::move(ev));
    }
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    for (const auto& a : j.at("artifacts"))
      r.artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
    if (j.contains("timings")) r.timings = j.at("timings").get<std::map<std::string, double>>();
    return r;
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("malformed run report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

using Clock = std::chrono::steady_clock;

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs one stage, tagging any failure with the stage name.
template <typename Fn>
auto stage(const std::string& name, std::map<std::string, double>& timings, Fn&& fn) {
  const auto t0 = Clock::now();
  auto done = [&] { timings[name] += std::chrono::duration<double>(Clock::now() - t0).count(); };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      done();
    } else {
      auto out = fn();
      done();
      return out;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= double(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / double(v.size()));
  return s;
}

struct Target {
  std::string name;
  Image<float> image;
  std::optional<Latent<float>> latent;
};

// Lazily loaded read-only model handles.
class Models {
 public:
  explicit Models(const RunConfig& c) : c_(c) {}

  const Generator<float>& generator() { return get(g_, [&] { return load_generator(c_.models.generator); }); }
  const Encoder<float>& encoder() { return get(e_, [&] { return load_encoder(c_.models.encoder); }); }
  const Encoder<float>& shadow_encoder() {
    return get(es_, [&] { return load_encoder(c_.models.shadow_encoder); });
  }
  const Encoder<float>& stolen_encoder() {
    return get(est_, [&] { return load_encoder(c_.models.stolen_encoder); });
  }
  const FeatureExtractor<float>& feature_extractor() {
    return get(f_, [&] { return load_feature_extractor(c_.models.feature_extractor); });
  }
  const IdentityEmbedder<float>& embedder() { return get(emb_, [&] { return load_embedder(c_.models.embedder); }); }
  const ThresholdCalibration& calibration() {
    return get(cal_, [&] { return load_calibration(c_.models.calibration); });
  }

 private:
  template <typename T, typename Load>
  const T& get(std::optional<T>& slot, Load&& load) {
    if (!slot) slot = load();
    return *slot;
  }
  const RunConfig& c_;
  std::optional<Generator<float>> g_;
  std::optional<Encoder<float>> e_, es_, est_;
  std::optional<FeatureExtractor<float>> f_;
  std::optional<IdentityEmbedder<float>> emb_;
  std::optional<ThresholdCalibration> cal_;
};

class Runner {
 public:
  explicit Runner(const RunConfig& c) : c_(c), models_(c), out_(c.output) {
    workers_ = c.deterministic ? 1 : (c.workers > 0 ? c.workers : int(std::max(1u, std::thread::hardware_concurrency())));
  }

  RunReport run() {
    fs::create_directories(out_);
    report_.config_json = config_to_json(c_);
    report_.run_id = sha256_hex(report_.config_json).substr(0, 16);
    const auto t0 = Clock::now();
    switch (c_.pipeline) {
      case Pipeline::TrainGan: train_gan_pipeline(); break;
      case Pipeline::TrainEncoder: train_encoder_pipeline(); break;
      case Pipeline::StealEncoder: steal_pipeline(); break;
      case Pipeline::Invert: invert_pipeline(); break;
      case Pipeline::Cloak: cloak_pipeline(); break;
      case Pipeline::Distort: distort_pipeline(); break;
      case Pipeline::Adapt: adapt_pipeline(); break;
      case Pipeline::Edit: edit_pipeline(); break;
      case Pipeline::Evaluate: evaluate_pipeline(); break;
      case Pipeline::Report: report_pipeline(); break;
    }
    emit(out_ / "config.json", report_.config_json + "\n");
    stage("hash", report_.timings, [&] { hash_artifacts(); });
    report_.timings["total"] = std::chrono::duration<double>(Clock::now() - t0).count();
    write_text(out_ / "report.json", report_to_json(report_));
    return report_;
  }

 private:
  // ---- shared pieces

  std::map<std::string, double>& timings() { return report_.timings; }

  std::vector<Target> load_targets() {
    return stage("targets", timings(), [&] {
      std::vector<Target> targets;
      if (c_.targets.source == "generated") {
        const auto& g = models_.generator();
        const auto codes = sample_latent(g.latent, c_.targets.count, c_.targets.seed);
        for (std::size_t i = 0; i < codes.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "target_%03zu", i);
          targets.push_back({name, generate(g, codes[i]), codes[i]});
        }
      } else {
        const Dataset d = load_dataset(c_.dataset);
        const std::size_t n = std::min<std::size_t>(d.size(), std::size_t(c_.targets.count));
        for (std::size_t i = 0; i < n; ++i) {
          std::string name = fs::path(d.names[i]).stem().string();
          targets.push_back({name, d.images[i], std::nullopt});
        }
      }
      if (targets.empty()) throw Error("no target images");
      std::vector<ImageFile> files;
      for (const auto& t : targets) files.push_back({t.name + ".png", t.image});
      emit_pngs(out_ / "targets", files);
      return targets;
    });
  }

  [[nodiscard]] bool hybrid() const { return hybrid_inversion(c_); }

  InversionConfig inversion_config(std::size_t index) const {
    InversionConfig ic = hybrid() ? InversionConfig::hybrid() : InversionConfig::optimization();
    ic.iterations = c_.inversion.iterations.value_or(ic.iterations);
    ic.step_rule.learning_rate = c_.inversion.learning_rate;
    if (!hybrid()) ic.init_mode = c_.inversion.init;
    ic.seed = c_.seed + index;
    return ic;
  }

  // Inverts every image with the configured method; slot i uses seed seed + i.
  std::vector<InversionResult<float>> invert_all(const std::vector<Image<float>>& images,
                                                 const Encoder<float>* encoder = nullptr,
                                                 std::optional<int> iterations = std::nullopt) {
    const auto& g = models_.generator();
    const auto* f = &models_.feature_extractor();
    const Encoder<float>* e = hybrid() ? (encoder ? encoder : &models_.encoder()) : nullptr;
    std::vector<InversionResult<float>> out(images.size());
    parallel_for(int(images.size()), workers_, [&](int i) {
      InversionConfig ic = inversion_config(std::size_t(i));
      if (iterations) ic.iterations = *iterations;
      out[std::size_t(i)] = e ? invert_hybrid(g, *e, images[std::size_t(i)], f, ic)
                              : invert_optimize(g, images[std::size_t(i)], f, ic);
    });
    return out;
  }

  // Matching rate of reconstructions against targets plus utility of the
  // published images against targets.
  EvaluationReport evaluate(const std::string& label, std::map<std::string, double> keys,
                            const std::vector<Target>& targets, const std::vector<Image<float>>& published,
                            const std::vector<Image<float>>& reconstructions, const fs::path& dir) {
    const auto& emb = models_.embedder();
    const auto& cal = models_.calibration();
    EvaluationReport r;
    r.label = label;
    r.keys = std::move(keys);
    r.count = int(targets.size());
    std::vector<double> distances(targets.size()), m(targets.size()), s(targets.size()), p(targets.size());
    parallel_for(int(targets.size()), workers_, [&](int i) {
      const auto k = std::size_t(i);
      distances[k] = face_distance(emb, targets[k].image, reconstructions[k]);
      const UtilityReport u = utility(targets[k].image, published[k]);
      m[k] = u.mse;
      s[k] = u.ssim;
      p[k] = u.psnr;
    });
    r.matching_rate = matching_rate(distances, cal);
    r.mse = stat_of(m);
    r.ssim = stat_of(s);
    r.psnr = stat_of(p);
    std::string csv = "image,distance,same_identity,mse,ssim,psnr\n";
    for (std::size_t k = 0; k < targets.size(); ++k)
      csv += targets[k].name + "," + fmt(distances[k]) + "," + (distances[k] < cal.threshold ? "1" : "0") + "," +
             fmt(m[k]) + "," + fmt(s[k]) + "," + fmt(p[k]) + "\n";
    emit(dir / "evaluation.csv", csv);
    report_.evaluations.push_back(r);
    return r;
  }

  void write_reconstructions(const fs::path& dir, const std::vector<Target>& targets,
                             const std::vector<InversionResult<float>>& results) {
    std::vector<ImageFile> files;
    std::string trace = "image,iteration,total,perceptual,pixel\n";
    std::string latents = "image";
    const Eigen::Index d = results.empty() ? 0 : results.front().z_star.size();
    for (Eigen::Index j = 0; j < d; ++j) latents += ",z" + std::to_string(j);
    latents += "\n";
    for (std::size_t k = 0; k < targets.size(); ++k) {
      files.push_back({targets[k].name + ".png", results[k].reconstruction});
      for (const auto& l : results[k].loss_trace)
        trace += targets[k].name + "," + std::to_string(l.iteration) + "," + fmt(l.total) + "," + fmt(l.perceptual) +
                 "," + fmt(l.pixel) + "\n";
      latents += targets[k].name;
      for (Eigen::Index j = 0; j < d; ++j) latents += "," + fmt(results[k].z_star[j]);
      latents += "\n";
    }
    emit_pngs(dir / "reconstructions", files);
    emit(dir / "inversion_trace.csv", trace);
    emit(dir / "latents.csv", latents);
  }

  static std::vector<Image<float>> images_of(const std::vector<Target>& targets) {
    std::vector<Image<float>> out;
    for (const auto& t : targets) out.push_back(t.image);
    return out;
  }
  static std::vector<Image<float>> reconstructions_of(const std::vector<InversionResult<float>>& results) {
    std::vector<Image<float>> out;
    for (const auto& r : results) out.push_back(r.reconstruction);
    return out;
  }

  EvaluationReport invert_and_evaluate(const std::string& label, std::map<std::string, double> keys,
                                       const std::vector<Target>& targets, const std::vector<Image<float>>& published,
                                       const fs::path& dir, const Encoder<float>* encoder = nullptr,
                                       std::optional<int> iterations = std::nullopt) {
    const auto results = stage("invert", timings(), [&] { return invert_all(published, encoder, iterations); });
    write_reconstructions(dir, targets, results);
    return stage("evaluate", timings(),
                 [&] { return evaluate(label, std::move(keys), targets, published, reconstructions_of(results), dir); });
  }

  // ---- cloaks

  struct CloakBatch {
    std::vector<CloakResult<float>> results;
    double epsilon = 0, kappa = 0;
  };

  double resolve_kappa(Family family, int level) {
    const Scenario s = c_.cloak.scenario;
    if (s == Scenario::V1 || s == Scenario::V4) return 0.0;
    if (c_.cloak.kappa_policy == KappaPolicy::Fixed) return c_.cloak.kappa;
    if (c_.cloak.kappa_policy == KappaPolicy::Table)
      if (auto k = kappa_table(family, s, level)) return *k;
    return stage("kappa_grid", timings(), [&] { return grid_kappa(level); });
  }

  // Grid search on a separate generated calibration set.
  double grid_kappa(int level) {
    const auto& g = models_.generator();
    const auto codes = sample_latent(g.latent, c_.cloak.grid_targets, derive_seed(c_.targets.seed, 77));
    std::vector<Target> set;
    for (std::size_t i = 0; i < codes.size(); ++i) set.push_back({"grid_" + std::to_string(i), generate(g, codes[i]), codes[i]});
    const double eps = budget_for(g.family, level);
    const auto anchors = anchors_for(set);
    const auto images = images_of(set);
    double best = grid_search_kappa(c_.cloak.kappa_grid, [&](double kappa) {
      const auto cloaked = cloak_images(set, anchors, eps, kappa);
      std::vector<Image<float>> published;
      for (const auto& r : cloaked) published.push_back(r.cloaked);
      const auto rec = invert_all(published);
      return matching_rate(models_.embedder(), images, reconstructions_of(rec), models_.calibration());
    });
    report_.metrics["grid_kappa_level_" + std::to_string(level)] = best;
    return best;
  }

  // v0 anchors: the optimization inversion of each clean image.
  std::vector<Latent<float>> anchors_for(const std::vector<Target>& targets) {
    if (c_.cloak.scenario != Scenario::V0) return {};
    const auto& g = models_.generator();
    const auto* f = &models_.feature_extractor();
    std::vector<Latent<float>> anchors(targets.size());
    parallel_for(int(targets.size()), workers_, [&](int i) {
      InversionConfig ic = InversionConfig::optimization();
      ic.seed = c_.seed + std::size_t(i);
      anchors[std::size_t(i)] = invert_optimize(g, targets[std::size_t(i)].image, f, ic).z_star;
    });
    return anchors;
  }

  std::vector<CloakResult<float>> cloak_images(const std::vector<Target>& targets,
                                               const std::vector<Latent<float>>& anchors, double epsilon,
                                               double kappa, std::uint64_t seed_offset = 0) {
    const auto& f = models_.feature_extractor();
    const Encoder<float>* e = nullptr;
    switch (c_.cloak.scenario) {
      case Scenario::V0: e = &models_.shadow_encoder(); break;
      case Scenario::V2: e = &models_.encoder(); break;
      case Scenario::V3: e = &models_.stolen_encoder(); break;
      default: break;
    }
    std::vector<CloakResult<float>> out(targets.size());
    parallel_for(int(targets.size()), workers_, [&](int i) {
      const auto k = std::size_t(i);
      CloakConfig cc;
      cc.epsilon = epsilon;
      cc.kappa = kappa;
      cc.iterations = c_.cloak.iterations;
      cc.scenario = c_.cloak.scenario;
      cc.step_size = c_.cloak.step_size;
      cc.seed = c_.seed + seed_offset + k;
      const auto& x = targets[k].image;
      switch (c_.cloak.scenario) {
        case Scenario::V0: out[k] = cloak_v0(x, *e, f, anchors[k], cc); break;
        case Scenario::V1:
        case Scenario::V4: out[k] = cloak_feature_only(x, f, cc); break;
        case Scenario::V2: out[k] = cloak_v2(x, *e, f, cc); break;
        case Scenario::V3: out[k] = cloak_v3(x, *e, f, cc); break;
      }
    });
    return out;
  }

  void write_cloaks(const fs::path& dir, const std::vector<Target>& targets,
                    const std::vector<CloakResult<float>>& results) {
    std::vector<ImageFile> files;
    std::string trace = "image,iteration,objective\n";
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto& r = results[k];
      files.push_back({targets[k].name + ".png", r.cloaked});
      const json sidecar = {{"epsilon", r.config_used.epsilon},
                            {"kappa", r.config_used.kappa},
                            {"scenario", to_string(r.config_used.scenario)},
                            {"iterations", r.config_used.iterations},
                            {"seed", r.config_used.seed},
                            {"final_objective", r.objective_trace.empty() ? 0.0 : r.objective_trace.back()},
                            {"max_abs_delta", double(r.delta.data.cwiseAbs().maxCoeff())}};
      emit(dir / "cloaked" / (targets[k].name + ".json"), sidecar.dump(2) + "\n");
      for (std::size_t i = 0; i < r.objective_trace.size(); ++i)
        trace += targets[k].name + "," + std::to_string(i) + "," + fmt(r.objective_trace[i]) + "\n";
    }
    emit_pngs(dir / "cloaked", files);
    emit(dir / "cloak_trace.csv", trace);
  }

  CloakBatch cloak_level(const std::vector<Target>& targets, const std::vector<Latent<float>>& anchors, int level,
                         const fs::path& dir) {
    const Family family = models_.generator().family;
    CloakBatch b;
    b.epsilon = stage("cloak", timings(), [&] { return budget_for(family, level); });
    b.kappa = resolve_kappa(family, level);
    b.results = stage("cloak", timings(), [&] { return cloak_images(targets, anchors, b.epsilon, b.kappa); });
    write_cloaks(dir, targets, b.results);
    return b;
  }

  void cloak_pipeline() {
    const auto targets = load_targets();
    const auto clean = images_of(targets);
    const auto base = invert_and_evaluate("uncloaked", {{"level", -1}, {"epsilon", 0}}, targets, clean, out_ / "uncloaked");
    const auto anchors = stage("anchors", timings(), [&] { return anchors_for(targets); });

    PlotSeries curve{"cloak " + to_string(c_.cloak.scenario), {}, {}};
    PlotSeries scatter{"cloak " + to_string(c_.cloak.scenario), {}, {}};
    for (int level : c_.cloak.levels) {
      const fs::path dir = out_ / ("level_" + std::to_string(level));
      const CloakBatch b = cloak_level(targets, anchors, level, dir);
      std::vector<Image<float>> published;
      for (const auto& r : b.results) published.push_back(r.cloaked);
      const auto r = invert_and_evaluate("level " + std::to_string(level),
                                         {{"level", level}, {"epsilon", b.epsilon}, {"kappa", b.kappa}}, targets,
                                         published, dir);
      curve.x.push_back(b.epsilon);
      curve.y.push_back(r.matching_rate);
      scatter.x.push_back(r.ssim.mean);
      scatter.y.push_back(r.matching_rate);
    }
    report_.metrics["uncloaked_matching_rate"] = base.matching_rate;
    PlotSeries baseline{"uncloaked", {0}, {base.matching_rate}};
    emit(out_ / "budget_vs_matching.svg",
               svg_line_plot({"Budget vs matching rate", "budget (L-inf)", "matching rate"}, {curve, baseline}));
    emit(out_ / "utility_scatter.svg",
               svg_scatter_plot({"Utility vs matching rate", "SSIM", "matching rate"}, {scatter, baseline}));
  }

  // ---- other pipelines

  void invert_pipeline() {
    const auto targets = load_targets();
    const auto clean = images_of(targets);
    const auto results = stage("invert", timings(), [&] { return invert_all(clean); });
    write_reconstructions(out_, targets, results);
    const auto recs = reconstructions_of(results);
    // Utility here compares reconstructions with targets.
    stage("evaluate", timings(), [&] { evaluate("inversion", {}, targets, recs, recs, out_); });
    std::vector<double> cosines;
    for (std::size_t k = 0; k < targets.size(); ++k)
      if (targets[k].latent) {
        const auto& z = *targets[k].latent;
        const auto& zs = results[k].z_star;
        const double denom = double(z.norm()) * double(zs.norm());
        cosines.push_back(denom > 0 ? double(z.dot(zs)) / denom : 0.0);
      }
    if (!cosines.empty()) report_.metrics["latent_cosine_mean"] = stat_of(cosines).mean;
    double loss = 0;
    for (const auto& r : results) loss += r.loss_trace.back().total;
    report_.metrics["final_loss_mean"] = loss / double(results.size());
  }

  void distort_pipeline() {
    const auto targets = load_targets();
    PlotSeries curve{to_string(c_.distort.kind), {}, {}}, scatter{to_string(c_.distort.kind), {}, {}};
    for (double m : c_.distort.magnitudes) {
      const fs::path dir = out_ / ("magnitude_" + fmt(m));
      std::vector<Image<float>> published(targets.size());
      stage("distort", timings(), [&] {
        parallel_for(int(targets.size()), workers_, [&](int i) {
          const auto k = std::size_t(i);
          published[k] = apply_distortion(targets[k].image, {c_.distort.kind, m, c_.seed + k});
        });
      });
      std::vector<ImageFile> files;
      for (std::size_t k = 0; k < targets.size(); ++k) files.push_back({targets[k].name + ".png", published[k]});
      emit_pngs(dir / "distorted", files);
      const auto r = invert_and_evaluate(to_string(c_.distort.kind) + " " + fmt(m), {{"magnitude", m}}, targets,
                                         published, dir);
      curve.x.push_back(m);
      curve.y.push_back(r.matching_rate);
      scatter.x.push_back(r.ssim.mean);
      scatter.y.push_back(r.matching_rate);
    }
    emit(out_ / "magnitude_vs_matching.svg",
               svg_line_plot({"Distortion magnitude vs matching rate", "magnitude", "matching rate"}, {curve}));
    emit(out_ / "utility_scatter.svg",
               svg_scatter_plot({"Utility vs matching rate", "SSIM", "matching rate"}, {scatter}));
  }

  void adapt_pipeline() {
    const auto targets = load_targets();
    const auto anchors = stage("anchors", timings(), [&] { return anchors_for(targets); });
    const CloakBatch b = cloak_level(targets, anchors, c_.adapt.level, out_ / "cloaked_level");
    std::vector<Image<float>> cloaked;
    for (const auto& r : b.results) cloaked.push_back(r.cloaked);
    report_.metrics["epsilon"] = b.epsilon;
    report_.metrics["kappa"] = b.kappa;
    const std::string key = c_.adapt.strategy == Strategy::Overwrite       ? "sigma"
                            : c_.adapt.strategy == Strategy::Purify        ? "filter_width"
                            : c_.adapt.strategy == Strategy::MoreIterations ? "iterations"
                                                                            : "cloaked_count";
    PlotSeries curve{to_string(c_.adapt.strategy), {}, {}};
    auto record = [&](const EvaluationReport& r, double p) {
      curve.x.push_back(p);
      curve.y.push_back(r.matching_rate);
    };

    if (c_.adapt.strategy == Strategy::EncoderEnhancement) {
      const auto original = invert_and_evaluate("original encoder", {{key, -1}}, targets, cloaked, out_ / "original");
      report_.metrics["original_matching_rate"] = original.matching_rate;
      const auto& g = models_.generator();
      const auto& f = models_.feature_extractor();
      const Dataset data = stage("dataset", timings(), [&] { return load_dataset(c_.dataset); });
      const Split split = split_dataset(data, zoo_hold_every());
      const auto& train = split.train.images;
      if (train.empty()) throw StageError("retrain", "no training images");
      const std::size_t clean_n = std::min<std::size_t>(train.size(), std::size_t(c_.adapt.clean_count));
      const std::vector<Image<float>> clean(train.begin(), train.begin() + std::ptrdiff_t(clean_n));
      double max_k = 0;
      for (double p : c_.adapt.params) max_k = std::max(max_k, p);
      std::vector<Target> poison_src;
      for (std::size_t k = 0; k < std::min<std::size_t>(train.size(), std::size_t(max_k)); ++k)
        poison_src.push_back({"train_" + std::to_string(k), train[k], std::nullopt});
      const auto poison_anchors = stage("anchors", timings(), [&] { return anchors_for(poison_src); });
      const auto poison = stage("cloak", timings(), [&] {
        return cloak_images(poison_src, poison_anchors, b.epsilon, b.kappa, 5000);
      });
      for (double p : c_.adapt.params) {
        const auto count = std::min<std::size_t>(poison.size(), std::size_t(p));
        std::vector<Image<float>> mix;
        for (std::size_t k = 0; k < count; ++k) mix.push_back(poison[k].cloaked);
        EncoderTrainConfig tc;
        tc.epochs = c_.adapt.retrain_epochs;
        tc.critic_optimizer = {2e-4, 0.5, 0.999};
        tc.seed = c_.seed + 77;
        const auto retrained = stage("retrain", timings(), [&] {
          return retrain_encoder(models_.encoder(), g, make_discriminator(g.output_shape(), c_.seed + 14), clean, mix,
                                 f, tc);
        });
        const fs::path dir = out_ / (key + "_" + fmt(p));
        emit_checkpoint(dir / "encoder", retrained.encoder, c_.seed + 77);
        record(invert_and_evaluate("cloaked " + fmt(p), {{key, p}}, targets, cloaked, dir, &retrained.encoder), p);
      }
    } else {
      for (double p : c_.adapt.params) {
        const fs::path dir = out_ / (key + "_" + fmt(p));
        std::vector<Image<float>> attacked(cloaked.size());
        stage("adapt", timings(), [&] {
          parallel_for(int(cloaked.size()), workers_, [&](int i) {
            const auto k = std::size_t(i);
            switch (c_.adapt.strategy) {
              case Strategy::Overwrite: attacked[k] = overwrite_cloak(cloaked[k], p, c_.seed + 1000 + k); break;
              case Strategy::Purify: attacked[k] = purify(cloaked[k], int(p)); break;
              default: attacked[k] = cloaked[k];
            }
          });
        });
        const std::optional<int> iters =
            c_.adapt.strategy == Strategy::MoreIterations ? std::optional<int>(int(p)) : std::nullopt;
        record(invert_and_evaluate(to_string(c_.adapt.strategy) + " " + fmt(p), {{key, p}}, targets, attacked, dir,
                                   nullptr, iters),
               p);
      }
    }
    emit(out_ / "adaptive_curve.svg",
               svg_line_plot({"Adaptive adversary: " + to_string(c_.adapt.strategy), key, "matching rate"}, {curve}));
  }

  int zoo_hold_every() const {
    if (c_.zoo.empty()) return 5;
    try {
      return json::parse(read_text(ZooPaths{c_.zoo}.summary())).value("hold_every", 5);
    } catch (const std::exception&) {
      return 5;
    }
  }

  void edit_pipeline() {
    const auto& g = models_.generator();
    const SemanticDirection direction = stage("boundary", timings(), [&] {
      std::vector<Vector<double>> latents;
      std::vector<int> labels;
      if (c_.edit.attribute == "brightness") {
        for (const auto& z : sample_latent(g.latent, c_.edit.fit_count, derive_seed(c_.seed, 31)))
          latents.push_back(z.cast<double>());
        labels = brightness_labels(g, latents);
      } else {
        const Dataset data = load_dataset(c_.dataset);
        const auto all = data.attribute_labels(c_.edit.attribute);
        std::vector<Image<float>> images;
        for (std::size_t i = 0; i < all.size() && int(images.size()) < c_.edit.fit_count; ++i)
          if (all[i] >= 0) {
            images.push_back(data.images[i]);
            labels.push_back(all[i]);
          }
        if (images.empty()) throw Error("no labels for attribute '" + c_.edit.attribute + "'");
        for (const auto& r : invert_all(images)) latents.push_back(r.z_star.cast<double>());
      }
      return fit_boundary(latents, labels, c_.edit.attribute);
    });
    report_.metrics["boundary_train_accuracy"] = direction.train_accuracy;
    report_.metrics["boundary_reliable"] = direction.reliable ? 1 : 0;

    const auto targets = load_targets();
    const auto results = stage("invert", timings(), [&] { return invert_all(images_of(targets)); });
    write_reconstructions(out_, targets, results);
    std::vector<ImageFile> after;
    std::vector<double> shift, brightness;
    stage("edit", timings(), [&] {
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const Vector<double> z = results[k].z_star.cast<double>();
        const Vector<double> edited = edit_latent(z, direction, c_.edit.alpha);
        const Image<float> img = generate(g, Latent<float>(edited.cast<float>()));
        after.push_back({targets[k].name + ".png", img});
        shift.push_back(signed_distance(direction, edited) - signed_distance(direction, z));
        brightness.push_back(double(img.data.mean()) - double(results[k].reconstruction.data.mean()));
      }
    });
    emit_pngs(out_ / "edited", after);
    report_.metrics["separator_distance_shift_mean"] = stat_of(shift).mean;
    report_.metrics["brightness_change_mean"] = stat_of(brightness).mean;
    std::string normal = "component,value\n";
    for (Eigen::Index j = 0; j < direction.normal.size(); ++j)
      normal += std::to_string(j) + "," + fmt(direction.normal[j]) + "\n";
    emit(out_ / "direction.csv", normal);
  }

  void evaluate_pipeline() {
    const auto [targets, recs] = stage("load", timings(), [&] {
      const auto a = read_png_directory(c_.evaluate_targets);
      const auto b = read_png_directory(c_.evaluate_reconstructions);
      std::vector<Target> t;
      std::vector<Image<float>> r;
      for (const auto& file : a) {
        const auto it = std::find_if(b.begin(), b.end(), [&](const ImageFile& o) { return o.name == file.name; });
        if (it == b.end()) throw Error("no reconstruction for " + file.name);
        t.push_back({fs::path(file.name).stem().string(), file.image, std::nullopt});
        r.push_back(it->image);
      }
      if (t.empty()) throw Error("no target images in " + c_.evaluate_targets);
      return std::pair{t, r};
    });
    stage("evaluate", timings(), [&] { evaluate("evaluation", {}, targets, recs, recs, out_); });
  }

  void report_pipeline() {
    std::vector<PlotSeries> curves, scatters;
    json runs = json::array();
    for (const auto& dir : c_.report_runs) {
      const RunReport r = stage("load", timings(), [&] { return report_from_json(read_text(fs::path(dir) / "report.json")); });
      runs.push_back({{"run", dir}, {"run_id", r.run_id}});
      PlotSeries curve{fs::path(dir).filename().string(), {}, {}}, scatter{curve.name, {}, {}};
      for (const auto& e : r.evaluations) {
        EvaluationReport copy = e;
        copy.label = fs::path(dir).filename().string() + ": " + e.label;
        report_.evaluations.push_back(copy);
        if (e.keys.count("epsilon") && e.keys.at("level") >= 0) {
          curve.x.push_back(e.keys.at("epsilon"));
          curve.y.push_back(e.matching_rate);
        }
        scatter.x.push_back(e.ssim.mean);
        scatter.y.push_back(e.matching_rate);
      }
      if (!curve.x.empty()) curves.push_back(curve);
      scatters.push_back(scatter);
    }
    emit(out_ / "runs.json", runs.dump(2) + "\n");
    std::string csv = "label,matching_rate,mse,ssim,psnr\n";
    for (const auto& e : report_.evaluations)
      csv += "\"" + e.label + "\"," + fmt(e.matching_rate) + "," + fmt(e.mse.mean) + "," + fmt(e.ssim.mean) + "," +
             fmt(e.psnr.mean) + "\n";
    emit(out_ / "summary.csv", csv);
    if (!curves.empty())
      emit(out_ / "budget_vs_matching.svg",
                 svg_line_plot({"Budget vs matching rate", "budget (L-inf)", "matching rate"}, curves));
    emit(out_ / "utility_scatter.svg",
               svg_scatter_plot({"Utility vs matching rate", "SSIM", "matching rate"}, scatters));
  }

  // ---- training

  Dataset train_split() {
    return stage("dataset", timings(), [&] {
      const Dataset d = load_dataset(c_.dataset);
      return d.has_identities() ? split_dataset(d, 5).train : d;
    });
  }

  void loss_csv(const fs::path& path, const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
    std::string csv = "step";
    for (const auto& [n, v] : cols) csv += "," + n;
    csv += "\n";
    const std::size_t rows = cols.empty() ? 0 : cols.front().second->size();
    for (std::size_t i = 0; i < rows; ++i) {
      csv += std::to_string(i);
      for (const auto& [n, v] : cols) csv += "," + (i < v->size() ? fmt((*v)[i]) : std::string());
      csv += "\n";
    }
    emit(path, csv);
  }

  void train_gan_pipeline() {
    const Dataset data = train_split();
    GanTrainConfig cfg = ZooConfig::desk().gan;
    if (c_.train.epochs > 0) cfg.epochs = c_.train.epochs;
    cfg.seed = c_.seed + 1;
    const LatentSpec latent{c_.train.latent_dim};
    auto r = stage("train", timings(), [&] {
      return train_gan(to_batch(data.images), make_dcgan_generator(latent, data.shape, c_.seed + 11),
                       make_discriminator(data.shape, c_.seed + 12), cfg);
    });
    emit_checkpoint(out_ / "generator", r.generator, c_.seed + 11);
    emit_checkpoint(out_ / "discriminator", r.discriminator, c_.seed + 12);
    loss_csv(out_ / "losses.csv", {{"discriminator", &r.discriminator_loss}, {"generator", &r.generator_loss}});
    report_.metrics["final_discriminator_loss"] = r.discriminator_loss.empty() ? 0 : r.discriminator_loss.back();
    report_.metrics["final_generator_loss"] = r.generator_loss.empty() ? 0 : r.generator_loss.back();
  }

  void train_encoder_pipeline() {
    const Dataset data = train_split();
    EncoderTrainConfig cfg = ZooConfig::desk().encoder;
    if (c_.train.epochs > 0) cfg.epochs = c_.train.epochs;
    cfg.seed = c_.seed + 13;
    const auto& g = models_.generator();
    auto r = stage("train", timings(), [&] {
      return train_target_encoder(g, make_discriminator(data.shape, c_.seed + 14), to_batch(data.images),
                                  models_.feature_extractor(), make_encoder(data.shape, g.latent, c_.seed + 15), cfg);
    });
    emit_checkpoint(out_ / "encoder", r.encoder, c_.seed + 15);
    emit_checkpoint(out_ / "encoder_critic", r.critic, c_.seed + 14);
    loss_csv(out_ / "losses.csv", {{"loss", &r.loss},
                                   {"pixel", &r.pixel_term},
                                   {"feature", &r.feature_term},
                                   {"adversarial", &r.adversarial_term},
                                   {"critic", &r.critic_loss}});
    report_.metrics["final_pixel_term"] = r.pixel_term.empty() ? 0 : r.pixel_term.back();
  }

  void steal_pipeline() {
    const Dataset data = stage("dataset", timings(), [&] { return load_dataset(c_.dataset); });
    const auto& target = models_.encoder();
    StealConfig cfg = ZooConfig::desk().steal;
    if (c_.train.steps > 0) cfg.steps = c_.train.steps;
    cfg.seed = c_.seed + 9;
    const Shape shape = target.input_shape();
    const std::size_t n = std::min<std::size_t>(data.size(), std::size_t(cfg.probe_count));
    const Matrix<float> probes = to_batch(std::vector<Image<float>>(data.images.begin(), data.images.begin() + std::ptrdiff_t(n)));
    auto r = stage("steal", timings(), [&] {
      return steal_encoder(target, make_encoder(shape, target.latent, c_.seed + 30),
                           make_shadow_generator(target.latent, shape, c_.seed + 31), cfg, &probes);
    });
    emit_checkpoint(out_ / "stolen_encoder", r.encoder, c_.seed + 30);
    loss_csv(out_ / "losses.csv", {{"encoder", &r.encoder_loss}, {"crafter", &r.generator_loss}});
    report_.metrics["agreement"] = r.agreement;
    report_.metrics["untrained_agreement"] =
        encoder_agreement(make_encoder(shape, target.latent, c_.seed + 30), target, probes);
  }

  // ---- outputs; only what this run wrote is listed and hashed

  void emit(const fs::path& path, const std::string& text) {
    write_text(path, text);
    written_.insert(path);
  }

  void emit_pngs(const fs::path& dir, const std::vector<ImageFile>& files) {
    write_png_directory(dir, files);
    for (const auto& f : files) written_.insert(dir / f.name);
  }

  template <typename... Args>
  void emit_checkpoint(const fs::path& dir, Args&&... args) {
    save_checkpoint(dir, std::forward<Args>(args)...);
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) written_.insert(entry.path());
  }

  void hash_artifacts() {
    std::set<std::string> files;
    for (const auto& p : written_) files.insert(fs::relative(p, out_).generic_string());
    for (const auto& f : files) report_.artifacts.push_back({f, sha256_file(out_ / f)});
  }

  const RunConfig& c_;
  Models models_;
  fs::path out_;
  int workers_ = 1;
  RunReport report_;
  std::set<fs::path> written_;
};

}  // namespace

RunReport run_pipeline(const RunConfig& config) { return Runner(config).run(); }

}  // namespace ungan
