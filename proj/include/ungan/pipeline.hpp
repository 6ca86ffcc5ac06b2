#pragma once

// Experiment driver: run configuration, pipelines and run reports.

#include "ungan/adversaries.hpp"
#include "ungan/cloaks.hpp"
#include "ungan/distortions.hpp"
#include "ungan/inversion.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ungan {

inline constexpr int kSchemaVersion = 1;

enum class Pipeline { TrainGan, TrainEncoder, StealEncoder, Invert, Cloak, Distort, Adapt, Edit, Evaluate, Report };
enum class KappaPolicy { Fixed, Table, Grid };
enum class InversionMethod { Auto, Optimization, Hybrid };

std::string to_string(Pipeline p);
Pipeline pipeline_from_string(const std::string& name);
std::string to_string(KappaPolicy p);
KappaPolicy kappa_policy_from_string(const std::string& name);
std::string to_string(InversionMethod m);
InversionMethod inversion_method_from_string(const std::string& name);

struct ModelPaths {
  std::string generator, discriminator, encoder, encoder_critic, feature_extractor, embedder, shadow_encoder,
      stolen_encoder, calibration;
};

struct TargetSpec {
  std::string source = "generated";  // generated | dataset
  int count = 50;
  std::uint64_t seed = 4242;
};

struct CloakSection {
  Scenario scenario = Scenario::V1;
  std::vector<int> levels{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  KappaPolicy kappa_policy = KappaPolicy::Table;
  double kappa = 0.5;
  std::vector<double> kappa_grid = default_kappa_grid();
  int grid_targets = 10;
  int iterations = 500;
  double step_size = 0;
};

struct InversionSection {
  InversionMethod method = InversionMethod::Auto;  // auto: optimization for v0/v1, hybrid otherwise
  std::optional<int> iterations;                   // default 500 optimization, 100 hybrid
  double learning_rate = 0.01;
  InitMode init = InitMode::Gaussian;
};

struct DistortSection {
  DistortionKind kind = DistortionKind::GaussianBlur;
  std::vector<double> magnitudes{1, 3, 5, 7, 9};
};

struct AdaptSection {
  Strategy strategy = Strategy::Purify;
  std::vector<double> params{1, 3, 5, 7, 9};
  int level = 9;
  int retrain_epochs = 10;
  int clean_count = 700;
};

struct EditSection {
  std::string attribute = "brightness";
  double alpha = 3.0;
  int fit_count = 200;
};

struct TrainSection {
  int epochs = 0;  // 0 keeps the library default
  int steps = 0;
  int latent_dim = 100;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  Pipeline pipeline = Pipeline::Cloak;
  std::string zoo;
  ModelPaths models;
  std::string dataset;
  std::string output = "run";
  std::uint64_t seed = 0;
  bool deterministic = true;
  int workers = 1;
  TargetSpec targets;
  CloakSection cloak;
  InversionSection inversion;
  DistortSection distort;
  AdaptSection adapt;
  EditSection edit;
  TrainSection train;
  std::string evaluate_targets, evaluate_reconstructions;
  std::vector<std::string> report_runs;
};

struct ConfigResult {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;
  [[nodiscard]] bool ok() const { return config.has_value(); }
};

// Parses and checks a JSON run configuration, collecting every error. Model
// paths left empty are filled from `zoo` when it is set.
ConfigResult validate_config(const std::string& text, const std::filesystem::path& base = {});
// Canonical JSON with all defaults filled.
std::string config_to_json(const RunConfig& config);

struct Stat {
  double mean = 0, std = 0;
};

struct EvaluationReport {
  std::string label;
  std::map<std::string, double> keys;  // e.g. level, epsilon, kappa, sigma
  int count = 0;
  double matching_rate = 0;
  Stat mse, ssim, psnr;
};

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
};

struct RunReport {
  std::string run_id;
  std::string config_json;
  std::vector<EvaluationReport> evaluations;
  std::map<std::string, double> metrics;  // pipeline-specific scalars
  std::vector<Artifact> artifacts;
  std::map<std::string, double> timings;
};

// Every field except timings, as canonical JSON; two reproducible runs compare equal here.
std::string report_fingerprint(const RunReport& report);
std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

struct StageError : Error {
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what), stage(stage) {}
  std::string stage;
};

// Runs the configured pipeline, writing outputs and report.json under config.output.
RunReport run_pipeline(const RunConfig& config);

}  // namespace ungan
