// ungan_cli: run configs, pipeline subcommands, sprite and zoo builders.
// Exit codes: 0 ok, 1 config error, 2 stage failure.

#include "ungan/dataset.hpp"
#include "ungan/pipeline.hpp"
#include "ungan/zoo.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kConfigError = 1;
constexpr int kStageFailure = 2;

struct Overrides {
  std::string config, zoo, dataset, output, mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers, count;
  // cloak / adapt
  std::string scenario, kappa_policy;
  std::optional<double> kappa;
  std::vector<int> levels;
  std::optional<int> cloak_iterations, level;
  // inversion
  std::string method;
  std::optional<int> inversion_iterations;
  // distort
  std::string kind;
  std::vector<double> magnitudes;
  // adapt
  std::string strategy;
  std::vector<double> params;
  // edit
  std::string attribute;
  std::optional<double> alpha;
  // train
  std::optional<int> epochs, steps;
  // evaluate / report
  std::string targets, reconstructions;
  std::vector<std::string> runs;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config (fields below override it)");
  cmd->add_option("--zoo", o.zoo, "Model zoo directory");
  cmd->add_option("--dataset", o.dataset, "Dataset directory");
  cmd->add_option("--output", o.output, "Output directory");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--mode", o.mode, "deterministic | fast");
  cmd->add_option("--workers", o.workers, "Worker threads in fast mode (0 = all cores)");
  cmd->add_option("--count", o.count, "Number of target images");
  cmd->add_option("--method", o.method, "Inversion method: auto | optimization | hybrid");
  cmd->add_option("--inversion-iterations", o.inversion_iterations, "Inversion iterations");
}

void add_cloak(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--scenario", o.scenario, "v0 | v1 | v2 | v3 | v4");
  cmd->add_option("--kappa-policy", o.kappa_policy, "fixed | table | grid");
  cmd->add_option("--kappa", o.kappa, "Kappa for the fixed policy");
  cmd->add_option("--cloak-iterations", o.cloak_iterations, "Cloak search iterations");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Config text with the command-line fields applied.
std::string merged_config(const std::string& pipeline, const Overrides& o, fs::path& base) {
  json j = json::object();
  if (!o.config.empty()) {
    j = json::parse(read_file(o.config));
    base = fs::absolute(o.config).parent_path();
  } else {
    j["schema_version"] = ungan::kSchemaVersion;
    base = fs::current_path();
  }
  if (!pipeline.empty()) j["pipeline"] = pipeline;
  auto set = [&](const char* key, const auto& v) { j[key] = v; };
  auto sub = [&](const char* section, const char* key, const auto& v) { j[section][key] = v; };
  if (!o.zoo.empty()) set("zoo", fs::absolute(o.zoo).string());
  if (!o.dataset.empty()) set("dataset", fs::absolute(o.dataset).string());
  if (!o.output.empty()) set("output", fs::absolute(o.output).string());
  if (!o.mode.empty()) set("mode", o.mode);
  if (o.seed) set("seed", *o.seed);
  if (o.workers) set("workers", *o.workers);
  if (o.count) sub("targets", "count", *o.count);
  if (!o.scenario.empty()) sub("cloak", "scenario", o.scenario);
  if (!o.kappa_policy.empty()) sub("cloak", "kappa_policy", o.kappa_policy);
  if (o.kappa) sub("cloak", "kappa", *o.kappa);
  if (!o.levels.empty()) sub("cloak", "levels", o.levels);
  if (o.cloak_iterations) sub("cloak", "iterations", *o.cloak_iterations);
  if (!o.method.empty()) sub("inversion", "method", o.method);
  if (o.inversion_iterations) sub("inversion", "iterations", *o.inversion_iterations);
  if (!o.kind.empty()) sub("distort", "kind", o.kind);
  if (!o.magnitudes.empty()) sub("distort", "magnitudes", o.magnitudes);
  if (!o.strategy.empty()) sub("adapt", "strategy", o.strategy);
  if (!o.params.empty()) sub("adapt", "params", o.params);
  if (o.level) sub("adapt", "level", *o.level);
  if (!o.attribute.empty()) sub("edit", "attribute", o.attribute);
  if (o.alpha) sub("edit", "alpha", *o.alpha);
  if (o.epochs) sub("train", "epochs", *o.epochs);
  if (o.steps) sub("train", "steps", *o.steps);
  if (!o.targets.empty()) sub("evaluate", "targets", fs::absolute(o.targets).string());
  if (!o.reconstructions.empty()) sub("evaluate", "reconstructions", fs::absolute(o.reconstructions).string());
  if (!o.runs.empty()) {
    json runs = json::array();
    for (const auto& r : o.runs) runs.push_back(fs::absolute(r).string());
    sub("report", "runs", runs);
  }
  return j.dump(2);
}

int run_config(const std::string& pipeline, const Overrides& o, bool validate_only) {
  std::string text;
  fs::path base;
  try {
    text = merged_config(pipeline, o, base);
  } catch (const std::exception& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kConfigError;
  }
  const auto checked = ungan::validate_config(text, base);
  if (!checked.ok()) {
    for (const auto& e : checked.errors) std::cerr << "config error: " << e << "\n";
    return kConfigError;
  }
  if (validate_only) {
    std::cout << ungan::config_to_json(*checked.config) << "\n";
    return 0;
  }
  try {
    const auto report = ungan::run_pipeline(*checked.config);
    std::cout << "run " << report.run_id << " -> " << checked.config->output << "\n";
    for (const auto& e : report.evaluations) {
      std::printf("  %-28s matching %.3f  ssim %.4f  psnr %.2f\n", e.label.c_str(), e.matching_rate, e.ssim.mean,
                  e.psnr.mean);
    }
    for (const auto& [k, v] : report.metrics) std::printf("  %s = %.6g\n", k.c_str(), v);
    return 0;
  } catch (const ungan::StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return kStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kStageFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloaking toolkit against GAN inversion"};
  app.require_subcommand(1);
  Overrides o;

  auto* run = app.add_subcommand("run", "Run the pipeline named in a config file");
  add_common(run, o);
  add_cloak(run, o);
  auto* check = app.add_subcommand("validate", "Validate a config and print it with defaults filled");
  add_common(check, o);
  add_cloak(check, o);

  std::map<std::string, CLI::App*> pipelines;
  for (const char* name : {"train-gan", "train-encoder", "steal-encoder", "invert", "cloak", "distort", "adapt", "edit",
                           "evaluate", "report"}) {
    auto* cmd = app.add_subcommand(name, std::string("Run the ") + name + " pipeline");
    add_common(cmd, o);
    pipelines[name] = cmd;
  }
  add_cloak(pipelines["cloak"], o);
  pipelines["cloak"]->add_option("--level", o.levels, "Budget levels 0-9 (repeatable)");
  add_cloak(pipelines["adapt"], o);
  pipelines["adapt"]->add_option("--level", o.level, "Budget level of the cloaks under attack");
  pipelines["adapt"]->add_option("--strategy", o.strategy,
                                 "overwrite | purify | more_iterations | encoder_enhancement");
  pipelines["adapt"]->add_option("--param", o.params, "Strategy parameter values (repeatable)");
  pipelines["distort"]->add_option("--kind", o.kind, "Distortion kind");
  pipelines["distort"]->add_option("--magnitude", o.magnitudes, "Magnitudes (repeatable)");
  pipelines["edit"]->add_option("--attribute", o.attribute, "Attribute name (brightness or a dataset attribute)");
  pipelines["edit"]->add_option("--alpha", o.alpha, "Edit step along the semantic direction");
  for (const char* name : {"train-gan", "train-encoder"}) pipelines[name]->add_option("--epochs", o.epochs, "Epochs");
  pipelines["steal-encoder"]->add_option("--steps", o.steps, "Stealing steps");
  pipelines["evaluate"]->add_option("--targets", o.targets, "Directory of target PNGs");
  pipelines["evaluate"]->add_option("--reconstructions", o.reconstructions, "Directory of reconstruction PNGs");
  pipelines["report"]->add_option("--run", o.runs, "Run output directories (repeatable)");

  std::string sprites_out;
  ungan::SpriteConfig sprites;
  auto* sprites_cmd = app.add_subcommand("sprites", "Write the procedural face-sprite dataset");
  sprites_cmd->add_option("--out", sprites_out, "Output directory")->required();
  sprites_cmd->add_option("--identities", sprites.identities, "Identities");
  sprites_cmd->add_option("--per-identity", sprites.per_identity, "Images per identity");
  sprites_cmd->add_option("--seed", sprites.seed, "Seed");

  std::string zoo_out, preset = "desk";
  bool force = false;
  auto* zoo_cmd = app.add_subcommand("zoo", "Train the model zoo");
  zoo_cmd->add_option("--out", zoo_out, "Zoo directory")->required();
  zoo_cmd->add_option("--preset", preset, "desk | tiny")->check(CLI::IsMember({"desk", "tiny"}));
  zoo_cmd->add_flag("--force", force, "Rebuild even when the zoo is complete");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (run->parsed()) return run_config("", o, false);
  if (check->parsed()) return run_config("", o, true);
  for (const auto& [name, cmd] : pipelines)
    if (cmd->parsed()) return run_config(name, o, false);

  try {
    if (sprites_cmd->parsed()) {
      ungan::save_dataset(sprites_out, ungan::make_face_sprites(sprites));
      std::cout << "wrote " << sprites.identities * sprites.per_identity << " sprites to " << sprites_out << "\n";
      return 0;
    }
    if (zoo_cmd->parsed()) {
      if (!force && ungan::zoo_complete(zoo_out)) {
        std::cout << "zoo already complete at " << zoo_out << "\n";
        return 0;
      }
      const auto cfg = preset == "tiny" ? ungan::ZooConfig::tiny() : ungan::ZooConfig::desk();
      ungan::build_zoo(zoo_out, cfg, [](const std::string& s) { std::cout << s << std::endl; });
      std::cout << "zoo written to " << zoo_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kStageFailure;
  }
  return kConfigError;
}
