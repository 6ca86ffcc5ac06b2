#include <doctest.h>

#include "ungan/cloaks.hpp"
#include "ungan/hash.hpp"
#include "ungan/image_io.hpp"
#include "ungan/pipeline.hpp"
#include "ungan/zoo.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sys/wait.h>

using namespace ungan;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path& tiny_zoo() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "ungan_unit_tiny_zoo";
    if (!zoo_complete(p)) {
      fs::remove_all(p);
      build_zoo(p, ZooConfig::tiny());
    }
    return p;
  }();
  return root;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ungan_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig must_validate(const json& j) {
  const auto r = validate_config(j.dump());
  for (const auto& e : r.errors) INFO(e);
  REQUIRE(r.ok());
  return *r.config;
}

json small_cloak_config(const fs::path& out) {
  return {{"schema_version", 1},
          {"pipeline", "cloak"},
          {"zoo", tiny_zoo().string()},
          {"output", out.string()},
          {"targets", {{"count", 2}}},
          {"cloak", {{"iterations", 3}}},
          {"inversion", {{"iterations", 3}}}};
}

int cli(const std::string& args) {
  const int status = std::system((std::string(UNGAN_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("validate_config") {
  SUBCASE("missing dataset is one error naming the field") {
    const ZooPaths z{tiny_zoo()};
    const json j = {{"schema_version", 1},
                    {"pipeline", "invert"},
                    {"models",
                     {{"generator", z.generator().string()},
                      {"feature_extractor", z.feature_extractor().string()},
                      {"embedder", z.embedder().string()},
                      {"calibration", z.calibration().string()},
                      {"encoder", z.encoder().string()}}}};
    const auto r = validate_config(j.dump());
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].find("dataset") != std::string::npos);
  }
  SUBCASE("kappa out of range") {
    json j = small_cloak_config("x");
    j["cloak"]["kappa"] = 1.5;
    const auto r = validate_config(j.dump());
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].find("cloak.kappa") != std::string::npos);
    CHECK(r.errors[0].find("range") != std::string::npos);
  }
  SUBCASE("errors are collected, not fail-fast") {
    json j = small_cloak_config("x");
    j["cloak"]["kappa"] = -1;
    j["cloak"]["levels"] = {12};
    j["inversion"]["iterations"] = -5;
    j["bogus"] = 1;
    CHECK(validate_config(j.dump()).errors.size() == 4);
    CHECK_FALSE(validate_config("{not json").ok());
    CHECK_FALSE(validate_config(R"({"pipeline":"cloak"})").ok());
  }
  SUBCASE("minimal config echoes the defaults") {
    const json j = {{"schema_version", 1}, {"pipeline", "cloak"}, {"zoo", tiny_zoo().string()}};
    const auto c = must_validate(j);
    CHECK(c.cloak.iterations == 500);
    CHECK(c.cloak.kappa_policy == KappaPolicy::Table);
    CHECK(c.cloak.levels.size() == 10);
    const json echoed = json::parse(config_to_json(c));
    CHECK(echoed["cloak"]["iterations"] == 500);
    CHECK(echoed["cloak"]["kappa_policy"] == "table");
    CHECK(echoed["inversion"]["iterations"] == 500);
    CHECK(must_validate(echoed).cloak.iterations == 500);
  }
  SUBCASE("hybrid scenarios default to the short inversion") {
    json j = {{"schema_version", 1}, {"pipeline", "cloak"}, {"zoo", tiny_zoo().string()}};
    j["cloak"]["scenario"] = "v4";
    CHECK(must_validate(j).inversion.iterations == 100);
  }
}

TEST_CASE("cloak level sweep") {
  const fs::path out = scratch_dir("sweep");
  const auto report = run_pipeline(must_validate(small_cloak_config(out)));
  REQUIRE(report.evaluations.size() == 11);
  CHECK(report.evaluations[0].keys.at("level") == -1);
  for (int level = 0; level < 10; ++level) {
    const auto& e = report.evaluations[std::size_t(level + 1)];
    CHECK(e.keys.at("level") == level);
    CHECK(e.keys.at("epsilon") == doctest::Approx(budget_for(Family::DcganLike, level)));
    CHECK(e.count == 2);
  }
  CHECK(fs::exists(out / "budget_vs_matching.svg"));
  CHECK(fs::exists(out / "utility_scatter.svg"));

  SUBCASE("every written file is listed with its hash") {
    std::set<std::string> listed;
    for (const auto& a : report.artifacts) {
      listed.insert(a.path);
      CHECK(sha256_file(out / a.path) == a.sha256);
    }
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
      if (!entry.is_regular_file()) continue;
      const std::string rel = fs::relative(entry.path(), out).generic_string();
      if (rel == "report.json") continue;
      CAPTURE(rel);
      CHECK(listed.count(rel) == 1);
    }
  }
  SUBCASE("rerunning the archived config reproduces the report") {
    const auto again = validate_config(config_to_json(must_validate(small_cloak_config(out))));
    REQUIRE(again.ok());
    CHECK(report_fingerprint(run_pipeline(*again.config)) == report_fingerprint(report));
    const auto stored = report_from_json([&] {
      std::ifstream in(out / "report.json");
      return std::string(std::istreambuf_iterator<char>(in), {});
    }());
    CHECK(report_fingerprint(stored) == report_fingerprint(report));
  }
}

TEST_CASE("evaluate on identical inputs") {
  const fs::path dir = scratch_dir("evaluate");
  const auto z = load_zoo(tiny_zoo());
  for (int i = 0; i < 3; ++i) {
    write_png(dir / "targets" / ("t" + std::to_string(i) + ".png"), z.dataset.images[std::size_t(i)]);
    write_png(dir / "recon" / ("t" + std::to_string(i) + ".png"), z.dataset.images[std::size_t(i)]);
  }
  const json j = {{"schema_version", 1},
                  {"pipeline", "evaluate"},
                  {"zoo", tiny_zoo().string()},
                  {"output", (dir / "out").string()},
                  {"evaluate", {{"targets", (dir / "targets").string()}, {"reconstructions", (dir / "recon").string()}}}};
  const auto report = run_pipeline(must_validate(j));
  REQUIRE(report.evaluations.size() == 1);
  CHECK(report.evaluations[0].matching_rate == 1.0);
  CHECK(report.evaluations[0].count == 3);
  CHECK(report.evaluations[0].mse.mean == 0.0);
}

TEST_CASE("a corrupt checkpoint fails its stage") {
  const fs::path zoo = scratch_dir("corrupt_zoo");
  fs::copy(tiny_zoo(), zoo, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  {
    std::fstream f(zoo / "generator" / "weights.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(64);
    f.write("xxxx", 4);
  }
  json j = small_cloak_config(zoo / "out");
  j["zoo"] = zoo.string();
  CHECK_THROWS_AS(run_pipeline(must_validate(j)), StageError);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch_dir("cli");
  CHECK(cli("validate --config " + (dir / "missing.json").string()) == 1);
  CHECK(cli("cloak --zoo " + tiny_zoo().string() + " --kappa-policy fixed --kappa 2") == 1);
  CHECK(cli("--no-such-flag") == 1);
  CHECK(cli("cloak --zoo " + tiny_zoo().string() + " --output " + (dir / "ok").string() +
            " --count 1 --level 0 --cloak-iterations 2 --inversion-iterations 2") == 0);

  const fs::path zoo = dir / "zoo";
  fs::copy(tiny_zoo(), zoo, fs::copy_options::recursive);
  fs::resize_file(zoo / "generator" / "weights.bin", 10);
  CHECK(cli("invert --zoo " + zoo.string() + " --output " + (dir / "bad").string() + " --count 1") == 2);
}
