#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/output.hpp"
#include "fedsim/runner.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fedsim_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal() {
  return json::parse(R"({"experiment": {"K": 4, "m": 2, "rounds": 3,
    "dataset": {"n_per_class": 20}, "selector": {"kind": "hetero_select"}}})");
}

int run_doc(const json& doc, const fs::path& dir, std::string* err_text = nullptr,
            std::vector<std::string> overrides = {}) {
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << doc.dump();
  RunOptions o;
  o.config_path = cfg;
  o.output_dir = dir / "out";
  o.overrides = std::move(overrides);
  std::ostringstream out, err;
  const int rc = run(o, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("missing required fields are named") {
  auto doc = minimal();
  doc["experiment"].erase("K");
  CHECK_THROWS_WITH_AS(build_manifest(doc, {}), doctest::Contains("\"K\""), ConfigError);
  const auto dir = scratch("missing");
  std::string err;
  CHECK(run_doc(doc, dir, &err) == kExitConfig);
  CHECK(err.find("\"K\"") != std::string::npos);
}

TEST_CASE("unknown and malformed fields are rejected") {
  auto doc = minimal();
  doc["experiment"]["bogus"] = 1;
  CHECK_THROWS_AS(build_manifest(doc, {}), ConfigError);
  doc = minimal();
  doc["experiment"]["m"] = "six";
  CHECK_THROWS_AS(build_manifest(doc, {}), ConfigError);
  doc = minimal();
  doc["experiment"]["m"] = 5;
  CHECK_THROWS_AS(build_manifest(doc, {}), ConfigError);
  doc = minimal();
  doc["seeds"] = {1, 1};
  CHECK_THROWS_AS(build_manifest(doc, {}), ConfigError);
  const auto dir = scratch("badjson");
  std::ofstream(dir / "config.json") << "{ not json";
  RunOptions o;
  o.config_path = dir / "config.json";
  std::ostringstream out, err;
  CHECK(run(o, out, err) == kExitConfig);
}

TEST_CASE("every preset builds") {
  for (const auto& name : preset_names()) {
    json doc{{"preset", name}};
    const auto m = build_manifest(doc, {});
    CHECK_FALSE(m.experiments.empty());
    CHECK(m.seeds == std::vector<std::uint64_t>{1});
  }
  const auto cmp = build_manifest(json{{"preset", "comparison"}}, {});
  CHECK(cmp.experiments.size() == 5);
  const auto part = build_manifest(json{{"preset", "ablation-participation"}}, {});
  CHECK(part.experiments.size() == 3);
  CHECK_THROWS_AS(build_manifest(json{{"preset", "nope"}}, {}), ConfigError);
}

TEST_CASE("champion preset values") {
  const auto m = build_manifest(json{{"preset", "champion"}}, {});
  const auto& c = m.experiments.front();
  CHECK(c.n_clients == 12);
  CHECK(c.subset_size == 6);
  CHECK(c.dirichlet_alpha == 0.1);
  CHECK(c.train.proximal_mu == 0.1);
  const auto h = c.hetero_config();
  CHECK(h.composition == Composition::kAdditive);
  CHECK(h.staleness_gamma == 0.7);
  CHECK(h.fairness_eta == 0.3);
  CHECK(h.base_temperature == 2.0);
}

TEST_CASE("overrides, seeds and round trip") {
  PlanOptions opt;
  opt.overrides = {"train.mu=0.5", "selector.composition=multiplicative", "rounds=7"};
  opt.seeds = {3, 4};
  const auto m = build_manifest(minimal(), opt);
  const auto& c = m.experiments.front();
  CHECK(c.train.proximal_mu == 0.5);
  CHECK(c.rounds == 7);
  CHECK(c.hetero_config().composition == Composition::kMultiplicative);
  CHECK(m.seeds == std::vector<std::uint64_t>{3, 4});
  const auto back = experiment_from_json(experiment_to_json(c));
  CHECK(experiment_to_json(back) == experiment_to_json(c));
  PlanOptions bad;
  bad.overrides = {"novalue"};
  CHECK_THROWS_AS(build_manifest(minimal(), bad), ConfigError);
}

TEST_CASE("variants and grids expand with distinct labels") {
  json doc = minimal();
  doc["variants"] = json::array({json{{"label", "r"}, {"selector", {{"kind", "random"}}}},
                                 json{{"label", "h"}}});
  const auto m = build_manifest(doc, {});
  REQUIRE(m.experiments.size() == 2);
  CHECK(m.experiments[0].selector_name() == "random");
  CHECK(m.experiments[0].label != m.experiments[1].label);
  json g = minimal();
  g["grid"] = {{"train.mu", {0.0, 0.1}}};
  const auto mg = build_manifest(g, {});
  CHECK(mg.experiments.size() == 2);
  CHECK(mg.experiments[1].train.proximal_mu == 0.1);
}

TEST_CASE("fnv1a hash") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("run writes summary, plot data and manifest") {
  const auto dir = scratch("run");
  auto doc = minimal();
  doc["seeds"] = {1, 2};
  REQUIRE(run_doc(doc, dir) == kExitOk);
  const auto out = dir / "out";
  const auto summary = slurp(out / "summary.csv");
  CHECK(summary.rfind(kSummaryHeader, 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);
  const auto plot = slurp(plotdata_path(out, "experiment", 2));
  CHECK(std::count(plot.begin(), plot.end(), '\n') == 3);
  const auto first = json::parse(plot.substr(0, plot.find('\n')));
  CHECK(first.at("round") == 0);
  CHECK(first.at("selected").size() == 2);
  CHECK(first.at("probabilities").size() == 4);
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.contains("config_hash"));

  // Same inputs, same bytes.
  const auto dir2 = scratch("run2");
  REQUIRE(run_doc(doc, dir2) == kExitOk);
  CHECK(slurp(dir2 / "out" / "summary.csv") == summary);
}

TEST_CASE("numeric divergence maps to exit code 3") {
  const auto dir = scratch("diverge");
  std::string err;
  CHECK(run_doc(minimal(), dir, &err, {"train.learning_rate=1e12",
                                       "dataset.class_separation=1e150"}) == kExitNumeric);
  CHECK(err.find("round") != std::string::npos);
}

TEST_CASE("unwritable output maps to exit code 4") {
  const auto dir = scratch("io");
  std::ofstream(dir / "blocker") << "x";
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << minimal().dump();
  RunOptions o;
  o.config_path = cfg;
  o.output_dir = dir / "blocker" / "sub";
  std::ostringstream out, err;
  CHECK(run(o, out, err) == kExitIo);
  o.config_path = dir / "absent.json";
  CHECK(run(o, out, err) == kExitIo);
}

TEST_CASE("command-line binary") {
  const auto dir = scratch("binary");
  std::ofstream(dir / "c.json") << minimal().dump();
  const std::string cli = FEDSIM_CLI_PATH;
  const auto cmd = "\"" + cli + "\" run \"" + (dir / "c.json").string() + "\" --out \"" +
                   (dir / "o").string() + "\" --seeds 5,6 --override rounds=2 > /dev/null";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(plotdata_path(dir / "o", "experiment", 6)));
  const auto bad = "\"" + cli + "\" run \"" + (dir / "c.json").string() +
                   "\" --seeds x > /dev/null 2>&1";
  const int rc = std::system(bad.c_str());
  CHECK(WEXITSTATUS(rc) == kExitConfig);
}

TEST_CASE("variant selector without a kind merges into the base selector") {
  json doc{{"preset", "champion"}};
  doc["variants"] = json::array({json{{"label", "mult"},
                                      {"selector", {{"composition", "multiplicative"}}}}});
  const auto m = build_manifest(doc, {});
  REQUIRE(m.experiments.size() == 1);
  CHECK(m.experiments[0].hetero_config().composition == Composition::kMultiplicative);
  CHECK(m.experiments[0].hetero_config().staleness_gamma == 0.7);
}
