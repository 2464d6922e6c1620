// fedsim: federated client-selection simulator.
//
//   fedsim run <config.json> [--override key=value ...] [--out DIR] [--seeds a,b,c]
//   fedsim presets
//
// FEDSIM_THREADS caps parallelism. Exit codes: 0 ok, 2 config error,
// 3 numeric divergence, 4 IO error.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated learning client-selection simulator"};
  app.require_subcommand(1);

  fedsim::RunOptions options;
  std::string config;
  std::string out_dir;
  std::string seeds;
  auto* run = app.add_subcommand("run", "Run the experiments described by a JSON config");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--override", options.overrides, "Override an experiment field (key=value)")
      ->take_all();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seeds", seeds, "Comma-separated master seeds");

  auto* presets = app.add_subcommand("presets", "List built-in presets");
  bool show_json = false;
  presets->add_flag("--json", show_json, "Print each preset document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fedsim::kExitConfig;
  }

  if (*presets) {
    for (const auto& name : fedsim::preset_names()) {
      std::cout << name << '\n';
      if (show_json) std::cout << fedsim::preset_document(name).dump(2) << '\n';
    }
    return 0;
  }

  options.config_path = config;
  options.output_dir = out_dir;
  if (!seeds.empty()) {
    std::stringstream ss(seeds);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        options.seeds.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        std::cerr << "config error: bad seed '" << item << "'\n";
        return fedsim::kExitConfig;
      }
    }
  }
  options.threads = fedsim::threads_from_env();
  return fedsim::run(options, std::cout, std::cerr);
}
