#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedsim/engine.hpp"

namespace fedsim {

using json = nlohmann::json;

// One fully expanded run: every (experiment, seed) pair gets its own output
// files named by label and seed.
struct RunManifest {
  std::vector<ExperimentConfig> experiments;  // master_seed unset
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir;
  std::string config_hash;

  std::vector<std::string> labels() const;
};

// Names accepted by the "preset" field.
std::vector<std::string> preset_names();

// The config document a preset expands to.
json preset_document(std::string_view name);

// Parses one experiment object. Unknown fields and type errors raise
// ConfigError naming the offending field. Fields K, m, rounds and
// selector.kind are required.
ExperimentConfig experiment_from_json(const json& j);
json experiment_to_json(const ExperimentConfig& cfg);

// Applies `dotted.key=value` to an experiment object. The value is parsed as
// JSON when possible and kept as a string otherwise.
void apply_override(json& experiment, std::string_view assignment);

struct PlanOptions {
  std::vector<std::string> overrides;
  std::filesystem::path output_dir;  // empty: use the document's or "out"
  std::vector<std::uint64_t> seeds;  // empty: use the document's or {1}
};

// Expands a config document (preset, base experiment, variants, grid,
// seeds) into a validated manifest.
RunManifest build_manifest(const json& document, const PlanOptions& options);

std::string fnv1a_hex(std::string_view data);

}  // namespace fedsim
