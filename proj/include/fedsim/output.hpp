#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "fedsim/config.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/metrics.hpp"

namespace fedsim {

struct SummaryRow {
  std::string label;
  std::uint64_t seed = 0;
  ExperimentSummary summary;
};

inline constexpr const char* kSummaryHeader =
    "label,seed,peak_acc,final_acc,stable_acc,stability_drop,selection_std";

// CSV, header plus one row per (experiment, seed), six-decimal fixed point.
void emit_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path);

// JSONL, one object per round: round, accuracy, selected, and temperature /
// probabilities when the selector produced them.
void emit_plotdata(std::span<const RoundRecord> records, const std::filesystem::path& path);

json plotdata_line(const RoundRecord& record);

void emit_manifest(const RunManifest& manifest, const std::filesystem::path& path);

std::filesystem::path plotdata_path(const std::filesystem::path& dir, const std::string& label,
                                    std::uint64_t seed);

}  // namespace fedsim
