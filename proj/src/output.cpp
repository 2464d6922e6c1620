#include "fedsim/output.hpp"

#include <cstdio>
#include <fstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void emit_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << r.label << ',' << r.seed << ',' << fixed6(s.peak_accuracy) << ','
        << fixed6(s.final_accuracy) << ',' << fixed6(s.stable_accuracy) << ','
        << fixed6(s.stability_drop) << ',' << fixed6(s.selection_count_std) << '\n';
  }
  finish(out, path);
}

json plotdata_line(const RoundRecord& record) {
  json j = {{"round", record.round}, {"accuracy", record.accuracy}, {"selected", record.selected}};
  if (record.temperature) j["temperature"] = *record.temperature;
  if (!record.probabilities.empty()) j["probabilities"] = record.probabilities;
  return j;
}

void emit_plotdata(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& r : records) out << plotdata_line(r).dump() << '\n';
  finish(out, path);
}

void emit_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  json j = {{"config_hash", manifest.config_hash},
            {"seeds", manifest.seeds},
            {"output_dir", manifest.output_dir.string()},
            {"labels", manifest.labels()}};
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::filesystem::path plotdata_path(const std::filesystem::path& dir, const std::string& label,
                                    std::uint64_t seed) {
  return dir / (label + "_seed" + std::to_string(seed) + ".jsonl");
}

}  // namespace fedsim
