#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fedsim {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

struct RunOptions {
  std::filesystem::path config_path;
  std::vector<std::string> overrides;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;
  int threads = 1;
};

// Loads the config, runs every (experiment, seed) pair and writes
// <label>_seed<seed>.jsonl per run plus summary.csv and manifest.json.
// Diagnostics go to `err`, a per-run table to `out`.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

// FEDSIM_THREADS if set to a positive integer, else hardware concurrency.
int threads_from_env();

}  // namespace fedsim
