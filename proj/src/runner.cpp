#include "fedsim/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <thread>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/output.hpp"
#include "fedsim/parallel.hpp"

namespace fedsim {

int threads_from_env() {
  if (const char* v = std::getenv("FEDSIM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end != v && *end == '\0' && n > 0) return static_cast<int>(n);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

struct Job {
  const ExperimentConfig* base = nullptr;
  std::uint64_t seed = 0;
};

int run_manifest(const RunManifest& manifest, int threads, std::ostream& out) {
  std::error_code ec;
  std::filesystem::create_directories(manifest.output_dir, ec);
  if (ec) throw IoError("cannot create " + manifest.output_dir.string() + ": " + ec.message());

  std::vector<Job> jobs;
  for (const auto& e : manifest.experiments)
    for (auto seed : manifest.seeds) jobs.push_back({&e, seed});

  // Outer workers over jobs; leftover threads go to client-level parallelism.
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  const int inner = std::max(1, threads / workers);
  std::vector<SummaryRow> rows(jobs.size());
  std::vector<std::string> notes(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    ExperimentConfig cfg = *jobs[i].base;
    cfg.master_seed = jobs[i].seed;
    cfg.threads = inner;
    const auto result = run_experiment(cfg);
    emit_plotdata(result.records, plotdata_path(manifest.output_dir, cfg.label, cfg.master_seed));
    rows[i] = {cfg.label, cfg.master_seed, summarize(result.records, cfg.n_clients)};
    if (cfg.track_heterogeneity) {
      try {
        const auto mu = optimal_mu_diagnostic(result, cfg.train);
        char buf[200];
        std::snprintf(buf, sizeof buf, "  mu* estimate %.4f (G^2 %.4g, B_sel^2 %.4g, dist^2 %.4g)",
                      mu.mu_star, mu.grad_sq, mu.hetero_sq, mu.dist_sq);
        notes[i] = buf;
      } catch (const DomainError& e) {
        notes[i] = std::string("  mu* estimate unavailable: ") + e.what();
      }
    }
  });

  emit_summary(rows, manifest.output_dir / "summary.csv");
  emit_manifest(manifest, manifest.output_dir / "manifest.json");

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& s = rows[i].summary;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-40s seed=%-6llu peak=%.4f final=%.4f stable=%.4f drop=%.4f std=%.3f",
                  rows[i].label.c_str(), static_cast<unsigned long long>(rows[i].seed),
                  s.peak_accuracy, s.final_accuracy, s.stable_accuracy, s.stability_drop,
                  s.selection_count_std);
    out << buf << '\n';
    if (!notes[i].empty()) out << notes[i] << '\n';
  }
  out << "wrote " << rows.size() << " run(s) to " << manifest.output_dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(options.config_path);
    if (!in) {
      err << "io error: cannot read config " << options.config_path.string() << '\n';
      return kExitIo;
    }
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      err << "config error: " << options.config_path.string() << ": " << e.what() << '\n';
      return kExitConfig;
    }
    PlanOptions plan;
    plan.overrides = options.overrides;
    plan.output_dir = options.output_dir;
    plan.seeds = options.seeds;
    const auto manifest = build_manifest(doc, plan);
    return run_manifest(manifest, std::max(1, options.threads), out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric divergence: " << e.what();
    if (e.round() >= 0) err << " (round " << e.round();
    if (e.client() >= 0) err << ", client " << e.client();
    if (e.round() >= 0) err << ")";
    err << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace fedsim
