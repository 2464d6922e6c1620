#include "fedsim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <initializer_list>
#include <set>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

std::string join_path(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

void reject_unknown(const json& obj, std::string_view prefix,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown field \"" + join_path(prefix, key) + "\"");
}

const json& require_object(const json& parent, const char* key, std::string_view prefix) {
  const auto it = parent.find(key);
  if (it == parent.end())
    throw ConfigError("missing required field \"" + join_path(prefix, key) + "\"");
  if (!it->is_object())
    throw ConfigError("field \"" + join_path(prefix, key) + "\" must be an object");
  return *it;
}

template <typename T>
bool read(const json& obj, const char* key, T& out, std::string_view prefix, bool required = false) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ConfigError("missing required field \"" + join_path(prefix, key) + "\"");
    return false;
  }
  const auto path = join_path(prefix, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError("field \"" + path + "\" must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ConfigError("field \"" + path + "\" must be an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (it->get<long long>() < 0) throw ConfigError("field \"" + path + "\" must be >= 0");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError("field \"" + path + "\" must be a number");
  } else {
    if (!it->is_string()) throw ConfigError("field \"" + path + "\" must be a string");
  }
  out = it->get<T>();
  return true;
}

// Shallow-recursive merge: objects merge key by key, everything else
// replaces.
void merge_into(json& base, const json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base.contains(key) && base[key].is_object())
      merge_into(base[key], value);
    else
      base[key] = value;
  }
}

json::json_pointer to_pointer(std::string_view dotted) {
  std::string p;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto dot = dotted.find('.', start);
    const auto part = dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos
                                                                        : dot - start);
    if (part.empty()) throw ConfigError("malformed key \"" + std::string(dotted) + "\"");
    p += "/" + std::string(part);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

std::string format_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v.get<double>());
    return buf;
  }
  return v.dump();
}

json champion_experiment() {
  return {
      {"label", "champion"},
      {"K", 12},
      {"m", 6},
      {"rounds", 80},
      {"dirichlet_alpha", 0.1},
      {"test_fraction", 0.2},
      {"dataset",
       {{"source", "synthetic"},
        {"n_classes", 10},
        {"n_features", 10},
        {"n_per_class", 200},
        {"class_separation", 3.0}}},
      {"selector",
       {{"kind", "hetero_select"},
        {"composition", "additive"},
        {"gamma", 0.7},
        {"eta", 0.3},
        {"tau0", 2.0},
        {"norm_alpha", 0.5}}},
      {"train", {{"local_epochs", 5}, {"learning_rate", 0.05}, {"mu", 0.1}, {"batch_size", 32}}},
  };
}

// Ablation runs are shorter (50 rounds, 2 local epochs) with weak
// regularization and unit base temperature unless the block varies them.
json ablation_experiment(std::string label) {
  auto e = champion_experiment();
  e["label"] = std::move(label);
  e["rounds"] = 50;
  e["train"]["local_epochs"] = 2;
  e["train"]["mu"] = 0.01;
  e["selector"]["tau0"] = 1.0;
  return e;
}

json selector_variant(std::string label, json selector, json extra = json::object()) {
  json v = {{"label", std::move(label)}, {"selector", std::move(selector)}};
  merge_into(v, extra);
  return v;
}

}  // namespace

std::vector<std::string> RunManifest::labels() const {
  std::vector<std::string> out;
  for (const auto& e : experiments) out.push_back(e.label);
  return out;
}

std::vector<std::string> preset_names() {
  return {"champion",          "comparison",         "ablation-gamma",
          "ablation-eta",      "ablation-temperature", "ablation-participation",
          "ablation-mu",       "full-participation"};
}

json preset_document(std::string_view name) {
  if (name == "champion") return {{"experiment", champion_experiment()}};
  if (name == "comparison") {
    auto base = champion_experiment();
    base["label"] = "comparison";
    base["rounds"] = 100;
    return {{"experiment", base},
            {"variants",
             {selector_variant("oort_like", {{"kind", "oort_like"}, {"exploration_fraction", 0.2}}),
              selector_variant("power_of_choice", {{"kind", "power_of_choice"}}),
              selector_variant("hetero_additive", {{"kind", "hetero_select"}}),
              selector_variant("hetero_multiplicative",
                               {{"kind", "hetero_select"}, {"composition", "multiplicative"}}),
              selector_variant("random", {{"kind", "random"}})}}};
  }
  if (name == "ablation-gamma")
    return {{"experiment", ablation_experiment("ablation")},
            {"grid", {{"selector.gamma", {0.0, 0.3, 0.7, 1.0}}}}};
  if (name == "ablation-eta")
    return {{"experiment", ablation_experiment("ablation")},
            {"grid", {{"selector.eta", {0.0, 0.3, 0.7, 1.0}}}}};
  if (name == "ablation-temperature")
    return {{"experiment", ablation_experiment("ablation")},
            {"grid", {{"selector.tau0", {0.1, 0.5, 1.0, 2.0, 5.0}}}}};
  if (name == "ablation-participation")
    return {{"experiment", ablation_experiment("ablation")},
            {"grid", {{"m", {3, 6, 10}}}}};
  if (name == "ablation-mu") {
    auto base = ablation_experiment("ablation");
    base["selector"]["tau0"] = 2.0;
    const json explorative = {{"kind", "hetero_select"}, {"gamma", 0.7}, {"eta", 0.3}};
    const json exploitative = {{"kind", "hetero_select"}, {"gamma", 0.05}, {"eta", 0.1}};
    json variants = json::array();
    for (double mu : {0.01, 0.1}) {
      const json train = {{"train", {{"mu", mu}}}};
      variants.push_back(
          selector_variant("explorative_mu=" + format_value(mu), explorative, train));
      variants.push_back(
          selector_variant("exploitative_mu=" + format_value(mu), exploitative, train));
    }
    return {{"experiment", base}, {"variants", variants}};
  }
  if (name == "full-participation") {
    auto base = champion_experiment();
    base["label"] = "participation";
    base["rounds"] = 100;
    return {{"experiment", base},
            {"variants",
             {selector_variant("fedavg_full", {{"kind", "random"}}, {{"m", 12}, {"train", {{"mu", 0.0}}}}),
              selector_variant("fedprox_full", {{"kind", "random"}}, {{"m", 12}}),
              selector_variant("hetero_select_half", {{"kind", "hetero_select"}})}}};
  }
  throw ConfigError("unknown preset \"" + std::string(name) + "\"");
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment must be a JSON object");
  reject_unknown(j, "",
                 {"label", "K", "m", "rounds", "dirichlet_alpha", "test_fraction", "dataset",
                  "selector", "train", "weighted_aggregation", "p_avg", "track_heterogeneity"});
  ExperimentConfig cfg;
  read(j, "label", cfg.label, "");
  read(j, "K", cfg.n_clients, "", true);
  read(j, "m", cfg.subset_size, "", true);
  read(j, "rounds", cfg.rounds, "", true);
  read(j, "dirichlet_alpha", cfg.dirichlet_alpha, "");
  read(j, "test_fraction", cfg.test_fraction, "");
  read(j, "weighted_aggregation", cfg.weighted_aggregation, "");
  read(j, "track_heterogeneity", cfg.track_heterogeneity, "");
  std::string p_avg;
  if (read(j, "p_avg", p_avg, "")) {
    if (p_avg == "client_uniform")
      cfg.p_avg_weighting = AverageWeighting::kClientUniform;
    else if (p_avg == "sample_weighted")
      cfg.p_avg_weighting = AverageWeighting::kSampleWeighted;
    else
      throw ConfigError("field \"p_avg\" must be client_uniform or sample_weighted");
  }

  if (const auto it = j.find("dataset"); it != j.end()) {
    const auto& d = require_object(j, "dataset", "");
    reject_unknown(d, "dataset",
                   {"source", "n_classes", "n_features", "n_per_class", "class_separation", "path"});
    std::string source = "synthetic";
    read(d, "source", source, "dataset");
    if (source == "synthetic") {
      cfg.dataset.source = DatasetSpec::Source::kSynthetic;
    } else if (source == "csv") {
      cfg.dataset.source = DatasetSpec::Source::kCsv;
      read(d, "path", cfg.dataset.csv_path, "dataset", true);
    } else {
      throw ConfigError("field \"dataset.source\" must be synthetic or csv");
    }
    auto& s = cfg.dataset.synthetic;
    read(d, "n_classes", s.n_classes, "dataset");
    read(d, "n_features", s.n_features, "dataset");
    read(d, "n_per_class", s.n_per_class, "dataset");
    read(d, "class_separation", s.class_separation, "dataset");
  }

  const auto& sel = require_object(j, "selector", "");
  std::string kind;
  read(sel, "kind", kind, "selector", true);
  if (kind == "hetero_select") {
    reject_unknown(sel, "selector",
                   {"kind", "composition", "weights", "eta", "gamma", "norm_alpha", "tau0",
                    "staleness_cap", "epsilon", "schedule_horizon", "log_base"});
    SelectorConfig h;
    std::string composition = "additive";
    read(sel, "composition", composition, "selector");
    if (composition == "additive")
      h.composition = Composition::kAdditive;
    else if (composition == "multiplicative")
      h.composition = Composition::kMultiplicative;
    else
      throw ConfigError("field \"selector.composition\" must be additive or multiplicative");
    if (sel.contains("weights")) {
      const auto& w = require_object(sel, "weights", "selector");
      reject_unknown(w, "selector.weights",
                     {"value", "diversity", "momentum", "fairness", "staleness", "norm"});
      read(w, "value", h.w_value, "selector.weights");
      read(w, "diversity", h.w_diversity, "selector.weights");
      read(w, "momentum", h.w_momentum, "selector.weights");
      read(w, "fairness", h.w_fairness, "selector.weights");
      read(w, "staleness", h.w_staleness, "selector.weights");
      read(w, "norm", h.w_norm, "selector.weights");
    }
    read(sel, "eta", h.fairness_eta, "selector");
    read(sel, "gamma", h.staleness_gamma, "selector");
    read(sel, "norm_alpha", h.norm_alpha, "selector");
    read(sel, "tau0", h.base_temperature, "selector");
    read(sel, "staleness_cap", h.staleness_cap, "selector");
    read(sel, "epsilon", h.epsilon, "selector");
    read(sel, "schedule_horizon", h.schedule_horizon, "selector");
    std::string base = "e";
    read(sel, "log_base", base, "selector");
    if (base == "e")
      h.log_base = LogBase::kNatural;
    else if (base == "2")
      h.log_base = LogBase::kBinary;
    else
      throw ConfigError("field \"selector.log_base\" must be \"e\" or \"2\"");
    cfg.selector = h;
  } else if (kind == "random" || kind == "power_of_choice" || kind == "oort_like") {
    reject_unknown(sel, "selector", {"kind", "candidates", "exploration_fraction"});
    BaselineConfig b;
    b.kind = kind == "random"            ? BaselineKind::kRandom
             : kind == "power_of_choice" ? BaselineKind::kPowerOfChoice
                                         : BaselineKind::kOortLike;
    read(sel, "candidates", b.candidate_count, "selector");
    read(sel, "exploration_fraction", b.exploration_fraction, "selector");
    cfg.selector = b;
  } else {
    throw ConfigError(
        "field \"selector.kind\" must be hetero_select, random, power_of_choice or oort_like");
  }

  if (j.contains("train")) {
    const auto& t = require_object(j, "train", "");
    reject_unknown(t, "train", {"local_epochs", "learning_rate", "mu", "batch_size"});
    read(t, "local_epochs", cfg.train.local_epochs, "train");
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read(t, "mu", cfg.train.proximal_mu, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
  }
  cfg.validate();
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["label"] = cfg.label;
  j["K"] = cfg.n_clients;
  j["m"] = cfg.subset_size;
  j["rounds"] = cfg.rounds;
  j["dirichlet_alpha"] = cfg.dirichlet_alpha;
  j["test_fraction"] = cfg.test_fraction;
  j["weighted_aggregation"] = cfg.weighted_aggregation;
  j["track_heterogeneity"] = cfg.track_heterogeneity;
  j["p_avg"] = cfg.p_avg_weighting == AverageWeighting::kClientUniform ? "client_uniform"
                                                                       : "sample_weighted";
  if (cfg.dataset.source == DatasetSpec::Source::kCsv) {
    j["dataset"] = {{"source", "csv"}, {"path", cfg.dataset.csv_path}};
  } else {
    const auto& s = cfg.dataset.synthetic;
    j["dataset"] = {{"source", "synthetic"},
                    {"n_classes", s.n_classes},
                    {"n_features", s.n_features},
                    {"n_per_class", s.n_per_class},
                    {"class_separation", s.class_separation}};
  }
  if (const auto* h = std::get_if<SelectorConfig>(&cfg.selector)) {
    j["selector"] = {
        {"kind", "hetero_select"},
        {"composition", h->composition == Composition::kAdditive ? "additive" : "multiplicative"},
        {"weights",
         {{"value", h->w_value},
          {"diversity", h->w_diversity},
          {"momentum", h->w_momentum},
          {"fairness", h->w_fairness},
          {"staleness", h->w_staleness},
          {"norm", h->w_norm}}},
        {"eta", h->fairness_eta},
        {"gamma", h->staleness_gamma},
        {"norm_alpha", h->norm_alpha},
        {"tau0", h->base_temperature},
        {"staleness_cap", h->staleness_cap},
        {"epsilon", h->epsilon},
        {"schedule_horizon", h->schedule_horizon},
        {"log_base", h->log_base == LogBase::kNatural ? "e" : "2"}};
  } else {
    const auto& b = std::get<BaselineConfig>(cfg.selector);
    j["selector"] = {{"kind", cfg.selector_name()},
                     {"candidates", b.candidate_count},
                     {"exploration_fraction", b.exploration_fraction}};
  }
  j["train"] = {{"local_epochs", cfg.train.local_epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"mu", cfg.train.proximal_mu},
                {"batch_size", cfg.train.batch_size}};
  return j;
}

void apply_override(json& experiment, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override \"" + std::string(assignment) + "\" must look like key=value");
  const auto key = assignment.substr(0, eq);
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  experiment[to_pointer(key)] = value;
}

RunManifest build_manifest(const json& document, const PlanOptions& options) {
  if (!document.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(document, "", {"preset", "experiment", "variants", "grid", "seeds", "output_dir"});

  json base = json::object();
  json variants = json::array();
  json grid = json::object();
  if (document.contains("preset")) {
    std::string name;
    read(document, "preset", name, "");
    const auto preset = preset_document(name);
    base = preset.at("experiment");
    if (preset.contains("variants")) variants = preset["variants"];
    if (preset.contains("grid")) grid = preset["grid"];
  }
  if (document.contains("experiment")) merge_into(base, require_object(document, "experiment", ""));
  if (document.contains("variants")) {
    if (!document["variants"].is_array()) throw ConfigError("field \"variants\" must be an array");
    variants = document["variants"];
  }
  if (document.contains("grid")) grid = require_object(document, "grid", "");

  // Expand variants, then the cartesian grid over each variant.
  std::vector<json> expanded;
  if (variants.empty()) {
    expanded.push_back(base);
  } else {
    for (const auto& v : variants) {
      if (!v.is_object()) throw ConfigError("each entry of \"variants\" must be an object");
      json e = base;
      const std::string prefix = base.value("label", std::string("experiment"));
      // A selector of another kind replaces the base selector wholesale.
      if (v.contains("selector") && v["selector"].is_object() && v["selector"].contains("kind") &&
          e.contains("selector") && e["selector"].is_object() &&
          v["selector"]["kind"] != e["selector"].value("kind", json()))
        e.erase("selector");
      merge_into(e, v);
      if (v.contains("label")) e["label"] = prefix + "_" + format_value(v["label"]);
      expanded.push_back(std::move(e));
    }
  }
  for (const auto& [key, values] : grid.items()) {
    if (!values.is_array() || values.empty())
      throw ConfigError("grid field \"" + key + "\" must be a non-empty array");
    std::vector<json> next;
    const auto ptr = to_pointer(key);
    const auto short_key = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
    for (const auto& e : expanded)
      for (const auto& value : values) {
        json copy = e;
        copy[ptr] = value;
        copy["label"] =
            copy.value("label", std::string("experiment")) + "_" + short_key + "=" + format_value(value);
        next.push_back(std::move(copy));
      }
    expanded = std::move(next);
  }

  RunManifest manifest;
  std::set<std::string> seen;
  json canonical = json::array();
  for (auto& e : expanded) {
    for (const auto& o : options.overrides) apply_override(e, o);
    auto cfg = experiment_from_json(e);
    if (cfg.label.empty() || cfg.label.find_first_of("/\\") != std::string::npos)
      throw ConfigError("field \"label\" must be non-empty and contain no path separators");
    if (!seen.insert(cfg.label).second)
      throw ConfigError("duplicate experiment label \"" + cfg.label + "\"");
    canonical.push_back(experiment_to_json(cfg));
    manifest.experiments.push_back(std::move(cfg));
  }

  if (!options.seeds.empty()) {
    manifest.seeds = options.seeds;
  } else if (document.contains("seeds")) {
    const auto& s = document["seeds"];
    if (!s.is_array() || s.empty()) throw ConfigError("field \"seeds\" must be a non-empty array");
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) throw ConfigError("field \"seeds\" must hold non-negative integers");
      manifest.seeds.push_back(v.get<std::uint64_t>());
    }
  } else {
    manifest.seeds = {1};
  }
  if (std::set<std::uint64_t>(manifest.seeds.begin(), manifest.seeds.end()).size() !=
      manifest.seeds.size())
    throw ConfigError("field \"seeds\" contains duplicates");

  if (!options.output_dir.empty())
    manifest.output_dir = options.output_dir;
  else if (document.contains("output_dir")) {
    std::string dir;
    read(document, "output_dir", dir, "");
    manifest.output_dir = dir;
  } else {
    manifest.output_dir = "out";
  }

  const json hashed = {{"experiments", canonical}, {"seeds", manifest.seeds}};
  manifest.config_hash = fnv1a_hex(hashed.dump());
  return manifest;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fedsim
