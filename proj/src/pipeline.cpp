#include "powermod/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "json_util.hpp"
#include "powermod/error.hpp"
#include "powermod/ingest.hpp"

namespace powermod {

namespace fs = std::filesystem;
using json = nlohmann::json;
using detail::read_opt;
using detail::reject_unknown;

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  selection.forest.rng_seed = s;
  models.nnpm.seed = s;
}

void PipelineConfig::validate() const {
  if (dataset.empty()) synth.validate();
  selection.forest.validate(selection.n_select);
  if (selection.n_select == 0) throw std::invalid_argument("selection.n_select must be >= 1");
  if (selection.subsets == 0) throw std::invalid_argument("selection.subsets must be >= 1");
  noise.validate();
  models.svmpm.validate();
  models.tspm.difference.validate();
  models.nnpm.validate();
  if (kinds.empty()) throw std::invalid_argument("no models selected");
  if (out.empty()) throw std::invalid_argument("output directory is required");
}

EvalConfig PipelineConfig::eval_config() const { return EvalConfig{seed, eval_bounds, models}; }

// ---- config JSON ----------------------------------------------------------------

json to_json(const NoiseConfig& c) {
  std::string scope = c.boundary_scope == BoundaryNoiseScope::Auto     ? "auto"
                      : c.boundary_scope == BoundaryNoiseScope::Always ? "always"
                                                                       : "never";
  return json{{"a_v", c.bounds.a_v()},
              {"eps_half", c.eps_half},
              {"eps_ratio", c.eps_ratio},
              {"delta_half", c.delta_half},
              {"min_separation", c.min_separation},
              {"consecutive_run", c.consecutive_run},
              {"type3_a_v", c.type3_bounds.a_v()},
              {"mean_ratio_correction", c.mean_ratio_correction},
              {"boundary_scope", scope}};
}

NoiseConfig noise_config_from_json(const json& j, NoiseConfig c) {
  reject_unknown(j,
                 {"a_v", "eps_half", "eps_ratio", "delta_half", "min_separation", "consecutive_run", "type3_a_v",
                  "mean_ratio_correction", "boundary_scope"},
                 "noise config");
  if (j.contains("a_v")) c.bounds = SimilarityBounds(j.at("a_v").get<double>());
  read_opt(j, "eps_half", c.eps_half);
  read_opt(j, "eps_ratio", c.eps_ratio);
  read_opt(j, "delta_half", c.delta_half);
  read_opt(j, "min_separation", c.min_separation);
  read_opt(j, "consecutive_run", c.consecutive_run);
  if (j.contains("type3_a_v")) c.type3_bounds = SimilarityBounds(j.at("type3_a_v").get<double>());
  read_opt(j, "mean_ratio_correction", c.mean_ratio_correction);
  if (j.contains("boundary_scope")) {
    const auto s = j.at("boundary_scope").get<std::string>();
    if (s == "auto") c.boundary_scope = BoundaryNoiseScope::Auto;
    else if (s == "always") c.boundary_scope = BoundaryNoiseScope::Always;
    else if (s == "never") c.boundary_scope = BoundaryNoiseScope::Never;
    else throw DataError("unknown boundary_scope '" + s + "'");
  }
  return c;
}

json to_json(const SelectionConfig& c) {
  const auto& f = c.forest;
  return json{{"n_select", c.n_select},
              {"subsets", c.subsets},
              {"partition", c.partition == PartitionMode::Contiguous ? "contiguous" : "random"},
              {"forest",
               {{"ntree", f.ntree},
                {"max_depth", f.max_depth ? json(*f.max_depth) : json(nullptr)},
                {"min_samples_leaf", f.min_samples_leaf},
                {"mtry", f.mtry ? json(*f.mtry) : json(nullptr)},
                {"bootstrap", f.bootstrap},
                {"rng_seed", f.rng_seed}}}};
}

SelectionConfig selection_config_from_json(const json& j, SelectionConfig c) {
  reject_unknown(j, {"n_select", "subsets", "partition", "forest"}, "selection config");
  read_opt(j, "n_select", c.n_select);
  read_opt(j, "subsets", c.subsets);
  if (j.contains("partition")) {
    const auto p = j.at("partition").get<std::string>();
    if (p == "contiguous") c.partition = PartitionMode::Contiguous;
    else if (p == "random") c.partition = PartitionMode::Random;
    else throw DataError("unknown partition mode '" + p + "'");
  }
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    reject_unknown(f, {"ntree", "max_depth", "min_samples_leaf", "mtry", "bootstrap", "rng_seed"}, "forest config");
    read_opt(f, "ntree", c.forest.ntree);
    if (f.contains("max_depth")) {
      c.forest.max_depth = f.at("max_depth").is_null() ? std::nullopt
                                                       : std::optional<std::size_t>(f.at("max_depth").get<std::size_t>());
    }
    read_opt(f, "min_samples_leaf", c.forest.min_samples_leaf);
    if (f.contains("mtry")) {
      c.forest.mtry = f.at("mtry").is_null() ? std::nullopt : std::optional<std::size_t>(f.at("mtry").get<std::size_t>());
    }
    read_opt(f, "bootstrap", c.forest.bootstrap);
    read_opt(f, "rng_seed", c.forest.rng_seed);
  }
  return c;
}

json to_json(const PipelineConfig& c) {
  json kinds = json::array();
  for (auto k : c.kinds) kinds.push_back(to_string(k));
  return json{{"dataset", c.dataset.empty() ? json(nullptr) : json(c.dataset.string())},
              {"synth", to_json(c.synth)},
              {"select", c.select},
              {"selection", to_json(c.selection)},
              {"filter", c.filter},
              {"compare_filter", c.compare_filter},
              {"noise", to_json(c.noise)},
              {"models", to_json(c.models)},
              {"kinds", kinds},
              {"eval_a_v", c.eval_bounds.a_v()},
              {"seed", c.seed},
              {"out", c.out.string()}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  try {
    reject_unknown(j,
                   {"dataset", "synth", "select", "selection", "filter", "compare_filter", "noise", "models", "kinds",
                    "eval_a_v", "seed", "out"},
                   "pipeline config");
    if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
    if (j.contains("dataset")) c.dataset = j.at("dataset").is_null() ? fs::path{} : fs::path(j.at("dataset").get<std::string>());
    if (j.contains("synth")) c.synth = synth_spec_from_json(j.at("synth"));
    read_opt(j, "select", c.select);
    if (j.contains("selection")) c.selection = selection_config_from_json(j.at("selection"), c.selection);
    read_opt(j, "filter", c.filter);
    read_opt(j, "compare_filter", c.compare_filter);
    if (j.contains("noise")) c.noise = noise_config_from_json(j.at("noise"), c.noise);
    if (j.contains("models")) c.models = model_set_from_json(j.at("models"));
    if (j.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : j.at("kinds")) c.kinds.push_back(model_kind_from_string(k.get<std::string>()));
    }
    if (j.contains("eval_a_v")) c.eval_bounds = SimilarityBounds(j.at("eval_a_v").get<double>());
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid pipeline config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid pipeline config: ") + e.what());
  }
}

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, std::move(base));
}

// ---- report JSON ----------------------------------------------------------------

json to_json(const CounterSelection& sel, const CounterSchema& schema) {
  json ranking = json::array();
  for (auto k : sel.report.ranking) {
    ranking.push_back({{"counter", schema.name(k)}, {"index", k}, {"importance", sel.report.average(static_cast<Eigen::Index>(k))}});
  }
  json per_subset = json::array();
  for (Eigen::Index i = 0; i < sel.report.per_subset.rows(); ++i) {
    per_subset.push_back(detail::vec_json(sel.report.per_subset.row(i).transpose()));
  }
  return json{{"selected", sel.names}, {"indices", sel.indices}, {"ranking", ranking}, {"per_subset", per_subset}};
}

json to_json(const FilterReport& r, bool annotations) {
  json j{{"input", r.input},
         {"normal", r.normal},
         {"type1_corrected", r.type1_corrected},
         {"type2_corrected", r.type2_corrected},
         {"type3_removed", r.type3_removed},
         {"untouched", r.untouched},
         {"config", to_json(r.config)}};
  if (annotations) {
    json rows = json::array();
    for (const auto& a : r.annotations) {
      if (a.action == FilterAction::Untouched) continue;
      rows.push_back({{"trace_id", a.trace_id},
                      {"seq", a.seq},
                      {"action", to_string(a.action)},
                      {"original_power", a.original_power},
                      {"final_power", a.final_power},
                      {"reference_seq", a.reference ? json(*a.reference) : json(nullptr)}});
    }
    j["changed"] = std::move(rows);
  }
  return j;
}

json to_json(const FilterScore& s) {
  auto one = [](const TypeScore& t) {
    return json{{"labelled", t.labelled}, {"flagged", t.flagged},     {"hits", t.hits},
                {"precision", t.precision}, {"recall", t.recall}, {"no_positives", t.no_positives}};
  };
  return json{{"type1", one(s.type1)},
              {"type2", one(s.type2)},
              {"type3", one(s.type3)},
              {"type1_rmse", s.type1_rmse},
              {"type2_rmse", s.type2_rmse},
              {"false_removal_rate", s.false_removal_rate}};
}

json to_json(const Manifest& m) {
  json arts = json::array();
  for (const auto& a : m.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  return json{{"artifacts", arts}, {"config", m.config}};
}

// ---- hashing / artifacts ----------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(std::string_view(ss.str()));
}

ManifestEntry write_artifact(const fs::path& root, const fs::path& relative, const std::string& text) {
  const fs::path full = root / relative;
  fs::create_directories(full.parent_path());
  std::ofstream out(full, std::ios::binary);
  if (!out) throw DataError("cannot write " + full.string());
  out << text;
  out.close();
  return {relative.generic_string(), sha256_hex(std::string_view(text)), text.size()};
}

json filter_comparison(const EvaluationReport& unfiltered, const EvaluationReport& filtered) {
  json rows = json::array();
  for (const auto& f : filtered.models) {
    const auto& u = unfiltered.get(f.kind);
    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    rows.push_back({{"model", to_string(f.kind)},
                    {"without_filter", {{"mean_ape", num(u.all.mean_ape)}, {"stddev", num(u.all.stddev_across_folds)}}},
                    {"with_filter", {{"mean_ape", num(f.all.mean_ape)}, {"stddev", num(f.all.stddev_across_folds)}}},
                    {"ratio", num(f.all.mean_ape / u.all.mean_ape)}});
  }
  return json{{"rows", rows}};
}

// ---- pipeline ------------------------------------------------------------------------

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  spdlog::info("stage {}: start", name);
  try {
    auto r = fn();
    spdlog::info("stage {}: done", name);
    return r;
  } catch (const DataError& e) {
    throw DataError(fmt::format("stage '{}' failed: {}", name, e.what()));
  } catch (const std::exception& e) {
    throw std::runtime_error(fmt::format("stage '{}' failed: {}", name, e.what()));
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

Manifest run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  Manifest manifest;
  manifest.config = to_json(cfg);
  auto& arts = manifest.artifacts;
  const fs::path root = cfg.out;
  fs::create_directories(root);
  arts.push_back(write_artifact(root, "config.json", dump(manifest.config)));

  std::optional<GroundTruth> truth;
  Dataset data = stage("ingest", [&] {
    if (!cfg.dataset.empty()) return load_dataset(cfg.dataset);
    auto out = generate(cfg.synth);
    arts.push_back(write_artifact(root, "ground_truth.json", to_json(out.truth).dump(1) + "\n"));
    truth = std::move(out.truth);
    return std::move(out.dataset);
  });
  spdlog::info("{} traces, {} vectors, {} rejected samples", data.traces.size(), data.vectors.size(),
               data.rejected_samples);

  if (cfg.select) {
    data = stage("select", [&] {
      const auto sel = select_counters(data, cfg.selection);
      arts.push_back(write_artifact(root, "selection.json", dump(to_json(sel, data.schema))));
      spdlog::info("selected counters: {}", fmt::join(sel.names, ","));
      return project(data, sel.indices);
    });
  }

  Dataset unfiltered = data;
  if (cfg.filter) {
    data = stage("filter", [&] {
      auto r = filter(data, cfg.noise);
      arts.push_back(write_artifact(root, "filter_report.json", dump(to_json(r.report))));
      if (truth) {
        arts.push_back(write_artifact(root, "filter_score.json", dump(to_json(score_filter(r.report, *truth)))));
      }
      spdlog::info("filter: {} type I, {} type II corrected, {} type III removed", r.report.type1_corrected,
                   r.report.type2_corrected, r.report.type3_removed);
      return std::move(r.dataset);
    });
  }

  stage("train", [&] {
    for (auto k : cfg.kinds) {
      const auto pm = train_model(cfg.models.get(k), data.schema, data.vectors);
      arts.push_back(write_artifact(root, fs::path("models") / (std::string(to_string(k)) + ".json"), dump(to_json(pm))));
    }
    return 0;
  });

  stage("eval", [&] {
    const auto ec = cfg.eval_config();
    const auto report = run_experiment(data, cfg.kinds, ec);
    const json rj = to_json(report);
    arts.push_back(write_artifact(root, "report.json", dump(rj)));
    arts.push_back(write_artifact(root, "report.csv", format_report_csv(rj)));
    if (cfg.filter && cfg.compare_filter) {
      const auto base = run_experiment(unfiltered, cfg.kinds, ec);
      arts.push_back(write_artifact(root, "report_unfiltered.json", dump(to_json(base))));
      arts.push_back(write_artifact(root, "filter_comparison.json", dump(filter_comparison(base, report))));
    }
    return 0;
  });

  write_artifact(root, "manifest.json", dump(to_json(manifest)));
  return manifest;
}

// ---- tables ------------------------------------------------------------------------

namespace {

std::string cell(const json& summary, const char* key) {
  const auto& v = summary.at(key);
  return v.is_null() ? "n/a" : fmt::format("{:.2f}", v.get<double>());
}

}  // namespace

std::string format_report_table(const json& report) {
  std::string out = fmt::format("{:<8} {:>16} {:>16} {:>16}\n", "model", "known", "unknown", "all");
  for (const auto& m : report.at("models")) {
    auto col = [&](const char* set) {
      const auto& s = m.at(set);
      return fmt::format("{} +- {}", cell(s, "mean_ape"), cell(s, "stddev_across_folds"));
    };
    out += fmt::format("{:<8} {:>16} {:>16} {:>16}\n", m.at("model").get<std::string>(), col("known"), col("unknown"),
                       col("all"));
  }
  return out;
}

std::string format_report_csv(const json& report) {
  std::string out = "model,set,mean_ape,stddev_across_folds,mean_signed_pct,mean_abs_watts,count,excluded\n";
  for (const auto& m : report.at("models")) {
    for (const char* set : {"known", "unknown", "all"}) {
      const auto& s = m.at(set);
      auto raw = [&](const char* k) {
        const auto& v = s.at(k);
        return v.is_null() ? std::string() : v.dump();
      };
      out += fmt::format("{},{},{},{},{},{},{},{}\n", m.at("model").get<std::string>(), set, raw("mean_ape"),
                         raw("stddev_across_folds"), raw("mean_signed_pct"), raw("mean_abs_watts"),
                         s.at("count").get<std::size_t>(), s.at("excluded").get<std::size_t>());
    }
  }
  return out;
}

}  // namespace powermod
