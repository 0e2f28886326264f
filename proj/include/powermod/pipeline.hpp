#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "powermod/eval.hpp"
#include "powermod/hcs.hpp"
#include "powermod/models.hpp"
#include "powermod/nfilter.hpp"
#include "powermod/synth.hpp"

namespace powermod {

struct PipelineConfig {
  std::filesystem::path dataset;  // trace directory; empty means generate from `synth`
  SynthSpec synth = noisy_spec(42);
  bool select = true;
  SelectionConfig selection;
  bool filter = true;
  bool compare_filter = false;  // also evaluate the unfiltered data and emit a comparison table
  NoiseConfig noise;
  ModelSet models;
  std::vector<ModelKind> kinds{ModelKind::Lrpm, ModelKind::Svmpm, ModelKind::Nnpm, ModelKind::Tspm};
  SimilarityBounds eval_bounds{0.9};
  std::uint64_t seed = 42;
  std::filesystem::path out = "powermod-out";

  /// Copies `seed` into the synth, forest, network and fold seeds.
  void apply_seed(std::uint64_t s);
  void validate() const;
  EvalConfig eval_config() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Keys absent from `j` keep the values already in `base`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = {});

nlohmann::json to_json(const NoiseConfig& cfg);
NoiseConfig noise_config_from_json(const nlohmann::json& j, NoiseConfig base = {});
nlohmann::json to_json(const SelectionConfig& cfg);
SelectionConfig selection_config_from_json(const nlohmann::json& j, SelectionConfig base = {});

nlohmann::json to_json(const CounterSelection& sel, const CounterSchema& schema);
/// Per-vector annotations are included only when `annotations` is set.
nlohmann::json to_json(const FilterReport& report, bool annotations = true);
nlohmann::json to_json(const FilterScore& score);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::vector<ManifestEntry> artifacts;
  nlohmann::json config;
};

nlohmann::json to_json(const Manifest& m);

std::string sha256_hex(const std::filesystem::path& file);
std::string sha256_hex(std::string_view bytes);

/// Writes `text` to `path` (creating parent directories) and returns its manifest entry.
ManifestEntry write_artifact(const std::filesystem::path& root, const std::filesystem::path& relative,
                             const std::string& text);

/// Mean APE per model, with and without the noise filter, one row per model.
nlohmann::json filter_comparison(const EvaluationReport& unfiltered, const EvaluationReport& filtered);

/// Select, project, filter, train, evaluate; writes every artifact under
/// cfg.out plus manifest.json. A failing stage is reported by name.
Manifest run_pipeline(const PipelineConfig& cfg);

/// Plain-text mean/stddev table of an evaluation report (known, unknown, all).
std::string format_report_table(const nlohmann::json& report);
/// The same table as CSV.
std::string format_report_csv(const nlohmann::json& report);

}  // namespace powermod
