#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "powermod/core.hpp"
#include "powermod/linear.hpp"
#include "powermod/nn.hpp"
#include "powermod/svr.hpp"

namespace powermod {

enum class ModelKind { Lrpm, Svmpm, Nnpm, Tspm };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);
/// Comma-separated kinds, e.g. "lrpm,tspm". Duplicates are dropped, order kept.
std::vector<ModelKind> parse_model_list(std::string_view text);

struct LrConfig {
  bool intercept = false;
};

/// Linear base plus an SVR fitted to what the base gets wrong.
struct TspmConfig {
  LrConfig base;
  SvrConfig difference;
};

using ModelConfig = std::variant<LrConfig, SvrConfig, NnConfig, TspmConfig>;

ModelKind kind_of(const ModelConfig& cfg);

/// One configuration per kind; the defaults are what the pipeline uses.
struct ModelSet {
  LrConfig lrpm;
  SvrConfig svmpm;
  NnConfig nnpm;
  TspmConfig tspm;

  ModelConfig get(ModelKind kind) const;
};

struct TspmModel {
  LinearModel base;
  SvrModel difference;

  template <typename Derived>
  double predict(const Eigen::MatrixBase<Derived>& x) const {
    return base.predict(x) + difference.predict(x);
  }
};

/// Training set for the second stage: each target becomes measured minus the
/// base prediction.
std::vector<NormalizedVector> difference_vectors(const LinearModel& base, std::span<const NormalizedVector> train);

TspmModel fit_tspm(std::span<const NormalizedVector> train, const TspmConfig& cfg = {});

using FittedModel = std::variant<LinearModel, SvrModel, NnModel, TspmModel>;

FittedModel fit_model(const ModelConfig& cfg, std::span<const NormalizedVector> train);
double predict(const FittedModel& model, const Vec& normalized_counters);

/// A trained model bundled with what it needs to accept raw rate vectors.
struct PowerModel {
  ModelKind kind = ModelKind::Lrpm;
  CounterSchema schema;
  NormalizationParams normalization;
  FittedModel model;

  /// Raw counter rates in; dynamic watts out.
  double predict(const Vector& raw) const;
  double predict_normalized(const Vec& normalized_counters) const;
};

/// Normalizes with parameters fitted on `train` and fits the model.
PowerModel train_model(const ModelConfig& cfg, const CounterSchema& schema, std::span<const Vector> train);

nlohmann::json to_json(const PowerModel& model);
PowerModel power_model_from_json(const nlohmann::json& j);
void save_model(const PowerModel& model, const std::filesystem::path& path);
PowerModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(ModelKind kind, const nlohmann::json& j);
nlohmann::json to_json(const ModelSet& set);
ModelSet model_set_from_json(const nlohmann::json& j);

/// 100 |predicted - measured| / measured, or nothing when measured <= 0.
inline std::optional<double> percent_error(double predicted, double measured) {
  if (!(measured > 0.0)) return std::nullopt;
  return 100.0 * std::abs(predicted - measured) / measured;
}

struct GridSearchResult {
  std::size_t best = 0;
  ModelConfig config;
  std::vector<double> scores;  // validation mean APE per grid entry
};

/// Fits every config on `train` and scores it on `validation` by mean APE.
/// Ties go to the earlier entry.
GridSearchResult grid_search(std::span<const ModelConfig> grid, const CounterSchema& schema,
                             std::span<const Vector> train, std::span<const Vector> validation);

}  // namespace powermod
