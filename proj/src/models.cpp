#include "powermod/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <stdexcept>

#include "json_util.hpp"
#include "powermod/error.hpp"
#include "powermod/parallel.hpp"

namespace powermod {

using json = nlohmann::json;
using detail::read_opt;
using detail::reject_unknown;
using detail::vec_from;
using detail::vec_json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lrpm: return "lrpm";
    case ModelKind::Svmpm: return "svmpm";
    case ModelKind::Nnpm: return "nnpm";
    case ModelKind::Tspm: return "tspm";
  }
  return "lrpm";
}

ModelKind model_kind_from_string(std::string_view text) {
  for (auto k : {ModelKind::Lrpm, ModelKind::Svmpm, ModelKind::Nnpm, ModelKind::Tspm}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(text) + "'");
}

std::vector<ModelKind> parse_model_list(std::string_view text) {
  std::vector<ModelKind> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    if (!item.empty()) {
      const auto k = model_kind_from_string(item);
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw std::invalid_argument("empty model list");
  return out;
}

ModelKind kind_of(const ModelConfig& cfg) {
  return std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LrConfig>) return ModelKind::Lrpm;
        else if constexpr (std::is_same_v<T, SvrConfig>) return ModelKind::Svmpm;
        else if constexpr (std::is_same_v<T, NnConfig>) return ModelKind::Nnpm;
        else return ModelKind::Tspm;
      },
      cfg);
}

ModelConfig ModelSet::get(ModelKind kind) const {
  switch (kind) {
    case ModelKind::Lrpm: return lrpm;
    case ModelKind::Svmpm: return svmpm;
    case ModelKind::Nnpm: return nnpm;
    case ModelKind::Tspm: return tspm;
  }
  return lrpm;
}

std::vector<NormalizedVector> difference_vectors(const LinearModel& base, std::span<const NormalizedVector> train) {
  std::vector<NormalizedVector> out(train.begin(), train.end());
  for (auto& v : out) v.p_dynamic = v.p_dynamic - base.predict(v.counters);
  return out;
}

TspmModel fit_tspm(std::span<const NormalizedVector> train, const TspmConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("cannot fit TSPM on an empty training set");
  TspmModel m;
  m.base = fit_lr(train, cfg.base.intercept);
  const auto residual = difference_vectors(m.base, train);
  m.difference = fit_svr(residual, cfg.difference);
  return m;
}

FittedModel fit_model(const ModelConfig& cfg, std::span<const NormalizedVector> train) {
  return std::visit(
      [&](const auto& c) -> FittedModel {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LrConfig>) return fit_lr(train, c.intercept);
        else if constexpr (std::is_same_v<T, SvrConfig>) return fit_svr(train, c);
        else if constexpr (std::is_same_v<T, NnConfig>) return fit_nn(train, c);
        else return fit_tspm(train, c);
      },
      cfg);
}

double predict(const FittedModel& model, const Vec& x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

double PowerModel::predict_normalized(const Vec& x) const {
  if (static_cast<std::size_t>(x.size()) != schema.size()) {
    throw std::invalid_argument("vector width does not match the model schema");
  }
  return powermod::predict(model, x);
}

double PowerModel::predict(const Vector& raw) const {
  if (static_cast<std::size_t>(raw.counters.size()) != schema.size()) {
    throw std::invalid_argument("vector width does not match the model schema");
  }
  return powermod::predict(model, normalize_counters(raw.counters, normalization));
}

PowerModel train_model(const ModelConfig& cfg, const CounterSchema& schema, std::span<const Vector> train) {
  PowerModel pm;
  pm.kind = kind_of(cfg);
  pm.schema = schema;
  pm.normalization = compute_normalization(train);
  const auto normalized = normalize(train, pm.normalization);
  pm.model = fit_model(cfg, normalized);
  return pm;
}

// ---- JSON -------------------------------------------------------------------

namespace {

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Mat mat_from(const json& j) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != r) throw DataError("matrix row count mismatch");
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Vec row = vec_from(data.at(static_cast<std::size_t>(i)));
    if (row.size() != c) throw DataError("matrix column count mismatch");
    m.row(i) = row.transpose();
  }
  return m;
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
  }
  return "sigmoid";
}

Activation activation_from(std::string_view s) {
  for (auto a : {Activation::Sigmoid, Activation::Tanh, Activation::Relu, Activation::Linear}) {
    if (activation_name(a) == s) return a;
  }
  throw DataError("unknown activation '" + std::string(s) + "'");
}

json kernel_json(const Kernel& k) {
  return json{{"type", k.type == KernelType::Rbf ? "rbf" : "linear"}, {"gamma", k.gamma}};
}

Kernel kernel_from(const json& j) {
  reject_unknown(j, {"type", "gamma"}, "kernel");
  Kernel k;
  if (j.contains("type")) {
    const auto t = j.at("type").get<std::string>();
    if (t == "rbf") k.type = KernelType::Rbf;
    else if (t == "linear") k.type = KernelType::Linear;
    else throw DataError("unknown kernel '" + t + "'");
  }
  read_opt(j, "gamma", k.gamma);
  return k;
}

json svr_config_json(const SvrConfig& c) {
  return json{{"kernel", kernel_json(c.kernel)},
              {"C", c.C},
              {"epsilon", c.epsilon},
              {"tolerance", c.tolerance},
              {"max_iterations", c.max_iterations}};
}

SvrConfig svr_config_from(const json& j) {
  reject_unknown(j, {"kernel", "C", "epsilon", "tolerance", "max_iterations"}, "SVR config");
  SvrConfig c;
  if (j.contains("kernel")) c.kernel = kernel_from(j.at("kernel"));
  read_opt(j, "C", c.C);
  read_opt(j, "epsilon", c.epsilon);
  read_opt(j, "tolerance", c.tolerance);
  read_opt(j, "max_iterations", c.max_iterations);
  c.validate();
  return c;
}

json nn_config_json(const NnConfig& c) {
  return json{{"hidden", c.hidden},
              {"activation", activation_name(c.activation)},
              {"optimizer", c.optimizer == Optimizer::Adam ? "adam" : "sgd"},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed}};
}

NnConfig nn_config_from(const json& j) {
  reject_unknown(j, {"hidden", "activation", "optimizer", "learning_rate", "epochs", "batch_size", "seed"},
                 "NN config");
  NnConfig c;
  read_opt(j, "hidden", c.hidden);
  if (j.contains("activation")) c.activation = activation_from(j.at("activation").get<std::string>());
  if (j.contains("optimizer")) {
    const auto o = j.at("optimizer").get<std::string>();
    if (o == "adam") c.optimizer = Optimizer::Adam;
    else if (o == "sgd") c.optimizer = Optimizer::Sgd;
    else throw DataError("unknown optimizer '" + o + "'");
  }
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

json linear_json(const LinearModel& m) {
  return json{{"coefficients", vec_json(m.coefficients)}, {"intercept", m.intercept}, {"has_intercept", m.has_intercept}};
}

LinearModel linear_from(const json& j) {
  LinearModel m;
  m.coefficients = vec_from(j.at("coefficients"));
  m.intercept = j.at("intercept").get<double>();
  m.has_intercept = j.at("has_intercept").get<bool>();
  return m;
}

json svr_json(const SvrModel& m) {
  return json{{"kernel", kernel_json(m.kernel)},   {"C", m.C},
              {"epsilon", m.epsilon},              {"support_vectors", mat_json(m.support_vectors)},
              {"dual_coef", vec_json(m.dual_coef)}, {"bias", m.bias}};
}

SvrModel svr_from(const json& j) {
  SvrModel m;
  m.kernel = kernel_from(j.at("kernel"));
  m.C = j.at("C").get<double>();
  m.epsilon = j.at("epsilon").get<double>();
  m.support_vectors = mat_from(j.at("support_vectors"));
  m.dual_coef = vec_from(j.at("dual_coef"));
  m.bias = j.at("bias").get<double>();
  if (m.dual_coef.size() != m.support_vectors.rows()) throw DataError("SVR coefficient count mismatch");
  return m;
}

json nn_json(const NnModel& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back({{"weights", mat_json(l.weights)}, {"bias", vec_json(l.bias)}});
  return json{{"activation", activation_name(m.activation)}, {"layers", layers}};
}

NnModel nn_from(const json& j) {
  NnModel m;
  m.activation = activation_from(j.at("activation").get<std::string>());
  for (const auto& l : j.at("layers")) m.layers.push_back({mat_from(l.at("weights")), vec_from(l.at("bias"))});
  if (m.layers.empty()) throw DataError("network has no layers");
  return m;
}

}  // namespace

json to_json(const ModelConfig& cfg) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LrConfig>) return json{{"intercept", c.intercept}};
        else if constexpr (std::is_same_v<T, SvrConfig>) return svr_config_json(c);
        else if constexpr (std::is_same_v<T, NnConfig>) return nn_config_json(c);
        else return json{{"base", {{"intercept", c.base.intercept}}}, {"difference", svr_config_json(c.difference)}};
      },
      cfg);
}

ModelConfig model_config_from_json(ModelKind kind, const json& j) {
  try {
    switch (kind) {
      case ModelKind::Lrpm: {
        reject_unknown(j, {"intercept"}, "LRPM config");
        LrConfig c;
        read_opt(j, "intercept", c.intercept);
        return c;
      }
      case ModelKind::Svmpm: return svr_config_from(j);
      case ModelKind::Nnpm: return nn_config_from(j);
      case ModelKind::Tspm: {
        reject_unknown(j, {"base", "difference"}, "TSPM config");
        TspmConfig c;
        if (j.contains("base")) {
          reject_unknown(j.at("base"), {"intercept"}, "TSPM base config");
          read_opt(j.at("base"), "intercept", c.base.intercept);
        }
        if (j.contains("difference")) c.difference = svr_config_from(j.at("difference"));
        return c;
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid ") + std::string(to_string(kind)) + " config: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid ") + std::string(to_string(kind)) + " config: " + e.what());
  }
  return LrConfig{};
}

json to_json(const ModelSet& set) {
  json j;
  for (auto k : {ModelKind::Lrpm, ModelKind::Svmpm, ModelKind::Nnpm, ModelKind::Tspm}) {
    j[std::string(to_string(k))] = to_json(set.get(k));
  }
  return j;
}

ModelSet model_set_from_json(const json& j) {
  reject_unknown(j, {"lrpm", "svmpm", "nnpm", "tspm"}, "models");
  ModelSet s;
  if (j.contains("lrpm")) s.lrpm = std::get<LrConfig>(model_config_from_json(ModelKind::Lrpm, j.at("lrpm")));
  if (j.contains("svmpm")) s.svmpm = std::get<SvrConfig>(model_config_from_json(ModelKind::Svmpm, j.at("svmpm")));
  if (j.contains("nnpm")) s.nnpm = std::get<NnConfig>(model_config_from_json(ModelKind::Nnpm, j.at("nnpm")));
  if (j.contains("tspm")) s.tspm = std::get<TspmConfig>(model_config_from_json(ModelKind::Tspm, j.at("tspm")));
  return s;
}

json to_json(const PowerModel& pm) {
  json params = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return linear_json(m);
        else if constexpr (std::is_same_v<T, SvrModel>) return svr_json(m);
        else if constexpr (std::is_same_v<T, NnModel>) return nn_json(m);
        else return json{{"base", linear_json(m.base)}, {"difference", svr_json(m.difference)}};
      },
      pm.model);
  return json{{"kind", to_string(pm.kind)},
              {"schema", pm.schema.names()},
              {"normalization", {{"min", vec_json(pm.normalization.min)}, {"max", vec_json(pm.normalization.max)}}},
              {"params", std::move(params)}};
}

PowerModel power_model_from_json(const json& j) {
  try {
    PowerModel pm;
    pm.kind = model_kind_from_string(j.at("kind").get<std::string>());
    pm.schema = CounterSchema(j.at("schema").get<std::vector<std::string>>());
    pm.normalization.min = vec_from(j.at("normalization").at("min"));
    pm.normalization.max = vec_from(j.at("normalization").at("max"));
    if (pm.normalization.size() != pm.schema.size() || pm.normalization.max.size() != pm.normalization.min.size()) {
      throw DataError("normalization width does not match schema");
    }
    const auto& p = j.at("params");
    switch (pm.kind) {
      case ModelKind::Lrpm: pm.model = linear_from(p); break;
      case ModelKind::Svmpm: pm.model = svr_from(p); break;
      case ModelKind::Nnpm: pm.model = nn_from(p); break;
      case ModelKind::Tspm: pm.model = TspmModel{linear_from(p.at("base")), svr_from(p.at("difference"))}; break;
    }
    return pm;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid model artifact: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid model artifact: ") + e.what());
  }
}

void save_model(const PowerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(model).dump(2) << '\n';
}

PowerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return power_model_from_json(j);
}

GridSearchResult grid_search(std::span<const ModelConfig> grid, const CounterSchema& schema,
                             std::span<const Vector> train, std::span<const Vector> validation) {
  if (grid.empty()) throw std::invalid_argument("empty hyper-parameter grid");
  GridSearchResult r;
  r.scores.assign(grid.size(), std::numeric_limits<double>::infinity());
  parallel_for(grid.size(), [&](std::size_t g) {
    const auto pm = train_model(grid[g], schema, train);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : validation) {
      if (auto e = percent_error(pm.predict(v), v.p_dynamic)) {
        sum += *e;
        ++n;
      }
    }
    if (n > 0) r.scores[g] = sum / static_cast<double>(n);
  });
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (r.scores[g] < r.scores[r.best]) r.best = g;
  }
  r.config = grid[r.best];
  return r;
}

}  // namespace powermod
