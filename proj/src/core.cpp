#include "powermod/core.hpp"

#include <set>
#include <stdexcept>

namespace powermod {

CounterSchema::CounterSchema(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw std::invalid_argument("counter schema must contain at least one counter");
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("counter names must be non-empty");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate counter name '" + n + "'");
  }
}

std::optional<std::size_t> CounterSchema::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (names_[k] == name) return k;
  }
  return std::nullopt;
}

CounterSchema CounterSchema::project(std::span<const std::size_t> indices) const {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (auto k : indices) out.push_back(names_.at(k));
  return CounterSchema(std::move(out));
}

NormalizationParams compute_normalization(std::span<const Vector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("empty dataset");
  NormalizationParams p;
  p.min = vectors.front().counters;
  p.max = vectors.front().counters;
  for (const auto& v : vectors.subspan(1)) {
    if (v.counters.size() != p.min.size()) throw std::invalid_argument("vector does not match schema width");
    p.min = p.min.cwiseMin(v.counters);
    p.max = p.max.cwiseMax(v.counters);
  }
  return p;
}

NormalizedVector normalize(const Vector& v, const NormalizationParams& params) {
  if (v.counters.size() != static_cast<Eigen::Index>(params.size())) {
    throw std::invalid_argument("vector does not match normalization width");
  }
  return NormalizedVector{v.p_dynamic, normalize_counters(v.counters, params), v.trace_id, v.seq};
}

std::vector<NormalizedVector> normalize(std::span<const Vector> vectors, const NormalizationParams& params) {
  std::vector<NormalizedVector> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(normalize(v, params));
  return out;
}

SimilarityBounds::SimilarityBounds(double a_v) : a_v_(a_v) {
  if (!(a_v > 0.0 && a_v <= 1.0)) throw std::invalid_argument("similarity bound a_v must lie in (0, 1]");
}

bool is_similar(const NormalizedVector& u, const NormalizedVector& w, const SimilarityBounds& bounds,
                bool include_power) {
  if (include_power && !ratio_within(u.p_dynamic, w.p_dynamic, bounds.a_v())) return false;
  return counters_similar(u.counters, w.counters, bounds.a_v());
}

std::string_view to_string(MeterKind kind) {
  return kind == MeterKind::PowerSensor ? "power_sensor" : "energy_counter";
}

MeterKind meter_kind_from_string(std::string_view text) {
  if (text == "power_sensor") return MeterKind::PowerSensor;
  if (text == "energy_counter") return MeterKind::EnergyCounter;
  throw std::invalid_argument("unknown meter kind '" + std::string(text) + "'");
}

const Trace* Dataset::find_trace(std::string_view trace_id) const {
  for (const auto& t : traces) {
    if (t.trace_id == trace_id) return &t;
  }
  return nullptr;
}

namespace {

Vec take(const Vec& v, std::span<const std::size_t> columns) {
  Vec out(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(columns[i]));
  return out;
}

template <typename V>
Mat counters_of(std::span<const V> vectors) {
  if (vectors.empty()) return Mat();
  Mat x(static_cast<Eigen::Index>(vectors.size()), vectors.front().counters.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = vectors[i].counters.transpose();
  return x;
}

template <typename V>
Vec powers_of(std::span<const V> vectors) {
  Vec y(static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) y(static_cast<Eigen::Index>(i)) = vectors[i].p_dynamic;
  return y;
}

}  // namespace

Dataset project(const Dataset& dataset, std::span<const std::size_t> columns) {
  for (auto c : columns) {
    if (c >= dataset.schema.size()) throw std::invalid_argument("projection column out of range");
  }
  Dataset out;
  out.schema = dataset.schema.project(columns);
  out.rejected_samples = dataset.rejected_samples;
  out.traces.reserve(dataset.traces.size());
  for (const auto& t : dataset.traces) {
    Trace p{t.trace_id, t.meter_kind, t.p_static, {}};
    p.samples.reserve(t.samples.size());
    for (const auto& s : t.samples) {
      p.samples.push_back(RawSample{s.seq, s.t, take(s.counter_begin, columns), take(s.counter_end, columns),
                                    s.meter_begin, s.meter_end});
    }
    out.traces.push_back(std::move(p));
  }
  out.vectors.reserve(dataset.vectors.size());
  for (const auto& v : dataset.vectors) {
    out.vectors.push_back(Vector{v.p_dynamic, take(v.counters, columns), v.trace_id, v.seq});
  }
  return out;
}

Mat counter_matrix(std::span<const NormalizedVector> vectors) { return counters_of(vectors); }
Mat counter_matrix(std::span<const Vector> vectors) { return counters_of(vectors); }
Vec power_vector(std::span<const NormalizedVector> vectors) { return powers_of(vectors); }
Vec power_vector(std::span<const Vector> vectors) { return powers_of(vectors); }

}  // namespace powermod
