#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace powermod {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Ordered, unique counter identifiers shared by every vector of a dataset.
class CounterSchema {
 public:
  CounterSchema() = default;
  explicit CounterSchema(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t k) const { return names_.at(k); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  /// Schema restricted to the given column indices, in the given order.
  CounterSchema project(std::span<const std::size_t> indices) const;

  bool operator==(const CounterSchema&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Dynamic power (watts) paired with per-second counter rates for one interval.
struct Vector {
  double p_dynamic = 0.0;
  Vec counters;
  std::string trace_id;
  std::size_t seq = 0;
};

/// Counters min-max scaled into [0,1]; power carried through untouched.
struct NormalizedVector {
  double p_dynamic = 0.0;
  Vec counters;
  std::string trace_id;
  std::size_t seq = 0;
};

struct NormalizationParams {
  Vec min;
  Vec max;

  std::size_t size() const noexcept { return static_cast<std::size_t>(min.size()); }
};

NormalizationParams compute_normalization(std::span<const Vector> vectors);

/// Min-max scaling of one raw rate vector. Constant counters map to 0; values
/// outside the fitted range are clamped into [0,1].
template <typename Derived>
Vec normalize_counters(const Eigen::MatrixBase<Derived>& raw, const NormalizationParams& params) {
  const Vec range = params.max - params.min;
  Vec out(raw.size());
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    if (range(k) > 0.0) {
      out(k) = std::clamp((raw(k) - params.min(k)) / range(k), 0.0, 1.0);
    } else {
      out(k) = 0.0;
    }
  }
  return out;
}

template <typename Derived>
Vec denormalize_counters(const Eigen::MatrixBase<Derived>& scaled, const NormalizationParams& params) {
  return (params.min.array() + scaled.array() * (params.max - params.min).array()).matrix();
}

NormalizedVector normalize(const Vector& v, const NormalizationParams& params);
std::vector<NormalizedVector> normalize(std::span<const Vector> vectors,
                                        const NormalizationParams& params);

/// Symmetric ratio bounds [a_v, 1/a_v].
class SimilarityBounds {
 public:
  explicit SimilarityBounds(double a_v = 0.9);

  double a_v() const noexcept { return a_v_; }
  double b_v() const noexcept { return 1.0 / a_v_; }

 private:
  double a_v_;
};

/// Ratio test for one coordinate. 0/0 is similar; x/0 with x > 0 is not.
/// Evaluated as min/max >= a_v so the result is symmetric bit-for-bit.
inline bool ratio_within(double u, double w, double a_v) noexcept {
  const double lo = std::min(u, w);
  const double hi = std::max(u, w);
  if (hi == 0.0) return true;
  if (lo <= 0.0) return false;
  return lo / hi >= a_v;
}

template <typename DerivedA, typename DerivedB>
bool counters_similar(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& w,
                      double a_v) noexcept {
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (!ratio_within(u(k), w(k), a_v)) return false;
  }
  return true;
}

bool is_similar(const NormalizedVector& u, const NormalizedVector& w, const SimilarityBounds& bounds,
                bool include_power);

enum class MeterKind { PowerSensor, EnergyCounter };

std::string_view to_string(MeterKind kind);
MeterKind meter_kind_from_string(std::string_view text);

/// One Start-Stop sampling interval before rate derivation. Meter readings are
/// watts for a power sensor and cumulative joules for an energy counter.
struct RawSample {
  std::size_t seq = 0;
  double t = 1.0;
  Vec counter_begin;
  Vec counter_end;
  double meter_begin = 0.0;
  double meter_end = 0.0;
};

struct Trace {
  std::string trace_id;
  MeterKind meter_kind = MeterKind::PowerSensor;
  double p_static = 0.0;
  std::vector<RawSample> samples;
};

/// Traces plus the flattened vector view in (trace, seq) order.
struct Dataset {
  CounterSchema schema;
  std::vector<Trace> traces;
  std::vector<Vector> vectors;
  std::size_t rejected_samples = 0;

  const Trace* find_trace(std::string_view trace_id) const;
};

/// Keeps only the listed counter columns, in the listed order, in both the
/// raw traces and the derived vectors.
Dataset project(const Dataset& dataset, std::span<const std::size_t> columns);

Mat counter_matrix(std::span<const NormalizedVector> vectors);
Mat counter_matrix(std::span<const Vector> vectors);
Vec power_vector(std::span<const NormalizedVector> vectors);
Vec power_vector(std::span<const Vector> vectors);

}  // namespace powermod
