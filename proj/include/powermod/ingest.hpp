#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "powermod/core.hpp"
#include "powermod/error.hpp"

namespace powermod {

/// Raised for a sample whose cumulative counter (or energy) reading went
/// backwards. Such samples are rejected, never repaired.
class CounterWrapError : public DataError {
 public:
  using DataError::DataError;
};

/// Start-Stop derivation: rates are count deltas over t; total power is the
/// boundary average for a power sensor and the energy delta over t for an
/// energy counter. Dynamic power is total minus p_static, clamped at zero.
Vector derive_vector(const RawSample& s, MeterKind kind, double p_static, std::size_t seq,
                     std::string trace_id);

struct TraceMetadata {
  std::string trace_id;
  MeterKind meter_kind = MeterKind::PowerSensor;
  double p_static_watts = 0.0;
  std::vector<std::string> schema;
};

/// Sidecar file holding metadata for `trace.csv` is `trace.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

TraceMetadata read_metadata(const std::filesystem::path& json);
void write_metadata(const TraceMetadata& meta, const std::filesystem::path& json);

Trace load_trace(const std::filesystem::path& csv, const CounterSchema& schema);

/// Derives vectors for every trace. Wrapped samples are dropped and counted in
/// `rejected_samples`.
Dataset assemble_dataset(CounterSchema schema, std::vector<Trace> traces);

Dataset load_dataset(std::span<const std::filesystem::path> csvs, const CounterSchema& schema);

/// Loads every `*.csv` in `dir` (sorted by file name). The schema comes from
/// the first sidecar; all others must agree.
Dataset load_dataset(const std::filesystem::path& dir);

void write_trace(const Trace& trace, const CounterSchema& schema, const std::filesystem::path& csv);

/// Writes each trace as `<trace_id>.csv` plus sidecar.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Re-encodes derived vectors as raw samples (t = 1 s, counters from zero,
/// meter reading equal to dynamic power, p_static 0) so that deriving them
/// again reproduces the vectors bit-for-bit. Original seq values are kept.
Trace encode_vectors(const std::string& trace_id, MeterKind kind, std::span<const Vector> vectors);

/// Builds a dataset whose raw traces are the canonical encoding of `vectors`.
/// Trace order and meter kinds follow `reference`.
Dataset dataset_from_vectors(const Dataset& reference, std::vector<Vector> vectors);

}  // namespace powermod
