#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "powermod/core.hpp"
#include "powermod/nfilter.hpp"

namespace powermod {

/// Ground-truth dynamic power: sum_j coef_j * u_j over the relevant counters
/// plus cross_term * u_a * u_b for the first two relevant counters, where u
/// is the activity level in [0, 1] behind each counter's rate.
struct PowerFunction {
  std::vector<std::size_t> relevant{0, 3, 7};
  std::vector<double> coefficients{3.0, 2.0, 2.5};
  double cross_term = 1.5;

  double operator()(const Vec& activity) const;
};

struct NoisePlan {
  double type1_rate = 0.0;
  double type2_rate = 0.0;
  double type3_rate = 0.0;
  double type3_factor = 3.0;      // multiplies the dynamic power reading
  double power_jitter = 0.01;     // relative sd of each meter reading's dynamic part
  double counter_jitter = 0.002;  // relative sd of each counter rate
  double interval_jitter = 0.02;  // t drawn uniformly from 1 +- this
};

/// An explicit phase. Empty activity means idle.
struct PhaseSpec {
  std::size_t length = 8;
  Vec activity;
  bool is_volatile = false;
};

struct SynthSpec {
  std::size_t counters = 12;
  std::size_t traces = 8;
  std::size_t samples_per_trace = 200;
  std::size_t phase_min = 4;
  std::size_t phase_max = 8;
  double idle_probability = 0.35;
  double volatile_probability = 0.05;
  double volatile_spread = 0.3;  // per-sample relative spread of activity in a volatile phase
  double activity_min = 0.1;
  double activity_max = 1.0;
  std::vector<double> scales;     // events/s at full activity; empty means 1e6 * (k + 1)
  std::vector<PhaseSpec> phases;  // when set, every trace cycles through these instead of drawing phases
  PowerFunction power;
  NoisePlan noise;
  MeterKind meter_kind = MeterKind::PowerSensor;
  double p_static = 2.0;
  std::uint64_t seed = 42;

  CounterSchema schema() const;
  double scale(std::size_t k) const;
  void validate() const;
};

/// A spec with the default phase structure and 10% mixed noise.
SynthSpec noisy_spec(std::uint64_t seed);

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

enum class NoiseLabel { None, TypeI, TypeII, TypeIII };

std::string_view to_string(NoiseLabel label);
NoiseLabel noise_label_from_string(std::string_view text);

struct SampleTruth {
  std::string trace_id;
  std::size_t seq = 0;
  double p_dynamic = 0.0;  // what the meter would report for the uncorrupted interval
  NoiseLabel label = NoiseLabel::None;
  double fraction = 0.0;   // split point of a Type I/II interval
};

struct GroundTruth {
  std::vector<SampleTruth> samples;  // dataset vector order
  PowerFunction power;

  const SampleTruth* find(std::string_view trace_id, std::size_t seq) const;
  std::size_t count(NoiseLabel label) const;
};

nlohmann::json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct SynthOutput {
  Dataset dataset;
  GroundTruth truth;
};

/// Deterministic per seed. Throws std::invalid_argument for an infeasible
/// spec (e.g. phases too short to host the requested noise).
SynthOutput generate(const SynthSpec& spec);

/// Writes the dataset in the ingest format plus ground_truth.json.
void write_synth(const SynthOutput& out, const std::filesystem::path& dir);

struct TypeScore {
  std::size_t labelled = 0;
  std::size_t flagged = 0;
  std::size_t hits = 0;
  double precision = 1.0;
  double recall = 1.0;
  bool no_positives = false;  // nothing flagged, precision reported as 1
};

struct FilterScore {
  TypeScore type1;
  TypeScore type2;
  TypeScore type3;
  double type1_rmse = 0.0;  // corrected vs true power over vectors corrected as Type I
  double type2_rmse = 0.0;
  double false_removal_rate = 0.0;  // removed vectors without a Type III label / unlabelled-as-III vectors
};

/// Precision and recall per noise type against the injected labels. Throws
/// DataError when the report does not describe the same vectors.
FilterScore score_filter(const FilterReport& report, const GroundTruth& truth);

}  // namespace powermod
