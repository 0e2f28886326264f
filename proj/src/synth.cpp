#include "powermod/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "json_util.hpp"
#include "powermod/error.hpp"
#include "powermod/ingest.hpp"
#include "powermod/parallel.hpp"

namespace powermod {

using json = nlohmann::json;
using detail::read_opt;
using detail::reject_unknown;
using detail::vec_from;
using detail::vec_json;

double PowerFunction::operator()(const Vec& u) const {
  double p = 0.0;
  for (std::size_t i = 0; i < relevant.size(); ++i) p += coefficients[i] * u(static_cast<Eigen::Index>(relevant[i]));
  if (relevant.size() >= 2) {
    p += cross_term * u(static_cast<Eigen::Index>(relevant[0])) * u(static_cast<Eigen::Index>(relevant[1]));
  }
  return p;
}

CounterSchema SynthSpec::schema() const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < counters; ++k) names.push_back((k < 10 ? "ctr0" : "ctr") + std::to_string(k));
  return CounterSchema(std::move(names));
}

double SynthSpec::scale(std::size_t k) const { return scales.empty() ? 1e6 * static_cast<double>(k + 1) : scales[k]; }

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("invalid synth spec: " + m); };
  if (counters == 0) fail("counters must be >= 1");
  if (traces == 0 || samples_per_trace == 0) fail("traces and samples_per_trace must be >= 1");
  if (phase_min < 3 || phase_max < phase_min) fail("phase lengths must satisfy 3 <= phase_min <= phase_max");
  if (idle_probability < 0.0 || volatile_probability < 0.0 || idle_probability + volatile_probability > 1.0) {
    fail("phase probabilities must be non-negative and sum to at most 1");
  }
  if (volatile_spread < 0.0 || volatile_spread >= 1.0) fail("volatile_spread must lie in [0, 1)");
  if (!(activity_min > 0.0 && activity_min <= activity_max && activity_max <= 1.0)) {
    fail("activity range must satisfy 0 < min <= max <= 1");
  }
  if (!scales.empty() && scales.size() != counters) fail("scales must list one value per counter");
  for (double s : scales) {
    if (!(s > 0.0)) fail("scales must be positive");
  }
  for (const auto& ph : phases) {
    if (ph.length < 3) fail("explicit phases must be at least 3 samples long");
    if (ph.activity.size() != 0 && static_cast<std::size_t>(ph.activity.size()) != counters) {
      fail("explicit phase activity must list one value per counter");
    }
    if ((ph.activity.array() < 0.0).any() || (ph.activity.array() > 1.0).any()) fail("activity must lie in [0, 1]");
  }
  if (power.relevant.empty()) fail("relevant counter set must be non-empty");
  if (power.relevant.size() != power.coefficients.size()) fail("one coefficient per relevant counter");
  for (auto r : power.relevant) {
    if (r >= counters) fail("relevant counter index out of range");
  }
  const auto& nz = noise;
  for (double r : {nz.type1_rate, nz.type2_rate, nz.type3_rate}) {
    if (r < 0.0 || r > 1.0) fail("noise rates must lie in [0, 1]");
  }
  if (nz.type1_rate + nz.type2_rate + nz.type3_rate > 0.5) fail("noise rates must sum to at most 0.5");
  if (nz.power_jitter < 0.0 || nz.counter_jitter < 0.0) fail("jitter must be non-negative");
  if (nz.interval_jitter < 0.0 || nz.interval_jitter >= 1.0) fail("interval_jitter must lie in [0, 1)");
  if (!(nz.type3_factor > 0.0) || nz.type3_factor == 1.0) fail("type3_factor must be positive and != 1");
  if (meter_kind == MeterKind::EnergyCounter && (nz.type1_rate > 0.0 || nz.type2_rate > 0.0)) {
    fail("Type I/II noise comes from boundary averaging and needs a power_sensor meter");
  }
  if (p_static < 0.0) fail("p_static must be >= 0");
}

SynthSpec noisy_spec(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  s.noise.type1_rate = 0.025;
  s.noise.type2_rate = 0.025;
  s.noise.type3_rate = 0.05;
  return s;
}

// ---- JSON -------------------------------------------------------------------

namespace {

json power_json(const PowerFunction& p) {
  return json{{"relevant", p.relevant}, {"coefficients", p.coefficients}, {"cross_term", p.cross_term}};
}

PowerFunction power_from(const json& j) {
  reject_unknown(j, {"relevant", "coefficients", "cross_term"}, "power");
  PowerFunction p;
  read_opt(j, "relevant", p.relevant);
  read_opt(j, "coefficients", p.coefficients);
  read_opt(j, "cross_term", p.cross_term);
  return p;
}

}  // namespace

json to_json(const SynthSpec& s) {
  json phases = json::array();
  for (const auto& ph : s.phases) {
    phases.push_back({{"length", ph.length},
                      {"activity", ph.activity.size() ? vec_json(ph.activity) : json(nullptr)},
                      {"volatile", ph.is_volatile}});
  }
  return json{{"counters", s.counters},
              {"traces", s.traces},
              {"samples_per_trace", s.samples_per_trace},
              {"phase_min", s.phase_min},
              {"phase_max", s.phase_max},
              {"idle_probability", s.idle_probability},
              {"volatile_probability", s.volatile_probability},
              {"volatile_spread", s.volatile_spread},
              {"activity_min", s.activity_min},
              {"activity_max", s.activity_max},
              {"scales", s.scales},
              {"phases", phases},
              {"power", power_json(s.power)},
              {"noise",
               {{"type1_rate", s.noise.type1_rate},
                {"type2_rate", s.noise.type2_rate},
                {"type3_rate", s.noise.type3_rate},
                {"type3_factor", s.noise.type3_factor},
                {"power_jitter", s.noise.power_jitter},
                {"counter_jitter", s.noise.counter_jitter},
                {"interval_jitter", s.noise.interval_jitter}}},
              {"meter_kind", to_string(s.meter_kind)},
              {"p_static", s.p_static},
              {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const json& j) {
  try {
    reject_unknown(j,
                   {"counters", "traces", "samples_per_trace", "phase_min", "phase_max", "idle_probability",
                    "volatile_probability", "volatile_spread", "activity_min", "activity_max", "scales", "phases",
                    "power", "noise", "meter_kind", "p_static", "seed"},
                   "synth spec");
    SynthSpec s;
    read_opt(j, "counters", s.counters);
    read_opt(j, "traces", s.traces);
    read_opt(j, "samples_per_trace", s.samples_per_trace);
    read_opt(j, "phase_min", s.phase_min);
    read_opt(j, "phase_max", s.phase_max);
    read_opt(j, "idle_probability", s.idle_probability);
    read_opt(j, "volatile_probability", s.volatile_probability);
    read_opt(j, "volatile_spread", s.volatile_spread);
    read_opt(j, "activity_min", s.activity_min);
    read_opt(j, "activity_max", s.activity_max);
    read_opt(j, "scales", s.scales);
    if (j.contains("phases")) {
      for (const auto& p : j.at("phases")) {
        reject_unknown(p, {"length", "activity", "volatile"}, "phase");
        PhaseSpec ph;
        read_opt(p, "length", ph.length);
        if (p.contains("activity") && !p.at("activity").is_null()) ph.activity = vec_from(p.at("activity"));
        read_opt(p, "volatile", ph.is_volatile);
        s.phases.push_back(std::move(ph));
      }
    }
    if (j.contains("power")) s.power = power_from(j.at("power"));
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      reject_unknown(n,
                     {"type1_rate", "type2_rate", "type3_rate", "type3_factor", "power_jitter", "counter_jitter",
                      "interval_jitter"},
                     "noise");
      read_opt(n, "type1_rate", s.noise.type1_rate);
      read_opt(n, "type2_rate", s.noise.type2_rate);
      read_opt(n, "type3_rate", s.noise.type3_rate);
      read_opt(n, "type3_factor", s.noise.type3_factor);
      read_opt(n, "power_jitter", s.noise.power_jitter);
      read_opt(n, "counter_jitter", s.noise.counter_jitter);
      read_opt(n, "interval_jitter", s.noise.interval_jitter);
    }
    if (j.contains("meter_kind")) s.meter_kind = meter_kind_from_string(j.at("meter_kind").get<std::string>());
    read_opt(j, "p_static", s.p_static);
    read_opt(j, "seed", s.seed);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid synth spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

std::string_view to_string(NoiseLabel label) {
  switch (label) {
    case NoiseLabel::None: return "none";
    case NoiseLabel::TypeI: return "type1";
    case NoiseLabel::TypeII: return "type2";
    case NoiseLabel::TypeIII: return "type3";
  }
  return "none";
}

NoiseLabel noise_label_from_string(std::string_view text) {
  for (auto l : {NoiseLabel::None, NoiseLabel::TypeI, NoiseLabel::TypeII, NoiseLabel::TypeIII}) {
    if (to_string(l) == text) return l;
  }
  throw DataError("unknown noise label '" + std::string(text) + "'");
}

const SampleTruth* GroundTruth::find(std::string_view trace_id, std::size_t seq) const {
  for (const auto& s : samples) {
    if (s.seq == seq && s.trace_id == trace_id) return &s;
  }
  return nullptr;
}

std::size_t GroundTruth::count(NoiseLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const SampleTruth& s) { return s.label == label; }));
}

json to_json(const GroundTruth& t) {
  json samples = json::array();
  for (const auto& s : t.samples) {
    samples.push_back({{"trace_id", s.trace_id},
                       {"seq", s.seq},
                       {"p_dynamic", s.p_dynamic},
                       {"label", to_string(s.label)},
                       {"fraction", s.fraction}});
  }
  return json{{"power", power_json(t.power)}, {"samples", std::move(samples)}};
}

GroundTruth ground_truth_from_json(const json& j) {
  try {
    GroundTruth t;
    t.power = power_from(j.at("power"));
    for (const auto& s : j.at("samples")) {
      t.samples.push_back({s.at("trace_id").get<std::string>(), s.at("seq").get<std::size_t>(),
                           s.at("p_dynamic").get<double>(), noise_label_from_string(s.at("label").get<std::string>()),
                           s.at("fraction").get<double>()});
    }
    return t;
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid ground truth: ") + e.what());
  }
}

// ---- generation ---------------------------------------------------------------

namespace {

enum class PhaseKind { Idle, Stable, Volatile };

struct Phase {
  std::size_t start = 0;
  std::size_t length = 0;
  PhaseKind kind = PhaseKind::Stable;
  Vec activity;
};

double draw_fraction(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.1, 0.8);
  const double f = d(rng);
  return f < 0.45 ? f : f + 0.1;
}

std::vector<Phase> plan_phases(const SynthSpec& spec, std::mt19937_64& rng) {
  std::vector<Phase> out;
  const auto n = static_cast<Eigen::Index>(spec.counters);
  std::size_t at = 0;
  if (!spec.phases.empty()) {
    for (std::size_t i = 0; at < spec.samples_per_trace; ++i) {
      const auto& ph = spec.phases[i % spec.phases.size()];
      Phase p;
      p.start = at;
      p.length = std::min(ph.length, spec.samples_per_trace - at);
      const bool idle = ph.activity.size() == 0 || (ph.activity.array() == 0.0).all();
      p.kind = idle ? PhaseKind::Idle : ph.is_volatile ? PhaseKind::Volatile : PhaseKind::Stable;
      p.activity = idle ? Vec::Zero(n) : ph.activity;
      at += p.length;
      out.push_back(std::move(p));
    }
    return out;
  }
  std::uniform_int_distribution<std::size_t> len(spec.phase_min, spec.phase_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> act(spec.activity_min, spec.activity_max);
  while (at < spec.samples_per_trace) {
    Phase p;
    p.start = at;
    p.length = std::min(len(rng), spec.samples_per_trace - at);
    const double draw = unit(rng);
    const bool after_idle = !out.empty() && out.back().kind == PhaseKind::Idle;
    if (draw < spec.idle_probability && !after_idle) {
      p.kind = PhaseKind::Idle;
    } else if (draw < spec.idle_probability + spec.volatile_probability) {
      p.kind = PhaseKind::Volatile;
    } else {
      p.kind = PhaseKind::Stable;
    }
    p.activity = Vec::Zero(n);
    if (p.kind != PhaseKind::Idle) {
      for (Eigen::Index k = 0; k < n; ++k) p.activity(k) = act(rng);
    }
    at += p.length;
    out.push_back(std::move(p));
  }
  return out;
}

struct Injection {
  NoiseLabel label = NoiseLabel::None;
  double fraction = 0.0;
  Eigen::Index other = -1;  // sample whose activity is mixed in (Type I/II)
  bool stop = false;        // Type I: process stops (true) or starts (false) mid-interval
};

struct Candidate {
  std::size_t pos = 0;
  Injection inj;
};

// Places up to `wanted` injections at candidates with no injection within two
// samples; returns how many were placed.
std::size_t pick(std::vector<Candidate> cands, std::size_t wanted, std::vector<Injection>& plan,
                 std::mt19937_64& rng) {
  std::shuffle(cands.begin(), cands.end(), rng);
  std::size_t got = 0;
  for (const auto& c : cands) {
    if (got == wanted) break;
    bool clear = true;
    const std::size_t lo = c.pos >= 2 ? c.pos - 2 : 0;
    for (std::size_t q = lo; q <= std::min(c.pos + 2, plan.size() - 1) && clear; ++q) {
      clear = plan[q].label == NoiseLabel::None;
    }
    if (!clear) continue;
    plan[c.pos] = c.inj;
    ++got;
  }
  return got;
}

std::size_t wanted(double rate, std::size_t samples) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(samples)));
}

struct TraceOutput {
  Trace trace;
  std::vector<SampleTruth> truth;
};

// Per-type injection shortfall carried from one trace to the next.
using Deficit = std::array<std::size_t, 3>;

struct TracePlan {
  std::string id;
  std::mt19937_64 rng;
  std::vector<Vec> activity;
  std::vector<Injection> plan;
  std::array<std::vector<Candidate>, 3> candidates;  // Type I, II, III
};

TracePlan plan_trace(const SynthSpec& spec, std::size_t index, const Deficit& quota, Deficit& deficit) {
  std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(index) + 1};
  std::mt19937_64 rng(seq);
  const auto n = static_cast<Eigen::Index>(spec.counters);
  const std::size_t len = spec.samples_per_trace;
  std::string id = std::to_string(index);
  id = "trace_" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id;

  const auto phases = plan_phases(spec, rng);

  // Per-sample activity.
  std::vector<Vec> activity(len);
  std::uniform_real_distribution<double> spread(-spec.volatile_spread, spec.volatile_spread);
  for (const auto& ph : phases) {
    for (std::size_t i = ph.start; i < ph.start + ph.length; ++i) {
      activity[i] = ph.activity;
      if (ph.kind == PhaseKind::Volatile) {
        for (Eigen::Index k = 0; k < n; ++k) activity[i](k) = std::clamp(ph.activity(k) * (1.0 + spread(rng)), 0.0, 1.0);
      }
    }
  }

  // Noise positions; neighbours that the filter relies on stay clean.
  std::vector<Injection> plan(len);
  std::vector<Candidate> c1, c2, c3;
  for (std::size_t p = 0; p < phases.size(); ++p) {
    const auto& ph = phases[p];
    const Phase* prev = p > 0 ? &phases[p - 1] : nullptr;
    const Phase* next = p + 1 < phases.size() ? &phases[p + 1] : nullptr;
    if (ph.kind == PhaseKind::Idle) {
      if (prev && prev->kind == PhaseKind::Stable && prev->length >= 3) {
        c1.push_back({ph.start, {NoiseLabel::TypeI, 0.0, static_cast<Eigen::Index>(prev->start), true}});
      }
      if (next && next->kind == PhaseKind::Stable && next->length >= 3) {
        c1.push_back({ph.start + ph.length - 1, {NoiseLabel::TypeI, 0.0, static_cast<Eigen::Index>(next->start), false}});
      }
    }
    if (ph.kind == PhaseKind::Stable) {
      if (prev && prev->kind == PhaseKind::Stable && prev->length >= 3 && ph.length >= 4) {
        c2.push_back({ph.start, {NoiseLabel::TypeII, 0.0, static_cast<Eigen::Index>(prev->start), false}});
      }
      for (std::size_t i = ph.start + 2; i + 3 <= ph.start + ph.length; ++i) {
        c3.push_back({i, {NoiseLabel::TypeIII, 0.0, -1, false}});
      }
    }
  }
  TracePlan tp{std::move(id), std::move(rng), std::move(activity), std::move(plan), {c1, c2, c3}};
  for (std::size_t t : {1, 0, 2}) {  // Type II has the fewest candidates
    const std::size_t want = quota[t] + deficit[t];
    deficit[t] = want - pick(tp.candidates[t], want, tp.plan, tp.rng);
  }
  return tp;
}

TraceOutput render_trace(const SynthSpec& spec, TracePlan tp) {
  const auto n = static_cast<Eigen::Index>(spec.counters);
  const std::size_t len = spec.samples_per_trace;
  const std::string& id = tp.id;
  auto& rng = tp.rng;
  const auto& activity = tp.activity;
  const auto& plan = tp.plan;

  TraceOutput out;
  out.trace.trace_id = id;
  out.trace.meter_kind = spec.meter_kind;
  out.trace.p_static = spec.p_static;

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> tj(-spec.noise.interval_jitter, spec.noise.interval_jitter);
  Vec cumulative = Vec::Zero(n);
  double energy = 0.0;
  const double ps = spec.p_static;
  const auto& nz = spec.noise;

  for (std::size_t i = 0; i < len; ++i) {
    const auto& inj = plan[i];
    const double t = 1.0 + tj(rng);
    // What the interval really did: activity share and true dynamic power.
    Vec share = activity[i];
    double p_begin = spec.power(activity[i]);
    double p_end = p_begin;
    double p_true = p_begin;
    if (inj.label == NoiseLabel::TypeI) {
      const Vec& busy = activity[static_cast<std::size_t>(inj.other)];
      share = inj.fraction * busy;
      const double p_busy = spec.power(busy);
      p_true = inj.fraction * p_busy;
      p_begin = inj.stop ? p_busy : 0.0;
      p_end = inj.stop ? 0.0 : p_busy;
    } else if (inj.label == NoiseLabel::TypeII) {
      const Vec& before = activity[static_cast<std::size_t>(inj.other)];
      share = inj.fraction * before + (1.0 - inj.fraction) * activity[i];
      const double p_before = spec.power(before);
      p_true = inj.fraction * p_before + (1.0 - inj.fraction) * p_end;
      p_begin = p_before;
    }

    RawSample clean;
    clean.seq = i;
    clean.t = t;
    clean.counter_begin = cumulative;
    clean.counter_end = cumulative;
    RawSample noisy = clean;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double rate = spec.scale(static_cast<std::size_t>(k)) * share(k);
      const double jittered = std::max(rate * (1.0 + nz.counter_jitter * gauss(rng)), 0.0);
      clean.counter_end(k) += std::round(rate * t);
      noisy.counter_end(k) += std::round(jittered * t);
    }
    cumulative = noisy.counter_end;

    const double factor = inj.label == NoiseLabel::TypeIII ? nz.type3_factor : 1.0;
    const double jb = 1.0 + nz.power_jitter * gauss(rng);
    const double je = 1.0 + nz.power_jitter * gauss(rng);
    if (spec.meter_kind == MeterKind::PowerSensor) {
      clean.meter_begin = ps + p_true;
      clean.meter_end = ps + p_true;
      noisy.meter_begin = ps + std::max(p_begin * factor * jb, 0.0);
      noisy.meter_end = ps + std::max(p_end * factor * je, 0.0);
    } else {
      clean.meter_begin = energy;
      clean.meter_end = energy + (ps + p_true) * t;
      noisy.meter_begin = energy;
      noisy.meter_end = energy + (ps + std::max(p_true * factor * jb, 0.0)) * t;
      energy = noisy.meter_end;
    }

    const Vector truth = derive_vector(clean, spec.meter_kind, ps, i, id);
    out.truth.push_back({id, i, truth.p_dynamic, inj.label, inj.fraction});
    out.trace.samples.push_back(std::move(noisy));
  }
  return out;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec) {
  spec.validate();
  // Planning is serial so a trace short of candidates can hand its share of
  // the noise quota to later traces.
  const double rates[3] = {spec.noise.type1_rate, spec.noise.type2_rate, spec.noise.type3_rate};
  Deficit total{};
  for (std::size_t t = 0; t < 3; ++t) total[t] = wanted(rates[t], spec.traces * spec.samples_per_trace);
  Deficit deficit{};
  std::vector<TracePlan> plans;
  plans.reserve(spec.traces);
  for (std::size_t i = 0; i < spec.traces; ++i) {
    Deficit quota{};
    for (std::size_t t = 0; t < 3; ++t) quota[t] = total[t] / spec.traces + (i < total[t] % spec.traces ? 1 : 0);
    plans.push_back(plan_trace(spec, i, quota, deficit));
  }
  for (std::size_t t : {1, 0, 2}) {
    for (auto& tp : plans) {
      if (deficit[t] == 0) break;
      deficit[t] -= pick(tp.candidates[t], deficit[t], tp.plan, tp.rng);
    }
  }
  for (auto& tp : plans) {
    for (auto& inj : tp.plan) {
      if (inj.label == NoiseLabel::TypeI || inj.label == NoiseLabel::TypeII) inj.fraction = draw_fraction(tp.rng);
    }
  }
  const NoiseLabel labels[3] = {NoiseLabel::TypeI, NoiseLabel::TypeII, NoiseLabel::TypeIII};
  for (std::size_t t = 0; t < 3; ++t) {
    if (deficit[t] == 0) continue;
    throw std::invalid_argument("infeasible synth spec: room for " + std::to_string(total[t] - deficit[t]) + " " +
                                std::string(to_string(labels[t])) + " positions but " + std::to_string(total[t]) +
                                " were requested");
  }
  std::vector<TraceOutput> traces(spec.traces);
  parallel_for(spec.traces, [&](std::size_t i) { traces[i] = render_trace(spec, std::move(plans[i])); });
  SynthOutput out;
  out.truth.power = spec.power;
  std::vector<Trace> raw;
  for (auto& t : traces) {
    raw.push_back(std::move(t.trace));
    out.truth.samples.insert(out.truth.samples.end(), t.truth.begin(), t.truth.end());
  }
  out.dataset = assemble_dataset(spec.schema(), std::move(raw));
  if (out.dataset.rejected_samples != 0) throw std::logic_error("synthetic trace produced a wrapped counter");
  return out;
}

void write_synth(const SynthOutput& out, const std::filesystem::path& dir) {
  write_dataset(out.dataset, dir);
  std::ofstream f(dir / "ground_truth.json");
  if (!f) throw DataError("cannot write " + (dir / "ground_truth.json").string());
  f << to_json(out.truth).dump(1) << '\n';
}

// ---- scoring -------------------------------------------------------------------

FilterScore score_filter(const FilterReport& report, const GroundTruth& truth) {
  std::map<std::pair<std::string_view, std::size_t>, const SampleTruth*> index;
  for (const auto& s : truth.samples) index[{s.trace_id, s.seq}] = &s;
  if (report.annotations.size() != truth.samples.size()) {
    throw DataError("lineage mismatch: filter report covers " + std::to_string(report.annotations.size()) +
                    " vectors, ground truth " + std::to_string(truth.samples.size()));
  }

  FilterScore score;
  double se1 = 0.0, se2 = 0.0;
  std::size_t n1 = 0, n2 = 0, removed_clean = 0, not_type3 = 0;
  auto tally = [](TypeScore& ts, bool labelled, bool flagged) {
    ts.labelled += labelled;
    ts.flagged += flagged;
    ts.hits += labelled && flagged;
  };
  for (const auto& a : report.annotations) {
    const auto it = index.find({a.trace_id, a.seq});
    if (it == index.end()) throw DataError("lineage mismatch: " + a.trace_id + "#" + std::to_string(a.seq));
    const auto& t = *it->second;
    tally(score.type1, t.label == NoiseLabel::TypeI, a.action == FilterAction::CorrectedTypeI);
    tally(score.type2, t.label == NoiseLabel::TypeII, a.action == FilterAction::CorrectedTypeII);
    tally(score.type3, t.label == NoiseLabel::TypeIII, a.action == FilterAction::RemovedTypeIII);
    if (a.action == FilterAction::CorrectedTypeI) {
      se1 += (a.final_power - t.p_dynamic) * (a.final_power - t.p_dynamic);
      ++n1;
    }
    if (a.action == FilterAction::CorrectedTypeII) {
      se2 += (a.final_power - t.p_dynamic) * (a.final_power - t.p_dynamic);
      ++n2;
    }
    if (t.label != NoiseLabel::TypeIII) {
      ++not_type3;
      removed_clean += a.action == FilterAction::RemovedTypeIII;
    }
  }
  for (TypeScore* ts : {&score.type1, &score.type2, &score.type3}) {
    ts->no_positives = ts->flagged == 0;
    ts->precision = ts->flagged ? static_cast<double>(ts->hits) / static_cast<double>(ts->flagged) : 1.0;
    ts->recall = ts->labelled ? static_cast<double>(ts->hits) / static_cast<double>(ts->labelled) : 1.0;
  }
  score.type1_rmse = n1 ? std::sqrt(se1 / static_cast<double>(n1)) : 0.0;
  score.type2_rmse = n2 ? std::sqrt(se2 / static_cast<double>(n2)) : 0.0;
  score.false_removal_rate = not_type3 ? static_cast<double>(removed_clean) / static_cast<double>(not_type3) : 0.0;
  return score;
}

}  // namespace powermod
