#include "powermod/nfilter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "powermod/ingest.hpp"

namespace powermod {

void NoiseConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
  };
  unit(eps_half, "eps_half");
  unit(eps_ratio, "eps_ratio");
  unit(delta_half, "delta_half");
  if (!(min_separation > 0.0 && min_separation < 1.0)) throw std::invalid_argument("min_separation must lie in (0, 1)");
  if (consecutive_run < 2) throw std::invalid_argument("consecutive_run must be >= 2");
}

std::string_view to_string(FilterAction action) {
  switch (action) {
    case FilterAction::Untouched: return "untouched";
    case FilterAction::CorrectedTypeI: return "corrected_type1";
    case FilterAction::CorrectedTypeII: return "corrected_type2";
    case FilterAction::RemovedTypeIII: return "removed_type3";
  }
  return "untouched";
}

Neighbours find_neighbours(std::span<const NormalizedVector> vectors) {
  Neighbours nb;
  nb.prev.assign(vectors.size(), Neighbours::npos);
  nb.next.assign(vectors.size(), Neighbours::npos);
  std::map<std::pair<std::string_view, std::size_t>, std::size_t> where;
  for (std::size_t i = 0; i < vectors.size(); ++i) where[{vectors[i].trace_id, vectors[i].seq}] = i;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.seq > 0) {
      if (auto it = where.find({v.trace_id, v.seq - 1}); it != where.end()) nb.prev[i] = it->second;
    }
    if (auto it = where.find({v.trace_id, v.seq + 1}); it != where.end()) nb.next[i] = it->second;
  }
  return nb;
}

std::vector<char> identify_normal(std::span<const NormalizedVector> vectors, std::span<const VectorGroup> groups,
                                  const NoiseConfig& cfg) {
  const auto group_of = group_assignment(groups, vectors.size());
  const auto nb = find_neighbours(vectors);
  std::vector<char> group_normal(groups.size(), 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto g = group_of[i];
    if (group_normal[g]) continue;
    const auto p = nb.prev[i];
    if (p != Neighbours::npos && group_of[p] == g) continue;  // not the start of a run
    std::size_t len = 1;
    for (auto j = nb.next[i]; j != Neighbours::npos && group_of[j] == g; j = nb.next[j]) ++len;
    if (len >= cfg.consecutive_run) group_normal[g] = 1;
  }
  std::vector<char> normal(vectors.size(), 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) normal[i] = group_normal[group_of[i]];
  return normal;
}

namespace {

bool flag_set(std::span<const char> mask, std::size_t i, bool fallback) {
  return mask.empty() ? fallback : mask[i] != 0;
}

bool near_half(double mean, double delta) { return std::abs(mean - 0.5) <= delta; }

struct RatioSet {
  bool usable = false;
  double mean = 0.0;
  double first = 0.0;
};

RatioSet summarize(const std::vector<double>& values, double first, const NoiseConfig& cfg) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (*hi - *lo > cfg.eps_ratio) return {};
  if (near_half(mean, cfg.delta_half)) return {};
  return {true, mean, first};
}

// Counter ratios of v against a neighbour. A coordinate where both are zero
// carries no information and is skipped; a nonzero over zero rules the pair out.
RatioSet type1_ratios(const Vec& v, const Vec& nr, const NoiseConfig& cfg) {
  std::vector<double> ratios;
  double first = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (nr(k) == 0.0) {
      if (v(k) != 0.0) return {};
      continue;
    }
    if (ratios.empty()) first = v(k) / nr(k);
    ratios.push_back(v(k) / nr(k));
  }
  return summarize(ratios, first, cfg);
}

RatioSet type2_fractions(const Vec& v, const Vec& before, const Vec& after, const NoiseConfig& cfg) {
  std::vector<double> fractions;
  double first = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double den = before(k) - after(k);
    if (std::abs(den) < cfg.min_separation) continue;
    const double r = (v(k) - after(k)) / den;
    if (fractions.empty()) first = r;
    fractions.push_back(r);
  }
  return summarize(fractions, first, cfg);
}

}  // namespace

std::vector<PowerCorrection> detect_correct_type1(std::span<NormalizedVector> vectors, std::span<const char> normal,
                                                  const NoiseConfig& cfg, std::span<const char> eligible) {
  const auto nb = find_neighbours(vectors);
  std::vector<PowerCorrection> found;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (normal[i] || !flag_set(eligible, i, true)) continue;
    const double p = vectors[i].p_dynamic;
    for (auto nr : {nb.prev[i], nb.next[i]}) {
      if (nr == Neighbours::npos || !normal[nr]) continue;
      const double p_nr = vectors[nr].p_dynamic;
      if (!(p_nr > 0.0)) continue;
      if (std::abs(p - p_nr / 2.0) > cfg.eps_half * p_nr) continue;
      const auto ratios = type1_ratios(vectors[i].counters, vectors[nr].counters, cfg);
      if (!ratios.usable) continue;
      const double ratio = cfg.mean_ratio_correction ? ratios.mean : ratios.first;
      found.push_back({i, std::max(p_nr * ratio, 0.0), vectors[nr].seq});
      break;
    }
  }
  for (const auto& c : found) vectors[c.index].p_dynamic = c.power;
  return found;
}

std::vector<PowerCorrection> detect_correct_type2(std::span<NormalizedVector> vectors, std::span<const char> normal,
                                                  const NoiseConfig& cfg, std::span<const char> eligible,
                                                  std::span<const char> skip) {
  const auto nb = find_neighbours(vectors);
  std::vector<PowerCorrection> found;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (normal[i] || !flag_set(eligible, i, true) || flag_set(skip, i, false)) continue;
    const auto before = nb.prev[i];
    const auto after = nb.next[i];
    if (before == Neighbours::npos || after == Neighbours::npos) continue;
    if (!normal[before] || !normal[after]) continue;
    const double p_before = vectors[before].p_dynamic;
    const double p_after = vectors[after].p_dynamic;
    const double mid = (p_before + p_after) / 2.0;
    if (!(mid > 0.0)) continue;
    if (std::abs(vectors[i].p_dynamic - mid) > cfg.eps_half * mid) continue;
    const auto fr = type2_fractions(vectors[i].counters, vectors[before].counters, vectors[after].counters, cfg);
    if (!fr.usable) continue;
    const double r = cfg.mean_ratio_correction ? fr.mean : fr.first;
    found.push_back({i, std::max(r * p_before + (1.0 - r) * p_after, 0.0), vectors[before].seq});
  }
  for (const auto& c : found) vectors[c.index].p_dynamic = c.power;
  return found;
}

std::vector<char> remove_type3(std::span<const NormalizedVector> vectors, std::span<const VectorGroup> counter_groups,
                               std::span<const char> normal, const NoiseConfig& cfg) {
  std::vector<char> removed(vectors.size(), 0);
  std::vector<double> reference;
  for (const auto& g : counter_groups) {
    reference.clear();
    for (auto m : g.members) {
      if (normal[m]) reference.push_back(vectors[m].p_dynamic);
    }
    if (reference.empty()) continue;
    std::sort(reference.begin(), reference.end());
    const std::size_t h = reference.size() / 2;
    const double median = reference.size() % 2 ? reference[h] : (reference[h - 1] + reference[h]) / 2.0;
    for (auto m : g.members) {
      if (!ratio_within(vectors[m].p_dynamic, median, cfg.type3_bounds.a_v())) removed[m] = 1;
    }
  }
  return removed;
}

FilterResult filter(const Dataset& dataset, const NoiseConfig& cfg) {
  cfg.validate();
  const auto& raw = dataset.vectors;
  FilterReport report;
  report.config = cfg;
  report.input = raw.size();
  if (raw.empty()) return {dataset, report};

  const auto params = compute_normalization(raw);
  auto vectors = normalize(raw, params);

  std::vector<char> boundary_ok(vectors.size(), 0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    switch (cfg.boundary_scope) {
      case BoundaryNoiseScope::Always: boundary_ok[i] = 1; break;
      case BoundaryNoiseScope::Never: boundary_ok[i] = 0; break;
      case BoundaryNoiseScope::Auto: {
        const Trace* t = dataset.find_trace(vectors[i].trace_id);
        boundary_ok[i] = t == nullptr || t->meter_kind == MeterKind::PowerSensor;
        break;
      }
    }
  }

  // group, then find the normal runs
  const auto groups = cluster(vectors, cfg.bounds, true);
  const auto normal = identify_normal(vectors, groups, cfg);
  // boundary corrections
  const auto type1 = detect_correct_type1(vectors, normal, cfg, boundary_ok);
  std::vector<char> corrected(vectors.size(), 0);
  for (const auto& c : type1) corrected[c.index] = 1;
  const auto type2 = detect_correct_type2(vectors, normal, cfg, boundary_ok, corrected);
  // outliers against counter-only groups
  const auto counter_groups = recluster_counters_only(vectors, cfg.bounds);
  const auto removed = remove_type3(vectors, counter_groups, normal, cfg);

  report.annotations.resize(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& a = report.annotations[i];
    a.trace_id = vectors[i].trace_id;
    a.seq = vectors[i].seq;
    a.normal = normal[i] != 0;
    a.original_power = raw[i].p_dynamic;
    a.final_power = vectors[i].p_dynamic;
  }
  for (const auto& c : type1) {
    report.annotations[c.index].action = FilterAction::CorrectedTypeI;
    report.annotations[c.index].reference = c.reference_seq;
  }
  for (const auto& c : type2) {
    report.annotations[c.index].action = FilterAction::CorrectedTypeII;
    report.annotations[c.index].reference = c.reference_seq;
  }

  std::vector<Vector> kept;
  kept.reserve(raw.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    auto& a = report.annotations[i];
    if (removed[i]) {
      a.action = FilterAction::RemovedTypeIII;
      continue;
    }
    kept.push_back(Vector{vectors[i].p_dynamic, raw[i].counters, raw[i].trace_id, raw[i].seq});
  }
  for (const auto& a : report.annotations) {
    report.normal += a.normal ? 1 : 0;
    switch (a.action) {
      case FilterAction::Untouched: ++report.untouched; break;
      case FilterAction::CorrectedTypeI: ++report.type1_corrected; break;
      case FilterAction::CorrectedTypeII: ++report.type2_corrected; break;
      case FilterAction::RemovedTypeIII: ++report.type3_removed; break;
    }
  }
  return {dataset_from_vectors(dataset, std::move(kept)), std::move(report)};
}

}  // namespace powermod
