#include "powermod/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "powermod/parallel.hpp"

namespace powermod {

using json = nlohmann::json;

std::vector<std::size_t> FoldPlan::training(std::size_t rotation) const {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < kFoldCount; ++p) {
    if (p != rotation) out.insert(out.end(), parts[p].begin(), parts[p].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan make_folds(std::size_t n, std::uint64_t seed) {
  if (n < kFoldCount) throw std::invalid_argument("need at least 4 vectors to build folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{seed, std::uint64_t{0xF01D}};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  for (std::size_t i = 0; i < n; ++i) plan.parts[i % kFoldCount].push_back(order[i]);
  for (auto& p : plan.parts) std::sort(p.begin(), p.end());
  return plan;
}

std::vector<std::size_t> dedupe_unknown_indices(std::span<const NormalizedVector> known,
                                                std::span<const NormalizedVector> unknown,
                                                const SimilarityBounds& bounds) {
  // Similar vectors have similar power, so only a power window of the known
  // set needs the full test. The window is widened slightly so rounding in
  // the bounds can never exclude a true match.
  std::vector<std::size_t> by_power(known.size());
  std::iota(by_power.begin(), by_power.end(), std::size_t{0});
  std::sort(by_power.begin(), by_power.end(),
            [&](std::size_t a, std::size_t b) { return known[a].p_dynamic < known[b].p_dynamic; });
  std::vector<double> powers(known.size());
  for (std::size_t i = 0; i < known.size(); ++i) powers[i] = known[by_power[i]].p_dynamic;

  const double a = bounds.a_v();
  std::vector<std::size_t> keep;
  for (std::size_t u = 0; u < unknown.size(); ++u) {
    const double p = unknown[u].p_dynamic;
    double lo = p;
    double hi = p;
    if (p > 0.0) {
      lo = p * a * (1.0 - 1e-9);
      hi = p / a * (1.0 + 1e-9);
    }
    auto first = std::lower_bound(powers.begin(), powers.end(), lo);
    auto last = std::upper_bound(powers.begin(), powers.end(), hi);
    bool similar = false;
    for (auto it = first; it != last && !similar; ++it) {
      similar = is_similar(unknown[u], known[by_power[static_cast<std::size_t>(it - powers.begin())]], bounds, true);
    }
    if (!similar) keep.push_back(u);
  }
  return keep;
}

std::vector<NormalizedVector> dedupe_unknown(std::span<const NormalizedVector> known,
                                             std::span<const NormalizedVector> unknown,
                                             const SimilarityBounds& bounds) {
  std::vector<NormalizedVector> out;
  for (auto i : dedupe_unknown_indices(known, unknown, bounds)) out.push_back(unknown[i]);
  return out;
}

void ErrorSet::add(double predicted, double measured) {
  abs_watts.push_back(std::abs(predicted - measured));
  if (auto e = percent_error(predicted, measured)) {
    ape.push_back(*e);
    signed_pct.push_back(100.0 * (predicted - measured) / measured);
  } else {
    ++excluded;
  }
}

void ErrorSet::append(const ErrorSet& other) {
  ape.insert(ape.end(), other.ape.begin(), other.ape.end());
  signed_pct.insert(signed_pct.end(), other.signed_pct.begin(), other.signed_pct.end());
  abs_watts.insert(abs_watts.end(), other.abs_watts.begin(), other.abs_watts.end());
  excluded += other.excluded;
}

namespace {

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

double ErrorSet::mean_ape() const { return mean_of(ape); }

std::vector<CdfPoint> empirical_cdf(std::span<const double> errors) {
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

Summary summarize(std::span<const ErrorSet> per_fold) {
  ErrorSet pooled;
  std::vector<double> fold_means;
  for (const auto& f : per_fold) {
    pooled.append(f);
    if (!f.ape.empty()) fold_means.push_back(f.mean_ape());
  }
  Summary s;
  s.mean_ape = pooled.mean_ape();
  s.mean_signed_pct = mean_of(pooled.signed_pct);
  s.mean_abs_watts = mean_of(pooled.abs_watts);
  s.count = pooled.ape.size();
  s.excluded = pooled.excluded;
  if (fold_means.empty()) {
    s.stddev_across_folds = std::numeric_limits<double>::quiet_NaN();
  } else {
    const double m = mean_of(fold_means);
    double ss = 0.0;
    for (double x : fold_means) ss += (x - m) * (x - m);
    s.stddev_across_folds = std::sqrt(ss / static_cast<double>(fold_means.size()));
  }
  // Sorting inside the CDF makes the summary independent of vector order.
  std::sort(pooled.ape.begin(), pooled.ape.end());
  s.cdf = empirical_cdf(pooled.ape);
  return s;
}

const ModelReport& EvaluationReport::get(ModelKind kind) const {
  for (const auto& m : models) {
    if (m.kind == kind) return m;
  }
  throw std::out_of_range("model '" + std::string(to_string(kind)) + "' not in report");
}

EvaluationReport run_experiment(const Dataset& dataset, std::span<const ModelKind> kinds, const EvalConfig& cfg) {
  if (kinds.empty()) throw std::invalid_argument("no models to evaluate");
  const auto& all = dataset.vectors;
  const FoldPlan plan = make_folds(all.size(), cfg.seed);

  struct FoldData {
    std::vector<NormalizedVector> train;
    std::vector<NormalizedVector> unknown;
    std::size_t heldout = 0;
  };
  std::vector<FoldData> folds(kFoldCount);
  parallel_for(kFoldCount, [&](std::size_t r) {
    std::vector<Vector> train_raw;
    for (auto i : plan.training(r)) train_raw.push_back(all[i]);
    std::vector<Vector> held_raw;
    for (auto i : plan.parts[r]) held_raw.push_back(all[i]);
    const auto params = compute_normalization(train_raw);
    auto& f = folds[r];
    f.train = normalize(train_raw, params);
    const auto held = normalize(held_raw, params);
    f.heldout = held.size();
    f.unknown = dedupe_unknown(f.train, held, cfg.bounds);
  });

  EvaluationReport report;
  report.seed = cfg.seed;
  report.vectors = all.size();
  report.models.resize(kinds.size());
  for (std::size_t m = 0; m < kinds.size(); ++m) {
    report.models[m].kind = kinds[m];
    report.models[m].folds.resize(kFoldCount);
  }

  parallel_for(kinds.size() * kFoldCount, [&](std::size_t task) {
    const std::size_t m = task / kFoldCount;
    const std::size_t r = task % kFoldCount;
    const auto& f = folds[r];
    const FittedModel model = fit_model(cfg.models.get(kinds[m]), f.train);
    FoldResult& out = report.models[m].folds[r];
    out.rotation = r;
    out.train_size = f.train.size();
    out.heldout_size = f.heldout;
    out.unknown_size = f.unknown.size();
    for (const auto& v : f.train) out.known.add(predict(model, v.counters), v.p_dynamic);
    for (const auto& v : f.unknown) out.unknown.add(predict(model, v.counters), v.p_dynamic);
  });

  for (auto& mr : report.models) {
    std::vector<ErrorSet> known;
    std::vector<ErrorSet> unknown;
    std::vector<ErrorSet> both;
    for (const auto& f : mr.folds) {
      known.push_back(f.known);
      unknown.push_back(f.unknown);
      ErrorSet u = f.known;
      u.append(f.unknown);
      both.push_back(std::move(u));
    }
    mr.known = summarize(known);
    mr.unknown = summarize(unknown);
    mr.all = summarize(both);
  }
  return report;
}

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json summary_json(const Summary& s, bool include_cdf) {
  json j{{"mean_ape", number(s.mean_ape)},
         {"stddev_across_folds", number(s.stddev_across_folds)},
         {"mean_signed_pct", number(s.mean_signed_pct)},
         {"mean_abs_watts", number(s.mean_abs_watts)},
         {"count", s.count},
         {"excluded", s.excluded}};
  if (include_cdf) {
    json pts = json::array();
    for (const auto& p : s.cdf) pts.push_back(json::array({p.threshold, p.fraction}));
    j["cdf"] = std::move(pts);
  }
  return j;
}

}  // namespace

json to_json(const EvaluationReport& report, bool include_cdf) {
  json models = json::array();
  for (const auto& m : report.models) {
    json folds = json::array();
    for (const auto& f : m.folds) {
      folds.push_back({{"rotation", f.rotation},
                       {"train_size", f.train_size},
                       {"heldout_size", f.heldout_size},
                       {"unknown_size", f.unknown_size},
                       {"known_mean_ape", number(f.known.mean_ape())},
                       {"unknown_mean_ape", number(f.unknown.mean_ape())}});
    }
    models.push_back({{"model", to_string(m.kind)},
                      {"known", summary_json(m.known, include_cdf)},
                      {"unknown", summary_json(m.unknown, include_cdf)},
                      {"all", summary_json(m.all, include_cdf)},
                      {"folds", std::move(folds)}});
  }
  return json{{"seed", report.seed}, {"vectors", report.vectors}, {"models", std::move(models)}};
}

}  // namespace powermod
