// powermod: command-line front end for the modelling pipeline.
//
// Exit codes: 0 success, 1 usage or invalid option value, 2 bad input data,
// 3 any other failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "powermod/error.hpp"
#include "powermod/eval.hpp"
#include "powermod/hcs.hpp"
#include "powermod/ingest.hpp"
#include "powermod/models.hpp"
#include "powermod/nfilter.hpp"
#include "powermod/pipeline.hpp"
#include "powermod/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace powermod;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::string log_level = "info";
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

const std::string& require_out(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out is required for this command");
  return g.out;
}

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg;
  if (!g.config.empty()) cfg = load_pipeline_config(g.config, cfg);
  if (g.seed) cfg.apply_seed(*g.seed);
  return cfg;
}

// Reorders the dataset's columns to match `names`, so a model trained on
// selected counters accepts the full-width trace directory.
Dataset align_columns(const Dataset& data, const CounterSchema& names) {
  if (data.schema == names) return data;
  std::vector<std::size_t> cols;
  for (const auto& n : names.names()) {
    const auto k = data.schema.index_of(n);
    if (!k) throw DataError("dataset has no counter named '" + n + "'");
    cols.push_back(*k);
  }
  return project(data, cols);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counter-based power modelling: select, filter, train, evaluate"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for folds, forests and networks (and synth)");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--config", g.config, "Pipeline configuration JSON")->check(CLI::ExistingFile);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  std::string spec_path, dataset, truth_path, model_path, model_kind = "tspm", models = "lrpm,svmpm,nnpm,tspm",
                                                      report_path, filter_report_path;
  std::size_t n_select = 0, ntree = 0, subsets = 0;
  bool emit_csv = false, no_filter = false, no_select = false, compare_filter = false, as_csv = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace directory with ground truth");
  synth->add_option("--spec", spec_path, "Synth spec JSON (defaults: 10% mixed noise)")->check(CLI::ExistingFile);

  auto* check = app.add_subcommand("ingest-check", "Parse a trace directory and summarize it");
  check->add_option("--dataset", dataset, "Trace directory")->required();

  auto* select = app.add_subcommand("select", "Rank counters by partition-averaged forest importance");
  select->add_option("--dataset", dataset, "Trace directory")->required();
  select->add_option("--n", n_select, "Number of counters to keep");
  select->add_option("--ntree", ntree, "Trees per forest");
  select->add_option("--subsets", subsets, "Contiguous partitions to average over");

  auto* filt = app.add_subcommand("filter", "Correct Type I/II and remove Type III noise");
  filt->add_option("--dataset", dataset, "Trace directory")->required();
  filt->add_option("--truth", truth_path, "ground_truth.json to score against")->check(CLI::ExistingFile);
  filt->add_option("--report", filter_report_path, "Where to write the filter report (default: <out>/filter_report.json)");

  auto* train = app.add_subcommand("train", "Fit one model on a whole dataset");
  train->add_option("--dataset", dataset, "Trace directory")->required();
  train->add_option("--model", model_kind, "lrpm, svmpm, nnpm or tspm");

  auto* pred = app.add_subcommand("predict", "Apply a saved model to a trace directory");
  pred->add_option("--model", model_path, "Model artifact JSON")->required()->check(CLI::ExistingFile);
  pred->add_option("--dataset", dataset, "Trace directory")->required();

  auto* eval = app.add_subcommand("eval", "Four-fold known/unknown evaluation");
  eval->add_option("--dataset", dataset, "Trace directory")->required();
  eval->add_option("--models", models, "Comma-separated model kinds");
  eval->add_flag("--emit-csv", emit_csv, "Also write a flat CSV table next to the report");

  auto* pipe = app.add_subcommand("pipeline", "Select, filter, train and evaluate end to end");
  pipe->add_option("--dataset", dataset, "Trace directory (default: generate from the synth spec)");
  pipe->add_option("--models", models, "Comma-separated model kinds");
  pipe->add_flag("--no-filter", no_filter, "Skip the noise filter");
  pipe->add_flag("--no-select", no_select, "Keep every counter");
  pipe->add_flag("--compare-filter", compare_filter, "Also evaluate without the filter and emit a comparison");

  auto* rep = app.add_subcommand("report", "Print the mean-error table of a report.json");
  rep->add_option("--report", report_path, "report.json")->required()->check(CLI::ExistingFile);
  rep->add_flag("--csv", as_csv, "CSV instead of a text table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  auto logger = spdlog::stderr_color_mt("powermod");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    PipelineConfig cfg = resolve_config(g);

    if (synth->parsed()) {
      SynthSpec spec = cfg.synth;
      if (!spec_path.empty()) spec = synth_spec_from_json(read_json(spec_path));
      if (g.seed) spec.seed = *g.seed;
      const auto out = generate(spec);
      const fs::path dir = require_out(g);
      fs::create_directories(dir);
      write_synth(out, dir);
      write_text(dir / "synth_spec.json", to_json(spec).dump(2) + "\n");
      spdlog::info("wrote {} traces ({} vectors) to {}", out.dataset.traces.size(), out.dataset.vectors.size(),
                   dir.string());
    } else if (check->parsed()) {
      const auto data = load_dataset(dataset);
      std::cout << fmt::format("traces: {}\nvectors: {}\nrejected_samples: {}\ncounters: {}\n", data.traces.size(),
                               data.vectors.size(), data.rejected_samples, fmt::join(data.schema.names(), ","));
    } else if (select->parsed()) {
      if (n_select) cfg.selection.n_select = n_select;
      if (ntree) cfg.selection.forest.ntree = ntree;
      if (subsets) cfg.selection.subsets = subsets;
      const auto data = load_dataset(dataset);
      const auto sel = select_counters(data, cfg.selection);
      write_text(require_out(g), to_json(sel, data.schema).dump(2) + "\n");
      std::cout << fmt::format("{}\n", fmt::join(sel.names, ","));
    } else if (filt->parsed()) {
      const auto data = load_dataset(dataset);
      const auto r = filter(data, cfg.noise);
      const fs::path dir = require_out(g);
      fs::create_directories(dir);
      write_dataset(r.dataset, dir);
      write_text(filter_report_path.empty() ? dir / "filter_report.json" : fs::path(filter_report_path),
                 to_json(r.report).dump(2) + "\n");
      if (!truth_path.empty()) {
        const auto score = score_filter(r.report, ground_truth_from_json(read_json(truth_path)));
        write_text(dir / "filter_score.json", to_json(score).dump(2) + "\n");
      }
      std::cout << fmt::format("input {} normal {} type1 {} type2 {} type3 {}\n", r.report.input, r.report.normal,
                               r.report.type1_corrected, r.report.type2_corrected, r.report.type3_removed);
    } else if (train->parsed()) {
      const auto data = load_dataset(dataset);
      const auto pm = train_model(cfg.models.get(model_kind_from_string(model_kind)), data.schema, data.vectors);
      save_model(pm, require_out(g));
    } else if (pred->parsed()) {
      const auto pm = load_model(model_path);
      const auto data = align_columns(load_dataset(dataset), pm.schema);
      std::string csv = "trace_id,seq,measured,predicted\n";
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<double> out;
      out.reserve(data.vectors.size());
      for (const auto& v : data.vectors) out.push_back(pm.predict(v));
      const auto dt = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = data.vectors[i];
        csv += fmt::format("{},{},{},{}\n", v.trace_id, v.seq, v.p_dynamic, out[i]);
      }
      if (g.out.empty()) std::cout << csv;
      else write_text(g.out, csv);
      spdlog::info("{} predictions, {:.4f} ms per vector", out.size(), out.empty() ? 0.0 : dt / static_cast<double>(out.size()));
    } else if (eval->parsed()) {
      const auto kinds = parse_model_list(models);
      const auto data = load_dataset(dataset);
      const auto report = run_experiment(data, kinds, cfg.eval_config());
      const json rj = to_json(report);
      const fs::path out = require_out(g);
      write_text(out, rj.dump(2) + "\n");
      if (emit_csv) {
        fs::path csv = out;
        csv.replace_extension(".csv");
        write_text(csv, format_report_csv(rj));
      }
      std::cout << format_report_table(rj);
    } else if (pipe->parsed()) {
      if (!dataset.empty()) cfg.dataset = dataset;
      if (!g.out.empty()) cfg.out = g.out;
      if (pipe->count("--models")) cfg.kinds = parse_model_list(models);
      if (no_filter) cfg.filter = false;
      if (no_select) cfg.select = false;
      if (compare_filter) cfg.compare_filter = true;
      const auto manifest = run_pipeline(cfg);
      std::cout << format_report_table(read_json(cfg.out / "report.json"));
      spdlog::info("{} artifacts listed in {}", manifest.artifacts.size(), (cfg.out / "manifest.json").string());
    } else if (rep->parsed()) {
      const auto rj = read_json(report_path);
      std::cout << (as_csv ? format_report_csv(rj) : format_report_table(rj));
    }
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 1;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
