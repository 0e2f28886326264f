#include "powermod/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace powermod {

namespace fs = std::filesystem;
using json = nlohmann::json;

Vector derive_vector(const RawSample& s, MeterKind kind, double p_static, std::size_t seq,
                     std::string trace_id) {
  if (!(s.t > 0.0)) throw DataError("invalid interval");
  if (s.counter_begin.size() != s.counter_end.size()) throw DataError("counter width mismatch");
  const Vec delta = s.counter_end - s.counter_begin;
  if ((delta.array() < 0.0).any()) throw CounterWrapError("counter wrap");

  double total = 0.0;
  if (kind == MeterKind::PowerSensor) {
    total = (s.meter_begin + s.meter_end) / 2.0;
  } else {
    if (s.meter_end < s.meter_begin) throw CounterWrapError("counter wrap (energy meter)");
    total = (s.meter_end - s.meter_begin) / s.t;
  }
  return Vector{std::max(total - p_static, 0.0), delta / s.t, std::move(trace_id), seq};
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

TraceMetadata read_metadata(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace metadata " + path.string());
  try {
    const json j = json::parse(in);
    TraceMetadata m;
    m.trace_id = j.at("trace_id").get<std::string>();
    m.meter_kind = meter_kind_from_string(j.at("meter_kind").get<std::string>());
    m.p_static_watts = j.at("p_static_watts").get<double>();
    m.schema = j.at("schema").get<std::vector<std::string>>();
    if (m.p_static_watts < 0.0) throw DataError(path.string() + ": p_static_watts must be >= 0");
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": invalid metadata: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_metadata(const TraceMetadata& meta, const fs::path& path) {
  json j;
  j["trace_id"] = meta.trace_id;
  j["meter_kind"] = std::string(to_string(meta.meter_kind));
  j["p_static_watts"] = meta.p_static_watts;
  j["schema"] = meta.schema;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

std::vector<std::string> expected_header(const CounterSchema& schema) {
  std::vector<std::string> h{"seq", "t_seconds"};
  for (const auto& n : schema.names()) {
    h.push_back(n + "_begin");
    h.push_back(n + "_end");
  }
  h.emplace_back("meter_begin");
  h.emplace_back("meter_end");
  return h;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Trace load_trace(const fs::path& csv, const CounterSchema& schema) {
  const TraceMetadata meta = read_metadata(sidecar_path(csv));
  if (meta.schema != schema.names()) {
    throw DataError(csv, 0, "schema mismatch: expected [" + join(schema.names()) + "], sidecar lists [" +
                                join(meta.schema) + "]");
  }

  std::ifstream in(csv);
  if (!in) throw DataError("cannot open trace " + csv.string());

  const auto header = expected_header(schema);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(csv, 1, "empty trace");
  ++line_no;
  {
    std::vector<std::string> got;
    for (auto f : split(trim(line))) got.emplace_back(trim(f));
    if (got != header) throw DataError(csv, 1, "header mismatch: expected '" + join(header) + "'");
  }

  Trace trace{meta.trace_id, meta.meter_kind, meta.p_static_watts, {}};
  const std::size_t n = schema.size();
  const auto width = static_cast<Eigen::Index>(n);
  bool have_prev = false;
  std::size_t prev_seq = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw DataError(csv, line_no, "expected " + std::to_string(header.size()) + " columns (" + join(header) +
                                        "), found " + std::to_string(fields.size()));
    }
    RawSample s;
    s.counter_begin.resize(width);
    s.counter_end.resize(width);
    if (!parse_number(fields[0], s.seq)) throw DataError(csv, line_no, "non-numeric seq");
    if (!parse_number(fields[1], s.t)) throw DataError(csv, line_no, "non-numeric t_seconds");
    for (std::size_t k = 0; k < n; ++k) {
      if (!parse_number(fields[2 + 2 * k], s.counter_begin(static_cast<Eigen::Index>(k))) ||
          !parse_number(fields[3 + 2 * k], s.counter_end(static_cast<Eigen::Index>(k)))) {
        throw DataError(csv, line_no, "non-numeric value for counter " + schema.name(k));
      }
    }
    if (!parse_number(fields[2 + 2 * n], s.meter_begin) || !parse_number(fields[3 + 2 * n], s.meter_end)) {
      throw DataError(csv, line_no, "non-numeric meter reading");
    }
    if (!(s.t > 0.0)) throw DataError(csv, line_no, "invalid interval");
    if (have_prev && s.seq <= prev_seq) throw DataError(csv, line_no, "seq must be strictly increasing");
    have_prev = true;
    prev_seq = s.seq;
    trace.samples.push_back(std::move(s));
  }
  if (trace.samples.empty()) throw DataError(csv, line_no, "empty trace");
  return trace;
}

Dataset assemble_dataset(CounterSchema schema, std::vector<Trace> traces) {
  Dataset d;
  d.schema = std::move(schema);
  for (const auto& t : traces) {
    if (d.find_trace(t.trace_id) != nullptr) throw DataError("duplicate trace_id '" + t.trace_id + "'");
    for (const auto& s : t.samples) {
      if (s.counter_begin.size() != static_cast<Eigen::Index>(d.schema.size())) {
        throw DataError("trace '" + t.trace_id + "' does not match schema width");
      }
    }
    d.traces.push_back(t);
  }
  for (const auto& t : d.traces) {
    for (const auto& s : t.samples) {
      try {
        d.vectors.push_back(derive_vector(s, t.meter_kind, t.p_static, s.seq, t.trace_id));
      } catch (const CounterWrapError&) {
        ++d.rejected_samples;
      }
    }
  }
  return d;
}

Dataset load_dataset(std::span<const fs::path> csvs, const CounterSchema& schema) {
  std::vector<Trace> traces;
  traces.reserve(csvs.size());
  for (const auto& p : csvs) traces.push_back(load_trace(p, schema));
  return assemble_dataset(schema, std::move(traces));
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  std::vector<fs::path> csvs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path());
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) throw DataError("no trace files in " + dir.string());
  const TraceMetadata first = read_metadata(sidecar_path(csvs.front()));
  CounterSchema schema;
  try {
    schema = CounterSchema(first.schema);
  } catch (const std::invalid_argument& e) {
    throw DataError(sidecar_path(csvs.front()).string() + ": " + e.what());
  }
  return load_dataset(csvs, schema);
}

void write_trace(const Trace& trace, const CounterSchema& schema, const fs::path& csv) {
  std::ofstream out(csv);
  if (!out) throw DataError("cannot write " + csv.string());
  out << join(expected_header(schema)) << '\n';
  for (const auto& s : trace.samples) {
    out << s.seq << ',' << format_number(s.t);
    for (Eigen::Index k = 0; k < s.counter_begin.size(); ++k) {
      out << ',' << format_number(s.counter_begin(k)) << ',' << format_number(s.counter_end(k));
    }
    out << ',' << format_number(s.meter_begin) << ',' << format_number(s.meter_end) << '\n';
  }
  write_metadata(TraceMetadata{trace.trace_id, trace.meter_kind, trace.p_static, schema.names()}, sidecar_path(csv));
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& t : dataset.traces) write_trace(t, dataset.schema, dir / (t.trace_id + ".csv"));
}

Trace encode_vectors(const std::string& trace_id, MeterKind kind, std::span<const Vector> vectors) {
  Trace t{trace_id, kind, 0.0, {}};
  t.samples.reserve(vectors.size());
  for (const auto& v : vectors) {
    RawSample s;
    s.seq = v.seq;
    s.t = 1.0;
    s.counter_begin = Vec::Zero(v.counters.size());
    s.counter_end = v.counters;
    if (kind == MeterKind::PowerSensor) {
      s.meter_begin = v.p_dynamic;
      s.meter_end = v.p_dynamic;
    } else {
      s.meter_begin = 0.0;
      s.meter_end = v.p_dynamic;
    }
    t.samples.push_back(std::move(s));
  }
  return t;
}

Dataset dataset_from_vectors(const Dataset& reference, std::vector<Vector> vectors) {
  Dataset d;
  d.schema = reference.schema;
  d.rejected_samples = reference.rejected_samples;
  for (const auto& ref : reference.traces) {
    std::vector<Vector> mine;
    for (const auto& v : vectors) {
      if (v.trace_id == ref.trace_id) mine.push_back(v);
    }
    d.traces.push_back(encode_vectors(ref.trace_id, ref.meter_kind, mine));
  }
  d.vectors = std::move(vectors);
  return d;
}

}  // namespace powermod
