#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "powermod/synth.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& scratch) {
  const auto err = scratch / "stderr.txt";
  const std::string cmd = std::string(POWERMOD_CLI) + " " + args + " > " + (scratch / "stdout.txt").string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

// A small dataset keeps the end-to-end runs quick.
fs::path small_dataset(const fs::path& root) {
  auto spec = powermod::noisy_spec(21);
  spec.traces = 4;
  spec.samples_per_trace = 120;
  std::ofstream(root / "spec.json") << powermod::to_json(spec).dump();
  const auto dir = root / "data";
  REQUIRE(cli("synth --spec " + (root / "spec.json").string() + " --out " + dir.string(), root).code == 0);
  return dir;
}

}  // namespace

TEST_CASE("synth then eval succeeds and writes a report") {
  const auto root = testing::temp_dir("cli_eval");
  const auto data = small_dataset(root);
  CHECK(fs::exists(data / "ground_truth.json"));
  const auto r = cli("eval --dataset " + data.string() + " --models lrpm,tspm --emit-csv --out " +
                         (root / "report.json").string(),
                     root);
  CHECK(r.code == 0);
  REQUIRE(fs::exists(root / "report.json"));
  CHECK(fs::exists(root / "report.csv"));
  const auto rj = json::parse(slurp(root / "report.json"));
  CHECK(rj.at("models").size() == 2);
  CHECK(cli("report --report " + (root / "report.json").string(), root).code == 0);
}

TEST_CASE("usage errors exit 1") {
  const auto root = testing::temp_dir("cli_usage");
  CHECK(cli("eval --out x.json", root).code == 1);
  CHECK(cli("eval --dataset . --no-such-flag", root).code == 1);
  CHECK(cli("", root).code == 1);
  CHECK(cli("eval --dataset . --models lrpm,bogus --out x.json", root).code == 1);
  CHECK(cli("--help", root).code == 0);
}

TEST_CASE("corrupt input exits 2 and names the file and line") {
  const auto root = testing::temp_dir("cli_corrupt");
  const auto data = small_dataset(root);
  const auto csv = data / "trace_001.csv";
  auto text = slurp(csv);
  // break the third data row (line 4 of the file)
  std::size_t at = 0;
  for (int i = 0; i < 3; ++i) at = text.find('\n', at) + 1;
  text.insert(at, "x");
  std::ofstream(csv, std::ios::binary) << text;
  const auto r = cli("ingest-check --dataset " + data.string(), root);
  CHECK(r.code == 2);
  CHECK(r.err.find("trace_001.csv:4") != std::string::npos);
}

TEST_CASE("select and filter write their outputs") {
  const auto root = testing::temp_dir("cli_stages");
  const auto data = small_dataset(root);
  CHECK(cli("select --dataset " + data.string() + " --n 3 --ntree 8 --subsets 2 --out " +
                (root / "sel.json").string(),
            root)
            .code == 0);
  const auto sel = json::parse(slurp(root / "sel.json"));
  CHECK(sel.at("selected").size() == 3);
  CHECK(sel.at("per_subset").size() == 2);

  CHECK(cli("filter --dataset " + data.string() + " --truth " + (data / "ground_truth.json").string() +
                " --report " + (root / "fr.json").string() + " --out " + (root / "filtered").string(),
            root)
            .code == 0);
  CHECK(fs::exists(root / "fr.json"));
  CHECK(fs::exists(root / "filtered" / "filter_score.json"));
  CHECK(cli("ingest-check --dataset " + (root / "filtered").string(), root).code == 0);
}

TEST_CASE("train and predict round trip") {
  const auto root = testing::temp_dir("cli_train");
  const auto data = small_dataset(root);
  CHECK(cli("train --dataset " + data.string() + " --model lrpm --out " + (root / "m.json").string(), root).code == 0);
  CHECK(cli("predict --model " + (root / "m.json").string() + " --dataset " + data.string() + " --out " +
                (root / "p.csv").string(),
            root)
            .code == 0);
  const auto p = slurp(root / "p.csv");
  CHECK(std::count(p.begin(), p.end(), '\n') == 4 * 120 + 1);
}

TEST_CASE("pipeline reruns are byte-identical and honour --models") {
  const auto root = testing::temp_dir("cli_pipeline");
  const auto data = small_dataset(root);
  const std::string base = "pipeline --seed 5 --dataset " + data.string() + " --models tspm --out ";
  REQUIRE(cli(base + (root / "a").string(), root).code == 0);
  const auto first = slurp(root / "a" / "manifest.json");
  REQUIRE(cli(base + (root / "a").string(), root).code == 0);
  CHECK(slurp(root / "a" / "manifest.json") == first);
  // a different out directory changes only the recorded config
  REQUIRE(cli(base + (root / "b").string(), root).code == 0);
  const auto ma = json::parse(first);
  const auto mb = json::parse(slurp(root / "b" / "manifest.json"));
  REQUIRE(ma.at("artifacts").size() == mb.at("artifacts").size());
  for (std::size_t i = 0; i < ma.at("artifacts").size(); ++i) {
    if (ma["artifacts"][i]["path"] == "config.json") continue;
    CHECK(ma["artifacts"][i] == mb["artifacts"][i]);
  }
  std::size_t models = 0;
  for (const auto& a : ma.at("artifacts")) models += a.at("path").get<std::string>().rfind("models/", 0) == 0;
  CHECK(models == 1);
  CHECK(fs::exists(root / "a" / "models" / "tspm.json"));
}
