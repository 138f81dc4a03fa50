#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "glassbox/checkpoint.hpp"
#include "glassbox/cli.hpp"
#include "glassbox/error.hpp"

using namespace glassbox;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_command(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) { return read_file(p); }

// Small end-to-end workspace: corpus, config, output directory.
struct Workspace {
  fs::path root;
  fs::path config;

  explicit Workspace(const std::string& name, int documents = 300) {
    root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    fs::create_directories(root);
    const auto corpus = root / "corpus.csv";
    REQUIRE(run({"synth", "--out", corpus.string(), "--documents", std::to_string(documents), "--seed", "4"}).code == 0);
    config = root / "config.json";
    std::ofstream(config) << nlohmann::json{
        {"paths", {{"corpus", corpus.string()}, {"output_dir", (root / "out").string()}}},
        {"model", {{"embed_dim", 6}, {"filters_per_size", 2}, {"hidden_units", 4}, {"max_len", 30}}},
        {"train", {{"epochs", 2}, {"learning_rate", 0.01}}},
        {"merge", {{"min_region_size", 5}, {"threshold_grid_size", 4}}},
        {"sweep", {{"nf_values", {2}}, {"nh_values", {2, 3}}, {"lambda_values", {0.0, 0.1}}}},
        {"report", {{"top_k_filters", 2}, {"top_k_samples", 2}}}}
        .dump();
  }
  ~Workspace() { fs::remove_all(root); }

  Run cmd(const std::string& command, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args = {command, "--config", config.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }
  fs::path out(const std::string& file) const { return root / "out" / file; }
};

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  const auto unknown = run({"frobnicate", "--config", "x.json"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("usage:") != std::string::npos);
  CHECK(run({"train"}).code == 1);
  CHECK(run({"train", "--config"}).code == 1);
  CHECK(run({"train", "--config", "a.json", "--seed", "x"}).code == 1);
  CHECK(run({"synth"}).code == 1);
  CHECK(run({"train", "--config", "/nonexistent/config.json"}).code == 2);
}

TEST_CASE("config parsing") {
  nlohmann::json j = nlohmann::json::object();
  apply_override(j, "train.lambda=0.5");
  apply_override(j, "paths.corpus=data/x.csv");
  apply_override(j, "sweep.nf_values=[1,2]");
  const auto c = run_config_from_json(j);
  CHECK(c.train.lambda == 0.5);
  CHECK(c.corpus == "data/x.csv");
  CHECK(c.sweep_nf == std::vector<std::size_t>{1, 2});
  CHECK(c.checkpoint == fs::path("glassbox_out") / "model.json");
  CHECK_THROWS_AS(apply_override(j, "novalue"), UsageError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"lamda", 1}}}}), UsageError);
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"epochs", "many"}}}}), UsageError);
  CHECK_THROWS_AS(run_config_from_json({{"eval", {{"model", "other"}}}}), UsageError);
  CHECK(run_config_to_json(run_config_from_json(run_config_to_json(c))) == run_config_to_json(c));
}

TEST_CASE("missing corpus is a data error") {
  const auto root = fs::temp_directory_path() / "glassbox_cli_missing";
  fs::create_directories(root);
  std::ofstream(root / "c.json") << R"({"paths": {"corpus": "/nonexistent/corpus.csv"}})";
  CHECK(run({"train", "--config", (root / "c.json").string()}).code == 2);
  std::ofstream(root / "bad.json") << "{not json";
  CHECK(run({"train", "--config", (root / "bad.json").string()}).code == 2);
  CHECK(run({"unwrap", "--config", (root / "c.json").string()}).code == 2);
  fs::remove_all(root);
}

TEST_CASE("full pipeline") {
  const Workspace ws("glassbox_cli_pipeline");
  const auto train = ws.cmd("train");
  REQUIRE(train.code == 0);
  CHECK(fs::exists(ws.out("model.json")));
  CHECK(slurp(ws.out("history.csv")).rfind("epoch,", 0) == 0);

  const auto unwrap = ws.cmd("unwrap");
  REQUIRE(unwrap.code == 0);
  // region counts in the table add up to the dataset size
  std::istringstream table(slurp(ws.out("regions.csv")));
  std::string line;
  std::getline(table, line);
  std::size_t total = 0;
  while (std::getline(table, line)) {
    const auto a = line.find(',');
    total += std::stoul(line.substr(a + 1, line.find(',', a + 1) - a - 1));
  }
  CHECK(unwrap.out.find("documents=" + std::to_string(total) + " ") != std::string::npos);

  REQUIRE(ws.cmd("explain", {"--set", "report.source=network"}).code == 0);
  const auto network_report = slurp(ws.out("report.md"));
  CHECK(network_report.find("| Sample ID |") != std::string::npos);
  CHECK(fs::exists(ws.out("report.json")));
  CHECK(fs::exists(ws.out("histogram_region_1.csv")));

  REQUIRE(ws.cmd("merge").code == 0);
  CHECK(fs::exists(ws.out("merged.json")));
  CHECK(fs::exists(ws.out("merge_report.csv")));
  CHECK(slurp(ws.out("merge_grid.csv")).rfind("distance_threshold,val_accuracy\n", 0) == 0);
  const auto explain = ws.cmd("explain");
  REQUIRE(explain.code == 0);
  CHECK(explain.out.rfind("source=merged", 0) == 0);

  const auto eval = ws.cmd("eval");
  REQUIRE(eval.code == 0);
  CHECK(eval.out.rfind("dataset=test model=network n=", 0) == 0);
  CHECK(ws.cmd("eval", {"--set", "eval.model=merged"}).code == 0);

  // identical seeds give byte-identical artifacts
  const auto model_bytes = slurp(ws.out("model.json"));
  const auto merged_bytes = slurp(ws.out("merged.json"));
  REQUIRE(ws.cmd("train").code == 0);
  REQUIRE(ws.cmd("merge").code == 0);
  CHECK(slurp(ws.out("model.json")) == model_bytes);
  CHECK(slurp(ws.out("merged.json")) == merged_bytes);

  REQUIRE(ws.cmd("train", {"--seed", "9"}).code == 0);
  CHECK(slurp(ws.out("model.json")) != model_bytes);
}

TEST_CASE("merging to a single region yields a one-region report") {
  const Workspace ws("glassbox_cli_single", 800);
  REQUIRE(ws.cmd("train", {"--set", "train.epochs=15", "--set", "train.learning_rate=0.003", "--set",
                           "model.embed_dim=16", "--set", "model.filters_per_size=6", "--set",
                           "model.hidden_units=6"})
              .code == 0);
  const auto eval = ws.cmd("eval");
  REQUIRE(eval.code == 0);
  // balanced synthetic corpus: the majority baseline is at most ~0.6
  const auto at = eval.out.find("accuracy=");
  CHECK(std::stod(eval.out.substr(at + 9)) > 0.6);

  const auto merge = ws.cmd("merge", {"--set", "merge.distance_threshold=1e9", "--set",
                                      "merge.min_region_size=1000000"});
  REQUIRE(merge.code == 0);
  CHECK(merge.out.find("merged_regions=1 ") != std::string::npos);
  REQUIRE(ws.cmd("explain").code == 0);
  const auto md = slurp(ws.out("report.md"));
  std::size_t sections = 0;
  for (auto p = md.find("\n## Region "); p != std::string::npos; p = md.find("\n## Region ", p + 1)) ++sections;
  CHECK(sections == 1);
}

TEST_CASE("sweeps from the command line") {
  const Workspace ws("glassbox_cli_sweeps");
  const auto c = ws.cmd("sweep-complexity", {"--set", "train.epochs=1"});
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("cells=2", 0) == 0);
  const auto l = ws.cmd("sweep-lambda", {"--set", "train.epochs=1"});
  REQUIRE(l.code == 0);
  CHECK(l.out.find("selected_lambda=") != std::string::npos);
  CHECK(fs::exists(ws.out("sweep_lambda.csv")));
}
