#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glassbox/merging.hpp"
#include "glassbox/model.hpp"
#include "glassbox/training.hpp"

namespace glassbox {

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path test_corpus;  // empty: carve the test split out of corpus
  std::string format = "auto";        // auto, csv, jsonl
  std::filesystem::path output_dir = "glassbox_out";
  std::filesystem::path checkpoint;   // default <output_dir>/model.json
  std::filesystem::path merged;       // default <output_dir>/merged.json
  int min_freq = 2;
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
  std::uint64_t split_seed = 0;

  ModelConfig model;
  TrainConfig train;
  MergeConfig merge;

  std::vector<std::size_t> sweep_nf = {3, 10, 20, 30, 40, 50};
  std::vector<std::size_t> sweep_nh = {10, 20, 30, 40, 50};
  std::vector<double> sweep_lambdas = {0.0, 0.001, 0.01, 0.1, 1.0};
  std::size_t max_regions = 10;

  std::size_t top_k_filters = 8;
  std::size_t top_k_samples = 5;
  std::string report_dataset = "test";  // train, validation, test
  std::string report_source = "auto";   // auto, network, merged
  std::string eval_dataset = "test";
  std::string eval_model = "network";   // network, merged
};

// Defaults overlaid with the JSON document; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Applies "a.b=value"; value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Entry point for the command-line tool. Returns 0 on success, 1 on usage
// errors and 2 on data or model errors.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glassbox
