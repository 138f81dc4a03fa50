#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "glassbox/corpus.hpp"
#include "glassbox/model.hpp"

namespace glassbox {

struct Checkpoint {
  TextCnnModel model;
  Vocabulary vocab;
};

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Reals are written with 17 significant digits so a round trip is exact.
std::string checkpoint_to_string(const TextCnnModel& model, const Vocabulary& vocab);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const TextCnnModel& model,
                     const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Shared helpers for the text artifacts.
std::string format_real(double v);  // shortest form with 17 significant digits
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace glassbox
