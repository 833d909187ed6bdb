#pragma once

#include <filesystem>
#include <string>

#include "earkd/models.hpp"
#include "earkd/synth.hpp"
#include "earkd/training.hpp"

namespace earkd {

// Training and model settings for one run. Keys missing from a config file
// keep their defaults; unknown keys are rejected.
struct ExperimentConfig {
  TrainConfig train;
  ModelConfig model;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string to_json(const TrainConfig& config);
std::string to_json(const ModelConfig& config);
std::string to_json(const ExperimentConfig& config);

TrainConfig train_config_from_json(const std::string& text);
ModelConfig model_config_from_json(const std::string& text);
ExperimentConfig experiment_config_from_json(const std::string& text);

// Throws ConfigNotFound for a missing file and InvalidConfig for bad content.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace earkd
