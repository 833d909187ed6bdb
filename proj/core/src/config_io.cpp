#include <fstream>
#include <json.hpp>
#include <sstream>

#include "earkd/config.hpp"
#include "earkd/errors.hpp"

namespace earkd {
namespace {

using nlohmann::json;
using synth::SynthConfig;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

json parse_object(const std::string& text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) invalid(std::string(what) + " must be a JSON object");
  return j;
}

// Copies j[key] into `field` when present, type-checked.
template <typename T>
void read_field(const json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) invalid(std::string(key) + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) invalid(std::string(key) + " must be a number");
    }
    field = it->get<T>();
  } catch (const json::exception& e) {
    invalid(std::string(key) + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) invalid(std::string("unknown key '") + key + "' in " + what);
  }
}

json train_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"seed", c.seed},                   {"kd_weight", c.kd_weight}};
}

TrainConfig train_from(const json& j) {
  reject_unknown(j, {"learning_rate", "beta1", "beta2", "epsilon", "epochs", "batch_size", "seed", "kd_weight"},
                 "train config");
  TrainConfig c;
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "epsilon", c.epsilon);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "seed", c.seed);
  read_field(j, "kd_weight", c.kd_weight);
  c.validate();
  return c;
}

json model_json(const ModelConfig& c) {
  return {{"arch", std::string(to_string(c.arch))},
          {"epoch_samples", c.epoch_samples},
          {"in_channels", c.in_channels},
          {"feature_dim", c.feature_dim},
          {"width", c.width},
          {"depth", c.depth},
          {"heads", c.heads},
          {"seed", c.seed}};
}

ModelConfig model_from(const json& j) {
  reject_unknown(j, {"arch", "epoch_samples", "in_channels", "feature_dim", "width", "depth", "heads", "seed"},
                 "model config");
  ModelConfig c;
  if (const auto it = j.find("arch"); it != j.end()) {
    if (!it->is_string()) invalid("arch must be a string");
    const auto arch = parse_arch(it->get<std::string>());
    if (!arch) invalid("unknown arch '" + it->get<std::string>() + "'");
    c.arch = *arch;
  }
  read_field(j, "epoch_samples", c.epoch_samples);
  read_field(j, "in_channels", c.in_channels);
  read_field(j, "feature_dim", c.feature_dim);
  read_field(j, "width", c.width);
  read_field(j, "depth", c.depth);
  read_field(j, "heads", c.heads);
  read_field(j, "seed", c.seed);
  c.validate();
  return c;
}

json synth_json(const SynthConfig& c) {
  return {{"n_subjects", c.n_subjects},         {"epochs_per_subject", c.epochs_per_subject},
          {"sample_rate", c.sample_rate},       {"snr_scalp_db", c.snr_scalp_db},
          {"snr_ear_db", c.snr_ear_db},         {"ear_attenuation", c.ear_attenuation},
          {"common_mode_uv", c.common_mode_uv}};
}

SynthConfig synth_from(const json& j) {
  reject_unknown(j, {"n_subjects", "epochs_per_subject", "sample_rate", "snr_scalp_db", "snr_ear_db",
                     "ear_attenuation", "common_mode_uv"},
                 "synth config");
  SynthConfig c;
  read_field(j, "n_subjects", c.n_subjects);
  read_field(j, "epochs_per_subject", c.epochs_per_subject);
  read_field(j, "sample_rate", c.sample_rate);
  read_field(j, "snr_scalp_db", c.snr_scalp_db);
  read_field(j, "snr_ear_db", c.snr_ear_db);
  read_field(j, "ear_attenuation", c.ear_attenuation);
  read_field(j, "common_mode_uv", c.common_mode_uv);
  c.validate();
  return c;
}

std::string read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigNotFound, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_json(const TrainConfig& config) { return train_json(config).dump(2); }
std::string to_json(const ModelConfig& config) { return model_json(config).dump(2); }

std::string to_json(const ExperimentConfig& config) {
  return json{{"train", train_json(config.train)}, {"model", model_json(config.model)}}.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  return train_from(parse_object(text, "train config"));
}

ModelConfig model_config_from_json(const std::string& text) {
  return model_from(parse_object(text, "model config"));
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  const json j = parse_object(text, "experiment config");
  reject_unknown(j, {"train", "model"}, "experiment config");
  ExperimentConfig c;
  if (const auto it = j.find("train"); it != j.end()) {
    if (!it->is_object()) invalid("train must be an object");
    c.train = train_from(*it);
  }
  if (const auto it = j.find("model"); it != j.end()) {
    if (!it->is_object()) invalid("model must be an object");
    c.model = model_from(*it);
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_config_file(path));
}

namespace synth {

std::string to_json(const SynthConfig& config) { return synth_json(config).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
  return synth_from(parse_object(text, "synth config"));
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  return synth_config_from_json(read_config_file(path));
}

}  // namespace synth
}  // namespace earkd
