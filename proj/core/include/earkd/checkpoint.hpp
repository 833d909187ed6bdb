#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "earkd/models.hpp"

namespace earkd::checkpoint {

// Layout: the 8 bytes "EARKDCKP", a little-endian u64 header length, a JSON
// header (model config, metadata, tensor names and shapes), then every
// tensor's values as little-endian float64 in header order.
using Metadata = std::map<std::string, std::string>;

struct Loaded {
  std::unique_ptr<SleepStager> model;
  Metadata metadata;
};

std::string serialize(const SleepStager& model, const Metadata& metadata = {});
Loaded deserialize(std::string_view bytes);  // throws CorruptContainer, CheckpointMismatch

void save(const std::filesystem::path& path, const SleepStager& model, const Metadata& metadata = {});
Loaded load(const std::filesystem::path& path);  // throws IOError on top of deserialize's errors

// Loads and checks the stored architecture against `expected` (seed ignored).
Loaded load(const std::filesystem::path& path, const ModelConfig& expected);

// True when two configs describe the same parameter layout.
bool same_architecture(const ModelConfig& a, const ModelConfig& b);

}  // namespace earkd::checkpoint
