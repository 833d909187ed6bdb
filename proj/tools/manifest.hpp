#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace earkd::cli {

std::string sha256_file(const std::filesystem::path& path);

struct FileHash {
  std::string path;
  std::string sha256;
};

// Hashes a file, or every regular file below a directory in sorted order.
std::vector<FileHash> hash_tree(const std::filesystem::path& path);

// One record per command invocation, written as <out>/manifest.json.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> arguments);

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  // Hashes the registered paths and writes the manifest into `dir`.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  std::vector<std::string> arguments_;
  std::uint64_t seed_ = 0;
  nlohmann::json config_ = nlohmann::json::object();
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace earkd::cli
