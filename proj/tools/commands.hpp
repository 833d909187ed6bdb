#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace earkd::cli {

using Path = std::filesystem::path;

// Flags shared by every command.
struct Invocation {
  std::vector<std::string> arguments;  // argv after the program name
};

struct SynthOptions {
  std::optional<Path> config;
  Path out;
  std::optional<std::uint64_t> seed;
};

struct PreprocessOptions {
  Path in;
  Path out;
};

struct TrainOptions {
  std::string strategy;
  std::optional<std::string> arch;
  Path data;
  std::size_t fold = 0;
  std::optional<Path> config;
  Path out;
  std::optional<Path> teacher;
  std::optional<std::uint64_t> seed;
};

struct EvaluateOptions {
  Path checkpoint;
  Path data;
  std::size_t fold = 0;
  Path out;
  std::optional<Path> config;
  std::optional<Path> teacher;  // adds a feature embedding export
  std::string embed = "pca";
  std::optional<std::uint64_t> seed;
};

struct LosoOptions {
  std::string strategy;
  std::optional<std::string> arch;
  Path data;
  std::optional<Path> config;
  Path out;
  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
};

struct ReportOptions {
  std::vector<Path> runs;
  Path out;
};

void run_synth(const SynthOptions& o, const Invocation& inv);
void run_preprocess(const PreprocessOptions& o, const Invocation& inv);
void run_train(const TrainOptions& o, const Invocation& inv);
void run_evaluate(const EvaluateOptions& o, const Invocation& inv);
void run_loso(const LosoOptions& o, const Invocation& inv);
void run_report(const ReportOptions& o, const Invocation& inv);

// EARKD_SEED, then the flag, then `fallback`. Throws UsageError for a
// malformed environment value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback);

}  // namespace earkd::cli
