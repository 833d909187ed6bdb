#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "earkd/dataset.hpp"
#include "earkd/evaluation.hpp"

namespace earkd::cli {

// On-disk subject layout shared by raw and preprocessed data:
//   <root>/<subject>/scalp/   recording container
//   <root>/<subject>/ear/     recording container
//   <root>/<subject>/hypnogram.txt
inline constexpr const char* kScalpDir = "scalp";
inline constexpr const char* kEarDir = "ear";
inline constexpr const char* kHypnogramFile = "hypnogram.txt";

// Subject directories under `root` in name order. Throws IOError when the
// root is missing or holds no subject.
std::vector<std::filesystem::path> subject_dirs(const std::filesystem::path& root);

// Loads preprocessed derivation containers into normalised paired epochs.
std::vector<SubjectData> load_subjects(const std::filesystem::path& root);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// metrics.json body for one evaluated model or a pooled sweep.
nlohmann::json metrics_json(const MetricsReport& report);
std::string confusion_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_csv(const std::filesystem::path& path);

std::string embedding_csv(const EmbeddingExport& e);

struct EmbeddingPoint {
  double x = 0.0;
  double y = 0.0;
  std::string stage;
  std::string domain;
};
std::vector<EmbeddingPoint> parse_embedding_csv(const std::filesystem::path& path);

}  // namespace earkd::cli
