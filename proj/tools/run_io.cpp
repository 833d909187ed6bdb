#include "run_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "earkd/errors.hpp"

namespace earkd::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<fs::path> subject_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::IOError, "data directory not found: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / kHypnogramFile)) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorKind::IOError, "no subject directories in " + root.string());
  return out;
}

std::vector<SubjectData> load_subjects(const fs::path& root) {
  std::vector<SubjectData> subjects;
  for (const auto& dir : subject_dirs(root)) {
    const auto scalp = DerivationSet::from_recording(dataset::load_recording_container(dir / kScalpDir));
    const auto ear = DerivationSet::from_recording(dataset::load_recording_container(dir / kEarDir));
    const auto labels = dataset::load_hypnogram(dir / kHypnogramFile);
    const std::string id = dir.filename().string();
    subjects.push_back({id, dataset::make_paired_epochs(scalp, ear, labels, id)});
  }
  return subjects;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptContainer, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::IOError, "cannot write " + path.string());
}

json metrics_json(const MetricsReport& report) {
  json f1 = json::object();
  for (std::size_t k = 0; k < kNumStages; ++k) {
    const auto& v = report.f1.per_class[k];
    f1[std::string(to_string(static_cast<Stage>(k)))] = v ? json(*v) : json(nullptr);
  }
  return {{"epochs", report.epochs},
          {"accuracy", report.accuracy},
          {"kappa", report.kappa},
          {"kappa_degenerate", report.kappa_degenerate},
          {"f1", f1},
          {"macro_f1", report.f1.macro}};
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\predicted";
  for (std::size_t k = 0; k < kNumStages; ++k) out << ',' << to_string(static_cast<Stage>(k));
  out << '\n';
  for (std::size_t i = 0; i < kNumStages; ++i) {
    out << to_string(static_cast<Stage>(i));
    for (std::size_t j = 0; j < kNumStages; ++j) out << ',' << cm.counts[i][j];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix parse_confusion_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < kNumStages; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorKind::CorruptContainer, path.string() + ": too few rows");
    const auto cells = split(line, ',');
    if (cells.size() != kNumStages + 1) throw Error(ErrorKind::CorruptContainer, path.string() + ": bad row");
    for (std::size_t j = 0; j < kNumStages; ++j) {
      try {
        cm.counts[i][j] = std::stoull(cells[j + 1]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::CorruptContainer, path.string() + ": bad count '" + cells[j + 1] + "'");
      }
    }
  }
  return cm;
}

std::string embedding_csv(const EmbeddingExport& e) {
  std::ostringstream out;
  out << "x,y,stage,domain\n";
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    out << fixed(e.points[i][0], 6) << ',' << fixed(e.points[i][1], 6) << ','
        << to_string(stage_from_code(e.labels[i])) << ',' << to_string(e.tags[i]) << '\n';
  }
  return out.str();
}

std::vector<EmbeddingPoint> parse_embedding_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IOError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EmbeddingPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw Error(ErrorKind::CorruptContainer, path.string() + ": bad row");
    try {
      out.push_back({std::stod(cells[0]), std::stod(cells[1]), cells[2], cells[3]});
    } catch (const std::exception&) {
      throw Error(ErrorKind::CorruptContainer, path.string() + ": bad coordinate");
    }
  }
  return out;
}

}  // namespace earkd::cli
