#include "earkd/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "earkd/errors.hpp"
#include "json.hpp"

namespace earkd {

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

std::optional<Stage> parse_stage(std::string_view token) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == token) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

Stage stage_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumStages)) {
    throw Error(ErrorKind::InvalidLabel, "stage code " + std::to_string(code) + " out of range");
  }
  return static_cast<Stage>(code);
}

}  // namespace earkd

namespace earkd::dataset {
namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IOError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

Recording load_recording_container(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorKind::IOError, "missing manifest in " + dir.string());
  }
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptContainer, std::string("manifest unreadable: ") + e.what());
  }

  Recording recording;
  std::size_t num_samples = 0;
  try {
    const auto dtype = manifest.at("dtype").get<std::string>();
    const auto byte_order = manifest.at("byte_order").get<std::string>();
    if (dtype != "float32" || byte_order != "little") {
      throw Error(ErrorKind::UnsupportedFormat,
                  "dtype '" + dtype + "' / byte order '" + byte_order + "' not supported");
    }
    recording.channel_ids = manifest.at("channel_ids").get<std::vector<std::string>>();
    recording.sample_rate = manifest.at("sample_rate_hz").get<double>();
    num_samples = manifest.at("num_samples").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptContainer, std::string("manifest field error: ") + e.what());
  }

  for (const auto& id : recording.channel_ids) {
    const fs::path file = dir / (id + ".f32");
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) throw Error(ErrorKind::CorruptContainer, "missing channel file " + file.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != num_samples * sizeof(float)) {
      throw Error(ErrorKind::CorruptContainer,
                  file.string() + " holds " + std::to_string(bytes / sizeof(float)) +
                      " samples, manifest declares " + std::to_string(num_samples));
    }
    in.seekg(0);
    std::vector<float> raw(num_samples);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw Error(ErrorKind::CorruptContainer, "short read on " + file.string());
    recording.channels.emplace_back(raw.begin(), raw.end());
  }
  recording.validate();
  return recording;
}

void write_recording_container(const fs::path& dir, const Recording& recording) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IOError, "cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["channel_ids"] = recording.channel_ids;
  manifest["sample_rate_hz"] = recording.sample_rate;
  manifest["num_samples"] = recording.num_samples();
  manifest["dtype"] = "float32";
  manifest["byte_order"] = "little";
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error(ErrorKind::IOError, "cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
  }
  for (std::size_t c = 0; c < recording.channels.size(); ++c) {
    std::vector<float> raw(recording.channels[c].begin(), recording.channels[c].end());
    std::ofstream out(dir / (recording.channel_ids[c] + ".f32"), std::ios::binary);
    if (!out) throw Error(ErrorKind::IOError, "cannot write channel " + recording.channel_ids[c]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
  }
}

std::vector<Stage> parse_hypnogram(std::string_view text) {
  std::vector<Stage> labels;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = (end == std::string_view::npos) ? text.size() : end + 1;
    ++line_no;
    const std::string token = trim(line);
    if (token.empty() && pos >= text.size()) break;  // trailing newline
    const auto stage = parse_stage(token);
    if (!stage) throw InvalidStageToken(line_no, token);
    labels.push_back(*stage);
  }
  return labels;
}

std::vector<Stage> load_hypnogram(const fs::path& path) { return parse_hypnogram(read_text(path)); }

void write_hypnogram(const fs::path& path, std::span<const Stage> labels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
  for (Stage s : labels) out << to_string(s) << '\n';
}

void normalize_epoch(EpochTensor& epoch) {
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    auto ch = epoch.channel(c);
    double mean = 0.0;
    for (double v : ch) mean += v;
    mean /= static_cast<double>(ch.size());
    double var = 0.0;
    for (double v : ch) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(ch.size()));
    if (sd < kStdFloor) {
      std::fill(ch.begin(), ch.end(), 0.0);
      continue;
    }
    for (double& v : ch) v = (v - mean) / sd;
  }
}

std::vector<PairedEpoch> make_paired_epochs(const DerivationSet& scalp, const DerivationSet& ear,
                                            std::span<const Stage> labels,
                                            const std::string& subject_id) {
  if (scalp.num_samples() != ear.num_samples() || scalp.sample_rate != ear.sample_rate) {
    throw Error(ErrorKind::AlignmentError,
                "scalp (" + std::to_string(scalp.num_samples()) + " samples) and ear (" +
                    std::to_string(ear.num_samples()) + " samples) are not aligned");
  }
  auto scalp_epochs = signal::segment_epochs(scalp.data, scalp.sample_rate);
  auto ear_epochs = signal::segment_epochs(ear.data, ear.sample_rate);
  if (labels.size() != scalp_epochs.size()) {
    throw Error(ErrorKind::LabelCountMismatch, std::to_string(labels.size()) + " labels for " +
                                                   std::to_string(scalp_epochs.size()) + " epochs");
  }
  std::vector<PairedEpoch> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    PairedEpoch p{std::move(scalp_epochs[i]), std::move(ear_epochs[i]), labels[i], subject_id};
    normalize_epoch(p.scalp);
    normalize_epoch(p.ear);
    out.push_back(std::move(p));
  }
  return out;
}

SplitPlan loso_splits(std::span<const std::string> subject_ids) {
  if (subject_ids.size() < 2) {
    throw Error(ErrorKind::NotEnoughSubjects, "leave-one-subject-out needs at least 2 subjects");
  }
  const std::set<std::string> unique(subject_ids.begin(), subject_ids.end());
  if (unique.size() != subject_ids.size()) {
    throw Error(ErrorKind::InvalidConfig, "subject ids must be unique");
  }
  SplitPlan plan;
  for (std::size_t k = 0; k < subject_ids.size(); ++k) {
    Fold fold;
    fold.test_subject = subject_ids[k];
    for (std::size_t j = 0; j < subject_ids.size(); ++j) {
      if (j != k) fold.train_subjects.push_back(subject_ids[j]);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace earkd::dataset
