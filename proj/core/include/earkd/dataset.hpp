#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earkd/preprocess.hpp"
#include "earkd/signal.hpp"

namespace earkd {

inline constexpr std::size_t kNumStages = 5;

enum class Stage : std::uint8_t { W = 0, N1 = 1, N2 = 2, N3 = 3, REM = 4 };

inline constexpr std::array<std::string_view, kNumStages> kStageNames{"W", "N1", "N2", "N3", "REM"};

constexpr int code(Stage s) noexcept { return static_cast<int>(s); }
std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view token);
Stage stage_from_code(int code);  // throws InvalidLabel

struct PairedEpoch {
  EpochTensor scalp;
  EpochTensor ear;
  Stage label = Stage::W;
  std::string subject_id;
};

// All paired epochs of one subject.
struct SubjectData {
  std::string id;
  std::vector<PairedEpoch> epochs;
};

struct Fold {
  std::vector<std::string> train_subjects;
  std::string test_subject;
};

struct SplitPlan {
  std::vector<Fold> folds;
};

}  // namespace earkd

namespace earkd::dataset {

inline constexpr double kStdFloor = 1e-8;

// Container: <dir>/manifest.json plus one little-endian float32 file per
// channel named "<channel_id>.f32".
Recording load_recording_container(const std::filesystem::path& dir);
void write_recording_container(const std::filesystem::path& dir, const Recording& recording);

std::vector<Stage> load_hypnogram(const std::filesystem::path& path);
std::vector<Stage> parse_hypnogram(std::string_view text);
void write_hypnogram(const std::filesystem::path& path, std::span<const Stage> labels);

// In-place per-channel z-score; channels with std below kStdFloor become zeros.
void normalize_epoch(EpochTensor& epoch);

std::vector<PairedEpoch> make_paired_epochs(const DerivationSet& scalp, const DerivationSet& ear,
                                            std::span<const Stage> labels,
                                            const std::string& subject_id);

SplitPlan loso_splits(std::span<const std::string> subject_ids);

}  // namespace earkd::dataset
