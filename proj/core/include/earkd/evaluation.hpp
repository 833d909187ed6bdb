#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earkd/dataset.hpp"
#include "earkd/models.hpp"
#include "earkd/training.hpp"

namespace earkd {

// Rows are true stages, columns predicted stages.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumStages>, kNumStages> counts{};

  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct F1Scores {
  // Undefined (nullopt) for a class that is never true and never predicted.
  std::array<std::optional<double>, kNumStages> per_class;
  double macro = 0.0;
};

struct MetricsReport {
  std::uint64_t epochs = 0;
  double accuracy = 0.0;
  double kappa = 0.0;
  bool kappa_degenerate = false;
  F1Scores f1;
};

enum class Strategy { SupervisedScalp, SupervisedEar, Transfer, KdOffline, KdOnline };

inline constexpr std::array<Strategy, 5> kAllStrategies{
    Strategy::SupervisedScalp, Strategy::SupervisedEar, Strategy::Transfer, Strategy::KdOffline,
    Strategy::KdOnline};

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
// Input domain of the model a strategy produces.
Domain evaluation_domain(Strategy s);
std::string_view to_string(Domain d);
std::optional<Domain> parse_domain(std::string_view name);

struct FeatureSet {
  std::size_t dim = 0;
  std::vector<double> rows;  // [N x dim]
  std::vector<int> labels;
  std::vector<Domain> tags;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
};

struct EmbeddingExport {
  std::vector<std::array<double, 2>> points;
  std::vector<int> labels;
  std::vector<Domain> tags;
};

enum class EmbedMethod { Pca, Sne };

struct SneOptions {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
};

}  // namespace earkd

namespace earkd::evaluation {

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);
double accuracy(const ConfusionMatrix& cm);  // throws EmptyMatrix

struct Kappa {
  double value = 0.0;
  bool degenerate = false;  // chance agreement is 1; value reported as 0
};
Kappa cohen_kappa(const ConfusionMatrix& cm);

F1Scores per_class_f1(const ConfusionMatrix& cm);
MetricsReport metrics_report(const ConfusionMatrix& cm);

std::vector<int> predict(const SleepStager& model, std::span<const EpochTensor* const> epochs);

struct FoldResult {
  std::size_t index = 0;
  Fold fold;
  ConfusionMatrix confusion;
  MetricsReport metrics;
  std::vector<int> predictions;
  std::vector<int> labels;
  std::vector<double> loss_trace;
  std::vector<double> teacher_loss_trace;
  std::shared_ptr<const SleepStager> model;
  std::shared_ptr<const SleepStager> teacher;  // distillation strategies
};

struct LosoResult {
  Strategy strategy = Strategy::SupervisedEar;
  std::vector<FoldResult> folds;
  ConfusionMatrix pooled_confusion;
  MetricsReport pooled;
  // Unweighted mean of per-fold values, reported alongside the pooled numbers.
  double mean_fold_accuracy = 0.0;
  double mean_fold_kappa = 0.0;
};

struct LosoOptions {
  std::size_t threads = 1;
  // Supervised-scalp results on the same subjects whose fold models serve as
  // offline-distillation teachers instead of training new ones.
  const LosoResult* teachers = nullptr;
  std::function<void(std::size_t fold, const std::string& message)> log;
};

// Per-fold seeds are derived as seed + fold index, both for initialisation
// and for shuffling; every model of fold k starts from the same weights.
LosoResult loso_evaluate(Strategy strategy, const ModelConfig& model_config,
                         std::span<const SubjectData> subjects, const TrainConfig& train_config,
                         const LosoOptions& options = {});

// Trains a single fold; used by loso_evaluate and the command-line tool.
FoldResult run_fold(Strategy strategy, const ModelConfig& model_config,
                    std::span<const SubjectData> subjects, const Fold& fold, std::size_t fold_index,
                    const TrainConfig& train_config,
                    std::shared_ptr<const SleepStager> teacher = nullptr);

FeatureSet extract_features(const SleepStager& model, std::span<const EpochTensor* const> epochs,
                            std::span<const int> labels, Domain tag);
FeatureSet concat(const FeatureSet& a, const FeatureSet& b);

// Mean over rows of the squared Euclidean distance between paired rows.
double mean_squared_distance(const FeatureSet& a, const FeatureSet& b);

EmbeddingExport embed_2d(const FeatureSet& features, EmbedMethod method, std::uint64_t seed = 0,
                         const SneOptions& options = {});

}  // namespace earkd::evaluation
