#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "earkd/dataset.hpp"
#include "earkd/models.hpp"

namespace earkd {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Weight of the feature term in the distillation loss.
  double kd_weight = 1.0;

  void validate() const;  // throws InvalidConfig
  bool operator==(const TrainConfig&) const = default;
};

enum class Domain { Scalp, Ear };

// Single-domain view over paired epochs: inputs plus integer stage codes.
struct EpochSet {
  std::vector<const EpochTensor*> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  bool empty() const noexcept { return inputs.empty(); }
};

EpochSet domain_view(std::span<const PairedEpoch* const> epochs, Domain domain);
std::vector<const PairedEpoch*> paired_view(std::span<const SubjectData> subjects);

struct TrainResult {
  std::unique_ptr<SleepStager> model;
  // Online distillation: the jointly trained teacher. Transfer: the
  // phase-one model the fine-tuning started from.
  std::unique_ptr<SleepStager> companion;
  std::vector<double> loss_trace;          // mean loss per training epoch
  std::vector<double> teacher_loss_trace;  // online distillation only
};

}  // namespace earkd

namespace earkd::losses {

// Value and gradient with respect to the first (row-major) argument.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean over the batch of -log softmax(logits)[label]; logits are [B x 5].
LossResult ce_loss(std::span<const double> logits, std::span<const int> labels);

// Mean over the batch of ||student_i - teacher_i||^2; both are [B x dim].
LossResult feature_mse(std::span<const double> student, std::span<const double> teacher,
                       std::size_t dim);

struct KdLossResult {
  double value = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  std::vector<double> d_logits;
  std::vector<double> d_feature;
};

// ce_loss(student logits) + weight * feature_mse(student feature, teacher feature).
KdLossResult kd_loss(std::span<const double> student_logits, std::span<const double> student_feature,
                     std::span<const double> teacher_feature, std::span<const int> labels,
                     std::size_t dim, double weight = 1.0);

}  // namespace earkd::losses

namespace earkd::training {

class Adam {
 public:
  Adam(const ParameterSet& params, const TrainConfig& config);
  void step(ParameterSet& params, const Gradients& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig config_;
  Gradients m_;
  Gradients v_;
  std::size_t t_ = 0;
};

// Deterministic order of training examples for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

TrainResult train_supervised(const SleepStager& initial, const EpochSet& data,
                             const TrainConfig& config);

// Supervised on scalp, then all weights fine-tuned on ear.
TrainResult train_transfer(const ModelConfig& model_config, const EpochSet& scalp,
                           const EpochSet& ear, const TrainConfig& config);

// Frozen teacher features on the scalp side guide a freshly initialised
// student on the ear side.
TrainResult train_offline_kd(const SleepStager& teacher, const ModelConfig& student_config,
                             std::span<const PairedEpoch* const> data, const TrainConfig& config);

struct OnlineOptions {
  bool train_student = true;
};

// Teacher and student trained together on the same batches; the teacher
// step comes first and only sees its own cross-entropy.
TrainResult train_online_kd(const ModelConfig& teacher_config, const ModelConfig& student_config,
                            std::span<const PairedEpoch* const> data, const TrainConfig& config,
                            const OnlineOptions& options = {});

}  // namespace earkd::training
