#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earkd/dataset.hpp"
#include "earkd/signal.hpp"

namespace earkd {

enum class Arch { Cnn, Transformer };

std::string_view to_string(Arch arch);
std::optional<Arch> parse_arch(std::string_view name);

struct ModelConfig {
  Arch arch = Arch::Cnn;
  std::size_t epoch_samples = 3000;  // T; 30 s at the data's sample rate
  std::size_t in_channels = 3;
  std::size_t feature_dim = 64;      // D, width of the distillation layer
  std::size_t width = 8;             // channels of the first convolution
  std::size_t depth = 3;             // conv blocks (cnn) or encoder layers (transformer)
  std::size_t heads = 2;             // transformer only
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
  bool operator==(const ModelConfig&) const = default;
};

struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

using ParameterSet = std::vector<Parameter>;
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParameterSet& params);
void zero(Gradients& grads);
std::size_t parameter_count(const ParameterSet& params);
// FNV-1a over names, shapes and the raw bytes of every value.
std::uint64_t parameter_hash(const ParameterSet& params);

struct StagerOutput {
  std::array<double, kNumStages> logits{};
  std::vector<double> feature;
};

// Opaque per-example activations kept for the backward pass.
class ForwardTrace {
 public:
  virtual ~ForwardTrace() = default;
};

// A sleep stager maps one [T x C] epoch to stage logits and the pooled
// pre-classifier feature vector used for distillation. There is no dropout
// or batch statistics, so training and evaluation passes coincide.
class SleepStager {
 public:
  virtual ~SleepStager() = default;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t feature_dim() const noexcept { return config_.feature_dim; }
  const ParameterSet& parameters() const noexcept { return params_; }
  ParameterSet& parameters() noexcept { return params_; }

  StagerOutput forward(const EpochTensor& epoch) const;

  virtual std::unique_ptr<ForwardTrace> forward_traced(const EpochTensor& epoch,
                                                       StagerOutput& out) const = 0;

  // Accumulates into `grads` the gradient of a loss whose partials with
  // respect to this example's logits and feature are given.
  virtual void backward(const ForwardTrace& trace, std::span<const double> d_logits,
                        std::span<const double> d_feature, Gradients& grads) const = 0;

  virtual std::unique_ptr<SleepStager> clone() const = 0;

 protected:
  explicit SleepStager(ModelConfig config) : config_(std::move(config)) {}
  SleepStager(const SleepStager&) = default;

  void check_input(const EpochTensor& epoch) const;  // throws ShapeError

  ModelConfig config_;
  ParameterSet params_;
};

// Strided conv + max-pool blocks, global average pooling to D, linear head.
std::unique_ptr<SleepStager> build_cnn_stager(const ModelConfig& config);

// Conv stem and patch embedding, pre-norm self-attention encoder, mean
// pooling to D, linear head.
std::unique_ptr<SleepStager> build_transformer_stager(const ModelConfig& config);

std::unique_ptr<SleepStager> build_stager(const ModelConfig& config);

struct BatchOutput {
  std::size_t batch = 0;
  std::size_t feature_dim = 0;
  std::vector<double> logits;    // [B x 5] row-major
  std::vector<double> features;  // [B x D] row-major

  std::span<const double> logits_row(std::size_t i) const {
    return {logits.data() + i * kNumStages, kNumStages};
  }
  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
};

BatchOutput forward_batch(const SleepStager& model, std::span<const EpochTensor> epochs);
BatchOutput forward_batch(const SleepStager& model, std::span<const EpochTensor* const> epochs);

std::size_t argmax(std::span<const double> logits);

}  // namespace earkd
