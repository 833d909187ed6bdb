#include "earkd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "earkd/errors.hpp"

namespace earkd {

void TrainConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(kd_weight >= 0.0)) fail("kd_weight must be >= 0");
}

EpochSet domain_view(std::span<const PairedEpoch* const> epochs, Domain domain) {
  EpochSet set;
  set.inputs.reserve(epochs.size());
  set.labels.reserve(epochs.size());
  for (const PairedEpoch* p : epochs) {
    set.inputs.push_back(domain == Domain::Scalp ? &p->scalp : &p->ear);
    set.labels.push_back(code(p->label));
  }
  return set;
}

std::vector<const PairedEpoch*> paired_view(std::span<const SubjectData> subjects) {
  std::vector<const PairedEpoch*> out;
  for (const auto& s : subjects) {
    for (const auto& e : s.epochs) out.push_back(&e);
  }
  return out;
}

}  // namespace earkd

namespace earkd::training {
namespace {

struct BatchForward {
  std::vector<std::unique_ptr<ForwardTrace>> traces;
  std::vector<double> logits;
  std::vector<double> features;
};

BatchForward run_batch(const SleepStager& model, const std::vector<const EpochTensor*>& inputs,
                       std::span<const std::size_t> idx) {
  BatchForward b;
  b.traces.reserve(idx.size());
  b.logits.reserve(idx.size() * kNumStages);
  b.features.reserve(idx.size() * model.feature_dim());
  StagerOutput out;
  for (std::size_t i : idx) {
    b.traces.push_back(model.forward_traced(*inputs[i], out));
    b.logits.insert(b.logits.end(), out.logits.begin(), out.logits.end());
    b.features.insert(b.features.end(), out.feature.begin(), out.feature.end());
  }
  return b;
}

std::vector<int> gather(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

void backward_batch(const SleepStager& model, const BatchForward& b,
                    std::span<const double> d_logits, std::span<const double> d_features,
                    Gradients& grads) {
  const std::size_t dim = model.feature_dim();
  for (std::size_t i = 0; i < b.traces.size(); ++i) {
    const auto dl = d_logits.subspan(i * kNumStages, kNumStages);
    const auto df = d_features.empty() ? std::span<const double>{} : d_features.subspan(i * dim, dim);
    model.backward(*b.traces[i], dl, df, grads);
  }
}

// One cross-entropy step; returns the batch loss.
double supervised_step(SleepStager& model, Adam& optimizer, Gradients& grads,
                       const EpochSet& data, std::span<const std::size_t> idx) {
  BatchForward b = run_batch(model, data.inputs, idx);
  const auto labels = gather(data.labels, idx);
  const auto ce = losses::ce_loss(b.logits, labels);
  zero(grads);
  backward_batch(model, b, ce.grad, {}, grads);
  optimizer.step(model.parameters(), grads);
  return ce.value;
}

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw Error(ErrorKind::EmptyDataset, std::string(what) + " is empty");
}

}  // namespace

Adam::Adam(const ParameterSet& params, const TrainConfig& config)
    : config_(config), m_(zero_gradients(params)), v_(zero_gradients(params)) {}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].values;
    const auto& g = grads[p];
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5EEDu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TrainResult train_supervised(const SleepStager& initial, const EpochSet& data,
                             const TrainConfig& config) {
  config.validate();
  require_nonempty(data.size(), "training set");
  TrainResult result;
  result.model = initial.clone();
  SleepStager& model = *result.model;
  Adam optimizer(model.parameters(), config);
  Gradients grads = zero_gradients(model.parameters());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), config.seed, epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      total += supervised_step(model, optimizer, grads, data, idx) * static_cast<double>(idx.size());
    }
    result.loss_trace.push_back(total / static_cast<double>(data.size()));
  }
  return result;
}

TrainResult train_transfer(const ModelConfig& model_config, const EpochSet& scalp,
                           const EpochSet& ear, const TrainConfig& config) {
  require_nonempty(scalp.size(), "scalp training set");
  const auto initial = build_stager(model_config);
  TrainResult phase1 = train_supervised(*initial, scalp, config);
  require_nonempty(ear.size(), "ear training set");
  TrainResult phase2 = train_supervised(*phase1.model, ear, config);

  TrainResult result;
  result.model = std::move(phase2.model);
  result.companion = std::move(phase1.model);
  result.loss_trace = std::move(phase1.loss_trace);
  result.loss_trace.insert(result.loss_trace.end(), phase2.loss_trace.begin(),
                           phase2.loss_trace.end());
  return result;
}

TrainResult train_offline_kd(const SleepStager& teacher, const ModelConfig& student_config,
                             std::span<const PairedEpoch* const> data, const TrainConfig& config) {
  config.validate();
  if (teacher.feature_dim() != student_config.feature_dim) {
    throw Error(ErrorKind::FeatureShapeMismatch,
                "teacher feature_dim " + std::to_string(teacher.feature_dim()) +
                    " != student feature_dim " + std::to_string(student_config.feature_dim));
  }
  require_nonempty(data.size(), "paired training set");

  const EpochSet scalp = domain_view(data, Domain::Scalp);
  const EpochSet ear = domain_view(data, Domain::Ear);
  const std::size_t dim = teacher.feature_dim();

  // The teacher is frozen and deterministic, so its features are fixed targets.
  std::vector<double> targets;
  targets.reserve(data.size() * dim);
  for (const EpochTensor* x : scalp.inputs) {
    const auto out = teacher.forward(*x);
    targets.insert(targets.end(), out.feature.begin(), out.feature.end());
  }

  TrainResult result;
  result.model = build_stager(student_config);
  SleepStager& student = *result.model;
  Adam optimizer(student.parameters(), config);
  Gradients grads = zero_gradients(student.parameters());

  std::vector<double> batch_targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), config.seed, epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      BatchForward b = run_batch(student, ear.inputs, idx);
      batch_targets.clear();
      for (std::size_t i : idx) {
        batch_targets.insert(batch_targets.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * dim),
                             targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
      }
      const auto labels = gather(ear.labels, idx);
      const auto loss = losses::kd_loss(b.logits, b.features, batch_targets, labels, dim,
                                        config.kd_weight);
      zero(grads);
      backward_batch(student, b, loss.d_logits, loss.d_feature, grads);
      optimizer.step(student.parameters(), grads);
      total += loss.value * static_cast<double>(idx.size());
    }
    result.loss_trace.push_back(total / static_cast<double>(data.size()));
  }
  return result;
}

TrainResult train_online_kd(const ModelConfig& teacher_config, const ModelConfig& student_config,
                            std::span<const PairedEpoch* const> data, const TrainConfig& config,
                            const OnlineOptions& options) {
  config.validate();
  if (teacher_config.feature_dim != student_config.feature_dim) {
    throw Error(ErrorKind::FeatureShapeMismatch, "teacher and student feature_dim differ");
  }
  require_nonempty(data.size(), "paired training set");

  const EpochSet scalp = domain_view(data, Domain::Scalp);
  const EpochSet ear = domain_view(data, Domain::Ear);
  const std::size_t dim = teacher_config.feature_dim;

  TrainResult result;
  result.companion = build_stager(teacher_config);
  result.model = build_stager(student_config);
  SleepStager& teacher = *result.companion;
  SleepStager& student = *result.model;
  Adam teacher_opt(teacher.parameters(), config);
  Adam student_opt(student.parameters(), config);
  Gradients teacher_grads = zero_gradients(teacher.parameters());
  Gradients student_grads = zero_gradients(student.parameters());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), config.seed, epoch);
    double teacher_total = 0.0;
    double student_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto n = static_cast<double>(idx.size());

      teacher_total += supervised_step(teacher, teacher_opt, teacher_grads, scalp, idx) * n;
      if (!options.train_student) continue;

      // The student sees the teacher as it is after this batch's update.
      const auto teacher_features = run_batch(teacher, scalp.inputs, idx).features;
      BatchForward b = run_batch(student, ear.inputs, idx);
      const auto labels = gather(ear.labels, idx);
      const auto loss = losses::kd_loss(b.logits, b.features, teacher_features, labels, dim,
                                        config.kd_weight);
      zero(student_grads);
      backward_batch(student, b, loss.d_logits, loss.d_feature, student_grads);
      student_opt.step(student.parameters(), student_grads);
      student_total += loss.value * n;
    }
    result.teacher_loss_trace.push_back(teacher_total / static_cast<double>(data.size()));
    if (options.train_student) {
      result.loss_trace.push_back(student_total / static_cast<double>(data.size()));
    }
  }
  return result;
}

}  // namespace earkd::training
