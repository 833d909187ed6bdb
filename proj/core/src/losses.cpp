#include <algorithm>
#include <cmath>

#include "earkd/errors.hpp"
#include "earkd/training.hpp"

namespace earkd::losses {

LossResult ce_loss(std::span<const double> logits, std::span<const int> labels) {
  const std::size_t batch = labels.size();
  if (logits.size() != batch * kNumStages) {
    throw Error(ErrorKind::ShapeError, "logits must be [B x 5] for B labels");
  }
  LossResult out;
  out.grad.assign(logits.size(), 0.0);
  if (batch == 0) return out;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= static_cast<int>(kNumStages)) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(label) + " out of range");
    }
    const auto row = logits.subspan(i * kNumStages, kNumStages);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    out.value += (log_z - row[static_cast<std::size_t>(label)]) * inv_batch;
    for (std::size_t k = 0; k < kNumStages; ++k) {
      const double p = std::exp(row[k] - log_z);
      out.grad[i * kNumStages + k] = (p - (static_cast<int>(k) == label ? 1.0 : 0.0)) * inv_batch;
    }
  }
  return out;
}

LossResult feature_mse(std::span<const double> student, std::span<const double> teacher,
                       std::size_t dim) {
  if (student.size() != teacher.size() || dim == 0 || student.size() % dim != 0) {
    throw Error(ErrorKind::ShapeError, "feature matrices must share shape [B x D]");
  }
  const std::size_t batch = student.size() / dim;
  LossResult out;
  out.grad.assign(student.size(), 0.0);
  if (batch == 0) return out;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = student[i * dim + j] - teacher[i * dim + j];
      sq += d * d;
      out.grad[i * dim + j] = 2.0 * d * inv_batch;
    }
    out.value += sq * inv_batch;
  }
  return out;
}

KdLossResult kd_loss(std::span<const double> student_logits, std::span<const double> student_feature,
                     std::span<const double> teacher_feature, std::span<const int> labels,
                     std::size_t dim, double weight) {
  if (student_feature.size() != labels.size() * dim) {
    throw Error(ErrorKind::ShapeError, "student features must be [B x D]");
  }
  LossResult ce = ce_loss(student_logits, labels);
  LossResult mse = feature_mse(student_feature, teacher_feature, dim);
  KdLossResult out;
  out.ce = ce.value;
  out.mse = mse.value;
  out.value = ce.value + weight * mse.value;
  out.d_logits = std::move(ce.grad);
  out.d_feature = std::move(mse.grad);
  if (weight != 1.0) {
    for (double& g : out.d_feature) g *= weight;
  }
  return out;
}

}  // namespace earkd::losses
