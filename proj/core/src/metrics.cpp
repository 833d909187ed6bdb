#include <numeric>

#include "earkd/errors.hpp"
#include "earkd/evaluation.hpp"

namespace earkd {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < kNumStages; ++i) {
    for (std::size_t j = 0; j < kNumStages; ++j) counts[i][j] += other.counts[i][j];
  }
  return *this;
}

}  // namespace earkd

namespace earkd::evaluation {
namespace {

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix has no entries");
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorKind::ShapeError, "predictions and labels differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto t = static_cast<std::size_t>(stage_from_code(labels[i]));
    const auto p = static_cast<std::size_t>(stage_from_code(predictions[i]));
    ++cm.counts[t][p];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < kNumStages; ++k) trace += cm.counts[k][k];
  return static_cast<double>(trace) / static_cast<double>(cm.total());
}

Kappa cohen_kappa(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const auto n = static_cast<double>(cm.total());
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t k = 0; k < kNumStages; ++k) {
    observed += static_cast<double>(cm.counts[k][k]);
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < kNumStages; ++j) {
      row += static_cast<double>(cm.counts[k][j]);
      col += static_cast<double>(cm.counts[j][k]);
    }
    expected += row * col;
  }
  const double po = observed / n;
  const double pe = expected / (n * n);
  if (pe >= 1.0) return {0.0, true};
  return {(po - pe) / (1.0 - pe), false};
}

F1Scores per_class_f1(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  F1Scores out;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t k = 0; k < kNumStages; ++k) {
    const auto tp = static_cast<double>(cm.counts[k][k]);
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t j = 0; j < kNumStages; ++j) {
      if (j == k) continue;
      fp += static_cast<double>(cm.counts[j][k]);
      fn += static_cast<double>(cm.counts[k][j]);
    }
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) continue;
    const double f1 = 2.0 * tp / denom;
    out.per_class[k] = f1;
    sum += f1;
    ++defined;
  }
  out.macro = defined ? sum / static_cast<double>(defined) : 0.0;
  return out;
}

MetricsReport metrics_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.epochs = cm.total();
  r.accuracy = accuracy(cm);
  const Kappa k = cohen_kappa(cm);
  r.kappa = k.value;
  r.kappa_degenerate = k.degenerate;
  r.f1 = per_class_f1(cm);
  return r;
}

}  // namespace earkd::evaluation
