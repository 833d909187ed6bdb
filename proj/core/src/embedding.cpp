#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>

#include "earkd/errors.hpp"
#include "earkd/evaluation.hpp"

namespace earkd::evaluation {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> as_matrix(const FeatureSet& f) {
  return {f.rows.data(), static_cast<Eigen::Index>(f.size()), static_cast<Eigen::Index>(f.dim)};
}

RowMat pca_2d(const FeatureSet& f) {
  RowMat x = as_matrix(f);
  x.rowwise() -= x.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(x.cols(), 2);
  const Eigen::Index k = std::min<Eigen::Index>(2, svd.matrixV().cols());
  axes.leftCols(k) = svd.matrixV().leftCols(k);
  // Fix the sign of each axis so its largest-magnitude loading is positive.
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index idx = 0;
    axes.col(c).cwiseAbs().maxCoeff(&idx);
    if (axes(idx, c) < 0.0) axes.col(c) *= -1.0;
  }
  return x * axes;
}

// Row-conditional affinities at the requested perplexity, found by bisection
// on the Gaussian precision.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, sq_dist(i, j));
    }
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      double weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - min_d));
        sum += row(j);
        weighted += row(j) * (sq_dist(i, j) - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

RowMat sne_2d(const FeatureSet& f, std::uint64_t seed, const SneOptions& opt) {
  const Eigen::Index n = static_cast<Eigen::Index>(f.size());
  const Eigen::MatrixXd x = as_matrix(f);
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd sq = (norms.replicate(1, n) + norms.transpose().replicate(n, 1) - 2.0 * x * x.transpose())
                           .cwiseMax(0.0);

  const double perplexity = std::min(opt.perplexity, std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0));
  Eigen::MatrixXd p = conditional_affinities(sq, perplexity);
  p = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 1e-4);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = init(rng);
    y(i, 1) = init(rng);
  }
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd q(n, n);
  Eigen::MatrixXd grad(n, 2);

  for (std::size_t iter = 0; iter < opt.iterations; ++iter) {
    const bool early = iter < opt.exaggeration_iterations;
    const double exaggeration = early ? opt.early_exaggeration : 1.0;
    const double momentum = early ? 0.5 : 0.8;

    const Eigen::VectorXd yn = y.rowwise().squaredNorm();
    Eigen::MatrixXd kernel =
        (1.0 + (yn.replicate(1, n) + yn.transpose().replicate(n, 1) - 2.0 * y * y.transpose()).array())
            .inverse()
            .matrix();
    kernel.diagonal().setZero();
    q = (kernel / kernel.sum()).cwiseMax(1e-12);

    const Eigen::MatrixXd w = ((exaggeration * p - q).array() * kernel.array()).matrix();
    const Eigen::VectorXd wsum = w.rowwise().sum();
    grad = 4.0 * (wsum.asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0.0) == (velocity(i, d) > 0.0);
        gains(i, d) = same_sign ? std::max(0.01, gains(i, d) * 0.8) : gains(i, d) + 0.2;
      }
    }
    velocity = momentum * velocity - opt.learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
  }
  return y;
}

}  // namespace

FeatureSet extract_features(const SleepStager& model, std::span<const EpochTensor* const> epochs,
                            std::span<const int> labels, Domain tag) {
  if (epochs.size() != labels.size()) {
    throw Error(ErrorKind::ShapeError, "epochs and labels differ in length");
  }
  FeatureSet f;
  f.dim = model.feature_dim();
  f.rows.reserve(epochs.size() * f.dim);
  for (const EpochTensor* e : epochs) {
    const auto out = model.forward(*e);
    f.rows.insert(f.rows.end(), out.feature.begin(), out.feature.end());
  }
  f.labels.assign(labels.begin(), labels.end());
  f.tags.assign(epochs.size(), tag);
  return f;
}

FeatureSet concat(const FeatureSet& a, const FeatureSet& b) {
  if (a.size() && b.size() && a.dim != b.dim) {
    throw Error(ErrorKind::FeatureShapeMismatch, "feature sets have different widths");
  }
  FeatureSet out = a;
  if (!a.size()) out.dim = b.dim;
  out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.tags.insert(out.tags.end(), b.tags.begin(), b.tags.end());
  return out;
}

double mean_squared_distance(const FeatureSet& a, const FeatureSet& b) {
  if (a.dim != b.dim || a.size() != b.size()) {
    throw Error(ErrorKind::FeatureShapeMismatch, "feature sets must have identical shape");
  }
  if (a.size() == 0) throw Error(ErrorKind::EmptyDataset, "no features");
  return (as_matrix(a) - as_matrix(b)).squaredNorm() / static_cast<double>(a.size());
}

EmbeddingExport embed_2d(const FeatureSet& features, EmbedMethod method, std::uint64_t seed,
                         const SneOptions& options) {
  if (features.size() < 3) {
    throw Error(ErrorKind::NotEnoughPoints, "embedding needs at least 3 points, got " +
                                                std::to_string(features.size()));
  }
  if (features.rows.size() != features.size() * features.dim || features.dim == 0) {
    throw Error(ErrorKind::ShapeError, "feature rows do not match [N x dim]");
  }
  const RowMat y = method == EmbedMethod::Pca ? pca_2d(features) : sne_2d(features, seed, options);
  EmbeddingExport out;
  out.points.reserve(features.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i) out.points.push_back({y(i, 0), y(i, 1)});
  out.labels = features.labels;
  out.tags = features.tags;
  return out;
}

}  // namespace earkd::evaluation
