#include "nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace earkd::nn {

std::size_t ParameterBuilder::add(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  params_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return params_.size() - 1;
}

std::size_t ParameterBuilder::uniform(std::string name, std::vector<std::size_t> shape,
                                      std::size_t fan_in) {
  const std::size_t idx = add(std::move(name), std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : params_[idx].values) v = dist(rng_);
  return idx;
}

std::size_t ParameterBuilder::constant(std::string name, std::vector<std::size_t> shape,
                                       double value) {
  const std::size_t idx = add(std::move(name), std::move(shape));
  std::fill(params_[idx].values.begin(), params_[idx].values.end(), value);
  return idx;
}

std::size_t ParameterBuilder::normal(std::string name, std::vector<std::size_t> shape,
                                     double stddev) {
  const std::size_t idx = add(std::move(name), std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : params_[idx].values) v = dist(rng_);
  return idx;
}

void Conv1d::init(ParameterBuilder& builder, const std::string& name) {
  const std::size_t fan_in = in_channels * kernel;
  weight = builder.uniform(name + ".weight", {out_channels, in_channels, kernel}, fan_in);
  bias = builder.uniform(name + ".bias", {out_channels}, fan_in);
}

Mat conv_forward(const Conv1d& conv, const ParameterSet& params, const Mat& x, ConvCache& cache) {
  const std::size_t length = static_cast<std::size_t>(x.cols());
  const std::size_t out_len = conv.out_length(length);
  const std::size_t k = conv.kernel;
  cache.in_length = length;
  cache.columns.setZero(static_cast<Eigen::Index>(conv.in_channels * k),
                        static_cast<Eigen::Index>(out_len));
  for (std::size_t ci = 0; ci < conv.in_channels; ++ci) {
    const double* src = x.data() + ci * length;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double* dst = cache.columns.data() + (ci * k + kk) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) {
        const auto pos = static_cast<std::ptrdiff_t>(t * conv.stride + kk) -
                         static_cast<std::ptrdiff_t>(conv.pad_left);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[t] = src[pos];
      }
    }
  }
  const auto w = view(params[conv.weight], conv.out_channels, conv.in_channels * k);
  const Eigen::Map<const Vec> b(params[conv.bias].values.data(),
                                static_cast<Eigen::Index>(conv.out_channels));
  Mat y = w * cache.columns;
  y.colwise() += b;
  return y;
}

Mat conv_backward(const Conv1d& conv, const ParameterSet& params, const ConvCache& cache,
                  const Mat& dy, Gradients& grads, bool want_input_grad) {
  const std::size_t k = conv.kernel;
  const std::size_t out_len = static_cast<std::size_t>(dy.cols());
  auto dw = view(grads[conv.weight], conv.out_channels, conv.in_channels * k);
  dw.noalias() += dy * cache.columns.transpose();
  Eigen::Map<Vec> db(grads[conv.bias].data(), static_cast<Eigen::Index>(conv.out_channels));
  db += dy.rowwise().sum();
  if (!want_input_grad) return {};

  const auto w = view(params[conv.weight], conv.out_channels, conv.in_channels * k);
  const Mat dcol = w.transpose() * dy;
  const std::size_t length = cache.in_length;
  Mat dx = Mat::Zero(static_cast<Eigen::Index>(conv.in_channels), static_cast<Eigen::Index>(length));
  for (std::size_t ci = 0; ci < conv.in_channels; ++ci) {
    double* dst = dx.data() + ci * length;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* src = dcol.data() + (ci * k + kk) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) {
        const auto pos = static_cast<std::ptrdiff_t>(t * conv.stride + kk) -
                         static_cast<std::ptrdiff_t>(conv.pad_left);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[pos] += src[t];
      }
    }
  }
  return dx;
}

void Linear::init(ParameterBuilder& builder, const std::string& name) {
  weight = builder.uniform(name + ".weight", {out, in}, in);
  bias = builder.uniform(name + ".bias", {out}, in);
}

Mat linear_forward(const Linear& layer, const ParameterSet& params, const Mat& x) {
  const auto w = view(params[layer.weight], layer.out, layer.in);
  const Eigen::Map<const Eigen::RowVectorXd> b(params[layer.bias].values.data(),
                                               static_cast<Eigen::Index>(layer.out));
  Mat y = x * w.transpose();
  y.rowwise() += b;
  return y;
}

Mat linear_backward(const Linear& layer, const ParameterSet& params, const Mat& x, const Mat& dy,
                    Gradients& grads) {
  auto dw = view(grads[layer.weight], layer.out, layer.in);
  dw.noalias() += dy.transpose() * x;
  Eigen::Map<Eigen::RowVectorXd> db(grads[layer.bias].data(), static_cast<Eigen::Index>(layer.out));
  db += dy.colwise().sum();
  const auto w = view(params[layer.weight], layer.out, layer.in);
  return dy * w;
}

void relu_inplace(Mat& x) { x = x.cwiseMax(0.0); }

void relu_backward_inplace(const Mat& activated, Mat& dy) {
  dy = (activated.array() > 0.0).select(dy, 0.0);
}

Mat maxpool_forward(const Mat& x, std::size_t window, PoolCache& cache) {
  const std::size_t channels = static_cast<std::size_t>(x.rows());
  const std::size_t length = static_cast<std::size_t>(x.cols());
  const std::size_t out_len = (length + window - 1) / window;
  cache.in_length = length;
  cache.argmax.resize(channels * out_len);
  Mat y(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(out_len));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* row = x.data() + c * length;
    for (std::size_t j = 0; j < out_len; ++j) {
      const std::size_t begin = j * window;
      const std::size_t end = std::min(begin + window, length);
      std::size_t best = begin;
      for (std::size_t t = begin + 1; t < end; ++t) {
        if (row[t] > row[best]) best = t;
      }
      y(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = row[best];
      cache.argmax[c * out_len + j] = static_cast<std::uint32_t>(best);
    }
  }
  return y;
}

Mat maxpool_backward(const Mat& dy, const PoolCache& cache) {
  const std::size_t channels = static_cast<std::size_t>(dy.rows());
  const std::size_t out_len = static_cast<std::size_t>(dy.cols());
  Mat dx = Mat::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(cache.in_length));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < out_len; ++j) {
      dx(static_cast<Eigen::Index>(c), cache.argmax[c * out_len + j]) +=
          dy(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
    }
  }
  return dx;
}

void LayerNorm::init(ParameterBuilder& builder, const std::string& name) {
  gamma = builder.constant(name + ".gamma", {width}, 1.0);
  beta = builder.constant(name + ".beta", {width}, 0.0);
}

namespace {
constexpr double kLayerNormEps = 1e-5;
}

Mat layernorm_forward(const LayerNorm& ln, const ParameterSet& params, const Mat& x,
                      LayerNormCache& cache) {
  const auto rows = x.rows();
  cache.normalized.resize(rows, x.cols());
  cache.inv_std.resize(rows);
  Mat y(rows, x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.normalized.row(r) = (x.row(r).array() - mean) * inv;
  }
  if (!ln.affine) return cache.normalized;
  const auto width = static_cast<Eigen::Index>(ln.width);
  const Eigen::Map<const Eigen::RowVectorXd> gamma(params[ln.gamma].values.data(), width);
  const Eigen::Map<const Eigen::RowVectorXd> beta(params[ln.beta].values.data(), width);
  for (Eigen::Index r = 0; r < rows; ++r) {
    y.row(r) = cache.normalized.row(r).cwiseProduct(gamma) + beta;
  }
  return y;
}

Mat layernorm_backward(const LayerNorm& ln, const ParameterSet& params, const LayerNormCache& cache,
                       const Mat& dy, Gradients& grads) {
  const auto width = static_cast<Eigen::Index>(ln.width);
  Eigen::RowVectorXd gamma = Eigen::RowVectorXd::Ones(width);
  if (ln.affine) {
    gamma = Eigen::Map<const Eigen::RowVectorXd>(params[ln.gamma].values.data(), width);
    Eigen::Map<Eigen::RowVectorXd> dgamma(grads[ln.gamma].data(), width);
    Eigen::Map<Eigen::RowVectorXd> dbeta(grads[ln.beta].data(), width);
    dgamma += dy.cwiseProduct(cache.normalized).colwise().sum();
    dbeta += dy.colwise().sum();
  }

  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma);
    const double mean_d = dxhat.mean();
    const double mean_dx = dxhat.cwiseProduct(cache.normalized.row(r)).mean();
    dx.row(r) = cache.inv_std(r) *
                (dxhat.array() - mean_d - cache.normalized.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

void Attention::init(ParameterBuilder& builder, const std::string& name) {
  qkv = {width, 3 * width, 0, 0};
  qkv.init(builder, name + ".qkv");
  proj = {width, width, 0, 0};
  proj.init(builder, name + ".proj");
}

Mat attention_forward(const Attention& att, const ParameterSet& params, const Mat& x,
                      AttentionCache& cache) {
  const auto n = x.rows();
  const auto d = static_cast<Eigen::Index>(att.width);
  const auto dk = d / static_cast<Eigen::Index>(att.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  cache.input = x;
  cache.qkv = linear_forward(att.qkv, params, x);
  cache.weights.resize(att.heads);
  cache.context.resize(n, d);
  for (std::size_t h = 0; h < att.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    const auto q = cache.qkv.middleCols(off, dk);
    const auto k = cache.qkv.middleCols(d + off, dk);
    const auto v = cache.qkv.middleCols(2 * d + off, dk);
    Mat s = (q * k.transpose()) * scale;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double m = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - m).exp();
      s.row(r) /= s.row(r).sum();
    }
    cache.context.middleCols(off, dk) = s * v;
    cache.weights[h] = std::move(s);
  }
  return linear_forward(att.proj, params, cache.context);
}

Mat attention_backward(const Attention& att, const ParameterSet& params,
                       const AttentionCache& cache, const Mat& dy, Gradients& grads) {
  const auto n = cache.input.rows();
  const auto d = static_cast<Eigen::Index>(att.width);
  const auto dk = d / static_cast<Eigen::Index>(att.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const Mat dcontext = linear_backward(att.proj, params, cache.context, dy, grads);
  Mat dqkv = Mat::Zero(n, 3 * d);
  for (std::size_t h = 0; h < att.heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    const auto q = cache.qkv.middleCols(off, dk);
    const auto k = cache.qkv.middleCols(d + off, dk);
    const auto v = cache.qkv.middleCols(2 * d + off, dk);
    const Mat& a = cache.weights[h];
    const auto dc = dcontext.middleCols(off, dk);

    const Mat da = dc * v.transpose();
    dqkv.middleCols(2 * d + off, dk) = a.transpose() * dc;
    Mat ds = a.cwiseProduct(da);
    const Eigen::VectorXd row_dot = ds.rowwise().sum();
    ds -= a.cwiseProduct(row_dot.replicate(1, n));
    dqkv.middleCols(off, dk) = (ds * k) * scale;
    dqkv.middleCols(d + off, dk) = (ds.transpose() * q) * scale;
  }
  return linear_backward(att.qkv, params, cache.input, dqkv, grads);
}

}  // namespace earkd::nn
