#pragma once

// Layer primitives with explicit forward/backward passes. Activations are
// row-major matrices: feature maps are [channels x length], token sequences
// are [tokens x width].

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "earkd/models.hpp"

namespace earkd::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Allocates parameters and hands out their indices.
class ParameterBuilder {
 public:
  ParameterBuilder(ParameterSet& params, std::uint64_t seed) : params_(params), rng_(seed) {}

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  std::size_t uniform(std::string name, std::vector<std::size_t> shape, std::size_t fan_in);
  std::size_t constant(std::string name, std::vector<std::size_t> shape, double value);
  std::size_t normal(std::string name, std::vector<std::size_t> shape, double stddev);

 private:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  ParameterSet& params_;
  std::mt19937_64 rng_;
};

inline MatMap view(Parameter& p, std::size_t rows, std::size_t cols) {
  return {p.values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
inline ConstMatMap view(const Parameter& p, std::size_t rows, std::size_t cols) {
  return {p.values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
inline MatMap view(std::vector<double>& g, std::size_t rows, std::size_t cols) {
  return {g.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

struct Conv1d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  std::size_t weight = 0;  // [out x in*kernel]
  std::size_t bias = 0;    // [out]

  std::size_t out_length(std::size_t length) const {
    return (length + pad_left + pad_right - kernel) / stride + 1;
  }
  void init(ParameterBuilder& builder, const std::string& name);
};

struct ConvCache {
  Mat columns;  // im2col of the input, [in*kernel x out_length]
  std::size_t in_length = 0;
};

Mat conv_forward(const Conv1d& conv, const ParameterSet& params, const Mat& x, ConvCache& cache);
// Accumulates parameter gradients; returns dL/dx when `want_input_grad`.
Mat conv_backward(const Conv1d& conv, const ParameterSet& params, const ConvCache& cache,
                  const Mat& dy, Gradients& grads, bool want_input_grad);

struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight = 0;  // [out x in]
  std::size_t bias = 0;    // [out]

  void init(ParameterBuilder& builder, const std::string& name);
};

// Row-wise: y = x W^T + b for x [rows x in].
Mat linear_forward(const Linear& layer, const ParameterSet& params, const Mat& x);
Mat linear_backward(const Linear& layer, const ParameterSet& params, const Mat& x, const Mat& dy,
                    Gradients& grads);

void relu_inplace(Mat& x);
// Zeroes dy wherever the activation output was not positive.
void relu_backward_inplace(const Mat& activated, Mat& dy);

struct PoolCache {
  std::vector<std::uint32_t> argmax;  // flat index into the input row
  std::size_t in_length = 0;
};

// Max pooling along the length axis with ceil mode (partial last window).
Mat maxpool_forward(const Mat& x, std::size_t window, PoolCache& cache);
Mat maxpool_backward(const Mat& dy, const PoolCache& cache);

struct LayerNorm {
  std::size_t width = 0;
  std::size_t gamma = 0;
  std::size_t beta = 0;
  bool affine = true;  // false: plain standardisation, no parameters
  void init(ParameterBuilder& builder, const std::string& name);
};

struct LayerNormCache {
  Mat normalized;
  Vec inv_std;
};

Mat layernorm_forward(const LayerNorm& ln, const ParameterSet& params, const Mat& x,
                      LayerNormCache& cache);
Mat layernorm_backward(const LayerNorm& ln, const ParameterSet& params, const LayerNormCache& cache,
                       const Mat& dy, Gradients& grads);

struct Attention {
  std::size_t width = 0;
  std::size_t heads = 1;
  Linear qkv;  // width -> 3 * width
  Linear proj;
  void init(ParameterBuilder& builder, const std::string& name);
};

struct AttentionCache {
  Mat input;
  Mat qkv;
  std::vector<Mat> weights;  // softmax per head, [tokens x tokens]
  Mat context;               // concatenated heads before projection
};

Mat attention_forward(const Attention& att, const ParameterSet& params, const Mat& x,
                      AttentionCache& cache);
Mat attention_backward(const Attention& att, const ParameterSet& params,
                       const AttentionCache& cache, const Mat& dy, Gradients& grads);

}  // namespace earkd::nn
