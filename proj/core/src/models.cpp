#include "earkd/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "earkd/errors.hpp"
#include "nn_ops.hpp"

namespace earkd {

std::string_view to_string(Arch arch) {
  switch (arch) {
    case Arch::Cnn: return "cnn";
    case Arch::Transformer: return "transformer";
  }
  return "unknown";
}

std::optional<Arch> parse_arch(std::string_view name) {
  if (name == "cnn") return Arch::Cnn;
  if (name == "transformer") return Arch::Transformer;
  return std::nullopt;
}

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (in_channels < 1) fail("in_channels must be >= 1");
  if (width < 1) fail("width must be >= 1");
  if (depth < 1) fail("depth must be >= 1");
  if (epoch_samples < 64) fail("epoch_samples must be >= 64");
  if (arch == Arch::Transformer && (heads < 1 || feature_dim % heads != 0)) {
    fail("heads must divide feature_dim");
  }
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.values.size(), 0.0);
  return g;
}

void zero(Gradients& grads) {
  for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
}

std::size_t parameter_count(const ParameterSet& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.values.size();
  return n;
}

std::uint64_t parameter_hash(const ParameterSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    for (auto s : p.shape) mix(&s, sizeof(s));
    mix(p.values.data(), p.values.size() * sizeof(double));
  }
  return h;
}

StagerOutput SleepStager::forward(const EpochTensor& epoch) const {
  StagerOutput out;
  forward_traced(epoch, out);
  return out;
}

void SleepStager::check_input(const EpochTensor& epoch) const {
  if (epoch.samples != config_.epoch_samples || epoch.channels != config_.in_channels ||
      epoch.data.size() != epoch.samples * epoch.channels) {
    throw Error(ErrorKind::ShapeError,
                "epoch [" + std::to_string(epoch.samples) + " x " + std::to_string(epoch.channels) +
                    "] does not match model input [" + std::to_string(config_.epoch_samples) +
                    " x " + std::to_string(config_.in_channels) + "]");
  }
}

namespace {

using nn::Mat;

nn::Mat input_map(const EpochTensor& epoch) {
  return nn::ConstMatMap(epoch.data.data(), static_cast<Eigen::Index>(epoch.channels),
                         static_cast<Eigen::Index>(epoch.samples));
}

void write_head(const nn::Linear& head, const ParameterSet& params, const Mat& feature,
                StagerOutput& out) {
  const Mat logits = nn::linear_forward(head, params, feature);
  for (std::size_t k = 0; k < kNumStages; ++k) out.logits[k] = logits(0, static_cast<Eigen::Index>(k));
  out.feature.assign(feature.data(), feature.data() + feature.size());
}

// Gradient w.r.t. the feature row: direct term plus the head's contribution.
Mat head_backward(const nn::Linear& head, const ParameterSet& params, const Mat& feature,
                  std::span<const double> d_logits, std::span<const double> d_feature,
                  Gradients& grads) {
  Mat dl(1, static_cast<Eigen::Index>(kNumStages));
  for (std::size_t k = 0; k < kNumStages; ++k) dl(0, static_cast<Eigen::Index>(k)) = d_logits[k];
  Mat df = nn::linear_backward(head, params, feature, dl, grads);
  if (!d_feature.empty()) {
    for (Eigen::Index j = 0; j < df.cols(); ++j) df(0, j) += d_feature[static_cast<std::size_t>(j)];
  }
  return df;
}

constexpr std::size_t kStemKernel = 8;
constexpr std::size_t kStemStride = 4;
constexpr std::size_t kPool = 4;
constexpr std::size_t kPatch = 4;
// Feed-forward hidden width in halves of feature_dim.
constexpr std::size_t kFeedForward = 3;

class CnnStager final : public SleepStager {
 public:
  struct Block {
    nn::Conv1d conv;
    std::size_t pool = 1;  // 1 disables pooling
  };

  struct Trace final : ForwardTrace {
    struct BlockTrace {
      nn::ConvCache conv;
      Mat activated;
      nn::PoolCache pool;
    };
    std::vector<BlockTrace> blocks;
    nn::LayerNormCache feature_norm;
    Mat feature;  // [1 x D]
  };

  explicit CnnStager(const ModelConfig& config) : SleepStager(config) {
    nn::ParameterBuilder builder(params_, config.seed);
    std::size_t channels = config.in_channels;
    std::size_t length = config.epoch_samples;
    for (std::size_t i = 0; i < config.depth; ++i) {
      Block b;
      const bool last = (i + 1 == config.depth);
      const std::size_t out = last ? config.feature_dim : config.width << i;
      if (i == 0) {
        b.conv = {channels, out, kStemKernel, kStemStride, 2, 2};
      } else if (!last) {
        b.conv = {channels, out, 5, 1, 2, 2};
      } else {
        b.conv = {channels, out, 3, 1, 1, 1};
      }
      b.pool = last ? 1 : kPool;
      b.conv.init(builder, "block" + std::to_string(i) + ".conv");
      length = b.conv.out_length(length);
      if (b.pool > 1) length = (length + b.pool - 1) / b.pool;
      channels = out;
      blocks_.push_back(b);
    }
    feature_norm_ = {config.feature_dim, 0, 0, false};
    head_ = {config.feature_dim, kNumStages, 0, 0};
    head_.init(builder, "head");
  }

  std::unique_ptr<ForwardTrace> forward_traced(const EpochTensor& epoch,
                                               StagerOutput& out) const override {
    check_input(epoch);
    auto trace = std::make_unique<Trace>();
    trace->blocks.resize(blocks_.size());
    Mat x = input_map(epoch);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& bt = trace->blocks[i];
      Mat y = nn::conv_forward(blocks_[i].conv, params_, x, bt.conv);
      nn::relu_inplace(y);
      if (blocks_[i].pool > 1) {
        x = nn::maxpool_forward(y, blocks_[i].pool, bt.pool);
        bt.activated = std::move(y);
      } else {
        bt.activated = y;
        x = std::move(y);
      }
    }
    const Mat pooled = x.rowwise().mean().transpose();
    trace->feature = nn::layernorm_forward(feature_norm_, params_, pooled, trace->feature_norm);
    write_head(head_, params_, trace->feature, out);
    return trace;
  }

  void backward(const ForwardTrace& base, std::span<const double> d_logits,
                std::span<const double> d_feature, Gradients& grads) const override {
    const auto& trace = static_cast<const Trace&>(base);
    const Mat df = nn::layernorm_backward(
        feature_norm_, params_, trace.feature_norm,
        head_backward(head_, params_, trace.feature, d_logits, d_feature, grads), grads);

    const auto& last = trace.blocks.back().activated;
    Mat dx = (df.transpose() / static_cast<double>(last.cols())).replicate(1, last.cols());
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const auto& bt = trace.blocks[i];
      Mat dy = blocks_[i].pool > 1 ? nn::maxpool_backward(dx, bt.pool) : std::move(dx);
      nn::relu_backward_inplace(bt.activated, dy);
      dx = nn::conv_backward(blocks_[i].conv, params_, bt.conv, dy, grads, i > 0);
    }
  }

  std::unique_ptr<SleepStager> clone() const override { return std::make_unique<CnnStager>(*this); }

 private:
  std::vector<Block> blocks_;
  nn::LayerNorm feature_norm_;
  nn::Linear head_;
};

class TransformerStager final : public SleepStager {
 public:
  struct Layer {
    nn::LayerNorm ln1;
    nn::Attention attention;
    nn::LayerNorm ln2;
    nn::Linear ff1;
    nn::Linear ff2;
  };

  struct Trace final : ForwardTrace {
    nn::ConvCache stem;
    Mat stem_activated;
    nn::PoolCache pool;
    nn::ConvCache patch;
    struct LayerTrace {
      nn::LayerNormCache ln1;
      nn::AttentionCache attention;
      nn::LayerNormCache ln2;
      Mat ff_in;
      Mat hidden;
    };
    std::vector<LayerTrace> layers;
    nn::LayerNormCache final_ln;
    Mat feature;
  };

  explicit TransformerStager(const ModelConfig& config) : SleepStager(config) {
    nn::ParameterBuilder builder(params_, config.seed);
    const std::size_t d = config.feature_dim;
    stem_ = {config.in_channels, config.width, kStemKernel, kStemStride, 2, 2};
    stem_.init(builder, "stem.conv");
    std::size_t length = stem_.out_length(config.epoch_samples);
    length = (length + kPool - 1) / kPool;
    const std::size_t padded = std::max<std::size_t>(kPatch, (length + kPatch - 1) / kPatch * kPatch);
    patch_ = {config.width, d, kPatch, kPatch, 0, padded - length};
    patch_.init(builder, "patch.conv");
    tokens_ = patch_.out_length(length);
    position_ = builder.normal("position", {tokens_, d}, 0.02);
    for (std::size_t i = 0; i < config.depth; ++i) {
      const std::string name = "encoder" + std::to_string(i);
      Layer layer;
      layer.ln1 = {d, 0, 0};
      layer.ln1.init(builder, name + ".ln1");
      layer.attention.width = d;
      layer.attention.heads = config.heads;
      layer.attention.init(builder, name + ".attention");
      layer.ln2 = {d, 0, 0};
      layer.ln2.init(builder, name + ".ln2");
      layer.ff1 = {d, kFeedForward * d / 2, 0, 0};
      layer.ff1.init(builder, name + ".ff1");
      layer.ff2 = {kFeedForward * d / 2, d, 0, 0};
      layer.ff2.init(builder, name + ".ff2");
      layers_.push_back(layer);
    }
    final_ln_ = {d, 0, 0};
    final_ln_.init(builder, "final_ln");
    head_ = {d, kNumStages, 0, 0};
    head_.init(builder, "head");
  }

  std::unique_ptr<ForwardTrace> forward_traced(const EpochTensor& epoch,
                                               StagerOutput& out) const override {
    check_input(epoch);
    auto trace = std::make_unique<Trace>();
    Mat x = nn::conv_forward(stem_, params_, input_map(epoch), trace->stem);
    nn::relu_inplace(x);
    trace->stem_activated = x;
    x = nn::maxpool_forward(x, kPool, trace->pool);
    Mat tokens = nn::conv_forward(patch_, params_, x, trace->patch).transpose();
    tokens += nn::view(params_[position_], tokens_, config_.feature_dim);

    trace->layers.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& layer = layers_[i];
      auto& lt = trace->layers[i];
      const Mat a_in = nn::layernorm_forward(layer.ln1, params_, tokens, lt.ln1);
      tokens += nn::attention_forward(layer.attention, params_, a_in, lt.attention);
      lt.ff_in = nn::layernorm_forward(layer.ln2, params_, tokens, lt.ln2);
      lt.hidden = nn::linear_forward(layer.ff1, params_, lt.ff_in);
      nn::relu_inplace(lt.hidden);
      tokens += nn::linear_forward(layer.ff2, params_, lt.hidden);
    }
    const Mat normed = nn::layernorm_forward(final_ln_, params_, tokens, trace->final_ln);
    trace->feature = normed.colwise().mean();
    write_head(head_, params_, trace->feature, out);
    return trace;
  }

  void backward(const ForwardTrace& base, std::span<const double> d_logits,
                std::span<const double> d_feature, Gradients& grads) const override {
    const auto& trace = static_cast<const Trace&>(base);
    const Mat df = head_backward(head_, params_, trace.feature, d_logits, d_feature, grads);
    const auto n = static_cast<Eigen::Index>(tokens_);
    Mat dnormed = (df / static_cast<double>(n)).replicate(n, 1);
    Mat dtokens = nn::layernorm_backward(final_ln_, params_, trace.final_ln, dnormed, grads);

    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Layer& layer = layers_[i];
      const auto& lt = trace.layers[i];
      Mat dh = nn::linear_backward(layer.ff2, params_, lt.hidden, dtokens, grads);
      nn::relu_backward_inplace(lt.hidden, dh);
      const Mat dff_in = nn::linear_backward(layer.ff1, params_, lt.ff_in, dh, grads);
      dtokens += nn::layernorm_backward(layer.ln2, params_, lt.ln2, dff_in, grads);
      const Mat da = nn::attention_backward(layer.attention, params_, lt.attention, dtokens, grads);
      dtokens += nn::layernorm_backward(layer.ln1, params_, lt.ln1, da, grads);
    }

    nn::view(grads[position_], tokens_, config_.feature_dim) += dtokens;
    const Mat dpatch = dtokens.transpose();
    Mat dx = nn::conv_backward(patch_, params_, trace.patch, dpatch, grads, true);
    Mat dstem = nn::maxpool_backward(dx, trace.pool);
    nn::relu_backward_inplace(trace.stem_activated, dstem);
    nn::conv_backward(stem_, params_, trace.stem, dstem, grads, false);
  }

  std::unique_ptr<SleepStager> clone() const override {
    return std::make_unique<TransformerStager>(*this);
  }

 private:
  nn::Conv1d stem_;
  nn::Conv1d patch_;
  std::size_t tokens_ = 0;
  std::size_t position_ = 0;
  std::vector<Layer> layers_;
  nn::LayerNorm final_ln_;
  nn::Linear head_;
};

}  // namespace

std::unique_ptr<SleepStager> build_cnn_stager(const ModelConfig& config) {
  config.validate();
  if (config.arch != Arch::Cnn) throw Error(ErrorKind::InvalidConfig, "arch must be cnn");
  return std::make_unique<CnnStager>(config);
}

std::unique_ptr<SleepStager> build_transformer_stager(const ModelConfig& config) {
  config.validate();
  if (config.arch != Arch::Transformer) {
    throw Error(ErrorKind::InvalidConfig, "arch must be transformer");
  }
  return std::make_unique<TransformerStager>(config);
}

std::unique_ptr<SleepStager> build_stager(const ModelConfig& config) {
  return config.arch == Arch::Cnn ? build_cnn_stager(config) : build_transformer_stager(config);
}

BatchOutput forward_batch(const SleepStager& model, std::span<const EpochTensor* const> epochs) {
  BatchOutput out;
  out.batch = epochs.size();
  out.feature_dim = model.feature_dim();
  out.logits.reserve(out.batch * kNumStages);
  out.features.reserve(out.batch * out.feature_dim);
  for (const EpochTensor* e : epochs) {
    const StagerOutput o = model.forward(*e);
    out.logits.insert(out.logits.end(), o.logits.begin(), o.logits.end());
    out.features.insert(out.features.end(), o.feature.begin(), o.feature.end());
  }
  return out;
}

BatchOutput forward_batch(const SleepStager& model, std::span<const EpochTensor> epochs) {
  std::vector<const EpochTensor*> ptrs;
  ptrs.reserve(epochs.size());
  for (const auto& e : epochs) ptrs.push_back(&e);
  return forward_batch(model, ptrs);
}

std::size_t argmax(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

}  // namespace earkd
