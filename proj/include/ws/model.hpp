#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ws/dataio.hpp"
#include "ws/layers.hpp"
#include "ws/rng.hpp"
#include "ws/tensor.hpp"

namespace ws::nn {

using dataio::parse_source;
using dataio::Source;
using dataio::source_channels;
using dataio::source_token;

struct ModelConfig {
  Source source = Source::Combined;
  double sampling_rate = dataio::kSamplingRate;
  int window_len = dataio::kWindowLen;
  int n_classes = kNumActivities;

  // Architecture constants.
  int conv1_filters = 32;
  int depth_multiplier = 2;
  int conv3_filters = 128;
  int conv_width = 10;  // (1, sampling_rate/2) kernels
  int pool_width = 2;
  double dropout_rate = 0.1;
  int attention_windows = 4;
  int attention_heads = 4;
  int dilated_layers = 2;
  int dilated_filters = 32;
  int dilated_kernel = 3;
  int dilation = 2;

  void validate() const {
    if (sampling_rate <= 0 || std::floor(sampling_rate / 2) != sampling_rate / 2) {
      throw std::invalid_argument("ModelConfig: sampling_rate/2 must be integral");
    }
    if (conv_width != static_cast<int>(sampling_rate / 2)) {
      throw std::invalid_argument("ModelConfig: conv kernel width must equal sampling_rate/2");
    }
    if (n_classes < 2) throw std::invalid_argument("ModelConfig: need at least 2 classes");
    if (window_len <= 0 || conv1_filters <= 0 || depth_multiplier <= 0 || conv3_filters <= 0 ||
        pool_width <= 0 || attention_windows <= 0 || attention_heads <= 0 || dilated_layers <= 0 ||
        dilated_filters <= 0 || dilated_kernel <= 0 || dilation <= 0) {
      throw std::invalid_argument("ModelConfig: architecture constants must be positive");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw std::invalid_argument("ModelConfig: dropout rate must be in [0,1)");
    }
    const int pooled = window_len / (pool_width * pool_width);
    if (pooled * pool_width * pool_width != window_len || pooled % attention_windows != 0) {
      throw std::invalid_argument(
          "ModelConfig: window_len must survive two pools and split into equal attention windows");
    }
  }

  int feature_len() const { return window_len / (pool_width * pool_width); }
  int attention_window_len() const { return feature_len() / attention_windows; }
  int model_dim() const {
    return source == Source::Combined ? 2 * conv3_filters : conv3_filters;
  }
};

inline nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["source"] = source_token(cfg.source);
  j["sampling_rate"] = cfg.sampling_rate;
  j["window_len"] = cfg.window_len;
  j["n_classes"] = cfg.n_classes;
  j["conv1_filters"] = cfg.conv1_filters;
  j["depth_multiplier"] = cfg.depth_multiplier;
  j["conv3_filters"] = cfg.conv3_filters;
  j["conv_width"] = cfg.conv_width;
  j["pool_width"] = cfg.pool_width;
  j["dropout_rate"] = cfg.dropout_rate;
  j["attention_windows"] = cfg.attention_windows;
  j["attention_heads"] = cfg.attention_heads;
  j["dilated_layers"] = cfg.dilated_layers;
  j["dilated_filters"] = cfg.dilated_filters;
  j["dilated_kernel"] = cfg.dilated_kernel;
  j["dilation"] = cfg.dilation;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.source = parse_source(j.at("source").get<std::string>());
  cfg.sampling_rate = j.at("sampling_rate").get<double>();
  cfg.window_len = j.at("window_len").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.conv1_filters = j.at("conv1_filters").get<int>();
  cfg.depth_multiplier = j.at("depth_multiplier").get<int>();
  cfg.conv3_filters = j.at("conv3_filters").get<int>();
  cfg.conv_width = j.at("conv_width").get<int>();
  cfg.pool_width = j.at("pool_width").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.attention_windows = j.at("attention_windows").get<int>();
  cfg.attention_heads = j.at("attention_heads").get<int>();
  cfg.dilated_layers = j.at("dilated_layers").get<int>();
  cfg.dilated_filters = j.at("dilated_filters").get<int>();
  cfg.dilated_kernel = j.at("dilated_kernel").get<int>();
  cfg.dilation = j.at("dilation").get<int>();
  cfg.validate();
  return cfg;
}

// One per-modality CNN feature extractor:
// [B,1,C,80] → conv(32,(1,10),same) → LN → ELU → depthwise((C,1),×2,valid)
// → LN → ELU → pool(1,2) → dropout → conv(128,(1,10),same) → LN → ELU
// → pool(1,2) → dropout → [B,128,20].
struct CnnBranch {
  int in_channels = 1;
  Tensor conv1_w, conv1_b, ln1_g, ln1_b;
  Tensor dw_w, dw_b, ln2_g, ln2_b;
  Tensor conv3_w, conv3_b, ln3_g, ln3_b;

  static CnnBranch init(const ModelConfig& cfg, int n_channels, Rng& rng) {
    if (n_channels != 1 && n_channels != 6) {
      throw std::invalid_argument("CnnBranch: channel count must be 1 or 6, got " +
                                  std::to_string(n_channels));
    }
    CnnBranch br;
    br.in_channels = n_channels;
    const int f1 = cfg.conv1_filters, mult = cfg.depth_multiplier, f3 = cfg.conv3_filters;
    const int kw = cfg.conv_width;
    br.conv1_w = init_trunc_normal({f1, 1, 1, kw}, kw, rng);
    br.conv1_b = init_zeros({f1});
    br.ln1_g = Tensor::full({f1, n_channels}, 1.0, true);
    br.ln1_b = init_zeros({f1, n_channels});
    br.dw_w = init_trunc_normal({f1, mult, n_channels, 1}, n_channels, rng);
    br.dw_b = init_zeros({f1 * mult});
    br.ln2_g = Tensor::full({f1 * mult, 1}, 1.0, true);
    br.ln2_b = init_zeros({f1 * mult, 1});
    br.conv3_w = init_trunc_normal({f3, f1 * mult, 1, kw}, f1 * mult * kw, rng);
    br.conv3_b = init_zeros({f3});
    br.ln3_g = Tensor::full({f3, 1}, 1.0, true);
    br.ln3_b = init_zeros({f3, 1});
    return br;
  }

  // x: [B, in_channels, window_len] → [B, conv3_filters, feature_len].
  Tensor forward(const Tensor& x, const ModelConfig& cfg, Mode mode, Rng& dropout_rng) const {
    if (x.ndim() != 3 || x.dim(1) != in_channels || x.dim(2) != cfg.window_len) {
      throw std::invalid_argument("CnnBranch: expected [B," + std::to_string(in_channels) + "," +
                                  std::to_string(cfg.window_len) + "], got " +
                                  shape_str(x.shape()));
    }
    const int B = x.dim(0);
    Tensor h = reshape(x, {B, 1, in_channels, cfg.window_len});
    h = elu(layer_norm(conv2d(h, conv1_w, conv1_b, PadMode::Same), ln1_g, ln1_b));
    h = elu(layer_norm(depthwise_conv2d(h, dw_w, dw_b), ln2_g, ln2_b));
    h = dropout(avg_pool2d(h, 1, cfg.pool_width), cfg.dropout_rate, dropout_rng, mode);
    h = elu(layer_norm(conv2d(h, conv3_w, conv3_b, PadMode::Same), ln3_g, ln3_b));
    h = dropout(avg_pool2d(h, 1, cfg.pool_width), cfg.dropout_rate, dropout_rng, mode);
    return reshape(h, {B, cfg.conv3_filters, cfg.feature_len()});
  }

  void collect(std::vector<Tensor>& out) const {
    for (const auto& t : {conv1_w, conv1_b, ln1_g, ln1_b, dw_w, dw_b, ln2_g, ln2_b, conv3_w,
                          conv3_b, ln3_g, ln3_b}) {
      out.push_back(t);
    }
  }
};

struct ForwardResult {
  Tensor probs;                       // [B, n_classes]
  Tensor pre_flatten;                 // recognition: [B, dilated_filters, feature_len]
  std::vector<Tensor> attention_probs;  // per window: [B·heads, w, w]
};

// The classifier: per-modality CNN branches, then either the
// attention + dilated-convolution head (recognition) or a direct
// flatten → dense head (authentication).
class Network {
 public:
  enum class Kind { Recognition, Authentication };

  static Network build(const ModelConfig& cfg, Rng& rng) {
    return assemble(cfg, Kind::Recognition, rng);
  }

  static Network build_auth(const ModelConfig& cfg, Rng& rng) {
    return assemble(cfg, Kind::Authentication, rng);
  }

  Kind kind() const { return kind_; }
  const ModelConfig& config() const { return cfg_; }
  const std::vector<CnnBranch>& branches() const { return branches_; }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (const auto& br : branches_) br.collect(out);
    if (kind_ == Kind::Recognition) {
      for (const auto& t : {wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_}) out.push_back(t);
      for (size_t l = 0; l < dil_w_.size(); ++l) {
        out.push_back(dil_w_[l]);
        out.push_back(dil_b_[l]);
      }
    }
    out.push_back(dense_w_);
    out.push_back(dense_b_);
    return out;
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
  }

  // Branch features for x [B, C_source, window_len]; Combined concatenates
  // the HBC and IMU branch outputs along the feature axis.
  Tensor features(const Tensor& x, Mode mode, Rng& dropout_rng) const {
    const int expected = source_channels(cfg_.source);
    if (x.ndim() != 3 || x.dim(1) != expected || x.dim(2) != cfg_.window_len) {
      throw std::invalid_argument("Network: expected input [B," + std::to_string(expected) + "," +
                                  std::to_string(cfg_.window_len) + "], got " +
                                  shape_str(x.shape()));
    }
    if (cfg_.source == Source::Combined) {
      const Tensor hbc = slice(x, 1, 0, 1);
      const Tensor imu = slice(x, 1, 1, 6);
      const Tensor fh = branches_[0].forward(hbc, cfg_, mode, dropout_rng);
      const Tensor fi = branches_[1].forward(imu, cfg_, mode, dropout_rng);
      return concat({fh, fi}, 1);
    }
    return branches_[0].forward(x, cfg_, mode, dropout_rng);
  }

  // Recognition head on a feature sequence [B, D, feature_len].
  ForwardResult head(const Tensor& feat, Mode mode, Rng& dropout_rng) const {
    (void)mode;
    (void)dropout_rng;
    const int B = feat.dim(0);
    const int D = cfg_.model_dim();
    const int T = cfg_.feature_len();
    const int wlen = cfg_.attention_window_len();
    if (feat.ndim() != 3 || feat.dim(1) != D || feat.dim(2) != T) {
      throw std::invalid_argument("Network: head expected [B," + std::to_string(D) + "," +
                                  std::to_string(T) + "], got " + shape_str(feat.shape()));
    }
    ForwardResult result;
    std::vector<Tensor> window_feats;
    for (int w = 0; w < cfg_.attention_windows; ++w) {
      Tensor seq = permute(slice(feat, 2, w * wlen, wlen), {0, 2, 1});  // [B, wlen, D]
      auto attn = multi_head_self_attention(seq, wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_,
                                            cfg_.attention_heads);
      result.attention_probs.push_back(attn.probs);
      Tensor h = permute(attn.output, {0, 2, 1});  // [B, D, wlen]
      for (size_t l = 0; l < dil_w_.size(); ++l) {
        h = dilated_conv1d(h, dil_w_[l], dil_b_[l], cfg_.dilation);
      }
      window_feats.push_back(h);
    }
    result.pre_flatten = concat(window_feats, 2);  // [B, dilated_filters, T]
    const Tensor flat = reshape(result.pre_flatten, {B, cfg_.dilated_filters * T});
    result.probs = softmax_last(linear(flat, dense_w_, dense_b_));
    return result;
  }

  ForwardResult forward(const Tensor& x, Mode mode, Rng& dropout_rng) const {
    const Tensor feat = features(x, mode, dropout_rng);
    if (kind_ == Kind::Recognition) return head(feat, mode, dropout_rng);
    ForwardResult result;
    const int B = feat.dim(0);
    const Tensor flat = reshape(feat, {B, cfg_.model_dim() * cfg_.feature_len()});
    result.probs = softmax_last(linear(flat, dense_w_, dense_b_));
    return result;
  }

 private:
  static Network assemble(const ModelConfig& cfg, Kind kind, Rng& rng) {
    cfg.validate();
    Network net;
    net.cfg_ = cfg;
    net.kind_ = kind;
    if (cfg.source == Source::Combined) {
      net.branches_.push_back(CnnBranch::init(cfg, 1, rng));
      net.branches_.push_back(CnnBranch::init(cfg, 6, rng));
    } else {
      net.branches_.push_back(CnnBranch::init(cfg, source_channels(cfg.source), rng));
    }
    const int D = cfg.model_dim();
    int dense_in = 0;
    if (kind == Kind::Recognition) {
      net.wq_ = init_glorot_uniform({D, D}, D, D, rng);
      net.bq_ = init_zeros({D});
      net.wk_ = init_glorot_uniform({D, D}, D, D, rng);
      net.bk_ = init_zeros({D});
      net.wv_ = init_glorot_uniform({D, D}, D, D, rng);
      net.bv_ = init_zeros({D});
      net.wo_ = init_glorot_uniform({D, D}, D, D, rng);
      net.bo_ = init_zeros({D});
      int ci = D;
      for (int l = 0; l < cfg.dilated_layers; ++l) {
        net.dil_w_.push_back(
            init_trunc_normal({cfg.dilated_filters, ci, cfg.dilated_kernel}, ci * cfg.dilated_kernel, rng));
        net.dil_b_.push_back(init_zeros({cfg.dilated_filters}));
        ci = cfg.dilated_filters;
      }
      dense_in = cfg.dilated_filters * cfg.feature_len();
    } else {
      dense_in = D * cfg.feature_len();
    }
    net.dense_w_ = init_trunc_normal({dense_in, cfg.n_classes}, dense_in, rng);
    net.dense_b_ = init_zeros({cfg.n_classes});
    return net;
  }

  Kind kind_ = Kind::Recognition;
  ModelConfig cfg_;
  std::vector<CnnBranch> branches_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  std::vector<Tensor> dil_w_, dil_b_;
  Tensor dense_w_, dense_b_;
};

}  // namespace ws::nn
