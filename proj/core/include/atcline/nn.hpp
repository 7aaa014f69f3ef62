#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "atcline/dataset.hpp"
#include "atcline/raster.hpp"
#include "atcline/rng.hpp"

// Multimodal regressor: structured MLP, one shallow CNN per image, a
// Transformer sequence encoder, and a concatenation fusion head predicting
// (time offset, duration). Forward and backward passes are written out by
// hand in double precision; gradient_check in train.hpp validates every
// parameter path against finite differences.
namespace atcline {

inline constexpr double kLayerNormEps = 1e-5;

// Dense row-major value block. Shape is metadata; all layer code indexes the
// flat array directly.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  static Tensor zeros(std::vector<std::size_t> shape_) {
    Tensor t;
    std::size_t n = 1;
    for (const std::size_t d : shape_) n *= d;
    t.shape = std::move(shape_);
    t.v.assign(n, 0.0);
    return t;
  }
  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

struct ModelConfig {
  std::size_t d_struct_in = 23;  // structured feature slots
  std::size_t d_mlp = 128;       // structured branch width and output

  std::size_t seq_len = 60;
  std::size_t d_seq_in = 4;  // alt, gs, hdg_sin, hdg_cos
  std::size_t d_seq_hidden = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ffn = 256;

  std::size_t img_size = 64;  // square inputs, 3 channels
  std::vector<std::size_t> cnn_channels = {16, 32, 64, 128};
  std::size_t d_img = 512;

  std::size_t fusion_hidden = 256;
  std::size_t out_dim = 2;
  double dropout = 0.1;

  std::size_t fusion_in() const { return d_mlp + d_seq_hidden + 2 * d_img; }
  void validate() const;
};

// Model sized to a dataset: feature count, sequence length, and image side
// come from the data; everything else keeps its default.
ModelConfig model_config_for(const Dataset& ds);

struct LinearP {
  Tensor w;  // (out, in)
  Tensor b;  // (out)
};
struct NormP {
  Tensor g;  // gain (d)
  Tensor o;  // offset (d)
};
struct ConvP {
  Tensor w;  // (c_out, c_in, 3, 3)
  Tensor b;  // (c_out)
};
struct EncoderLayerP {
  LinearP q, k, v, o;
  NormP ln1;
  LinearP ffn1, ffn2;
  NormP ln2;
};
struct CnnP {
  std::vector<ConvP> convs;
  LinearP fc;  // (d_img, c_last)
};

struct ModelParams {
  ModelConfig cfg;
  LinearP mlp_fc1, mlp_fc2;
  NormP mlp_ln1, mlp_ln2;
  CnnP cnn_hist, cnn_snap;
  LinearP seq_proj;
  Tensor posemb;  // (seq_len, d_seq_hidden)
  std::vector<EncoderLayerP> layers;
  LinearP fus_fc1, fus_fc2;
  NormP fus_ln;

  // All tensors zero, shaped for cfg. Also the gradient/optimizer-state shape.
  static ModelParams shaped(const ModelConfig& cfg);
  // Uniform fan-in init for weights, zero biases, unit layer-norm gains,
  // N(0, 0.02^2) positional embeddings. Draws follow named_tensors() order.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  // Canonical enumeration; the order defines init draws, checkpoint layout,
  // and optimizer-state pairing.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  std::size_t count_scalars() const;
  void fill_zero();
};

// Inputs already standardized with the dataset's train-split stats; images
// stay in raw [0,1].
struct ModelInput {
  std::vector<double> features;
  std::vector<double> sequence;  // seq_len x d_seq_in row-major
  const SceneImage* history = nullptr;
  const SceneImage* snapshot = nullptr;
};

// Row-stochastic self-attention weights, retained for interpretability.
struct AttentionMaps {
  std::vector<std::vector<Tensor>> maps;  // [layer][head], each (T, T)
};

std::string attention_json(const AttentionMaps& attn);

enum class RunMode { train, eval };

// Backward tape: every intermediate the reverse pass reads. Pre-activations
// are kept so ReLU masks and boundary nudging see the signed values.
struct FwdCache {
  std::vector<double> mlp_x;
  std::vector<double> mlp_xhat1, mlp_h1, mlp_mask1, mlp_d1;
  double mlp_inv1 = 0.0;
  std::vector<double> mlp_xhat2, mlp_h2, mlp_mask2, mlp_out;
  double mlp_inv2 = 0.0;

  struct Cnn {
    std::vector<std::vector<double>> acts;  // acts[0] = input planes
    std::vector<std::vector<double>> pre;   // pre[i] = conv i pre-ReLU
    std::vector<int> hs, ws;                // spatial dims per stage
    std::vector<double> gap;
    std::vector<double> out;
  } hist, snap;

  struct Layer {
    std::vector<double> hin;      // (T, d)
    std::vector<double> q, k, v;  // (T, d)
    std::vector<Tensor> attn;     // per head (T, T)
    std::vector<double> ocat;     // (T, d) heads concatenated
    std::vector<double> xhat1, hp;  // (T, d)
    std::vector<double> inv1;       // (T)
    std::vector<double> f1, fmask, fd;  // (T, d_ffn)
    std::vector<double> xhat2, hout;    // (T, d)
    std::vector<double> inv2;           // (T)
  };
  std::vector<double> seq_in;
  std::vector<Layer> layers;
  std::vector<double> seq_out;

  std::vector<double> fus_c, fus_xhat, fus_h, fus_mask, fus_d;
  double fus_inv = 0.0;
};

// Standardized (offset, duration) prediction. Train mode draws inverted
// dropout masks from dropout_rng (required); eval mode is deterministic and
// ignores it. cache and attn are filled when non-null.
std::array<double, 2> forward(const ModelParams& params, const ModelInput& in,
                              RunMode mode, Rng* dropout_rng, FwdCache* cache,
                              AttentionMaps* attn);

// Accumulates parameter gradients for one sample into grads (+=), given the
// loss gradient wrt the standardized prediction.
void backward(const ModelParams& params, const FwdCache& cache,
              const std::array<double, 2>& dpred, ModelParams& grads);

enum class LossVariant { paper, uniform };
std::string loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& s);

struct LossGrad {
  double loss = 0.0;
  std::array<double, 2> dpred{0.0, 0.0};
};

// Joint two-target loss on standardized values: smooth-L1 for offset plus
// squared error for duration (paper variant) or smooth-L1 for both (uniform).
LossGrad loss_joint(const std::array<double, 2>& pred,
                    const std::array<double, 2>& target, LossVariant variant);

struct Prediction {
  double offset_s = 0.0;
  double duration_s = 0.0;
  AttentionMaps attn;
};

// Eval-mode forward on one sample: standardizes inputs with the dataset
// stats, de-standardizes the outputs back to seconds.
Prediction predict(const ModelParams& params, const DatasetStats& stats,
                   const LifecycleSample& sample);

}  // namespace atcline
