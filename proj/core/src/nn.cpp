#include "atcline/nn.hpp"

#include <cmath>
#include <cstddef>

#include <json.hpp>

#include "atcline/errors.hpp"
#include "atcline/features.hpp"

namespace atcline {

namespace {

constexpr double kLnEps = kLayerNormEps;

// y(out) = W(out,in) x + b
void linear_fwd(const LinearP& p, const double* x, double* y) {
  const std::size_t out = p.b.size();
  const std::size_t in = p.w.size() / out;
  for (std::size_t o = 0; o < out; ++o) {
    double acc = p.b[o];
    const double* row = p.w.v.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// dW += dy x^T, db += dy, dx += W^T dy. dx may be null.
void linear_bwd(const LinearP& p, const double* x, const double* dy, LinearP& g,
                double* dx) {
  const std::size_t out = p.b.size();
  const std::size_t in = p.w.size() / out;
  for (std::size_t o = 0; o < out; ++o) {
    const double d = dy[o];
    g.b[o] += d;
    const double* row = p.w.v.data() + o * in;
    double* grow = g.w.v.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      grow[i] += d * x[i];
      if (dx) dx[i] += row[i] * d;
    }
  }
}

// One layer-norm row: y = g * xhat + o. Fills xhat, returns 1/std.
double ln_fwd(const NormP& p, const double* x, std::size_t d, double* xhat,
              double* y) {
  double mu = 0.0;
  for (std::size_t i = 0; i < d; ++i) mu += x[i];
  mu /= static_cast<double>(d);
  double var = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double c = x[i] - mu;
    var += c * c;
  }
  var /= static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(var + kLnEps);
  for (std::size_t i = 0; i < d; ++i) {
    xhat[i] = (x[i] - mu) * inv;
    y[i] = p.g[i] * xhat[i] + p.o[i];
  }
  return inv;
}

// dx += inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
void ln_bwd(const NormP& p, const double* xhat, double inv, const double* dy,
            std::size_t d, NormP& g, double* dx) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double dxh = dy[i] * p.g[i];
    m1 += dxh;
    m2 += dxh * xhat[i];
    g.g[i] += dy[i] * xhat[i];
    g.o[i] += dy[i];
  }
  m1 /= static_cast<double>(d);
  m2 /= static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double dxh = dy[i] * p.g[i];
    dx[i] += inv * (dxh - m1 - xhat[i] * m2);
  }
}

// Inverted dropout multipliers: {0, 1/keep} in train mode, 1 in eval.
void draw_mask(std::vector<double>& mask, std::size_t n, double p, RunMode mode,
               Rng* rng) {
  mask.resize(n);
  if (mode == RunMode::eval) {
    for (std::size_t i = 0; i < n; ++i) mask[i] = 1.0;
    return;
  }
  const double keep = 1.0 - p;
  for (std::size_t i = 0; i < n; ++i)
    mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
}

int conv_out_dim(int s) { return (s - 1) / 2 + 1; }

// 3x3 convolution, stride 2, zero padding 1.
void conv_fwd(const ConvP& p, const double* in, int ci, int h, int w,
              double* out) {
  const int co = static_cast<int>(p.b.size());
  const int oh = conv_out_dim(h), ow = conv_out_dim(w);
  for (int c = 0; c < co; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = p.b[static_cast<std::size_t>(c)];
        for (int ic = 0; ic < ci; ++ic) {
          const double* plane = in + static_cast<std::size_t>(ic) * h * w;
          const double* wk =
              p.w.v.data() + (static_cast<std::size_t>(c) * ci + ic) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = y * 2 + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * 2 + kx - 1;
              if (ix < 0 || ix >= w) continue;
              acc += wk[ky * 3 + kx] * plane[static_cast<std::size_t>(iy) * w + ix];
            }
          }
        }
        out[(static_cast<std::size_t>(c) * oh + y) * ow + x] = acc;
      }
}

void conv_bwd(const ConvP& p, const double* in, int ci, int h, int w,
              const double* dout, ConvP& g, double* din) {
  const int co = static_cast<int>(p.b.size());
  const int oh = conv_out_dim(h), ow = conv_out_dim(w);
  for (int c = 0; c < co; ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double d = dout[(static_cast<std::size_t>(c) * oh + y) * ow + x];
        if (d == 0.0) continue;
        g.b[static_cast<std::size_t>(c)] += d;
        for (int ic = 0; ic < ci; ++ic) {
          const double* plane = in + static_cast<std::size_t>(ic) * h * w;
          double* dplane =
              din ? din + static_cast<std::size_t>(ic) * h * w : nullptr;
          const double* wk =
              p.w.v.data() + (static_cast<std::size_t>(c) * ci + ic) * 9;
          double* gk = g.w.v.data() + (static_cast<std::size_t>(c) * ci + ic) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = y * 2 + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = x * 2 + kx - 1;
              if (ix < 0 || ix >= w) continue;
              const std::size_t pi = static_cast<std::size_t>(iy) * w + ix;
              gk[ky * 3 + kx] += d * plane[pi];
              if (dplane) dplane[pi] += wk[ky * 3 + kx] * d;
            }
          }
        }
      }
}

// Interleaved RGB floats to channel-major double planes.
std::vector<double> image_planes(const SceneImage& img) {
  const int h = img.height, w = img.width;
  std::vector<double> planes(static_cast<std::size_t>(3) * h * w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        planes[(static_cast<std::size_t>(c) * h + y) * w + x] =
            static_cast<double>(
                img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c]);
  return planes;
}

void cnn_fwd(const CnnP& p, const SceneImage& img, FwdCache::Cnn& c,
             std::vector<double>& out) {
  int h = img.height, w = img.width, ci = 3;
  c.acts.clear();
  c.pre.clear();
  c.hs = {h};
  c.ws = {w};
  c.acts.push_back(image_planes(img));
  for (const ConvP& conv : p.convs) {
    const int co = static_cast<int>(conv.b.size());
    const int oh = conv_out_dim(h), ow = conv_out_dim(w);
    std::vector<double> pre(static_cast<std::size_t>(co) * oh * ow);
    conv_fwd(conv, c.acts.back().data(), ci, h, w, pre.data());
    std::vector<double> post(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i)
      post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    c.pre.push_back(std::move(pre));
    c.acts.push_back(std::move(post));
    c.hs.push_back(oh);
    c.ws.push_back(ow);
    h = oh;
    w = ow;
    ci = co;
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  c.gap.assign(static_cast<std::size_t>(ci), 0.0);
  const auto& last = c.acts.back();
  for (int ch = 0; ch < ci; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += last[ch * hw + i];
    c.gap[static_cast<std::size_t>(ch)] = s / static_cast<double>(hw);
  }
  out.resize(p.fc.b.size());
  linear_fwd(p.fc, c.gap.data(), out.data());
  c.out = out;
}

void cnn_bwd(const CnnP& p, const FwdCache::Cnn& c, const double* dout,
             CnnP& g) {
  const std::size_t n = p.convs.size();
  const int c_last = static_cast<int>(p.convs.back().b.size());
  const std::size_t hw =
      static_cast<std::size_t>(c.hs[n]) * static_cast<std::size_t>(c.ws[n]);
  std::vector<double> dgap(static_cast<std::size_t>(c_last), 0.0);
  linear_bwd(p.fc, c.gap.data(), dout, g.fc, dgap.data());

  std::vector<double> dact(static_cast<std::size_t>(c_last) * hw);
  for (int ch = 0; ch < c_last; ++ch)
    for (std::size_t i = 0; i < hw; ++i)
      dact[ch * hw + i] = dgap[static_cast<std::size_t>(ch)] /
                          static_cast<double>(hw);

  for (std::size_t i = n; i-- > 0;) {
    const auto& pre = c.pre[i];
    for (std::size_t j = 0; j < dact.size(); ++j)
      if (pre[j] <= 0.0) dact[j] = 0.0;
    const int ci = i == 0 ? 3 : static_cast<int>(p.convs[i - 1].b.size());
    std::vector<double> din;
    if (i > 0)
      din.assign(static_cast<std::size_t>(ci) * c.hs[i] * c.ws[i], 0.0);
    conv_bwd(p.convs[i], c.acts[i].data(), ci, c.hs[i], c.ws[i], dact.data(),
             g.convs[i], i > 0 ? din.data() : nullptr);
    dact = std::move(din);
  }
}

// Post-norm encoder layer: LN(x + MHA(x)) then LN(x + FFN(x)).
void encoder_layer_fwd(const EncoderLayerP& p, const std::vector<double>& hin,
                       std::size_t T, std::size_t d, std::size_t nh,
                       std::size_t dffn, double drop_p, RunMode mode, Rng* rng,
                       FwdCache::Layer& c, std::vector<double>& hout) {
  const std::size_t dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.hin = hin;
  c.q.resize(T * d);
  c.k.resize(T * d);
  c.v.resize(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    linear_fwd(p.q, hin.data() + t * d, c.q.data() + t * d);
    linear_fwd(p.k, hin.data() + t * d, c.k.data() + t * d);
    linear_fwd(p.v, hin.data() + t * d, c.v.data() + t * d);
  }

  c.attn.assign(nh, Tensor::zeros({T, T}));
  c.ocat.assign(T * d, 0.0);
  for (std::size_t h = 0; h < nh; ++h) {
    Tensor& A = c.attn[h];
    for (std::size_t i = 0; i < T; ++i) {
      const double* qi = c.q.data() + i * d + h * dh;
      double* arow = A.v.data() + i * T;
      double mx = -1e300;
      for (std::size_t j = 0; j < T; ++j) {
        const double* kj = c.k.data() + j * d + h * dh;
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
        arow[j] = s * scale;
        if (arow[j] > mx) mx = arow[j];
      }
      double z = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        arow[j] = std::exp(arow[j] - mx);
        z += arow[j];
      }
      for (std::size_t j = 0; j < T; ++j) arow[j] /= z;
      double* oi = c.ocat.data() + i * d + h * dh;
      for (std::size_t j = 0; j < T; ++j) {
        const double a = arow[j];
        const double* vj = c.v.data() + j * d + h * dh;
        for (std::size_t e = 0; e < dh; ++e) oi[e] += a * vj[e];
      }
    }
  }

  // res1 = hin + Wo(ocat), then ln1.
  std::vector<double> res1(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    linear_fwd(p.o, c.ocat.data() + t * d, res1.data() + t * d);
    for (std::size_t e = 0; e < d; ++e) res1[t * d + e] += hin[t * d + e];
  }
  c.xhat1.resize(T * d);
  c.hp.resize(T * d);
  c.inv1.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    c.inv1[t] = ln_fwd(p.ln1, res1.data() + t * d, d, c.xhat1.data() + t * d,
                       c.hp.data() + t * d);

  // FFN: linear - ReLU - dropout - linear.
  c.f1.resize(T * dffn);
  for (std::size_t t = 0; t < T; ++t)
    linear_fwd(p.ffn1, c.hp.data() + t * d, c.f1.data() + t * dffn);
  draw_mask(c.fmask, T * dffn, drop_p, mode, rng);
  c.fd.resize(T * dffn);
  for (std::size_t i = 0; i < c.f1.size(); ++i)
    c.fd[i] = (c.f1[i] > 0.0 ? c.f1[i] : 0.0) * c.fmask[i];

  std::vector<double> res2(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    linear_fwd(p.ffn2, c.fd.data() + t * dffn, res2.data() + t * d);
    for (std::size_t e = 0; e < d; ++e) res2[t * d + e] += c.hp[t * d + e];
  }
  c.xhat2.resize(T * d);
  c.hout.resize(T * d);
  c.inv2.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    c.inv2[t] = ln_fwd(p.ln2, res2.data() + t * d, d, c.xhat2.data() + t * d,
                       c.hout.data() + t * d);
  hout = c.hout;
}

void encoder_layer_bwd(const EncoderLayerP& p, const FwdCache::Layer& c,
                       std::size_t T, std::size_t d, std::size_t nh,
                       std::size_t dffn, const std::vector<double>& dhout,
                       EncoderLayerP& g, std::vector<double>& dhin) {
  const std::size_t dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> dres2(T * d, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    ln_bwd(p.ln2, c.xhat2.data() + t * d, c.inv2[t], dhout.data() + t * d, d,
           g.ln2, dres2.data() + t * d);

  // res2 = hp + ffn2(fd)
  std::vector<double> dhp = dres2;
  std::vector<double> dfd(T * dffn, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    linear_bwd(p.ffn2, c.fd.data() + t * dffn, dres2.data() + t * d, g.ffn2,
               dfd.data() + t * dffn);
  for (std::size_t i = 0; i < dfd.size(); ++i)
    dfd[i] = c.f1[i] > 0.0 ? dfd[i] * c.fmask[i] : 0.0;
  for (std::size_t t = 0; t < T; ++t)
    linear_bwd(p.ffn1, c.hp.data() + t * d, dfd.data() + t * dffn, g.ffn1,
               dhp.data() + t * d);

  std::vector<double> dres1(T * d, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    ln_bwd(p.ln1, c.xhat1.data() + t * d, c.inv1[t], dhp.data() + t * d, d,
           g.ln1, dres1.data() + t * d);

  // res1 = hin + Wo(ocat)
  dhin = dres1;
  std::vector<double> docat(T * d, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    linear_bwd(p.o, c.ocat.data() + t * d, dres1.data() + t * d, g.o,
               docat.data() + t * d);

  std::vector<double> dq(T * d, 0.0), dk(T * d, 0.0), dv(T * d, 0.0);
  std::vector<double> da(T), ds(T);
  for (std::size_t h = 0; h < nh; ++h) {
    const Tensor& A = c.attn[h];
    for (std::size_t i = 0; i < T; ++i) {
      const double* doi = docat.data() + i * d + h * dh;
      const double* arow = A.v.data() + i * T;
      double dot = 0.0;
      for (std::size_t j = 0; j < T; ++j) {
        const double* vj = c.v.data() + j * d + h * dh;
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e) {
          s += doi[e] * vj[e];
          dv[j * d + h * dh + e] += arow[j] * doi[e];
        }
        da[j] = s;
        dot += s * arow[j];
      }
      // softmax rows: ds = A .* (da - sum(da .* A))
      for (std::size_t j = 0; j < T; ++j) ds[j] = arow[j] * (da[j] - dot);
      double* dqi = dq.data() + i * d + h * dh;
      for (std::size_t j = 0; j < T; ++j) {
        const double dsj = ds[j] * scale;
        const double* kj = c.k.data() + j * d + h * dh;
        const double* qi = c.q.data() + i * d + h * dh;
        double* dkj = dk.data() + j * d + h * dh;
        for (std::size_t e = 0; e < dh; ++e) {
          dqi[e] += dsj * kj[e];
          dkj[e] += dsj * qi[e];
        }
      }
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    linear_bwd(p.q, c.hin.data() + t * d, dq.data() + t * d, g.q,
               dhin.data() + t * d);
    linear_bwd(p.k, c.hin.data() + t * d, dk.data() + t * d, g.k,
               dhin.data() + t * d);
    linear_bwd(p.v, c.hin.data() + t * d, dv.data() + t * d, g.v,
               dhin.data() + t * d);
  }
}

void check_image(const SceneImage* img, std::size_t side, const char* which) {
  if (!img) throw SchemaMismatch(std::string(which) + " image missing");
  if (img->width != static_cast<int>(side) ||
      img->height != static_cast<int>(side))
    throw SchemaMismatch(std::string(which) + " image is " +
                         std::to_string(img->width) + "x" +
                         std::to_string(img->height) + ", model expects " +
                         std::to_string(side) + "x" + std::to_string(side));
  if (img->pixels.size() !=
      static_cast<std::size_t>(img->width) * img->height * 3)
    throw SchemaMismatch(std::string(which) + " image pixel buffer truncated");
}

}  // namespace

void ModelConfig::validate() const {
  if (d_struct_in == 0 || d_mlp == 0 || d_seq_hidden == 0 || d_img == 0 ||
      fusion_hidden == 0 || d_ffn == 0 || d_seq_in == 0)
    throw BadConfig("model widths must be positive");
  if (seq_len < 2) throw BadConfig("sequence length must be at least 2");
  if (n_layers == 0) throw BadConfig("need at least one encoder layer");
  if (n_heads == 0 || d_seq_hidden % n_heads != 0)
    throw BadConfig("head count must divide the sequence hidden width");
  if (cnn_channels.empty()) throw BadConfig("cnn needs at least one conv block");
  if (img_size < 2) throw BadConfig("image side must be at least 2");
  if (out_dim != 2) throw BadConfig("model predicts exactly two targets");
  if (dropout < 0.0 || dropout >= 1.0)
    throw BadConfig("dropout must be in [0, 1)");
}

ModelConfig model_config_for(const Dataset& ds) {
  ModelConfig m;
  m.d_struct_in = StructuredFeatures::count();
  m.seq_len = static_cast<std::size_t>(ds.cfg.sequence_len);
  m.d_seq_in = kSequenceChannels;
  if (ds.cfg.raster.width != ds.cfg.raster.height)
    throw BadConfig("model image inputs must be square");
  m.img_size = static_cast<std::size_t>(ds.cfg.raster.width);
  return m;
}

ModelParams ModelParams::shaped(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  const std::size_t d = cfg.d_seq_hidden;
  p.mlp_fc1 = {Tensor::zeros({cfg.d_mlp, cfg.d_struct_in}),
               Tensor::zeros({cfg.d_mlp})};
  p.mlp_ln1 = {Tensor::zeros({cfg.d_mlp}), Tensor::zeros({cfg.d_mlp})};
  p.mlp_fc2 = {Tensor::zeros({cfg.d_mlp, cfg.d_mlp}), Tensor::zeros({cfg.d_mlp})};
  p.mlp_ln2 = {Tensor::zeros({cfg.d_mlp}), Tensor::zeros({cfg.d_mlp})};
  for (CnnP* cnn : {&p.cnn_hist, &p.cnn_snap}) {
    std::size_t ci = 3;
    cnn->convs.clear();
    for (const std::size_t co : cfg.cnn_channels) {
      cnn->convs.push_back(
          {Tensor::zeros({co, ci, 3, 3}), Tensor::zeros({co})});
      ci = co;
    }
    cnn->fc = {Tensor::zeros({cfg.d_img, ci}), Tensor::zeros({cfg.d_img})};
  }
  p.seq_proj = {Tensor::zeros({d, cfg.d_seq_in}), Tensor::zeros({d})};
  p.posemb = Tensor::zeros({cfg.seq_len, d});
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    for (LinearP* lin : {&l.q, &l.k, &l.v, &l.o})
      *lin = {Tensor::zeros({d, d}), Tensor::zeros({d})};
    l.ln1 = {Tensor::zeros({d}), Tensor::zeros({d})};
    l.ffn1 = {Tensor::zeros({cfg.d_ffn, d}), Tensor::zeros({cfg.d_ffn})};
    l.ffn2 = {Tensor::zeros({d, cfg.d_ffn}), Tensor::zeros({d})};
    l.ln2 = {Tensor::zeros({d}), Tensor::zeros({d})};
  }
  p.fus_fc1 = {Tensor::zeros({cfg.fusion_hidden, cfg.fusion_in()}),
               Tensor::zeros({cfg.fusion_hidden})};
  p.fus_ln = {Tensor::zeros({cfg.fusion_hidden}),
              Tensor::zeros({cfg.fusion_hidden})};
  p.fus_fc2 = {Tensor::zeros({cfg.out_dim, cfg.fusion_hidden}),
               Tensor::zeros({cfg.out_dim})};
  return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = shaped(cfg);
  Rng r = Rng(seed).fork("init");
  const auto fan_in_uniform = [&r](Tensor& w, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : w.v) x = r.uniform(-s, s);
  };
  // Draws follow named_tensors() order; norm gains and posemb break the
  // uniform pattern, biases and offsets stay zero.
  for (auto& [name, t] : p.named_tensors()) {
    if (name.ends_with(".w") && t->shape.size() == 2)
      fan_in_uniform(*t, t->shape[1]);
    else if (name.ends_with(".w") && t->shape.size() == 4)
      fan_in_uniform(*t, t->shape[1] * 9);
    else if (name.ends_with(".g"))
      for (double& x : t->v) x = 1.0;
    else if (name == "seq.posemb")
      for (double& x : t->v) x = r.normal(0.0, 0.02);
  }
  return p;
}

namespace {

template <class Params, class T>
std::vector<std::pair<std::string, T*>> enumerate_tensors(Params& p) {
  std::vector<std::pair<std::string, T*>> out;
  const auto add = [&out](std::string name, T& t) {
    out.emplace_back(std::move(name), &t);
  };
  const auto add_lin = [&](const std::string& base, auto& l) {
    add(base + ".w", l.w);
    add(base + ".b", l.b);
  };
  const auto add_norm = [&](const std::string& base, auto& n) {
    add(base + ".g", n.g);
    add(base + ".o", n.o);
  };
  add_lin("mlp.fc1", p.mlp_fc1);
  add_norm("mlp.ln1", p.mlp_ln1);
  add_lin("mlp.fc2", p.mlp_fc2);
  add_norm("mlp.ln2", p.mlp_ln2);
  const auto add_cnn = [&](const std::string& base, auto& cnn) {
    for (std::size_t i = 0; i < cnn.convs.size(); ++i)
      add_lin(base + ".conv" + std::to_string(i), cnn.convs[i]);
    add_lin(base + ".fc", cnn.fc);
  };
  add_cnn("cnn_hist", p.cnn_hist);
  add_cnn("cnn_snap", p.cnn_snap);
  add_lin("seq.proj", p.seq_proj);
  add("seq.posemb", p.posemb);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const std::string base = "seq.l" + std::to_string(i);
    add_lin(base + ".q", p.layers[i].q);
    add_lin(base + ".k", p.layers[i].k);
    add_lin(base + ".v", p.layers[i].v);
    add_lin(base + ".o", p.layers[i].o);
    add_norm(base + ".ln1", p.layers[i].ln1);
    add_lin(base + ".ffn1", p.layers[i].ffn1);
    add_lin(base + ".ffn2", p.layers[i].ffn2);
    add_norm(base + ".ln2", p.layers[i].ln2);
  }
  add_lin("fusion.fc1", p.fus_fc1);
  add_norm("fusion.ln", p.fus_ln);
  add_lin("fusion.fc2", p.fus_fc2);
  return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  return enumerate_tensors<ModelParams, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors()
    const {
  return enumerate_tensors<const ModelParams, const Tensor>(*this);
}

std::size_t ModelParams::count_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

void ModelParams::fill_zero() {
  for (auto& [name, t] : named_tensors())
    for (double& x : t->v) x = 0.0;
}

std::array<double, 2> forward(const ModelParams& params, const ModelInput& in,
                              RunMode mode, Rng* dropout_rng, FwdCache* cache,
                              AttentionMaps* attn) {
  const ModelConfig& cfg = params.cfg;
  if (in.features.size() != cfg.d_struct_in)
    throw SchemaMismatch("feature vector has " +
                         std::to_string(in.features.size()) +
                         " slots, model expects " +
                         std::to_string(cfg.d_struct_in));
  if (in.sequence.size() != cfg.seq_len * cfg.d_seq_in)
    throw SchemaMismatch("sequence has " + std::to_string(in.sequence.size()) +
                         " values, model expects " +
                         std::to_string(cfg.seq_len * cfg.d_seq_in));
  check_image(in.history, cfg.img_size, "history");
  check_image(in.snapshot, cfg.img_size, "snapshot");
  if (mode == RunMode::train && dropout_rng == nullptr)
    throw BadConfig("train-mode forward needs a dropout rng");

  FwdCache local;
  FwdCache& C = cache ? *cache : local;

  // Structured branch: 2 x (linear - LN - ReLU - dropout).
  const std::size_t dm = cfg.d_mlp;
  C.mlp_x = in.features;
  std::vector<double> z(dm);
  linear_fwd(params.mlp_fc1, C.mlp_x.data(), z.data());
  C.mlp_xhat1.resize(dm);
  C.mlp_h1.resize(dm);
  C.mlp_inv1 =
      ln_fwd(params.mlp_ln1, z.data(), dm, C.mlp_xhat1.data(), C.mlp_h1.data());
  draw_mask(C.mlp_mask1, dm, cfg.dropout, mode, dropout_rng);
  C.mlp_d1.resize(dm);
  for (std::size_t i = 0; i < dm; ++i)
    C.mlp_d1[i] = (C.mlp_h1[i] > 0.0 ? C.mlp_h1[i] : 0.0) * C.mlp_mask1[i];
  linear_fwd(params.mlp_fc2, C.mlp_d1.data(), z.data());
  C.mlp_xhat2.resize(dm);
  C.mlp_h2.resize(dm);
  C.mlp_inv2 =
      ln_fwd(params.mlp_ln2, z.data(), dm, C.mlp_xhat2.data(), C.mlp_h2.data());
  draw_mask(C.mlp_mask2, dm, cfg.dropout, mode, dropout_rng);
  C.mlp_out.resize(dm);
  for (std::size_t i = 0; i < dm; ++i)
    C.mlp_out[i] = (C.mlp_h2[i] > 0.0 ? C.mlp_h2[i] : 0.0) * C.mlp_mask2[i];

  // Sequence branch: projection + positional embeddings, encoder stack,
  // mean pool over time.
  const std::size_t T = cfg.seq_len, d = cfg.d_seq_hidden;
  C.seq_in = in.sequence;
  std::vector<double> H(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    linear_fwd(params.seq_proj, C.seq_in.data() + t * cfg.d_seq_in,
               H.data() + t * d);
    for (std::size_t e = 0; e < d; ++e) H[t * d + e] += params.posemb[t * d + e];
  }
  C.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    std::vector<double> Hnext;
    encoder_layer_fwd(params.layers[l], H, T, d, cfg.n_heads, cfg.d_ffn,
                      cfg.dropout, mode, dropout_rng, C.layers[l], Hnext);
    H = std::move(Hnext);
  }
  C.seq_out.assign(d, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t e = 0; e < d; ++e) C.seq_out[e] += H[t * d + e];
  for (std::size_t e = 0; e < d; ++e) C.seq_out[e] /= static_cast<double>(T);

  // Image branches.
  std::vector<double> hist_out, snap_out;
  cnn_fwd(params.cnn_hist, *in.history, C.hist, hist_out);
  cnn_fwd(params.cnn_snap, *in.snapshot, C.snap, snap_out);

  // Fusion: concat(struct, seq, hist, snap) - linear - LN - ReLU - dropout -
  // linear.
  C.fus_c.clear();
  C.fus_c.reserve(cfg.fusion_in());
  C.fus_c.insert(C.fus_c.end(), C.mlp_out.begin(), C.mlp_out.end());
  C.fus_c.insert(C.fus_c.end(), C.seq_out.begin(), C.seq_out.end());
  C.fus_c.insert(C.fus_c.end(), hist_out.begin(), hist_out.end());
  C.fus_c.insert(C.fus_c.end(), snap_out.begin(), snap_out.end());
  const std::size_t fh = cfg.fusion_hidden;
  std::vector<double> zf(fh);
  linear_fwd(params.fus_fc1, C.fus_c.data(), zf.data());
  C.fus_xhat.resize(fh);
  C.fus_h.resize(fh);
  C.fus_inv = ln_fwd(params.fus_ln, zf.data(), fh, C.fus_xhat.data(),
                     C.fus_h.data());
  draw_mask(C.fus_mask, fh, cfg.dropout, mode, dropout_rng);
  C.fus_d.resize(fh);
  for (std::size_t i = 0; i < fh; ++i)
    C.fus_d[i] = (C.fus_h[i] > 0.0 ? C.fus_h[i] : 0.0) * C.fus_mask[i];
  std::array<double, 2> out{0.0, 0.0};
  linear_fwd(params.fus_fc2, C.fus_d.data(), out.data());

  if (attn) {
    attn->maps.assign(cfg.n_layers, {});
    for (std::size_t l = 0; l < cfg.n_layers; ++l)
      attn->maps[l] = C.layers[l].attn;
  }
  return out;
}

void backward(const ModelParams& params, const FwdCache& cache,
              const std::array<double, 2>& dpred, ModelParams& grads) {
  const ModelConfig& cfg = params.cfg;
  const std::size_t dm = cfg.d_mlp, d = cfg.d_seq_hidden, T = cfg.seq_len;
  const std::size_t fh = cfg.fusion_hidden;

  // Fusion head.
  std::vector<double> dd(fh, 0.0);
  linear_bwd(params.fus_fc2, cache.fus_d.data(), dpred.data(), grads.fus_fc2,
             dd.data());
  for (std::size_t i = 0; i < fh; ++i)
    dd[i] = cache.fus_h[i] > 0.0 ? dd[i] * cache.fus_mask[i] : 0.0;
  std::vector<double> dz(fh, 0.0);
  ln_bwd(params.fus_ln, cache.fus_xhat.data(), cache.fus_inv, dd.data(), fh,
         grads.fus_ln, dz.data());
  std::vector<double> dc(cfg.fusion_in(), 0.0);
  linear_bwd(params.fus_fc1, cache.fus_c.data(), dz.data(), grads.fus_fc1,
             dc.data());

  const double* dmlp_out = dc.data();
  const double* dseq_out = dc.data() + dm;
  const double* dhist_out = dc.data() + dm + d;
  const double* dsnap_out = dc.data() + dm + d + cfg.d_img;

  // Structured branch.
  std::vector<double> dv(dm);
  for (std::size_t i = 0; i < dm; ++i)
    dv[i] = cache.mlp_h2[i] > 0.0 ? dmlp_out[i] * cache.mlp_mask2[i] : 0.0;
  std::vector<double> dz2(dm, 0.0);
  ln_bwd(params.mlp_ln2, cache.mlp_xhat2.data(), cache.mlp_inv2, dv.data(), dm,
         grads.mlp_ln2, dz2.data());
  std::vector<double> dd1(dm, 0.0);
  linear_bwd(params.mlp_fc2, cache.mlp_d1.data(), dz2.data(), grads.mlp_fc2,
             dd1.data());
  for (std::size_t i = 0; i < dm; ++i)
    dd1[i] = cache.mlp_h1[i] > 0.0 ? dd1[i] * cache.mlp_mask1[i] : 0.0;
  std::vector<double> dz1(dm, 0.0);
  ln_bwd(params.mlp_ln1, cache.mlp_xhat1.data(), cache.mlp_inv1, dd1.data(), dm,
         grads.mlp_ln1, dz1.data());
  linear_bwd(params.mlp_fc1, cache.mlp_x.data(), dz1.data(), grads.mlp_fc1,
             nullptr);

  // Image branches.
  cnn_bwd(params.cnn_hist, cache.hist, dhist_out, grads.cnn_hist);
  cnn_bwd(params.cnn_snap, cache.snap, dsnap_out, grads.cnn_snap);

  // Sequence branch: mean pool spreads the gradient evenly over time.
  std::vector<double> dH(T * d);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t e = 0; e < d; ++e)
      dH[t * d + e] = dseq_out[e] / static_cast<double>(T);
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    std::vector<double> dHin;
    encoder_layer_bwd(params.layers[l], cache.layers[l], T, d, cfg.n_heads,
                      cfg.d_ffn, dH, grads.layers[l], dHin);
    dH = std::move(dHin);
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t e = 0; e < d; ++e)
      grads.posemb[t * d + e] += dH[t * d + e];
    linear_bwd(params.seq_proj, cache.seq_in.data() + t * cfg.d_seq_in,
               dH.data() + t * d, grads.seq_proj, nullptr);
  }
}

std::string loss_variant_name(LossVariant v) {
  return v == LossVariant::paper ? "paper" : "uniform";
}

LossVariant loss_variant_from_name(const std::string& s) {
  if (s == "paper") return LossVariant::paper;
  if (s == "uniform") return LossVariant::uniform;
  throw BadConfig("unknown loss variant: " + s);
}

LossGrad loss_joint(const std::array<double, 2>& pred,
                    const std::array<double, 2>& target, LossVariant variant) {
  for (const double x : {pred[0], pred[1], target[0], target[1]})
    if (!std::isfinite(x)) throw NonFinite("loss inputs must be finite");
  const auto smooth_l1 = [](double e, double& grad) {
    if (std::fabs(e) <= 1.0) {
      grad = e;
      return 0.5 * e * e;
    }
    grad = e > 0.0 ? 1.0 : -1.0;
    return std::fabs(e) - 0.5;
  };
  LossGrad out;
  const double e0 = pred[0] - target[0];
  const double e1 = pred[1] - target[1];
  out.loss = smooth_l1(e0, out.dpred[0]);
  if (variant == LossVariant::paper) {
    out.loss += e1 * e1;
    out.dpred[1] = 2.0 * e1;
  } else {
    double g1 = 0.0;
    out.loss += smooth_l1(e1, g1);
    out.dpred[1] = g1;
  }
  return out;
}

Prediction predict(const ModelParams& params, const DatasetStats& stats,
                   const LifecycleSample& sample) {
  ModelInput in;
  in.features = standardized_features(stats, sample);
  in.sequence = standardized_sequence(stats, sample);
  in.history = &sample.history_image;
  in.snapshot = &sample.snapshot_image;
  Prediction p;
  const auto z = forward(params, in, RunMode::eval, nullptr, nullptr, &p.attn);
  p.offset_s = destandardize(z[0], stats.targets.mean[0], stats.targets.stdev[0]);
  p.duration_s =
      destandardize(z[1], stats.targets.mean[1], stats.targets.stdev[1]);
  return p;
}

std::string attention_json(const AttentionMaps& attn) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& layer : attn.maps) {
    nlohmann::ordered_json heads = nlohmann::ordered_json::array();
    for (const Tensor& A : layer) {
      const std::size_t T = A.shape[0];
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < T; ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t j = 0; j < T; ++j) row.push_back(A[i * T + j]);
        rows.push_back(std::move(row));
      }
      heads.push_back(std::move(rows));
    }
    layers.push_back(std::move(heads));
  }
  nlohmann::ordered_json j;
  j["layers"] = std::move(layers);
  return j.dump();
}

}  // namespace atcline
