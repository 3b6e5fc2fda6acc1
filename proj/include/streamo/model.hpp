#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "streamo/dialogue.hpp"
#include "streamo/errors.hpp"
#include "streamo/loss.hpp"
#include "streamo/tokens.hpp"

namespace streamo {

struct OptimizerConfig {
  double learning_rate = 0.5;
  int steps = 200;
  int batch_size = 2;
  uint64_t seed = 7;

  bool operator==(const OptimizerConfig&) const = default;
};

struct ToyModelConfig {
  int32_t vocab_size = 256;
  int embed_dim = 32;
  int context_window = 64;  // turns
  int num_layers = 2;
  int hidden_dim = 64;
  OptimizerConfig optimizer;

  bool operator==(const ToyModelConfig&) const = default;
};

namespace detail {

inline void check_model_config(const ToyModelConfig& config) {
  if (config.embed_dim < 1 || config.num_layers < 1 || config.hidden_dim < 1)
    throw DomainError("model dimensions must be >= 1");
  if (config.context_window < 2) throw DomainError("context_window must be >= 2");
  if (config.optimizer.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (config.optimizer.steps < 0) throw DomainError("steps must be >= 0");
  TokenLayout::standard(config.vocab_size);
}

/// Flat parameter vector offsets. Order: embeddings, per-layer blocks, final
/// gain, unembedding.
struct ParamLayout {
  struct Layer {
    size_t att_gain, wq, wk, wv, wo;
    size_t mlp_gain, w1, b1, w2, b2;
  };
  size_t embed = 0;
  std::vector<Layer> layers;
  size_t final_gain = 0;
  size_t unembed = 0;
  size_t total = 0;

  ParamLayout(const ToyModelConfig& c) {
    const size_t v = static_cast<size_t>(c.vocab_size);
    const size_t d = static_cast<size_t>(c.embed_dim);
    const size_t h = static_cast<size_t>(c.hidden_dim);
    size_t at = 0;
    embed = at;
    at += v * d;
    for (int l = 0; l < c.num_layers; ++l) {
      Layer layer;
      layer.att_gain = at; at += d;
      layer.wq = at; at += d * d;
      layer.wk = at; at += d * d;
      layer.wv = at; at += d * d;
      layer.wo = at; at += d * d;
      layer.mlp_gain = at; at += d;
      layer.w1 = at; at += d * h;
      layer.b1 = at; at += h;
      layer.w2 = at; at += h * d;
      layer.b2 = at; at += d;
      layers.push_back(layer);
    }
    final_gain = at; at += d;
    unembed = at; at += d * v;
    total = at;
  }
};

inline constexpr double kNormEps = 1e-8;

}  // namespace detail

/// Two-layer pre-norm causal transformer over the streaming vocabulary.
/// Parameters live in one flat double vector so the optimizer and the
/// checkpoint format stay trivial. Positions use fixed sinusoidal encodings,
/// so any history length is representable.
struct ToyModel {
  ToyModelConfig config;
  TokenLayout layout;
  TextCodec codec;
  std::vector<double> params;

  explicit ToyModel(const ToyModelConfig& model_config)
      : config(model_config),
        layout(TokenLayout::standard(model_config.vocab_size)),
        codec(layout) {
    detail::check_model_config(config);
    const detail::ParamLayout offsets(config);
    params.assign(offsets.total, 0.0);
    std::mt19937_64 rng(config.optimizer.seed);
    std::normal_distribution<double> weight(0.0, 0.08);
    for (double& p : params) p = weight(rng);
    // Norm gains start at one, biases at zero.
    for (const auto& layer : offsets.layers) {
      for (int i = 0; i < config.embed_dim; ++i) {
        params[layer.att_gain + i] = 1.0;
        params[layer.mlp_gain + i] = 1.0;
        params[layer.b2 + i] = 0.0;
      }
      for (int i = 0; i < config.hidden_dim; ++i) params[layer.b1 + i] = 0.0;
    }
    for (int i = 0; i < config.embed_dim; ++i)
      params[offsets.final_gain + i] = 1.0;
  }
};

namespace detail {

struct LayerCache {
  std::vector<double> x_in;     // T x d, input to the layer
  std::vector<double> y1;       // T x d, rms-normalized x_in
  std::vector<double> r1;       // T
  std::vector<double> n1;       // T x d, y1 * gain
  std::vector<double> q, k, v;  // T x d
  std::vector<double> probs;    // T x T, causal softmax rows
  std::vector<double> att;      // T x d, probs * v
  std::vector<double> x_mid;    // T x d, after attention residual
  std::vector<double> y2;       // T x d
  std::vector<double> r2;       // T
  std::vector<double> n2;       // T x d
  std::vector<double> h_pre;    // T x h
  std::vector<double> h;        // T x h, relu
};

struct ForwardCache {
  size_t T = 0;
  std::vector<double> x0;  // T x d, embeddings + positions
  std::vector<LayerCache> layers;
  std::vector<double> yf;  // T x d
  std::vector<double> rf;  // T
  std::vector<double> nf;  // T x d
};

// out[T x n] = in[T x m] * w[m x n]
inline void matmul(const double* in, const double* w, double* out, size_t T,
                   size_t m, size_t n) {
  std::fill(out, out + T * n, 0.0);
  for (size_t t = 0; t < T; ++t) {
    const double* row = in + t * m;
    double* dst = out + t * n;
    for (size_t i = 0; i < m; ++i) {
      const double a = row[i];
      const double* wrow = w + i * n;
      for (size_t j = 0; j < n; ++j) dst[j] += a * wrow[j];
    }
  }
}

// dIn[T x m] += dOut[T x n] * w^T; dW[m x n] += in^T * dOut
inline void matmul_backward(const double* in, const double* w,
                            const double* d_out, double* d_in, double* d_w,
                            size_t T, size_t m, size_t n) {
  for (size_t t = 0; t < T; ++t) {
    const double* drow = d_out + t * n;
    const double* row = in + t * m;
    double* dirow = d_in + t * m;
    for (size_t i = 0; i < m; ++i) {
      const double* wrow = w + i * n;
      double acc = 0.0;
      double* dwrow = d_w + i * n;
      const double a = row[i];
      for (size_t j = 0; j < n; ++j) {
        acc += drow[j] * wrow[j];
        dwrow[j] += a * drow[j];
      }
      dirow[i] += acc;
    }
  }
}

inline void rmsnorm(const double* x, double* y, double* r_out, size_t T,
                    size_t d) {
  for (size_t t = 0; t < T; ++t) {
    const double* row = x + t * d;
    double sq = 0.0;
    for (size_t i = 0; i < d; ++i) sq += row[i] * row[i];
    const double r = std::sqrt(sq / static_cast<double>(d) + kNormEps);
    r_out[t] = r;
    double* yrow = y + t * d;
    for (size_t i = 0; i < d; ++i) yrow[i] = row[i] / r;
  }
}

// dx += dy/r - x * dot(dy, x) / (d * r^3), per row
inline void rmsnorm_backward(const double* x, const double* dy, const double* r,
                             double* dx, size_t T, size_t d) {
  for (size_t t = 0; t < T; ++t) {
    const double* xrow = x + t * d;
    const double* dyrow = dy + t * d;
    double* dxrow = dx + t * d;
    double dot = 0.0;
    for (size_t i = 0; i < d; ++i) dot += dyrow[i] * xrow[i];
    const double rr = r[t];
    const double k = dot / (static_cast<double>(d) * rr * rr * rr);
    for (size_t i = 0; i < d; ++i) dxrow[i] += dyrow[i] / rr - xrow[i] * k;
  }
}

inline double positional(int t, int i, int d) {
  const double exponent = static_cast<double>(i / 2 * 2) / d;
  const double freq = std::pow(10000.0, exponent);
  const double angle = static_cast<double>(t) / freq;
  return (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

/// Full-sequence forward pass. Returns logits [T x vocab]; fills the cache
/// when a backward pass will follow.
inline std::vector<double> model_forward(const ToyModel& model,
                                         const std::vector<int32_t>& tokens,
                                         ForwardCache* cache) {
  if (tokens.empty()) throw DomainError("token history must be non-empty");
  const auto& c = model.config;
  for (const auto id : tokens)
    if (id < 0 || id >= c.vocab_size)
      throw IdOutOfRange("token id " + std::to_string(id) +
                         " outside vocabulary");
  const size_t T = tokens.size();
  const size_t d = static_cast<size_t>(c.embed_dim);
  const size_t h = static_cast<size_t>(c.hidden_dim);
  const size_t v = static_cast<size_t>(c.vocab_size);
  const ParamLayout offsets(c);
  const double* p = model.params.data();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> x(T * d);
  for (size_t t = 0; t < T; ++t)
    for (size_t i = 0; i < d; ++i)
      x[t * d + i] = p[offsets.embed + static_cast<size_t>(tokens[t]) * d + i] +
                     positional(static_cast<int>(t), static_cast<int>(i),
                                static_cast<int>(d));
  if (cache) {
    cache->T = T;
    cache->x0 = x;
    cache->layers.assign(static_cast<size_t>(c.num_layers), LayerCache{});
  }

  std::vector<double> y(T * d), n(T * d), r(T);
  std::vector<double> q(T * d), k(T * d), vv(T * d), att(T * d), proj(T * d);
  std::vector<double> probs(T * T);
  std::vector<double> h_pre(T * h), h_act(T * h), mlp_out(T * d);

  for (int l = 0; l < c.num_layers; ++l) {
    const auto& lo = offsets.layers[static_cast<size_t>(l)];
    LayerCache* lc = cache ? &cache->layers[static_cast<size_t>(l)] : nullptr;
    if (lc) lc->x_in = x;

    rmsnorm(x.data(), y.data(), r.data(), T, d);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i)
        n[t * d + i] = y[t * d + i] * p[lo.att_gain + i];

    matmul(n.data(), p + lo.wq, q.data(), T, d, d);
    matmul(n.data(), p + lo.wk, k.data(), T, d, d);
    matmul(n.data(), p + lo.wv, vv.data(), T, d, d);

    std::fill(probs.begin(), probs.end(), 0.0);
    for (size_t t = 0; t < T; ++t) {
      double* prow = probs.data() + t * T;
      double max_s = -1e300;
      for (size_t s = 0; s <= t; ++s) {
        double dot = 0.0;
        for (size_t i = 0; i < d; ++i) dot += q[t * d + i] * k[s * d + i];
        prow[s] = dot * inv_sqrt_d;
        max_s = std::max(max_s, prow[s]);
      }
      double z = 0.0;
      for (size_t s = 0; s <= t; ++s) {
        prow[s] = std::exp(prow[s] - max_s);
        z += prow[s];
      }
      for (size_t s = 0; s <= t; ++s) prow[s] /= z;
    }
    std::fill(att.begin(), att.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t s = 0; s <= t; ++s) {
        const double a = probs[t * T + s];
        for (size_t i = 0; i < d; ++i) att[t * d + i] += a * vv[s * d + i];
      }
    matmul(att.data(), p + lo.wo, proj.data(), T, d, d);
    if (lc) {
      lc->y1 = y; lc->r1 = r; lc->n1 = n;
      lc->q = q; lc->k = k; lc->v = vv;
      lc->probs = probs; lc->att = att;
    }
    for (size_t i = 0; i < T * d; ++i) x[i] += proj[i];
    if (lc) lc->x_mid = x;

    rmsnorm(x.data(), y.data(), r.data(), T, d);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i)
        n[t * d + i] = y[t * d + i] * p[lo.mlp_gain + i];
    matmul(n.data(), p + lo.w1, h_pre.data(), T, d, h);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < h; ++i) {
        const double z = h_pre[t * h + i] + p[lo.b1 + i];
        h_pre[t * h + i] = z;
        h_act[t * h + i] = z > 0.0 ? z : 0.0;
      }
    matmul(h_act.data(), p + lo.w2, mlp_out.data(), T, h, d);
    if (lc) {
      lc->y2 = y; lc->r2 = r; lc->n2 = n;
      lc->h_pre = h_pre; lc->h = h_act;
    }
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i)
        x[t * d + i] += mlp_out[t * d + i] + p[lo.b2 + i];
  }

  rmsnorm(x.data(), y.data(), r.data(), T, d);
  for (size_t t = 0; t < T; ++t)
    for (size_t i = 0; i < d; ++i) n[t * d + i] = y[t * d + i] * p[offsets.final_gain + i];
  if (cache) {
    cache->yf = y;
    cache->rf = r;
    cache->nf = n;
  }
  std::vector<double> logits(T * v);
  matmul(n.data(), p + offsets.unembed, logits.data(), T, d, v);
  return logits;
}

/// Accumulates d loss / d params into grad (same layout as model.params),
/// given d loss / d logits for the cached forward pass.
inline void model_backward(const ToyModel& model,
                           const std::vector<int32_t>& tokens,
                           const ForwardCache& cache,
                           const std::vector<double>& d_logits,
                           std::vector<double>& grad) {
  const auto& c = model.config;
  const size_t T = cache.T;
  const size_t d = static_cast<size_t>(c.embed_dim);
  const size_t h = static_cast<size_t>(c.hidden_dim);
  const size_t v = static_cast<size_t>(c.vocab_size);
  const ParamLayout offsets(c);
  const double* p = model.params.data();
  double* g = grad.data();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // Unembedding and final norm.
  std::vector<double> d_n(T * d, 0.0);
  matmul_backward(cache.nf.data(), p + offsets.unembed, d_logits.data(),
                  d_n.data(), g + offsets.unembed, T, d, v);
  std::vector<double> d_x(T * d, 0.0);
  {
    std::vector<double> d_y(T * d);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i) {
        g[offsets.final_gain + i] += d_n[t * d + i] * cache.yf[t * d + i];
        d_y[t * d + i] = d_n[t * d + i] * p[offsets.final_gain + i];
      }
    // The final norm reads the last layer's output, reconstructed from yf*rf.
    std::vector<double> x_fin(T * d);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i)
        x_fin[t * d + i] = cache.yf[t * d + i] * cache.rf[t];
    rmsnorm_backward(x_fin.data(), d_y.data(), cache.rf.data(), d_x.data(), T, d);
  }

  std::vector<double> d_n2(T * d), d_h(T * h), d_mid(T * d), d_y2(T * d);
  std::vector<double> d_att(T * d), d_q(T * d), d_k(T * d), d_v(T * d);
  std::vector<double> d_probs(T * T), d_n1(T * d), d_y1(T * d);
  for (int l = c.num_layers - 1; l >= 0; --l) {
    const auto& lo = offsets.layers[static_cast<size_t>(l)];
    const auto& lc = cache.layers[static_cast<size_t>(l)];

    // MLP half: x_out = x_mid + relu(n2 W1 + b1) W2 + b2.
    std::fill(d_h.begin(), d_h.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i) g[lo.b2 + i] += d_x[t * d + i];
    matmul_backward(lc.h.data(), p + lo.w2, d_x.data(), d_h.data(), g + lo.w2,
                    T, h, d);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < h; ++i) {
        if (lc.h_pre[t * h + i] <= 0.0) d_h[t * h + i] = 0.0;
        g[lo.b1 + i] += d_h[t * h + i];
      }
    std::fill(d_n2.begin(), d_n2.end(), 0.0);
    matmul_backward(lc.n2.data(), p + lo.w1, d_h.data(), d_n2.data(), g + lo.w1,
                    T, d, h);
    std::fill(d_mid.begin(), d_mid.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i) {
        g[lo.mlp_gain + i] += d_n2[t * d + i] * lc.y2[t * d + i];
        d_y2[t * d + i] = d_n2[t * d + i] * p[lo.mlp_gain + i];
      }
    rmsnorm_backward(lc.x_mid.data(), d_y2.data(), lc.r2.data(), d_mid.data(),
                     T, d);
    // Residual: gradient into x_mid also flows directly from d_x.
    for (size_t i = 0; i < T * d; ++i) d_mid[i] += d_x[i];

    // Attention half: x_mid = x_in + (probs * v) Wo.
    std::fill(d_att.begin(), d_att.end(), 0.0);
    matmul_backward(lc.att.data(), p + lo.wo, d_mid.data(), d_att.data(),
                    g + lo.wo, T, d, d);
    std::fill(d_v.begin(), d_v.end(), 0.0);
    std::fill(d_probs.begin(), d_probs.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t s = 0; s <= t; ++s) {
        const double a = lc.probs[t * T + s];
        double dot = 0.0;
        for (size_t i = 0; i < d; ++i) {
          dot += d_att[t * d + i] * lc.v[s * d + i];
          d_v[s * d + i] += a * d_att[t * d + i];
        }
        d_probs[t * T + s] = dot;
      }
    // Softmax rows: ds = a .* (dp - sum(dp .* a)).
    for (size_t t = 0; t < T; ++t) {
      double mix = 0.0;
      for (size_t s = 0; s <= t; ++s)
        mix += d_probs[t * T + s] * lc.probs[t * T + s];
      for (size_t s = 0; s <= t; ++s)
        d_probs[t * T + s] =
            lc.probs[t * T + s] * (d_probs[t * T + s] - mix);
    }
    std::fill(d_q.begin(), d_q.end(), 0.0);
    std::fill(d_k.begin(), d_k.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t s = 0; s <= t; ++s) {
        const double ds = d_probs[t * T + s] * inv_sqrt_d;
        for (size_t i = 0; i < d; ++i) {
          d_q[t * d + i] += ds * lc.k[s * d + i];
          d_k[s * d + i] += ds * lc.q[t * d + i];
        }
      }
    std::fill(d_n1.begin(), d_n1.end(), 0.0);
    matmul_backward(lc.n1.data(), p + lo.wq, d_q.data(), d_n1.data(), g + lo.wq,
                    T, d, d);
    matmul_backward(lc.n1.data(), p + lo.wk, d_k.data(), d_n1.data(), g + lo.wk,
                    T, d, d);
    matmul_backward(lc.n1.data(), p + lo.wv, d_v.data(), d_n1.data(), g + lo.wv,
                    T, d, d);
    std::fill(d_x.begin(), d_x.end(), 0.0);
    for (size_t t = 0; t < T; ++t)
      for (size_t i = 0; i < d; ++i) {
        g[lo.att_gain + i] += d_n1[t * d + i] * lc.y1[t * d + i];
        d_y1[t * d + i] = d_n1[t * d + i] * p[lo.att_gain + i];
      }
    rmsnorm_backward(lc.x_in.data(), d_y1.data(), lc.r1.data(), d_x.data(), T, d);
    // Residual skip around the whole layer.
    for (size_t i = 0; i < T * d; ++i) d_x[i] += d_mid[i];
  }

  for (size_t t = 0; t < T; ++t) {
    double* erow = g + offsets.embed + static_cast<size_t>(tokens[t]) * d;
    for (size_t i = 0; i < d; ++i) erow[i] += d_x[t * d + i];
  }
}

}  // namespace detail

inline std::vector<double> full_forward(const ToyModel& model,
                                        const std::vector<int32_t>& tokens) {
  return detail::model_forward(model, tokens, nullptr);
}

/// Logits for the next token after the given history (last position only).
inline std::vector<double> forward(const ToyModel& model,
                                   const std::vector<int32_t>& history) {
  const auto all = full_forward(model, history);
  const size_t v = static_cast<size_t>(model.config.vocab_size);
  return std::vector<double>(all.end() - static_cast<long>(v), all.end());
}

struct CurvePoint {
  int step = 0;
  double loss = 0.0;
  double recall_silence = 0.0;
  double recall_standby = 0.0;
  double recall_response = 0.0;
};

struct TrainResult {
  ToyModel model;
  std::vector<CurvePoint> curve;
};

namespace detail {

inline int argmax_restricted(const std::vector<double>& logits,
                             const std::array<int32_t, 3>& ids) {
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (logits[static_cast<size_t>(ids[static_cast<size_t>(i)])] >
        logits[static_cast<size_t>(ids[static_cast<size_t>(best)])])
      best = i;
  return best;
}

inline int32_t argmax_full(const std::vector<double>& logits) {
  int32_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[static_cast<size_t>(best)])
      best = static_cast<int32_t>(i);
  return best;
}

/// Next-token rows for one encoded dialogue: position i predicts token i+1,
/// and only assistant-written targets are masked in.
inline void append_next_token_rows(const std::vector<double>& logits,
                                   const EncodedDialogue& encoded,
                                   size_t vocab, LossBatch& batch) {
  const size_t T = encoded.tokens.size();
  for (size_t i = 0; i + 1 < T; ++i) {
    batch.logits.insert(batch.logits.end(), logits.begin() + static_cast<long>(i * vocab),
                        logits.begin() + static_cast<long>((i + 1) * vocab));
    batch.targets.push_back(encoded.tokens[i + 1]);
    batch.mask.push_back(encoded.assistant[i + 1]);
  }
}

/// Teacher-forced per-state recalls over encoded episodes: at each state
/// position, compare the restricted argmax of the previous position's logits
/// against the written state token.
inline std::array<double, 3> teacher_forced_recalls(
    const ToyModel& model, const std::vector<EncodedDialogue>& episodes) {
  const auto ids = model.layout.state_ids();
  const size_t v = static_cast<size_t>(model.config.vocab_size);
  std::array<int64_t, 3> hits{}, totals{};
  for (const auto& ep : episodes) {
    const auto logits = full_forward(model, ep.tokens);
    for (const size_t pos : ep.state_pos) {
      const auto gold = model.layout.state_of(ep.tokens[pos]);
      std::vector<double> row(logits.begin() + static_cast<long>((pos - 1) * v),
                              logits.begin() + static_cast<long>(pos * v));
      const int pred = argmax_restricted(row, ids);
      const int g = static_cast<int>(*gold);
      ++totals[static_cast<size_t>(g)];
      if (pred == g) ++hits[static_cast<size_t>(g)];
    }
  }
  std::array<double, 3> recalls{};
  for (int i = 0; i < 3; ++i)
    recalls[static_cast<size_t>(i)] =
        totals[static_cast<size_t>(i)] == 0
            ? 0.0
            : static_cast<double>(hits[static_cast<size_t>(i)]) /
                  static_cast<double>(totals[static_cast<size_t>(i)]);
  return recalls;
}

inline double held_out_loss(const ToyModel& model,
                            const std::vector<EncodedDialogue>& episodes,
                            const LossConfig& loss_config) {
  LossBatch batch;
  batch.vocab_size = model.config.vocab_size;
  for (const auto& ep : episodes) {
    const auto logits = full_forward(model, ep.tokens);
    append_next_token_rows(logits, ep, static_cast<size_t>(batch.vocab_size),
                           batch);
  }
  return batch_loss(batch, loss_config).total;
}

}  // namespace detail

/// Plain-gradient-descent training loop. The balanced classes are always the
/// three state tokens, so the loss config's id triple is taken from the
/// model's token layout rather than from the caller.
inline TrainResult train(const ToyModelConfig& model_config,
                         const std::vector<StreamingDialogue>& corpus,
                         const LossConfig& loss_config, int curve_every = 10) {
  if (corpus.empty()) throw DomainError("training corpus is empty");
  if (curve_every < 1) throw DomainError("curve_every must be >= 1");
  TrainResult result{ToyModel(model_config), {}};
  ToyModel& model = result.model;
  LossConfig loss_cfg = loss_config;
  loss_cfg.special_token_ids = model.layout.state_ids();

  std::vector<EncodedDialogue> encoded;
  encoded.reserve(corpus.size());
  for (const auto& dialogue : corpus)
    encoded.push_back(encode_dialogue(dialogue, model.layout, model.codec));

  // Final fifth of the corpus is held out for the curve; a single-episode
  // corpus evaluates on its own training data.
  const size_t n = encoded.size();
  const size_t held = n >= 2 ? std::max<size_t>(1, n / 5) : 0;
  const size_t train_count = n - held;
  const std::vector<EncodedDialogue> held_out(
      held > 0 ? std::vector<EncodedDialogue>(encoded.begin() + static_cast<long>(train_count),
                                              encoded.end())
               : encoded);

  const detail::ParamLayout offsets(model.config);
  std::vector<double> grad(offsets.total);
  const auto& opt = model_config.optimizer;
  const size_t batch_size = static_cast<size_t>(opt.batch_size);
  const size_t vocab = static_cast<size_t>(model.config.vocab_size);

  for (int step = 0; step < opt.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    LossBatch batch;
    batch.vocab_size = model.config.vocab_size;
    std::vector<detail::ForwardCache> caches(batch_size);
    std::vector<const EncodedDialogue*> picked(batch_size);
    std::vector<std::vector<double>> logits_all(batch_size);
    for (size_t j = 0; j < batch_size; ++j) {
      const auto& ep =
          encoded[(static_cast<size_t>(step) * batch_size + j) % train_count];
      picked[j] = &ep;
      logits_all[j] = detail::model_forward(model, ep.tokens, &caches[j]);
      detail::append_next_token_rows(logits_all[j], ep, vocab, batch);
    }
    // Overflowing parameters show up as non-finite logits one forward pass
    // before the loss itself would; checking here keeps the loss module's
    // domain guards out of the failure path.
    for (const double z : batch.logits)
      if (!std::isfinite(z))
        throw DivergenceDetected("non-finite logits at step " +
                                 std::to_string(step));
    const auto loss = batch_loss(batch, loss_cfg);
    if (!std::isfinite(loss.total))
      throw DivergenceDetected("non-finite training loss at step " +
                               std::to_string(step));
    const auto d_rows = batch_loss_grad(batch, loss_cfg);
    size_t row = 0;
    for (size_t j = 0; j < batch_size; ++j) {
      const auto& ep = *picked[j];
      const size_t T = ep.tokens.size();
      std::vector<double> d_logits(T * vocab, 0.0);
      for (size_t i = 0; i + 1 < T; ++i, ++row)
        std::copy(d_rows.begin() + static_cast<long>(row * vocab),
                  d_rows.begin() + static_cast<long>((row + 1) * vocab),
                  d_logits.begin() + static_cast<long>(i * vocab));
      detail::model_backward(model, ep.tokens, caches[j], d_logits, grad);
    }
    for (size_t i = 0; i < offsets.total; ++i)
      model.params[i] -= opt.learning_rate * grad[i];

    const int done = step + 1;
    if (done % curve_every == 0 || done == opt.steps) {
      const auto recalls = detail::teacher_forced_recalls(model, held_out);
      CurvePoint point;
      point.step = done;
      point.loss = detail::held_out_loss(model, held_out, loss_cfg);
      point.recall_silence = recalls[0];
      point.recall_standby = recalls[1];
      point.recall_response = recalls[2];
      if (!std::isfinite(point.loss))
        throw DivergenceDetected("non-finite held-out loss at step " +
                                 std::to_string(done));
      result.curve.push_back(point);
    }
  }
  return result;
}

struct StateScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct StateEvalReport {
  // confusion[gold][pred], indexed by StateToken order.
  std::array<std::array<int64_t, 3>, 3> confusion{};
  std::array<StateScores, 3> per_state{};
  double timing_f1 = 0.0;
  int64_t turns = 0;
};

namespace detail {

/// Greedy one-to-one matching of predicted Response turns to gold Response
/// turns within the given turn tolerance. Both lists must be sorted.
inline std::vector<std::pair<int, int>> match_response_pairs(
    const std::vector<int>& gold, const std::vector<int>& pred, int tolerance) {
  std::vector<std::pair<int, int>> pairs;
  size_t i = 0, j = 0;
  while (i < gold.size() && j < pred.size()) {
    const int diff = pred[j] - gold[i];
    if (std::abs(diff) <= tolerance) {
      pairs.emplace_back(gold[i], pred[j]);
      ++i;
      ++j;
    } else if (diff < 0) {
      ++j;
    } else {
      ++i;
    }
  }
  return pairs;
}

inline int64_t match_response_turns(const std::vector<int>& gold,
                                    const std::vector<int>& pred,
                                    int tolerance) {
  return static_cast<int64_t>(match_response_pairs(gold, pred, tolerance).size());
}

/// Free-running pass over one dialogue: the model sees prompts, markers,
/// frames and user text from the dialogue, but every state decision and every
/// response token is its own previous output.
inline std::vector<StateToken> free_run_states(const ToyModel& model,
                                               const StreamingDialogue& dialogue) {
  const auto& layout = model.layout;
  const auto ids = layout.state_ids();
  std::vector<int32_t> ctx = model.codec.encode_hashed(dialogue.system_prompt);
  std::vector<StateToken> states;
  states.reserve(dialogue.turns.size());
  for (size_t k = 0; k < dialogue.turns.size(); ++k) {
    const auto& turn = dialogue.turns[k];
    ctx.push_back(layout.marker_for_turn(static_cast<int>(k)));
    for (const auto frame : turn.frames) ctx.push_back(frame);
    if (turn.user_text) {
      const auto user = model.codec.encode_hashed(*turn.user_text);
      ctx.insert(ctx.end(), user.begin(), user.end());
    }
    const auto logits = forward(model, ctx);
    const int pred = argmax_restricted(logits, ids);
    const auto state = static_cast<StateToken>(pred);
    states.push_back(state);
    ctx.push_back(ids[static_cast<size_t>(pred)]);
    if (state == StateToken::Response) {
      // Greedy decode, capped at 64 content tokens; the end-of-turn id is
      // appended even when the model never produces it, so the next turn
      // starts from a well-formed context.
      bool closed = false;
      for (int step = 0; step < 64; ++step) {
        const auto tok = argmax_full(forward(model, ctx));
        ctx.push_back(tok);
        if (tok == layout.eot_id) {
          closed = true;
          break;
        }
      }
      if (!closed) ctx.push_back(layout.eot_id);
    }
  }
  return states;
}

}  // namespace detail

/// Streaming evaluation: free-runs the model over each dialogue and scores
/// its per-turn state decisions against the dialogue's own states.
inline StateEvalReport evaluate_states(const ToyModel& model,
                                       const std::vector<StreamingDialogue>& dialogues) {
  if (dialogues.empty())
    throw EmptyEvaluationSet("no dialogues to evaluate");
  StateEvalReport report;
  int64_t timing_tp = 0, timing_fp = 0, timing_fn = 0;
  for (const auto& dialogue : dialogues) {
    const auto pred = detail::free_run_states(model, dialogue);
    std::vector<int> gold_rsp, pred_rsp;
    for (size_t k = 0; k < dialogue.turns.size(); ++k) {
      const int g = static_cast<int>(dialogue.turns[k].state);
      const int p = static_cast<int>(pred[k]);
      ++report.confusion[static_cast<size_t>(g)][static_cast<size_t>(p)];
      ++report.turns;
      if (dialogue.turns[k].state == StateToken::Response)
        gold_rsp.push_back(static_cast<int>(k));
      if (pred[k] == StateToken::Response)
        pred_rsp.push_back(static_cast<int>(k));
    }
    const int64_t tp = detail::match_response_turns(gold_rsp, pred_rsp, 1);
    timing_tp += tp;
    timing_fp += static_cast<int64_t>(pred_rsp.size()) - tp;
    timing_fn += static_cast<int64_t>(gold_rsp.size()) - tp;
  }
  for (int s = 0; s < 3; ++s) {
    int64_t tp = report.confusion[static_cast<size_t>(s)][static_cast<size_t>(s)];
    int64_t gold_total = 0, pred_total = 0;
    for (int o = 0; o < 3; ++o) {
      gold_total += report.confusion[static_cast<size_t>(s)][static_cast<size_t>(o)];
      pred_total += report.confusion[static_cast<size_t>(o)][static_cast<size_t>(s)];
    }
    auto& scores = report.per_state[static_cast<size_t>(s)];
    // Zero denominators score zero rather than being treated as undefined.
    scores.precision = pred_total == 0 ? 0.0
                                       : static_cast<double>(tp) /
                                             static_cast<double>(pred_total);
    scores.recall = gold_total == 0 ? 0.0
                                    : static_cast<double>(tp) /
                                          static_cast<double>(gold_total);
    scores.f1 = (scores.precision + scores.recall) == 0.0
                    ? 0.0
                    : 2.0 * scores.precision * scores.recall /
                          (scores.precision + scores.recall);
  }
  const int64_t denom = 2 * timing_tp + timing_fp + timing_fn;
  report.timing_f1 =
      denom == 0 ? 1.0 : 2.0 * static_cast<double>(timing_tp) / static_cast<double>(denom);
  return report;
}

}  // namespace streamo
