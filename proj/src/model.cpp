#include "cslab/model.hpp"

#include <algorithm>
#include <cmath>

#include "cslab/rng.hpp"

namespace cslab {

namespace {

std::vector<int> layer_output_shape(const LayerDesc& d, const std::vector<int>& in) {
  switch (d.kind) {
    case LayerKind::Dense: {
      if (in.size() != 1 || in[0] != d.in_features)
        throw InvalidInputError("dense layer expects flat input of " +
                                std::to_string(d.in_features) + " features");
      return {d.out_features};
    }
    case LayerKind::Conv2d: {
      if (in.size() != 3 || in[0] != d.in_channels)
        throw InvalidInputError("conv layer expects [C,H,W] input with C=" +
                                std::to_string(d.in_channels));
      const int oh = (in[1] - d.ksize) / d.stride + 1;
      const int ow = (in[2] - d.ksize) / d.stride + 1;
      if (in[1] < d.ksize || in[2] < d.ksize)
        throw InvalidInputError("conv kernel larger than input");
      return {d.out_channels, oh, ow};
    }
    case LayerKind::Relu:
      return in;
    case LayerKind::Flatten: {
      long n = Tensor::numel_of(in);
      return {static_cast<int>(n)};
    }
  }
  throw InvalidInputError("unknown layer kind");
}

}  // namespace

Model Model::build(std::vector<int> input_shape, std::vector<LayerDesc> layer_descs) {
  Model m;
  m.input_shape = std::move(input_shape);
  m.layers = std::move(layer_descs);
  std::vector<int> shape = m.input_shape;
  for (const auto& d : m.layers) {
    shape = layer_output_shape(d, shape);
  }
  if (shape.size() != 1 || shape[0] < 1)
    throw InvalidInputError("model must end in a flat logit vector");
  m.num_classes = shape[0];
  m.params.resize(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& d = m.layers[i];
    if (d.kind == LayerKind::Dense) {
      m.params[i].w = Tensor({d.out_features, d.in_features});
      m.params[i].b = Tensor({d.out_features});
    } else if (d.kind == LayerKind::Conv2d) {
      m.params[i].w = Tensor({d.out_channels, d.in_channels, d.ksize, d.ksize});
      m.params[i].b = Tensor({d.out_channels});
    }
  }
  return m;
}

Model Model::conv_small(int channels, int height, int width, int num_classes) {
  auto probe = layer_output_shape(conv_layer(channels, 8, 3, 1), {channels, height, width});
  probe = layer_output_shape(conv_layer(8, 16, 3, 2), probe);
  const int flat = probe[0] * probe[1] * probe[2];
  return build({channels, height, width},
               {conv_layer(channels, 8, 3, 1), relu_layer(), conv_layer(8, 16, 3, 2),
                relu_layer(), flatten_layer(), dense_layer(flat, num_classes)});
}

void Model::init_random(std::uint64_t seed) {
  auto rng = make_rng(seed, 0x6d6f64656cull);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& d = layers[i];
    long fan_in = 0;
    if (d.kind == LayerKind::Dense) fan_in = d.in_features;
    else if (d.kind == LayerKind::Conv2d) fan_in = 1L * d.in_channels * d.ksize * d.ksize;
    else continue;
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (float& v : params[i].w.data) v = dist(rng);
    std::fill(params[i].b.data.begin(), params[i].b.data.end(), 0.0f);
  }
}

std::vector<int> Model::output_shape_of(int layer_index) const {
  std::vector<int> shape = input_shape;
  for (int i = 0; i <= layer_index; ++i) shape = layer_output_shape(layers[i], shape);
  return shape;
}

Tensor Model::forward(const Tensor& x) const {
  Cache cache;
  return forward_cached(x, cache);
}

Tensor Model::forward_cached(const Tensor& x, Cache& cache) const {
  if (x.shape != input_shape)
    throw InvalidInputError("forward: input shape " + x.shape_str() +
                            " does not match model input " + Tensor(input_shape).shape_str());
  cache.acts.clear();
  cache.acts.reserve(layers.size() + 1);
  cache.acts.push_back(x);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& d = layers[li];
    const Tensor& in = cache.acts.back();
    Tensor out;
    switch (d.kind) {
      case LayerKind::Dense: {
        out = Tensor({d.out_features});
        const float* wp = params[li].w.ptr();
        const float* xp = in.ptr();
        for (int o = 0; o < d.out_features; ++o) {
          const float* row = wp + static_cast<long>(o) * d.in_features;
          float acc = params[li].b.data[o];
          for (int j = 0; j < d.in_features; ++j) acc += row[j] * xp[j];
          out.data[o] = acc;
        }
        break;
      }
      case LayerKind::Conv2d: {
        const int H = in.shape[1], W = in.shape[2];
        const int K = d.ksize, S = d.stride;
        const int OH = (H - K) / S + 1, OW = (W - K) / S + 1;
        out = Tensor({d.out_channels, OH, OW});
        const float* wp = params[li].w.ptr();
        const float* xp = in.ptr();
        float* op = out.ptr();
        for (int oc = 0; oc < d.out_channels; ++oc) {
          const float bias = params[li].b.data[oc];
          for (int oy = 0; oy < OH; ++oy) {
            float* orow = op + (static_cast<long>(oc) * OH + oy) * OW;
            for (int ox = 0; ox < OW; ++ox) orow[ox] = bias;
            for (int ic = 0; ic < d.in_channels; ++ic) {
              const float* wk = wp + ((static_cast<long>(oc) * d.in_channels + ic) * K) * K;
              for (int ky = 0; ky < K; ++ky) {
                const float* xrow = xp + (static_cast<long>(ic) * H + oy * S + ky) * W;
                const float* wrow = wk + static_cast<long>(ky) * K;
                for (int kx = 0; kx < K; ++kx) {
                  const float wv = wrow[kx];
                  for (int ox = 0; ox < OW; ++ox) orow[ox] += wv * xrow[ox * S + kx];
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu: {
        out = in;
        for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
        break;
      }
      case LayerKind::Flatten: {
        out = Tensor({static_cast<int>(in.numel())}, in.data);
        break;
      }
    }
    cache.acts.push_back(std::move(out));
  }
  return cache.acts.back();
}

Tensor Model::backward_input(const Cache& cache, const Tensor& dlogits) const {
  Tensor grad = dlogits;
  for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
    const auto& d = layers[li];
    const Tensor& in = cache.acts[li];
    Tensor next;
    switch (d.kind) {
      case LayerKind::Dense: {
        next = Tensor(in.shape);
        const float* wp = params[li].w.ptr();
        for (int o = 0; o < d.out_features; ++o) {
          const float g = grad.data[o];
          if (g == 0.0f) continue;
          const float* row = wp + static_cast<long>(o) * d.in_features;
          for (int j = 0; j < d.in_features; ++j) next.data[j] += g * row[j];
        }
        break;
      }
      case LayerKind::Conv2d: {
        const int H = in.shape[1], W = in.shape[2];
        const int K = d.ksize, S = d.stride;
        const int OH = (H - K) / S + 1, OW = (W - K) / S + 1;
        next = Tensor(in.shape);
        const float* wp = params[li].w.ptr();
        const float* gp = grad.ptr();
        float* np = next.ptr();
        for (int oc = 0; oc < d.out_channels; ++oc) {
          for (int ic = 0; ic < d.in_channels; ++ic) {
            const float* wk = wp + ((static_cast<long>(oc) * d.in_channels + ic) * K) * K;
            for (int oy = 0; oy < OH; ++oy) {
              const float* grow = gp + (static_cast<long>(oc) * OH + oy) * OW;
              for (int ky = 0; ky < K; ++ky) {
                float* nrow = np + (static_cast<long>(ic) * H + oy * S + ky) * W;
                const float* wrow = wk + static_cast<long>(ky) * K;
                for (int kx = 0; kx < K; ++kx) {
                  const float wv = wrow[kx];
                  for (int ox = 0; ox < OW; ++ox) nrow[ox * S + kx] += wv * grow[ox];
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu: {
        next = grad;
        for (long i = 0; i < in.numel(); ++i)
          if (in.data[i] <= 0.0f) next.data[i] = 0.0f;
        break;
      }
      case LayerKind::Flatten: {
        next = Tensor(in.shape, grad.data);
        break;
      }
    }
    grad = std::move(next);
  }
  return grad;
}

void Model::backward_params(const Cache& cache, const Tensor& dlogits,
                            std::vector<LayerParams>& grads) const {
  Tensor grad = dlogits;
  for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
    const auto& d = layers[li];
    const Tensor& in = cache.acts[li];
    Tensor next;
    switch (d.kind) {
      case LayerKind::Dense: {
        next = Tensor(in.shape);
        const float* wp = params[li].w.ptr();
        float* gw = grads[li].w.ptr();
        for (int o = 0; o < d.out_features; ++o) {
          const float g = grad.data[o];
          grads[li].b.data[o] += g;
          const float* row = wp + static_cast<long>(o) * d.in_features;
          float* grow = gw + static_cast<long>(o) * d.in_features;
          for (int j = 0; j < d.in_features; ++j) {
            grow[j] += g * in.data[j];
            next.data[j] += g * row[j];
          }
        }
        break;
      }
      case LayerKind::Conv2d: {
        const int H = in.shape[1], W = in.shape[2];
        const int K = d.ksize, S = d.stride;
        const int OH = (H - K) / S + 1, OW = (W - K) / S + 1;
        next = Tensor(in.shape);
        const float* wp = params[li].w.ptr();
        const float* gp = grad.ptr();
        const float* xp = in.ptr();
        float* np = next.ptr();
        float* gw = grads[li].w.ptr();
        for (int oc = 0; oc < d.out_channels; ++oc) {
          double bsum = 0.0;
          for (int oy = 0; oy < OH; ++oy) {
            const float* grow = gp + (static_cast<long>(oc) * OH + oy) * OW;
            for (int ox = 0; ox < OW; ++ox) bsum += grow[ox];
          }
          grads[li].b.data[oc] += static_cast<float>(bsum);
          for (int ic = 0; ic < d.in_channels; ++ic) {
            const float* wk = wp + ((static_cast<long>(oc) * d.in_channels + ic) * K) * K;
            float* gk = gw + ((static_cast<long>(oc) * d.in_channels + ic) * K) * K;
            for (int oy = 0; oy < OH; ++oy) {
              const float* grow = gp + (static_cast<long>(oc) * OH + oy) * OW;
              for (int ky = 0; ky < K; ++ky) {
                const float* xrow = xp + (static_cast<long>(ic) * H + oy * S + ky) * W;
                float* nrow = np + (static_cast<long>(ic) * H + oy * S + ky) * W;
                const float* wrow = wk + static_cast<long>(ky) * K;
                float* gkrow = gk + static_cast<long>(ky) * K;
                for (int kx = 0; kx < K; ++kx) {
                  const float wv = wrow[kx];
                  float acc = 0.0f;
                  for (int ox = 0; ox < OW; ++ox) {
                    const float g = grow[ox];
                    acc += g * xrow[ox * S + kx];
                    nrow[ox * S + kx] += wv * g;
                  }
                  gkrow[kx] += acc;
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu: {
        next = grad;
        for (long i = 0; i < in.numel(); ++i)
          if (in.data[i] <= 0.0f) next.data[i] = 0.0f;
        break;
      }
      case LayerKind::Flatten: {
        next = Tensor(in.shape, grad.data);
        break;
      }
    }
    grad = std::move(next);
  }
}

std::vector<LayerParams> Model::zero_like_params() const {
  std::vector<LayerParams> grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads[i].w = Tensor(params[i].w.shape);
    grads[i].b = Tensor(params[i].b.shape);
  }
  return grads;
}

long Model::param_count() const {
  long n = 0;
  for (const auto& p : params) n += p.w.numel() + p.b.numel();
  return n;
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape);
  double mx = -1e300;
  for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  std::vector<double> e(logits.data.size());
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits.data[i]) - mx);
    sum += e[i];
  }
  for (std::size_t i = 0; i < logits.data.size(); ++i)
    out.data[i] = static_cast<float>(e[i] / sum);
  return out;
}

double cross_entropy(const Tensor& logits, int label) {
  const int n = static_cast<int>(logits.data.size());
  if (label < 0 || label >= n)
    throw InvalidInputError("label " + std::to_string(label) + " out of range [0," +
                            std::to_string(n) + ")");
  double mx = -1e300;
  for (float v : logits.data) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (float v : logits.data) sum += std::exp(static_cast<double>(v) - mx);
  return std::log(sum) - (static_cast<double>(logits.data[label]) - mx);
}

Tensor cross_entropy_dlogits(const Tensor& logits, int label) {
  const int n = static_cast<int>(logits.data.size());
  if (label < 0 || label >= n)
    throw InvalidInputError("label out of range in loss gradient");
  Tensor d = softmax(logits);
  d.data[label] -= 1.0f;
  return d;
}

Tensor input_gradient(const Model& model, const Tensor& x, int label) {
  Model::Cache cache;
  Tensor logits = model.forward_cached(x, cache);
  return model.backward_input(cache, cross_entropy_dlogits(logits, label));
}

std::vector<LayerParams> param_gradients(const Model& model,
                                         const std::vector<Tensor>& batch,
                                         const std::vector<int>& labels) {
  if (batch.empty()) throw InvalidInputError("param_gradients: empty batch");
  if (batch.size() != labels.size())
    throw InvalidInputError("param_gradients: batch/label count mismatch");
  auto grads = model.zero_like_params();
  Model::Cache cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor logits = model.forward_cached(batch[i], cache);
    model.backward_params(cache, cross_entropy_dlogits(logits, labels[i]), grads);
  }
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (auto& g : grads) {
    for (float& v : g.w.data) v *= inv;
    for (float& v : g.b.data) v *= inv;
  }
  return grads;
}

}  // namespace cslab
