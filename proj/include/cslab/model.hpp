#pragma once

#include <cstdint>
#include <vector>

#include "cslab/tensor.hpp"

namespace cslab {

enum class LayerKind { Dense, Conv2d, Relu, Flatten };

struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  // dense
  int in_features = 0;
  int out_features = 0;
  // conv2d (valid padding)
  int in_channels = 0;
  int out_channels = 0;
  int ksize = 0;
  int stride = 1;
};

inline LayerDesc dense_layer(int in_features, int out_features) {
  LayerDesc d;
  d.kind = LayerKind::Dense;
  d.in_features = in_features;
  d.out_features = out_features;
  return d;
}
inline LayerDesc conv_layer(int in_channels, int out_channels, int ksize, int stride = 1) {
  LayerDesc d;
  d.kind = LayerKind::Conv2d;
  d.in_channels = in_channels;
  d.out_channels = out_channels;
  d.ksize = ksize;
  d.stride = stride;
  return d;
}
inline LayerDesc relu_layer() { return LayerDesc{LayerKind::Relu}; }
inline LayerDesc flatten_layer() { return LayerDesc{LayerKind::Flatten}; }

/// Weights for one layer. Non-parameterized layers keep both tensors empty.
struct LayerParams {
  Tensor w;
  Tensor b;
};

/// Feedforward classifier over a fixed layer set. Immutable after
/// training/loading; forward and gradient calls are const and safe for
/// concurrent readers.
struct Model {
  std::vector<int> input_shape;  // [C,H,W] for conv stacks, [D] for pure MLPs
  int num_classes = 0;
  std::vector<LayerDesc> layers;
  std::vector<LayerParams> params;  // aligned with layers

  /// Validates layer composition and sets num_classes from the last layer.
  /// Throws InvalidInputError if shapes do not compose or the output is
  /// not a flat logit vector.
  static Model build(std::vector<int> input_shape, std::vector<LayerDesc> layer_descs);

  /// The desk-scale architecture used throughout the experiments:
  /// conv(8,3x3) - relu - conv(16,3x3,s2) - relu - flatten - dense(classes).
  static Model conv_small(int channels, int height, int width, int num_classes);

  /// He-style random init, deterministic per seed.
  void init_random(std::uint64_t seed);

  struct Cache {
    // acts[i] is the input to layer i; acts.back() is the logit vector
    std::vector<Tensor> acts;
  };

  Tensor forward(const Tensor& x) const;
  Tensor forward_cached(const Tensor& x, Cache& cache) const;

  /// Backprop of dL/dlogits to dL/dx using a cache from forward_cached.
  Tensor backward_input(const Cache& cache, const Tensor& dlogits) const;

  /// Accumulates dL/dparams into grads (which must be zero-initialized
  /// with shapes matching params).
  void backward_params(const Cache& cache, const Tensor& dlogits,
                       std::vector<LayerParams>& grads) const;

  std::vector<LayerParams> zero_like_params() const;
  long param_count() const;

  std::vector<int> output_shape_of(int layer_index) const;  // input shape of layer_index+1
};

// ---- loss (cross-entropy over softmax, the only LossKind) ----

/// Softmax computed in double, returned as float; sums to 1 within 1e-6.
Tensor softmax(const Tensor& logits);

/// Cross-entropy of softmax(logits) at label. Throws on out-of-range label.
double cross_entropy(const Tensor& logits, int label);

/// dL/dlogits for cross-entropy: softmax(logits) - onehot(label).
Tensor cross_entropy_dlogits(const Tensor& logits, int label);

/// dLoss/dx for the cross-entropy loss at `label`.
Tensor input_gradient(const Model& model, const Tensor& x, int label);

/// Mean-over-batch parameter gradients. Throws on an empty batch.
std::vector<LayerParams> param_gradients(const Model& model,
                                         const std::vector<Tensor>& batch,
                                         const std::vector<int>& labels);

}  // namespace cslab
