#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cslab/model.hpp"

namespace cslab {

enum class DefenseKind { None, Snd, Rnd, BitSqueeze, AvgSmooth, CounterSample };

std::string defense_kind_name(DefenseKind k);
DefenseKind defense_kind_from_name(const std::string& name);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::None;
  int k = 10;                 // counter-sample iterations
  float alpha = 0.1f;         // counter-sample step size
  float sigma = 0.01f;        // Gaussian sigma (snd, counter-sample)
  float mu = 0.0f;            // Gaussian mean of the counter-sample noise
  float eta = 0.02f;          // uniform half-width (rnd)
  int bits = 8;               // bit-squeeze depth
  int kernel = 3;             // avg-smooth window (odd)
  bool freeze_label = false;  // counter-sample: fix the label once instead of per iteration
  std::uint64_t seed = 0;

  void validate() const;
  /// Short unique name for reports, e.g. "counter-sample[k=10,a=0.1,s=0.01]".
  std::string name() const;
};

struct CounterSampleTrace {
  struct Step {
    int label = 0;      // label used for the descent at this iteration
    double loss = 0.0;  // loss toward that label before the step
    double step_norm = 0.0;
  };
  std::vector<Step> steps;  // length k
};

/// Counter-sample creation: start at x plus Gaussian noise, then k
/// gradient-descent steps of size alpha toward the currently predicted
/// class. The result is intentionally not clipped to [0,1].
std::pair<Tensor, CounterSampleTrace> counter_sample(const Model& model, const Tensor& x,
                                                     const DefenseConfig& cfg,
                                                     std::uint64_t nonce);

Tensor snd(const Tensor& x, const DefenseConfig& cfg, std::uint64_t nonce);
Tensor rnd(const Tensor& x, const DefenseConfig& cfg, std::uint64_t nonce);
Tensor bit_squeeze(const Tensor& x, const DefenseConfig& cfg);
Tensor avg_smooth(const Tensor& x, const DefenseConfig& cfg);

struct DefendedOutput {
  Tensor probs;
  int label = 0;
};

/// Applies the configured preprocessor, then softmax(forward(...)).
/// Noise is a pure function of (cfg.seed, nonce), so repeated calls with
/// the same nonce are bit-identical while fresh nonces draw fresh noise.
DefendedOutput defended_forward(const Model& model, const Tensor& x,
                                const DefenseConfig& cfg, std::uint64_t nonce);

}  // namespace cslab
