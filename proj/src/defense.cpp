#include "cslab/defense.hpp"

#include <cmath>
#include <sstream>

#include "cslab/rng.hpp"

namespace cslab {

std::string defense_kind_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::None: return "none";
    case DefenseKind::Snd: return "snd";
    case DefenseKind::Rnd: return "rnd";
    case DefenseKind::BitSqueeze: return "bit-squeeze";
    case DefenseKind::AvgSmooth: return "avg-smooth";
    case DefenseKind::CounterSample: return "counter-sample";
  }
  return "?";
}

DefenseKind defense_kind_from_name(const std::string& name) {
  if (name == "none") return DefenseKind::None;
  if (name == "snd") return DefenseKind::Snd;
  if (name == "rnd") return DefenseKind::Rnd;
  if (name == "bit-squeeze") return DefenseKind::BitSqueeze;
  if (name == "avg-smooth") return DefenseKind::AvgSmooth;
  if (name == "counter-sample") return DefenseKind::CounterSample;
  throw InvalidInputError("unknown defense kind '" + name +
                          "' (valid: none, snd, rnd, bit-squeeze, avg-smooth, counter-sample)");
}

void DefenseConfig::validate() const {
  if (k < 0) throw InvalidInputError("defense: k must be >= 0");
  if (alpha < 0.0f) throw InvalidInputError("defense: alpha must be >= 0");
  if (sigma < 0.0f) throw InvalidInputError("defense: sigma must be >= 0");
  if (eta < 0.0f) throw InvalidInputError("defense: eta must be >= 0");
  if (bits < 1 || bits > 8) throw InvalidInputError("defense: bits must be in [1,8]");
  if (kernel < 1 || kernel % 2 == 0)
    throw InvalidInputError("defense: kernel must be odd and >= 1");
}

std::string DefenseConfig::name() const {
  std::ostringstream s;
  s << defense_kind_name(kind);
  switch (kind) {
    case DefenseKind::Snd: s << "[s=" << sigma << "]"; break;
    case DefenseKind::Rnd: s << "[e=" << eta << "]"; break;
    case DefenseKind::BitSqueeze: s << "[b=" << bits << "]"; break;
    case DefenseKind::AvgSmooth: s << "[w=" << kernel << "]"; break;
    case DefenseKind::CounterSample:
      s << "[k=" << k << ",a=" << alpha << ",s=" << sigma;
      if (freeze_label) s << ",frozen";
      s << "]";
      break;
    default: break;
  }
  return s.str();
}

std::pair<Tensor, CounterSampleTrace> counter_sample(const Model& model, const Tensor& x,
                                                     const DefenseConfig& cfg,
                                                     std::uint64_t nonce) {
  cfg.validate();
  if (cfg.kind != DefenseKind::CounterSample)
    throw InvalidInputError("counter_sample called with kind " + defense_kind_name(cfg.kind));

  Tensor xs = x;
  if (cfg.sigma > 0.0f || cfg.mu != 0.0f) {
    auto rng = make_rng(cfg.seed, nonce);
    std::normal_distribution<float> z(cfg.mu, cfg.sigma > 0.0f ? cfg.sigma : 1e-30f);
    for (float& v : xs.data) v += z(rng);
  }

  CounterSampleTrace trace;
  trace.steps.reserve(cfg.k);
  int frozen_label = -1;
  Model::Cache cache;
  for (int i = 0; i < cfg.k; ++i) {
    Tensor logits = model.forward_cached(xs, cache);
    int label;
    if (cfg.freeze_label) {
      if (frozen_label < 0) frozen_label = logits.argmax();
      label = frozen_label;
    } else {
      label = logits.argmax();
    }
    const double loss = cross_entropy(logits, label);
    Tensor grad = model.backward_input(cache, cross_entropy_dlogits(logits, label));
    double step_sq = 0.0;
    for (long j = 0; j < xs.numel(); ++j) {
      const float d = cfg.alpha * grad.data[j];
      xs.data[j] -= d;
      step_sq += static_cast<double>(d) * d;
    }
    trace.steps.push_back({label, loss, std::sqrt(step_sq)});
  }
  return {std::move(xs), std::move(trace)};
}

Tensor snd(const Tensor& x, const DefenseConfig& cfg, std::uint64_t nonce) {
  cfg.validate();
  if (cfg.kind != DefenseKind::Snd)
    throw InvalidInputError("snd called with kind " + defense_kind_name(cfg.kind));
  Tensor out = x;
  if (cfg.sigma > 0.0f) {
    auto rng = make_rng(cfg.seed, nonce);
    std::normal_distribution<float> z(0.0f, cfg.sigma);
    for (float& v : out.data) v += z(rng);
  }
  return out;
}

Tensor rnd(const Tensor& x, const DefenseConfig& cfg, std::uint64_t nonce) {
  cfg.validate();
  if (cfg.kind != DefenseKind::Rnd)
    throw InvalidInputError("rnd called with kind " + defense_kind_name(cfg.kind));
  Tensor out = x;
  if (cfg.eta > 0.0f) {
    auto rng = make_rng(cfg.seed, nonce);
    std::uniform_real_distribution<float> u(-cfg.eta, cfg.eta);
    for (float& v : out.data) v += u(rng);
  }
  return out;
}

Tensor bit_squeeze(const Tensor& x, const DefenseConfig& cfg) {
  cfg.validate();
  const float levels = static_cast<float>((1 << cfg.bits) - 1);
  Tensor out = x;
  for (float& v : out.data) {
    if (!(v >= 0.0f && v <= 1.0f))
      throw InvalidInputError("bit_squeeze: pixel " + std::to_string(v) + " outside [0,1]");
    v = std::round(v * levels) / levels;
  }
  return out;
}

Tensor avg_smooth(const Tensor& x, const DefenseConfig& cfg) {
  cfg.validate();
  if (x.shape.size() != 3)
    throw InvalidInputError("avg_smooth expects a [C,H,W] tensor");
  if (cfg.kernel == 1) return x;
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int r = cfg.kernel / 2;
  Tensor out(x.shape);
  const float inv = 1.0f / static_cast<float>(cfg.kernel * cfg.kernel);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        float acc = 0.0f;
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = std::clamp(y + dy, 0, H - 1);  // replicate padding
          for (int dx = -r; dx <= r; ++dx) {
            const int sx = std::clamp(xx + dx, 0, W - 1);
            acc += x.data[(static_cast<long>(c) * H + sy) * W + sx];
          }
        }
        out.data[(static_cast<long>(c) * H + y) * W + xx] = acc * inv;
      }
    }
  }
  return out;
}

DefendedOutput defended_forward(const Model& model, const Tensor& x,
                                const DefenseConfig& cfg, std::uint64_t nonce) {
  cfg.validate();
  Tensor transformed;
  switch (cfg.kind) {
    case DefenseKind::None: transformed = x; break;
    case DefenseKind::Snd: transformed = snd(x, cfg, nonce); break;
    case DefenseKind::Rnd: transformed = rnd(x, cfg, nonce); break;
    case DefenseKind::BitSqueeze: transformed = bit_squeeze(x, cfg); break;
    case DefenseKind::AvgSmooth: transformed = avg_smooth(x, cfg); break;
    case DefenseKind::CounterSample:
      transformed = counter_sample(model, x, cfg, nonce).first;
      break;
  }
  DefendedOutput out;
  out.probs = softmax(model.forward(transformed));
  out.label = out.probs.argmax();
  return out;
}

}  // namespace cslab
