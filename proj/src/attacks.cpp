#include "cslab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "cslab/rng.hpp"

namespace cslab {

std::string attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::Nes: return "nes";
    case AttackKind::ZoSignSgd: return "zo-signsgd";
    case AttackKind::SignHunter: return "signhunter";
    case AttackKind::Square: return "square";
    case AttackKind::Simba: return "simba";
    case AttackKind::HsjLite: return "hsj-lite";
  }
  return "?";
}

std::vector<std::string> attack_kind_names() {
  return {"nes", "zo-signsgd", "signhunter", "square", "simba", "hsj-lite"};
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "nes") return AttackKind::Nes;
  if (name == "zo-signsgd") return AttackKind::ZoSignSgd;
  if (name == "signhunter") return AttackKind::SignHunter;
  if (name == "square") return AttackKind::Square;
  if (name == "simba") return AttackKind::Simba;
  if (name == "hsj-lite") return AttackKind::HsjLite;
  std::string valid;
  for (const auto& n : attack_kind_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidInputError("unknown attack kind '" + name + "' (valid: " + valid + ")");
}

bool attack_is_score_based(AttackKind k) { return k != AttackKind::HsjLite; }

void AttackConfig::validate() const {
  if (epsilon < 0.0f) throw InvalidInputError("attack: epsilon must be >= 0");
  if (step_factor <= 0.0f) throw InvalidInputError("attack: step_factor must be > 0");
  if (nes_pop < 2) throw InvalidInputError("attack: nes_pop must be >= 2");
  if (nes_sigma <= 0.0f) throw InvalidInputError("attack: nes_sigma must be > 0");
  if (square_p0 <= 0.0f || square_p0 > 1.0f)
    throw InvalidInputError("attack: square_p0 must be in (0,1]");
  if (hsj_grad_batch < 1) throw InvalidInputError("attack: hsj_grad_batch must be >= 1");
  if (hsj_tol <= 0.0f) throw InvalidInputError("attack: hsj_tol must be > 0");
  if (hsj_init_budget < 1) throw InvalidInputError("attack: hsj_init_budget must be >= 1");
}

double attacker_loss(const Tensor& probs, int y) {
  if (y < 0 || y >= static_cast<int>(probs.data.size()))
    throw InvalidInputError("attacker_loss: label out of range");
  return -std::log(std::max(static_cast<double>(probs.data[y]), 1e-12));
}

void project_ball_clip(Tensor& x, const Tensor& x0, float epsilon) {
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const float lo = std::max(0.0f, x0.data[i] - epsilon);
    const float hi = std::min(1.0f, x0.data[i] + epsilon);
    x.data[i] = std::min(hi, std::max(lo, x.data[i]));
  }
}

namespace {

struct Probe {
  double loss;
  int label;
};

// One counted score query; returns nothing once the budget is spent.
std::optional<Probe> score_query(QueryOracle& oracle, const Tensor& x, int y) {
  if (oracle.exhausted()) return std::nullopt;
  OracleResponse r = oracle.query(x);
  return Probe{attacker_loss(r.probs, y), r.label};
}

std::optional<bool> decision_query(QueryOracle& oracle, const Tensor& x, int y) {
  if (oracle.exhausted()) return std::nullopt;
  return oracle.query(x).label != y;
}

void finish(AttackResult& res, QueryOracle& oracle, const Tensor& x_adv, const Tensor& x) {
  res.delta = x_adv - x;
  res.queries_used = oracle.used();
}

AttackResult nes_family(QueryOracle& oracle, const Tensor& x, int y,
                        const AttackConfig& cfg, bool sqrt_decay) {
  cfg.validate();
  AttackResult res;
  res.delta = Tensor(x.shape);
  auto rng = make_rng(cfg.seed, sqrt_decay ? 0x7a73ull : 0x6e6573ull);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  const float eta = cfg.nes_step_or_default() * cfg.step_factor;
  const int pairs = cfg.nes_pop / 2;
  Tensor x_adv = x;

  for (int iter = 0; !oracle.exhausted(); ++iter) {
    Tensor g(x.shape);
    bool aborted = false;
    for (int p = 0; p < pairs && !aborted; ++p) {
      Tensor u(x.shape);
      for (float& v : u.data) v = gauss(rng);
      Tensor xp = x_adv, xm = x_adv;
      for (std::size_t i = 0; i < u.data.size(); ++i) {
        xp.data[i] += cfg.nes_sigma * u.data[i];
        xm.data[i] -= cfg.nes_sigma * u.data[i];
      }
      project_ball_clip(xp, x, cfg.epsilon);
      project_ball_clip(xm, x, cfg.epsilon);
      auto rp = score_query(oracle, xp, y);
      if (!rp) { aborted = true; break; }
      res.loss_history.push_back(rp->loss);
      auto rm = score_query(oracle, xm, y);
      if (!rm) { aborted = true; break; }
      res.loss_history.push_back(rm->loss);
      const float diff = static_cast<float>(rp->loss - rm->loss);
      for (std::size_t i = 0; i < u.data.size(); ++i) g.data[i] += diff * u.data[i];
    }
    if (aborted) break;
    const float denom = static_cast<float>(cfg.nes_pop) * cfg.nes_sigma;
    for (float& v : g.data) v /= denom;
    const float step = sqrt_decay ? eta / std::sqrt(static_cast<float>(iter + 1)) : eta;
    for (std::size_t i = 0; i < x_adv.data.size(); ++i) {
      const float s = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
      x_adv.data[i] += step * s;
    }
    project_ball_clip(x_adv, x, cfg.epsilon);
    auto rc = score_query(oracle, x_adv, y);
    if (!rc) break;
    res.loss_history.push_back(rc->loss);
    if (rc->label != y) {
      res.success = true;
      break;
    }
  }
  finish(res, oracle, x_adv, x);
  return res;
}

}  // namespace

AttackResult attack_nes(QueryOracle& oracle, const Tensor& x, int y_clean,
                        const AttackConfig& cfg) {
  return nes_family(oracle, x, y_clean, cfg, false);
}

AttackResult attack_zo_signsgd(QueryOracle& oracle, const Tensor& x, int y_clean,
                               const AttackConfig& cfg) {
  return nes_family(oracle, x, y_clean, cfg, true);
}

AttackResult attack_signhunter(QueryOracle& oracle, const Tensor& x, int y_clean,
                               const AttackConfig& cfg) {
  cfg.validate();
  AttackResult res;
  res.delta = Tensor(x.shape);
  const long d = x.numel();
  std::vector<signed char> sign(d, 1);

  auto candidate = [&](void) {
    Tensor c = x;
    for (long i = 0; i < d; ++i) c.data[i] += cfg.epsilon * static_cast<float>(sign[i]);
    c.clip_(0.0f, 1.0f);
    return c;
  };

  Tensor x_adv = candidate();
  auto first = score_query(oracle, x_adv, y_clean);
  if (!first) {
    finish(res, oracle, x, x);
    return res;
  }
  res.loss_history.push_back(first->loss);
  double best = first->loss;
  if (first->label != y_clean) {
    res.success = true;
    finish(res, oracle, x_adv, x);
    return res;
  }

  // divide and conquer over sign chunks: full vector, halves, quarters, ...
  int depth = 0;
  long node = 0;
  while (!oracle.exhausted() && !res.success) {
    const long chunk = std::max(1L, (d + (1L << depth) - 1) / (1L << depth));
    const long lo = node * chunk;
    if (lo >= d) {
      ++node;  // unreachable guard
    }
    const long hi = std::min(d, lo + chunk);
    for (long i = lo; i < hi; ++i) sign[i] = -sign[i];
    Tensor cand = candidate();
    auto r = score_query(oracle, cand, y_clean);
    if (!r) break;
    if (r->loss > best) {
      best = r->loss;
      x_adv = cand;
    } else {
      for (long i = lo; i < hi; ++i) sign[i] = -sign[i];  // revert
    }
    res.loss_history.push_back(best);
    if (r->label != y_clean) {
      res.success = true;
      x_adv = cand;
      break;
    }
    ++node;
    if (node * chunk >= d) {
      node = 0;
      ++depth;
      if (chunk == 1) depth = 0;  // finest level done; cycle again
    }
  }
  finish(res, oracle, x_adv, x);
  return res;
}

AttackResult attack_square(QueryOracle& oracle, const Tensor& x, int y_clean,
                           const AttackConfig& cfg) {
  cfg.validate();
  if (x.shape.size() != 3)
    throw InvalidInputError("square attack expects a [C,H,W] input");
  AttackResult res;
  res.delta = Tensor(x.shape);
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  auto rng = make_rng(cfg.seed, 0x737175617265ull);
  std::uniform_int_distribution<int> coin(0, 1);

  // init: vertical +-epsilon stripes
  Tensor delta(x.shape);
  for (int c = 0; c < C; ++c)
    for (int col = 0; col < W; ++col) {
      const float v = coin(rng) ? cfg.epsilon : -cfg.epsilon;
      for (int row = 0; row < H; ++row)
        delta.data[(static_cast<long>(c) * H + row) * W + col] = v;
    }

  auto apply = [&](const Tensor& dl) {
    Tensor c = x + dl;
    c.clip_(0.0f, 1.0f);
    return c;
  };

  Tensor x_adv = apply(delta);
  auto first = score_query(oracle, x_adv, y_clean);
  if (!first) {
    finish(res, oracle, x, x);
    return res;
  }
  res.loss_history.push_back(first->loss);
  double best = first->loss;
  if (first->label != y_clean) {
    res.success = true;
    finish(res, oracle, x_adv, x);
    return res;
  }

  const long budget = std::max(1L, oracle.budget());
  const float change = cfg.epsilon * cfg.step_factor;
  while (!oracle.exhausted() && !res.success) {
    const int halvings = static_cast<int>((oracle.used() * 5) / budget);
    const float frac = cfg.square_p0 / static_cast<float>(1 << std::min(halvings, 30));
    int side = static_cast<int>(std::lround(std::sqrt(frac * H * W)));
    side = std::clamp(side, 1, std::min(H, W));
    std::uniform_int_distribution<int> rrow(0, H - side), rcol(0, W - side);
    const int r0 = rrow(rng), c0 = rcol(rng);
    Tensor cand_delta = delta;
    for (int c = 0; c < C; ++c) {
      const float v = coin(rng) ? change : -change;
      for (int dy = 0; dy < side; ++dy)
        for (int dx = 0; dx < side; ++dx)
          cand_delta.data[(static_cast<long>(c) * H + r0 + dy) * W + c0 + dx] = v;
    }
    // stay inside the l-inf ball even with a scaled step
    for (float& v : cand_delta.data)
      v = std::clamp(v, -cfg.epsilon, cfg.epsilon);
    Tensor cand = apply(cand_delta);
    auto r = score_query(oracle, cand, y_clean);
    if (!r) break;
    if (r->loss > best) {
      best = r->loss;
      delta = std::move(cand_delta);
      x_adv = cand;
    }
    res.loss_history.push_back(best);
    if (r->label != y_clean) {
      res.success = true;
      x_adv = cand;
    }
  }
  finish(res, oracle, x_adv, x);
  return res;
}

AttackResult attack_simba(QueryOracle& oracle, const Tensor& x, int y_clean,
                          const AttackConfig& cfg) {
  cfg.validate();
  AttackResult res;
  res.delta = Tensor(x.shape);
  const long d = x.numel();
  auto rng = make_rng(cfg.seed, 0x73696d6261ull);
  const float step = cfg.simba_step_or_default() * cfg.step_factor;

  Tensor x_adv = x;
  auto first = score_query(oracle, x_adv, y_clean);
  if (!first) {
    finish(res, oracle, x, x);
    return res;
  }
  double p_best = std::exp(-first->loss);  // current true-class probability
  res.loss_history.push_back(first->loss);
  if (first->label != y_clean) {
    res.success = true;
    finish(res, oracle, x_adv, x);
    return res;
  }

  std::vector<long> perm(d);
  for (long i = 0; i < d; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  long pos = 0;
  long queries_this_pass = 0;

  while (!oracle.exhausted() && !res.success) {
    if (pos == d) {
      // every coordinate pinned at its bound: nothing left to try
      if (queries_this_pass == 0) break;
      std::shuffle(perm.begin(), perm.end(), rng);
      pos = 0;
      queries_this_pass = 0;
    }
    const long q = perm[pos++];
    for (int s : {+1, -1}) {
      Tensor cand = x_adv;
      cand.data[q] += static_cast<float>(s) * step;
      project_ball_clip(cand, x, cfg.epsilon);
      if (std::fabs(cand.data[q] - x_adv.data[q]) < 1e-9f) continue;  // pinned at bound
      ++queries_this_pass;
      auto r = score_query(oracle, cand, y_clean);
      if (!r) break;
      const double p = std::exp(-r->loss);
      if (r->label != y_clean) {
        res.success = true;
        x_adv = cand;
        res.loss_history.push_back(r->loss);
        break;
      }
      if (p < p_best) {
        p_best = p;
        x_adv = cand;
        res.loss_history.push_back(r->loss);
        break;  // accepted; move to the next coordinate
      }
      res.loss_history.push_back(-std::log(std::max(p_best, 1e-12)));
    }
  }
  finish(res, oracle, x_adv, x);
  return res;
}

Tensor boundary_bisect(const std::function<bool(const Tensor&)>& is_adversarial,
                       Tensor inside, Tensor adversarial, float tol) {
  while ((adversarial - inside).linf_norm() > tol) {
    Tensor mid = inside;
    for (std::size_t i = 0; i < mid.data.size(); ++i)
      mid.data[i] = 0.5f * (inside.data[i] + adversarial.data[i]);
    if (is_adversarial(mid))
      adversarial = std::move(mid);
    else
      inside = std::move(mid);
  }
  return adversarial;
}

AttackResult attack_hsj_lite(QueryOracle& oracle, const Tensor& x, int y_clean,
                             const AttackConfig& cfg) {
  cfg.validate();
  AttackResult res;
  res.delta = Tensor(x.shape);
  const long d = x.numel();
  auto rng = make_rng(cfg.seed, 0x68736aull);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  // find any misclassified starting point
  Tensor x_adv;
  bool found = false;
  for (int i = 0; i < cfg.hsj_init_budget && !oracle.exhausted(); ++i) {
    Tensor cand(x.shape);
    for (float& v : cand.data) v = unit(rng);
    auto adv = decision_query(oracle, cand, y_clean);
    if (!adv) break;
    if (*adv) {
      x_adv = std::move(cand);
      found = true;
      break;
    }
  }
  if (!found) {
    res.init_failure = true;
    finish(res, oracle, x, x);
    return res;
  }

  // budget-aware predicate for the bisection
  bool exhausted_mid_bisect = false;
  auto phi = [&](const Tensor& p) {
    auto adv = decision_query(oracle, p, y_clean);
    if (!adv) {
      exhausted_mid_bisect = true;
      return false;
    }
    return *adv;
  };

  x_adv = boundary_bisect(phi, x, std::move(x_adv), cfg.hsj_tol);
  Tensor best_adv = x_adv;
  float best_dist = (best_adv - x).linf_norm();

  for (int t = 1; !oracle.exhausted() && !exhausted_mid_bisect; ++t) {
    const float dist = (x_adv - x).linf_norm();
    const float probe_r =
        std::max(cfg.hsj_tol, dist / std::sqrt(static_cast<float>(d)));
    Tensor g(x.shape);
    for (int b = 0; b < cfg.hsj_grad_batch && !oracle.exhausted(); ++b) {
      Tensor u(x.shape);
      double n2 = 0.0;
      for (float& v : u.data) {
        v = gauss(rng);
        n2 += static_cast<double>(v) * v;
      }
      const float inv = 1.0f / static_cast<float>(std::sqrt(std::max(n2, 1e-30)));
      Tensor probe = x_adv;
      for (std::size_t i = 0; i < u.data.size(); ++i) {
        u.data[i] *= inv;
        probe.data[i] += probe_r * u.data[i];
      }
      probe.clip_(0.0f, 1.0f);
      auto adv = decision_query(oracle, probe, y_clean);
      if (!adv) break;
      const float w = *adv ? 1.0f : -1.0f;
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += w * u.data[i];
    }
    if (oracle.exhausted()) break;

    float xi = std::max(dist / std::sqrt(static_cast<float>(t)), cfg.hsj_tol);
    Tensor cand;
    bool stepped = false;
    for (int tries = 0; tries < 10 && !oracle.exhausted(); ++tries) {
      cand = x_adv;
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        const float s = g.data[i] > 0.0f ? 1.0f : (g.data[i] < 0.0f ? -1.0f : 0.0f);
        cand.data[i] += xi * s;
      }
      cand.clip_(0.0f, 1.0f);
      auto adv = decision_query(oracle, cand, y_clean);
      if (!adv) break;
      if (*adv) {
        stepped = true;
        break;
      }
      xi *= 0.5f;
    }
    if (stepped) x_adv = std::move(cand);
    x_adv = boundary_bisect(phi, x, std::move(x_adv), cfg.hsj_tol);
    const float nd = (x_adv - x).linf_norm();
    if (nd < best_dist) {
      best_dist = nd;
      best_adv = x_adv;
    }
  }

  res.success = best_dist <= cfg.epsilon + 1e-6f;
  Tensor delta = best_adv - x;
  if (!res.success) {
    // report convention: the perturbation is always inside the ball
    for (float& v : delta.data) v = std::clamp(v, -cfg.epsilon, cfg.epsilon);
  }
  res.delta = std::move(delta);
  res.queries_used = oracle.used();
  return res;
}

AttackResult run_attack(QueryOracle& oracle, const AttackConfig& cfg, const Tensor& x,
                        int y_clean) {
  cfg.validate();
  AttackResult res;
  switch (cfg.kind) {
    case AttackKind::Nes: res = attack_nes(oracle, x, y_clean, cfg); break;
    case AttackKind::ZoSignSgd: res = attack_zo_signsgd(oracle, x, y_clean, cfg); break;
    case AttackKind::SignHunter: res = attack_signhunter(oracle, x, y_clean, cfg); break;
    case AttackKind::Square: res = attack_square(oracle, x, y_clean, cfg); break;
    case AttackKind::Simba: res = attack_simba(oracle, x, y_clean, cfg); break;
    case AttackKind::HsjLite: res = attack_hsj_lite(oracle, x, y_clean, cfg); break;
  }
  // the deployed system has the last word
  Tensor x_final = x + res.delta;
  x_final.clip_(0.0f, 1.0f);
  res.success = oracle.evaluate_uncounted(x_final).label != y_clean;
  return res;
}

Tensor nes_gradient_estimate(QueryOracle& oracle, const Tensor& x, int y_clean,
                             const Tensor& x0, float epsilon, int pop, float sigma,
                             std::uint64_t seed) {
  auto rng = make_rng(seed, 0x657374ull);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  Tensor g(x.shape);
  const int pairs = pop / 2;
  for (int p = 0; p < pairs; ++p) {
    Tensor u(x.shape);
    for (float& v : u.data) v = gauss(rng);
    Tensor xp = x, xm = x;
    for (std::size_t i = 0; i < u.data.size(); ++i) {
      xp.data[i] += sigma * u.data[i];
      xm.data[i] -= sigma * u.data[i];
    }
    project_ball_clip(xp, x0, epsilon);
    project_ball_clip(xm, x0, epsilon);
    const double lp = attacker_loss(oracle.query(xp).probs, y_clean);
    const double lm = attacker_loss(oracle.query(xm).probs, y_clean);
    const float diff = static_cast<float>(lp - lm);
    for (std::size_t i = 0; i < u.data.size(); ++i) g.data[i] += diff * u.data[i];
  }
  const float denom = static_cast<float>(pop) * sigma;
  for (float& v : g.data) v /= denom;
  return g;
}

}  // namespace cslab
