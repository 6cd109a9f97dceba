#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cslab/oracle.hpp"

namespace cslab {

enum class AttackKind { Nes, ZoSignSgd, SignHunter, Square, Simba, HsjLite };

std::string attack_kind_name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& name);
std::vector<std::string> attack_kind_names();
bool attack_is_score_based(AttackKind k);

struct AttackConfig {
  AttackKind kind = AttackKind::Nes;
  float epsilon = 0.2f;      // l-inf radius
  float step_factor = 1.0f;  // adaptive Strategy 2 multiplier
  // NES / ZO-SignSGD
  int nes_pop = 20;          // queries per gradient estimate (antithetic pairs)
  float nes_sigma = 0.01f;   // smoothing radius
  float nes_step = -1.0f;    // default epsilon/10
  // SimBA
  float simba_step = -1.0f;  // default epsilon/5
  // Square
  float square_p0 = 0.1f;    // initial square fraction, halved every 1/5 of budget
  // HSJ-lite
  int hsj_grad_batch = 40;
  float hsj_tol = 1e-3f;
  int hsj_init_budget = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  float nes_step_or_default() const { return nes_step > 0.0f ? nes_step : epsilon / 10.0f; }
  float simba_step_or_default() const {
    return simba_step > 0.0f ? simba_step : epsilon / 5.0f;
  }
};

struct AttackResult {
  Tensor delta;
  bool success = false;
  bool init_failure = false;  // hsj-lite found no adversarial starting point
  long queries_used = 0;
  std::vector<double> loss_history;  // attacker objective after each counted query
};

AttackResult attack_nes(QueryOracle& oracle, const Tensor& x, int y_clean,
                        const AttackConfig& cfg);
AttackResult attack_zo_signsgd(QueryOracle& oracle, const Tensor& x, int y_clean,
                               const AttackConfig& cfg);
AttackResult attack_signhunter(QueryOracle& oracle, const Tensor& x, int y_clean,
                               const AttackConfig& cfg);
AttackResult attack_square(QueryOracle& oracle, const Tensor& x, int y_clean,
                           const AttackConfig& cfg);
AttackResult attack_simba(QueryOracle& oracle, const Tensor& x, int y_clean,
                          const AttackConfig& cfg);
AttackResult attack_hsj_lite(QueryOracle& oracle, const Tensor& x, int y_clean,
                             const AttackConfig& cfg);

/// Dispatches by cfg.kind and judges success with one fresh defended
/// query at x+delta (the deployed-system view).
AttackResult run_attack(QueryOracle& oracle, const AttackConfig& cfg, const Tensor& x,
                        int y_clean);

// ---- building blocks exposed for direct verification ----

/// One antithetic NES gradient estimate of the attacker loss around x.
/// Probe points are projected into the epsilon ball and [0,1] before
/// querying. Spends up to `pop` queries.
Tensor nes_gradient_estimate(QueryOracle& oracle, const Tensor& x, int y_clean,
                             const Tensor& x0, float epsilon, int pop, float sigma,
                             std::uint64_t seed);

/// Bisection between a non-adversarial and an adversarial point until the
/// endpoints are within tol (l-inf); returns the adversarial endpoint.
Tensor boundary_bisect(const std::function<bool(const Tensor&)>& is_adversarial,
                       Tensor inside, Tensor adversarial, float tol);

/// Cross-entropy of a probability vector at y (the attacker objective).
double attacker_loss(const Tensor& probs, int y);

/// Projects x into the l-inf epsilon ball around x0 intersected with [0,1].
void project_ball_clip(Tensor& x, const Tensor& x0, float epsilon);

}  // namespace cslab
