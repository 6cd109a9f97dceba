#include "cslab/oracle.hpp"

#include "cslab/rng.hpp"

namespace cslab {

Oracle::Oracle(const Model& model, DefenseConfig defense, long budget, OracleMode mode,
               std::uint64_t nonce_base)
    : model_(&model),
      defense_(std::move(defense)),
      budget_(budget),
      mode_(mode),
      nonce_base_(nonce_base) {
  defense_.validate();
  if (budget_ < 0) throw InvalidInputError("oracle budget must be >= 0");
}

void Oracle::require_near(const Tensor& reference, float max_dist) {
  reference_ = reference;
  max_dist_ = max_dist;
}

OracleResponse Oracle::query(const Tensor& x) {
  if (used_ >= budget_) throw BudgetExhausted();
  for (float v : x.data)
    if (!(v >= 0.0f && v <= 1.0f))
      throw InvalidInputError("attacker query pixel " + std::to_string(v) +
                              " outside [0,1]");
  if (reference_) {
    const float d = (x - *reference_).linf_norm();
    if (d > max_dist_ + 1e-6f)
      throw InvalidInputError("attacker query violates l-inf constraint: " +
                              std::to_string(d) + " > " + std::to_string(max_dist_));
  }
  const std::uint64_t nonce = mix64(nonce_base_, static_cast<std::uint64_t>(used_));
  ++used_;
  DefendedOutput out = defended_forward(*model_, x, defense_, nonce);
  OracleResponse r;
  r.label = out.label;
  if (mode_ == OracleMode::Score) r.probs = std::move(out.probs);
  return r;
}

OracleResponse Oracle::evaluate_uncounted(const Tensor& x) {
  // reserved nonce, disjoint from the per-query stream
  const std::uint64_t nonce = mix64(nonce_base_, 0xfffffffffffffffeull);
  DefendedOutput out = defended_forward(*model_, x, defense_, nonce);
  OracleResponse r;
  r.label = out.label;
  r.probs = std::move(out.probs);
  return r;
}

AveragedOracle::AveragedOracle(QueryOracle& inner, int m) : inner_(&inner), m_(m) {
  if (m < 1) throw InvalidInputError("averaged oracle needs m >= 1");
  if (inner.mode() != OracleMode::Score)
    throw InvalidInputError("averaged oracle requires a score-mode oracle");
}

OracleResponse AveragedOracle::query(const Tensor& x) {
  OracleResponse first = inner_->query(x);
  if (m_ == 1) return first;
  Tensor mean = first.probs;
  for (int i = 1; i < m_; ++i) {
    OracleResponse r = inner_->query(x);
    for (std::size_t j = 0; j < mean.data.size(); ++j) mean.data[j] += r.probs.data[j];
  }
  const float inv = 1.0f / static_cast<float>(m_);
  for (float& v : mean.data) v *= inv;
  OracleResponse out;
  out.label = mean.argmax();
  out.probs = std::move(mean);
  return out;
}

}  // namespace cslab
