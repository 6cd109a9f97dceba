#pragma once

#include <cstdint>
#include <optional>

#include "cslab/defense.hpp"

namespace cslab {

enum class OracleMode { Score, Decision };

struct OracleResponse {
  Tensor probs;  // empty in decision mode
  int label = 0;
};

/// The only channel attacks may use. Every query on attacker-supplied
/// input is counted; implementations throw BudgetExhausted once the
/// budget is spent.
class QueryOracle {
 public:
  virtual ~QueryOracle() = default;
  virtual OracleResponse query(const Tensor& x) = 0;
  virtual long used() const = 0;
  virtual long budget() const = 0;
  virtual OracleMode mode() const = 0;
  /// Post-attack success check by the harness: one defended evaluation
  /// with a reserved nonce, not counted against the budget.
  virtual OracleResponse evaluate_uncounted(const Tensor& x) = 0;

  bool exhausted() const { return used() >= budget(); }
  long remaining() const { return budget() - used(); }
};

class Oracle : public QueryOracle {
 public:
  Oracle(const Model& model, DefenseConfig defense, long budget, OracleMode mode,
         std::uint64_t nonce_base);

  /// Enables the feasibility assertion: every subsequent query must stay
  /// within max_dist (l-inf) of reference. Score-based attacks run with
  /// this armed at epsilon plus their probe radius.
  void require_near(const Tensor& reference, float max_dist);

  OracleResponse query(const Tensor& x) override;
  long used() const override { return used_; }
  long budget() const override { return budget_; }
  OracleMode mode() const override { return mode_; }
  OracleResponse evaluate_uncounted(const Tensor& x) override;

 private:
  const Model* model_;
  DefenseConfig defense_;
  long budget_;
  long used_ = 0;
  OracleMode mode_;
  std::uint64_t nonce_base_;
  std::optional<Tensor> reference_;
  float max_dist_ = 0.0f;
};

/// Adaptive Strategy 1 attacker-side wrapper: each logical query issues
/// m physical queries (all counted by the inner oracle) and returns the
/// mean probability vector.
class AveragedOracle : public QueryOracle {
 public:
  AveragedOracle(QueryOracle& inner, int m);
  OracleResponse query(const Tensor& x) override;
  long used() const override { return inner_->used(); }
  long budget() const override { return inner_->budget(); }
  OracleMode mode() const override { return inner_->mode(); }
  OracleResponse evaluate_uncounted(const Tensor& x) override {
    return inner_->evaluate_uncounted(x);
  }

 private:
  QueryOracle* inner_;
  int m_;
};

}  // namespace cslab
