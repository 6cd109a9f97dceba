#pragma once

#include <map>
#include <string>
#include <vector>

#include "cslab/attacks.hpp"
#include "cslab/data.hpp"
#include "cslab/defense.hpp"

namespace cslab {

struct ExperimentSpec {
  const Model* model = nullptr;
  Dataset dataset;  // evaluation pool; the first `n` after seeded subsampling are used
  std::vector<DefenseConfig> defenses;
  std::vector<AttackConfig> attacks;
  int n = 100;
  long budget = 2000;
  std::vector<int> m_values = {1};
  std::vector<float> step_factors = {1.0f};
  std::uint64_t seed = 1;
  int trials = 5;   // noise draws for clean accuracy
  int threads = 1;

  void validate() const;
};

struct SampleOutcome {
  int index = 0;
  bool initially_correct = false;
  bool success = false;
  long queries = 0;
  float linf = 0.0f;
};

struct CellReport {
  std::string defense;
  std::string attack;
  int m = 1;
  float step_factor = 1.0f;
  double afr = 0.0;
  double mean_queries = 0.0;    // over successful attacks
  double median_queries = 0.0;  // over successful attacks
  int n_initial_correct = 0;
  int n_success = 0;
  std::string error;  // nonempty if the cell failed
  std::vector<SampleOutcome> samples;
};

struct SweepCurve {
  std::string param;            // "alpha" or "k"
  std::vector<double> values;   // x axis
  // series name ("clean_acc" or "afr:<attack>") -> y per value
  std::map<std::string, std::vector<double>> series;
};

struct ExperimentReport {
  std::vector<CellReport> cells;
  std::map<std::string, double> clean_acc;      // defense name -> accuracy
  std::map<std::string, double> undefended_acc_mask_agreement;  // audit: defended-vs-undefended mask overlap
  std::vector<SweepCurve> sweeps;
  std::uint64_t seed = 0;
  long budget = 0;
  int n = 0;
  double wall_seconds = 0.0;
};

/// Mean over `trials` noise draws of the fraction of samples whose
/// defended label equals the true label.
double clean_accuracy(const Model& model, const DefenseConfig& defense,
                      const Dataset& dataset, int trials, std::uint64_t seed);

/// (# initially-correct samples with success=false) / (# initially-correct).
/// Throws InvalidInputError when no sample is initially correct.
double afr(const std::vector<AttackResult>& results,
           const std::vector<bool>& initially_correct);

/// One defense x attack cell at query budget `budget * m`.
CellReport run_cell(const ExperimentSpec& spec, const DefenseConfig& defense,
                    const AttackConfig& attack, int m, float step_factor);

/// Full defense x attack grid (Strategy-free protocol), plus clean
/// accuracy per defense. Per-cell failures are recorded and skipped.
ExperimentReport run_grid(const ExperimentSpec& spec);

/// Per-alpha clean accuracy and AFR curves at fixed k.
SweepCurve sweep_alpha(const ExperimentSpec& spec, const std::vector<double>& alphas,
                       int fixed_k);

/// Per-k curves at fixed alpha.
SweepCurve sweep_k(const ExperimentSpec& spec, const std::vector<int>& ks,
                   double fixed_alpha);

/// Adaptive Strategy 1: repeated-query averaging at each M in spec.m_values,
/// with budget scaled to budget*M physical queries. Score-based attacks only.
ExperimentReport run_adaptive_averaging(const ExperimentSpec& spec);

/// Adaptive Strategy 2: attacker step sizes scaled by each factor in
/// spec.step_factors; the epsilon ball stays fixed.
ExperimentReport run_adaptive_stepsize(const ExperimentSpec& spec);

/// Writes grid.csv, report.json and one SVG per sweep into dir.
void emit_report(const ExperimentReport& report, const std::string& dir);

ExperimentReport load_report(const std::string& path);

}  // namespace cslab
