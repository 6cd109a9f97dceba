#pragma once

#include <string>
#include <vector>

#include "cslab/attacks.hpp"
#include "cslab/data.hpp"
#include "cslab/defense.hpp"

namespace cslab {

/// Parsed run configuration (strict JSON: unknown keys are rejected).
struct RunConfig {
  // model
  std::string arch = "conv-small";
  std::string weights_path;
  // data
  std::string data_format = "synth";  // "synth" | "idx"
  std::string train_images, train_labels, test_images, test_labels;
  int classes = 10;
  int per_class = 500;
  int dim = 144;
  double separation = 7.0;
  std::uint64_t data_seed = 7;
  double train_fraction = 0.8;
  // train
  int epochs = 5;
  float learning_rate = 0.05f;
  int batch_size = 32;
  std::uint64_t train_seed = 1;
  // experiment
  std::vector<DefenseConfig> defenses;
  std::vector<AttackConfig> attacks;
  int n = 100;
  long budget = 2000;
  std::vector<int> m_values = {1, 5, 10};
  std::vector<float> step_factors = {1.0f, 2.0f, 10.0f};
  std::uint64_t seed = 1;
  std::string profile = "ci";  // "ci" | "paper"
  int trials = 5;
  int threads = 1;
  std::vector<double> sweep_alphas = {0.0, 0.01, 0.1, 1.0};
  std::vector<int> sweep_ks = {1, 10};
  int fixed_k = 10;
  double fixed_alpha = 0.1;
  // output
  std::string out_dir = "out";
};

/// Loads and validates a config file. Applies the CSLB_SEED environment
/// override if set. Throws ConfigError on unknown keys, bad values, or
/// missing data files.
RunConfig load_config(const std::string& path);

DefenseConfig defense_from_json_str(const std::string& text);

/// Builds (train, test) datasets as configured.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg);

}  // namespace cslab
