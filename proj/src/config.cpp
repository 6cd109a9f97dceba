#include "cslab/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace cslab {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

DefenseConfig defense_from_json(const json& j) {
  reject_unknown(j, "defense entry",
                 {"kind", "k", "alpha", "sigma", "mu", "eta", "bits", "kernel",
                  "freeze_label", "seed"});
  DefenseConfig d;
  if (!j.contains("kind")) throw ConfigError("defense entry missing 'kind'");
  try {
    d.kind = defense_kind_from_name(j.at("kind").get<std::string>());
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  get_if(j, "k", d.k);
  get_if(j, "alpha", d.alpha);
  get_if(j, "sigma", d.sigma);
  get_if(j, "mu", d.mu);
  get_if(j, "eta", d.eta);
  get_if(j, "bits", d.bits);
  get_if(j, "kernel", d.kernel);
  get_if(j, "freeze_label", d.freeze_label);
  get_if(j, "seed", d.seed);
  try {
    d.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  return d;
}

AttackConfig attack_from_json(const json& j) {
  reject_unknown(j, "attack entry",
                 {"kind", "epsilon", "step_factor", "nes_pop", "nes_sigma", "nes_step",
                  "simba_step", "square_p0", "hsj_grad_batch", "hsj_tol",
                  "hsj_init_budget", "seed"});
  AttackConfig a;
  if (!j.contains("kind")) throw ConfigError("attack entry missing 'kind'");
  try {
    a.kind = attack_kind_from_name(j.at("kind").get<std::string>());
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  get_if(j, "epsilon", a.epsilon);
  get_if(j, "step_factor", a.step_factor);
  get_if(j, "nes_pop", a.nes_pop);
  get_if(j, "nes_sigma", a.nes_sigma);
  get_if(j, "nes_step", a.nes_step);
  get_if(j, "simba_step", a.simba_step);
  get_if(j, "square_p0", a.square_p0);
  get_if(j, "hsj_grad_batch", a.hsj_grad_batch);
  get_if(j, "hsj_tol", a.hsj_tol);
  get_if(j, "hsj_init_budget", a.hsj_init_budget);
  get_if(j, "seed", a.seed);
  try {
    a.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
  return a;
}

}  // namespace

DefenseConfig defense_from_json_str(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad defense JSON: ") + e.what());
  }
  return defense_from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  reject_unknown(j, "config root",
                 {"model", "data", "train", "defenses", "attacks", "experiment", "output"});
  RunConfig cfg;

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, "model", {"arch", "weights_path"});
    get_if(m, "arch", cfg.arch);
    get_if(m, "weights_path", cfg.weights_path);
  }
  if (cfg.weights_path.empty())
    throw ConfigError("config missing required key 'model.weights_path'");
  if (cfg.arch != "conv-small")
    throw ConfigError("unknown model.arch '" + cfg.arch + "' (valid: conv-small)");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data",
                   {"format", "train_images", "train_labels", "test_images",
                    "test_labels", "classes", "per_class", "dim", "separation", "seed",
                    "train_fraction"});
    get_if(d, "format", cfg.data_format);
    get_if(d, "train_images", cfg.train_images);
    get_if(d, "train_labels", cfg.train_labels);
    get_if(d, "test_images", cfg.test_images);
    get_if(d, "test_labels", cfg.test_labels);
    get_if(d, "classes", cfg.classes);
    get_if(d, "per_class", cfg.per_class);
    get_if(d, "dim", cfg.dim);
    get_if(d, "separation", cfg.separation);
    get_if(d, "seed", cfg.data_seed);
    get_if(d, "train_fraction", cfg.train_fraction);
  }
  if (cfg.data_format != "synth" && cfg.data_format != "idx")
    throw ConfigError("data.format must be 'synth' or 'idx'");
  if (cfg.data_format == "idx") {
    for (const auto& [key, p] :
         {std::pair<const char*, std::string>{"data.train_images", cfg.train_images},
          {"data.train_labels", cfg.train_labels},
          {"data.test_images", cfg.test_images},
          {"data.test_labels", cfg.test_labels}}) {
      if (p.empty()) throw ConfigError(std::string("config missing key '") + key + "'");
      if (!std::filesystem::exists(p))
        throw ConfigError(std::string(key) + ": file does not exist: " + p);
    }
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, "train", {"epochs", "learning_rate", "batch_size", "seed"});
    get_if(t, "epochs", cfg.epochs);
    get_if(t, "learning_rate", cfg.learning_rate);
    get_if(t, "batch_size", cfg.batch_size);
    get_if(t, "seed", cfg.train_seed);
  }

  if (j.contains("defenses")) {
    for (const auto& d : j.at("defenses")) cfg.defenses.push_back(defense_from_json(d));
  }
  if (j.contains("attacks")) {
    for (const auto& a : j.at("attacks")) cfg.attacks.push_back(attack_from_json(a));
  }

  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    reject_unknown(e, "experiment",
                   {"n", "budget", "m_values", "step_factors", "seed", "profile",
                    "trials", "threads", "sweep_alphas", "sweep_ks", "fixed_k",
                    "fixed_alpha"});
    get_if(e, "profile", cfg.profile);
    if (cfg.profile == "paper") {
      cfg.n = 1000;
      cfg.budget = 10000;
    } else if (cfg.profile != "ci") {
      throw ConfigError("experiment.profile must be 'ci' or 'paper'");
    }
    get_if(e, "n", cfg.n);
    get_if(e, "budget", cfg.budget);
    get_if(e, "m_values", cfg.m_values);
    get_if(e, "step_factors", cfg.step_factors);
    get_if(e, "seed", cfg.seed);
    get_if(e, "trials", cfg.trials);
    get_if(e, "threads", cfg.threads);
    get_if(e, "sweep_alphas", cfg.sweep_alphas);
    get_if(e, "sweep_ks", cfg.sweep_ks);
    get_if(e, "fixed_k", cfg.fixed_k);
    get_if(e, "fixed_alpha", cfg.fixed_alpha);
  }

  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, "output", {"dir"});
    get_if(o, "dir", cfg.out_dir);
  }

  if (const char* env = std::getenv("CSLB_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("CSLB_SEED is not an integer: ") + env);
    }
  }
  return cfg;
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg) {
  if (cfg.data_format == "idx") {
    return {load_idx_dataset(cfg.train_images, cfg.train_labels, cfg.classes, "idx-train"),
            load_idx_dataset(cfg.test_images, cfg.test_labels, cfg.classes, "idx-test")};
  }
  Dataset all = synth_blobs(cfg.classes, cfg.per_class, cfg.dim, cfg.separation,
                            cfg.data_seed);
  return split_dataset(all, cfg.train_fraction, cfg.data_seed);
}

}  // namespace cslab
