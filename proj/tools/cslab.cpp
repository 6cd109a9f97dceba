#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cslab/config.hpp"
#include "cslab/harness.hpp"
#include "cslab/train.hpp"
#include "cslab/weights_io.hpp"

namespace {

using namespace cslab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitRuntime = 4;

struct CommonFlags {
  std::string config_path;
  int n = -1;
  long budget = -1;
  int threads = -1;
  std::string out_dir;
};

RunConfig load_with_overrides(const CommonFlags& f) {
  RunConfig cfg = load_config(f.config_path);
  if (f.n > 0) cfg.n = f.n;
  if (f.budget >= 0) cfg.budget = f.budget;
  if (f.threads > 0) cfg.threads = f.threads;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  return cfg;
}

ExperimentSpec make_spec(const RunConfig& cfg, const Model& model, Dataset test_set) {
  ExperimentSpec spec;
  spec.model = &model;
  spec.dataset = std::move(test_set);
  spec.defenses = cfg.defenses;
  spec.attacks = cfg.attacks;
  spec.n = std::min(cfg.n, spec.dataset.size());
  spec.budget = cfg.budget;
  spec.m_values = cfg.m_values;
  spec.step_factors = cfg.step_factors;
  spec.seed = cfg.seed;
  spec.trials = cfg.trials;
  spec.threads = cfg.threads;
  return spec;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig cfg = load_with_overrides(flags);
  auto [train_set, test_set] = load_datasets(cfg);
  const auto shape = train_set.sample_shape();
  Model model = Model::conv_small(shape[0], shape[1], shape[2], cfg.classes);
  model.init_random(cfg.train_seed);
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.learning_rate = cfg.learning_rate;
  opts.batch_size = cfg.batch_size;
  opts.seed = cfg.train_seed;
  opts.log = [](int epoch, double loss) {
    std::printf("epoch %d  train loss %.4f\n", epoch, loss);
  };
  train(model, train_set, opts);
  save_weights(model, cfg.weights_path);
  const double acc = accuracy(model, test_set);
  std::printf("test accuracy %.4f\n", acc);
  std::printf("weights written to %s\n", cfg.weights_path.c_str());
  return kExitOk;
}

int cmd_attack(const CommonFlags& flags, const std::string& defense_name,
               const std::string& attack_name) {
  RunConfig cfg = load_with_overrides(flags);
  const DefenseKind dkind = defense_kind_from_name(defense_name);  // throws on bad name
  const AttackKind akind = attack_kind_from_name(attack_name);
  const DefenseConfig* defense = nullptr;
  for (const auto& d : cfg.defenses)
    if (d.kind == dkind) { defense = &d; break; }
  DefenseConfig fallback;
  if (!defense) {
    fallback.kind = dkind;
    defense = &fallback;
  }
  const AttackConfig* attack = nullptr;
  for (const auto& a : cfg.attacks)
    if (a.kind == akind) { attack = &a; break; }
  AttackConfig afallback;
  if (!attack) {
    afallback.kind = akind;
    attack = &afallback;
  }

  Model model = load_weights(cfg.weights_path);
  auto [train_set, test_set] = load_datasets(cfg);
  (void)train_set;
  ExperimentSpec spec = make_spec(cfg, model, std::move(test_set));
  CellReport cell = run_cell(spec, *defense, *attack, 1, attack->step_factor);
  std::printf("%s vs %s: AFR %.3f  mean queries %.1f  (n=%d)\n", cell.defense.c_str(),
              cell.attack.c_str(), cell.afr, cell.mean_queries, cell.n_initial_correct);
  ExperimentReport report;
  report.seed = spec.seed;
  report.budget = spec.budget;
  report.n = spec.n;
  report.cells.push_back(std::move(cell));
  emit_report(report, cfg.out_dir);
  return kExitOk;
}

int run_and_emit(const CommonFlags& flags,
                 ExperimentReport (*runner)(const ExperimentSpec&)) {
  RunConfig cfg = load_with_overrides(flags);
  Model model = load_weights(cfg.weights_path);
  auto [train_set, test_set] = load_datasets(cfg);
  (void)train_set;
  ExperimentSpec spec = make_spec(cfg, model, std::move(test_set));
  ExperimentReport report = runner(spec);
  emit_report(report, cfg.out_dir);
  int ok = 0, failed = 0;
  for (const auto& c : report.cells) {
    if (c.error.empty())
      ++ok;
    else {
      ++failed;
      std::fprintf(stderr, "cell %s/%s failed: %s\n", c.defense.c_str(),
                   c.attack.c_str(), c.error.c_str());
    }
  }
  std::printf("%d cells ok, %d failed; report in %s\n", ok, failed, cfg.out_dir.c_str());
  return ok > 0 ? kExitOk : kExitRuntime;
}

int cmd_sweep(const CommonFlags& flags) {
  RunConfig cfg = load_with_overrides(flags);
  Model model = load_weights(cfg.weights_path);
  auto [train_set, test_set] = load_datasets(cfg);
  (void)train_set;
  ExperimentSpec spec = make_spec(cfg, model, std::move(test_set));
  ExperimentReport report;
  report.seed = spec.seed;
  report.budget = spec.budget;
  report.n = spec.n;
  report.sweeps.push_back(sweep_alpha(spec, cfg.sweep_alphas, cfg.fixed_k));
  report.sweeps.push_back(sweep_k(spec, cfg.sweep_ks, cfg.fixed_alpha));
  emit_report(report, cfg.out_dir);
  std::printf("sweep curves written to %s\n", cfg.out_dir.c_str());
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  ExperimentReport report = load_report(dir + "/report.json");
  std::printf("%-34s %-12s %4s %6s %8s %8s\n", "defense", "attack", "M", "factor",
              "AFR", "queries");
  for (const auto& c : report.cells) {
    if (!c.error.empty()) {
      std::printf("%-34s %-12s  FAILED: %s\n", c.defense.c_str(), c.attack.c_str(),
                  c.error.c_str());
      continue;
    }
    std::printf("%-34s %-12s %4d %6.1f %8.3f %8.1f\n", c.defense.c_str(),
                c.attack.c_str(), c.m, c.step_factor, c.afr, c.mean_queries);
  }
  for (const auto& [name, acc] : report.clean_acc)
    std::printf("clean acc  %-34s %.4f\n", name.c_str(), acc);
  for (const auto& sw : report.sweeps) {
    ExperimentReport tmp;
    tmp.sweeps.push_back(sw);
    tmp.seed = report.seed;
    tmp.budget = report.budget;
    tmp.n = report.n;
  }
  if (!report.sweeps.empty()) {
    emit_report(report, dir);  // refresh SVGs alongside the report
    std::printf("%zu sweep chart(s) written to %s\n", report.sweeps.size(), dir.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counter-sample defense laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string defense_name = "none", attack_name = "nes", report_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_path, "JSON run configuration")->required();
    sub->add_option("--n", flags.n, "sample count override");
    sub->add_option("--budget", flags.budget, "query budget override");
    sub->add_option("--threads", flags.threads, "worker thread override");
    sub->add_option("--out", flags.out_dir, "output directory override");
  };

  auto* s_train = app.add_subcommand("train", "train the desk-scale model");
  add_common(s_train);
  auto* s_attack = app.add_subcommand("attack", "run one defense x attack cell");
  add_common(s_attack);
  s_attack->add_option("--defense", defense_name, "defense kind name");
  s_attack->add_option("--attack", attack_name, "attack kind name");
  auto* s_grid = app.add_subcommand("grid", "full defense x attack grid");
  add_common(s_grid);
  auto* s_sweep = app.add_subcommand("sweep", "alpha and k hyperparameter sweeps");
  add_common(s_sweep);
  auto* s_adaptive = app.add_subcommand("adaptive", "adaptive adversary studies");
  add_common(s_adaptive);
  s_adaptive->add_flag("--averaging", "run only Strategy 1 (query averaging)");
  s_adaptive->add_flag("--stepsize", "run only Strategy 2 (step-size scaling)");
  auto* s_report = app.add_subcommand("report", "render a stored report");
  s_report->add_option("dir", report_dir, "directory containing report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (s_train->parsed()) return cmd_train(flags);
    if (s_attack->parsed()) return cmd_attack(flags, defense_name, attack_name);
    if (s_grid->parsed()) return run_and_emit(flags, &run_grid);
    if (s_sweep->parsed()) return cmd_sweep(flags);
    if (s_adaptive->parsed()) {
      const bool only_avg = s_adaptive->count("--averaging") > 0;
      const bool only_step = s_adaptive->count("--stepsize") > 0;
      if (only_avg && !only_step) return run_and_emit(flags, &run_adaptive_averaging);
      if (only_step && !only_avg) return run_and_emit(flags, &run_adaptive_stepsize);
      const int a = run_and_emit(flags, &run_adaptive_averaging);
      CommonFlags f2 = flags;
      if (f2.out_dir.empty()) f2.out_dir = load_config(f2.config_path).out_dir;
      f2.out_dir += "_stepsize";
      const int b = run_and_emit(f2, &run_adaptive_stepsize);
      return (a == kExitOk && b == kExitOk) ? kExitOk : kExitRuntime;
    }
    if (s_report->parsed()) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const InvalidInputError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const TrainingFailure& e) {
    std::fprintf(stderr, "training failure: %s\n", e.what());
    return kExitTraining;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return s_report->parsed() ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}
