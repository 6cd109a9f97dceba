#include "cslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cslab/rng.hpp"

namespace cslab {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double median(std::vector<long> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2) return static_cast<double>(v[mid]);
  return 0.5 * (static_cast<double>(v[mid - 1]) + static_cast<double>(v[mid]));
}

}  // namespace

void ExperimentSpec::validate() const {
  if (!model) throw InvalidInputError("experiment: no model");
  if (n < 1) throw InvalidInputError("experiment: n must be >= 1");
  if (dataset.size() < n)
    throw InvalidInputError("experiment: dataset smaller than n");
  if (defenses.empty()) throw InvalidInputError("experiment: no defenses configured");
  if (attacks.empty()) throw InvalidInputError("experiment: no attacks configured");
  if (m_values.empty()) throw InvalidInputError("experiment: empty M list");
  if (step_factors.empty()) throw InvalidInputError("experiment: empty step factor list");
  if (trials < 1) throw InvalidInputError("experiment: trials must be >= 1");
}

double clean_accuracy(const Model& model, const DefenseConfig& defense,
                      const Dataset& dataset, int trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidInputError("clean_accuracy: trials must be >= 1");
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    int correct = 0;
    for (int i = 0; i < dataset.size(); ++i) {
      const std::uint64_t nonce =
          mix64(seed, 0xacc0ull + static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i));
      const DefendedOutput out = defended_forward(model, dataset.sample(i), defense, nonce);
      if (out.label == dataset.labels[i]) ++correct;
    }
    acc += static_cast<double>(correct) / dataset.size();
  }
  return acc / trials;
}

double afr(const std::vector<AttackResult>& results,
           const std::vector<bool>& initially_correct) {
  if (results.size() != initially_correct.size())
    throw InvalidInputError("afr: result/mask size mismatch");
  int denom = 0, failed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!initially_correct[i]) continue;
    ++denom;
    if (!results[i].success) ++failed;
  }
  if (denom == 0)
    throw InvalidInputError("afr undefined: no initially-correct samples");
  return static_cast<double>(failed) / denom;
}

CellReport run_cell(const ExperimentSpec& spec, const DefenseConfig& defense,
                    const AttackConfig& attack, int m, float step_factor) {
  spec.validate();
  defense.validate();
  attack.validate();
  if (m < 1) throw InvalidInputError("run_cell: m must be >= 1");
  if (m > 1 && !attack_is_score_based(attack.kind))
    throw InvalidInputError("run_cell: query averaging needs a score-based attack");

  CellReport cell;
  cell.defense = defense.name();
  cell.attack = attack_kind_name(attack.kind);
  cell.m = m;
  cell.step_factor = step_factor;

  const Dataset eval = subsample(spec.dataset, spec.n, spec.seed);
  const std::uint64_t defense_id = fnv1a(cell.defense);
  const std::uint64_t cell_id =
      mix64(defense_id, fnv1a(cell.attack),
            (static_cast<std::uint64_t>(m) << 32) ^
                static_cast<std::uint64_t>(std::lround(step_factor * 1000)));

  std::vector<AttackResult> results(eval.size());
  // plain bytes, not vector<bool>: written concurrently per index
  std::vector<unsigned char> mask(eval.size(), 0);
  cell.samples.resize(eval.size());

  parallel_for(eval.size(), spec.threads, [&](int i) {
    const Tensor x = eval.sample(i);
    const int y = eval.labels[i];

    // pre-attack correctness under the deployed (defended) view;
    // reserved nonce independent of the attack
    const std::uint64_t mask_nonce =
        mix64(spec.seed, defense_id, 0x6d61736bull + static_cast<std::uint64_t>(i));
    const bool correct =
        defended_forward(*spec.model, x, defense, mask_nonce).label == y;
    mask[i] = correct ? 1 : 0;
    cell.samples[i].index = i;
    cell.samples[i].initially_correct = correct;
    if (!correct) return;

    const std::uint64_t sample_id =
        mix64(spec.seed, cell_id, static_cast<std::uint64_t>(i));
    Oracle oracle(*spec.model, defense, spec.budget * m,
                  attack_is_score_based(attack.kind) ? OracleMode::Score
                                                     : OracleMode::Decision,
                  sample_id);
    if (attack_is_score_based(attack.kind)) oracle.require_near(x, attack.epsilon);

    AttackConfig cfg = attack;
    cfg.step_factor = step_factor;
    cfg.seed = mix64(sample_id, 0x61746bull);

    AttackResult r;
    if (m > 1) {
      AveragedOracle avg(oracle, m);
      r = run_attack(avg, cfg, x, y);
    } else {
      r = run_attack(oracle, cfg, x, y);
    }
    cell.samples[i].success = r.success;
    cell.samples[i].queries = r.queries_used;
    cell.samples[i].linf = r.delta.linf_norm();
    results[i] = std::move(r);
  });

  cell.afr = afr(results, std::vector<bool>(mask.begin(), mask.end()));
  std::vector<long> q_success;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (mask[i]) ++cell.n_initial_correct;
    if (mask[i] && results[i].success) {
      ++cell.n_success;
      q_success.push_back(results[i].queries_used);
    }
  }
  if (!q_success.empty()) {
    double s = 0.0;
    for (long q : q_success) s += static_cast<double>(q);
    cell.mean_queries = s / q_success.size();
    cell.median_queries = median(q_success);
  }
  return cell;
}

namespace {

ExperimentReport run_cells(const ExperimentSpec& spec,
                           const std::vector<int>& ms,
                           const std::vector<float>& factors,
                           bool score_only) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.seed = spec.seed;
  report.budget = spec.budget;
  report.n = spec.n;

  const Dataset eval = subsample(spec.dataset, spec.n, spec.seed);
  for (const auto& defense : spec.defenses) {
    report.clean_acc[defense.name()] =
        clean_accuracy(*spec.model, defense, eval, spec.trials, spec.seed);
    // audit: how often the defended mask agrees with plain model correctness
    int agree = 0;
    for (int i = 0; i < eval.size(); ++i) {
      const bool plain = spec.model->forward(eval.sample(i)).argmax() == eval.labels[i];
      const std::uint64_t mask_nonce =
          mix64(spec.seed, fnv1a(defense.name()), 0x6d61736bull + static_cast<std::uint64_t>(i));
      const bool defended =
          defended_forward(*spec.model, eval.sample(i), defense, mask_nonce).label ==
          eval.labels[i];
      if (plain == defended) ++agree;
    }
    report.undefended_acc_mask_agreement[defense.name()] =
        static_cast<double>(agree) / eval.size();
  }

  for (const auto& defense : spec.defenses) {
    for (const auto& attack : spec.attacks) {
      if (score_only && !attack_is_score_based(attack.kind)) continue;
      for (int m : ms) {
        if (m > 1 && !attack_is_score_based(attack.kind)) continue;
        for (float f : factors) {
          try {
            report.cells.push_back(run_cell(spec, defense, attack, m, f));
          } catch (const std::exception& e) {
            CellReport failed;
            failed.defense = defense.name();
            failed.attack = attack_kind_name(attack.kind);
            failed.m = m;
            failed.step_factor = f;
            failed.error = e.what();
            report.cells.push_back(std::move(failed));
          }
        }
      }
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

ExperimentReport run_grid(const ExperimentSpec& spec) {
  return run_cells(spec, {1}, {1.0f}, false);
}

ExperimentReport run_adaptive_averaging(const ExperimentSpec& spec) {
  return run_cells(spec, spec.m_values, {1.0f}, true);
}

ExperimentReport run_adaptive_stepsize(const ExperimentSpec& spec) {
  return run_cells(spec, {1}, spec.step_factors, true);
}

namespace {

DefenseConfig counter_sample_base(const ExperimentSpec& spec) {
  for (const auto& d : spec.defenses)
    if (d.kind == DefenseKind::CounterSample) return d;
  DefenseConfig d;
  d.kind = DefenseKind::CounterSample;
  return d;
}

}  // namespace

SweepCurve sweep_alpha(const ExperimentSpec& spec, const std::vector<double>& alphas,
                       int fixed_k) {
  if (alphas.empty()) throw InvalidInputError("sweep_alpha: empty alpha list");
  SweepCurve curve;
  curve.param = "alpha";
  const Dataset eval = subsample(spec.dataset, spec.n, spec.seed);
  for (double a : alphas) {
    DefenseConfig d = counter_sample_base(spec);
    d.alpha = static_cast<float>(a);
    d.k = fixed_k;
    curve.values.push_back(a);
    curve.series["clean_acc"].push_back(
        clean_accuracy(*spec.model, d, eval, spec.trials, spec.seed));
    for (const auto& attack : spec.attacks) {
      if (!attack_is_score_based(attack.kind)) continue;
      const CellReport cell = run_cell(spec, d, attack, 1, 1.0f);
      curve.series["afr:" + cell.attack].push_back(cell.afr);
    }
  }
  return curve;
}

SweepCurve sweep_k(const ExperimentSpec& spec, const std::vector<int>& ks,
                   double fixed_alpha) {
  if (ks.empty()) throw InvalidInputError("sweep_k: empty k list");
  SweepCurve curve;
  curve.param = "k";
  const Dataset eval = subsample(spec.dataset, spec.n, spec.seed);
  for (int k : ks) {
    DefenseConfig d = counter_sample_base(spec);
    d.alpha = static_cast<float>(fixed_alpha);
    d.k = k;
    curve.values.push_back(k);
    curve.series["clean_acc"].push_back(
        clean_accuracy(*spec.model, d, eval, spec.trials, spec.seed));
    for (const auto& attack : spec.attacks) {
      if (!attack_is_score_based(attack.kind)) continue;
      const CellReport cell = run_cell(spec, d, attack, 1, 1.0f);
      curve.series["afr:" + cell.attack].push_back(cell.afr);
    }
  }
  return curve;
}

// ---- persistence ----

namespace {

json cell_to_json(const CellReport& c) {
  json samples = json::array();
  for (const auto& s : c.samples) {
    samples.push_back({{"index", s.index},
                       {"initially_correct", s.initially_correct},
                       {"success", s.success},
                       {"queries", s.queries},
                       {"linf", s.linf}});
  }
  return json{{"defense", c.defense},
              {"attack", c.attack},
              {"m", c.m},
              {"step_factor", c.step_factor},
              {"afr", c.afr},
              {"mean_queries", c.mean_queries},
              {"median_queries", c.median_queries},
              {"n_initial_correct", c.n_initial_correct},
              {"n_success", c.n_success},
              {"error", c.error},
              {"samples", samples}};
}

CellReport cell_from_json(const json& j) {
  CellReport c;
  c.defense = j.at("defense");
  c.attack = j.at("attack");
  c.m = j.at("m");
  c.step_factor = j.at("step_factor");
  c.afr = j.at("afr");
  c.mean_queries = j.at("mean_queries");
  c.median_queries = j.at("median_queries");
  c.n_initial_correct = j.at("n_initial_correct");
  c.n_success = j.at("n_success");
  c.error = j.at("error");
  for (const auto& s : j.at("samples")) {
    SampleOutcome o;
    o.index = s.at("index");
    o.initially_correct = s.at("initially_correct");
    o.success = s.at("success");
    o.queries = s.at("queries");
    o.linf = s.at("linf");
    c.samples.push_back(o);
  }
  return c;
}

std::string svg_chart(const SweepCurve& curve) {
  const int width = 640, height = 420, margin = 50;
  double xmin = curve.values.front(), xmax = curve.values.back();
  if (xmax <= xmin) xmax = xmin + 1.0;
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height << "\">\n";
  s << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  // axes (y is always a rate in [0,1])
  s << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
    << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  s << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
    << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  s << "  <text x=\"" << width / 2 << "\" y=\"" << height - 12
    << "\" text-anchor=\"middle\" font-size=\"13\">" << curve.param << "</text>\n";
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  int ci = 0;
  for (const auto& [name, ys] : curve.series) {
    const char* color = colors[ci % 8];
    s << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size() && i < curve.values.size(); ++i) {
      const double fx = (curve.values[i] - xmin) / (xmax - xmin);
      const double fy = std::clamp(ys[i], 0.0, 1.0);
      const double px = margin + fx * (width - 2 * margin);
      const double py = height - margin - fy * (height - 2 * margin);
      s << px << "," << py << " ";
    }
    s << "\"/>\n";
    s << "  <text x=\"" << width - margin + 4 << "\" y=\"" << margin + 16 * ci
      << "\" font-size=\"11\" fill=\"" << color << "\" text-anchor=\"end\">" << name
      << "</text>\n";
    ++ci;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  {
    std::ofstream csv(dir + "/grid.csv");
    if (!csv) throw IoError("cannot open " + dir + "/grid.csv for writing");
    csv << "defense,attack,M,step_factor,afr,mean_queries,n\n";
    for (const auto& c : report.cells) {
      if (!c.error.empty()) continue;
      csv << c.defense << "," << c.attack << "," << c.m << "," << c.step_factor << ","
          << c.afr << "," << c.mean_queries << "," << c.n_initial_correct << "\n";
    }
    if (!csv) throw IoError("write failed for " + dir + "/grid.csv");
  }

  json j;
  j["seed"] = report.seed;
  j["budget"] = report.budget;
  j["n"] = report.n;
  // wall_seconds is deliberately not serialized: reports for the same
  // seed must be byte-identical across runs
  j["clean_acc"] = report.clean_acc;
  j["mask_agreement_with_undefended"] = report.undefended_acc_mask_agreement;
  j["cells"] = json::array();
  for (const auto& c : report.cells) j["cells"].push_back(cell_to_json(c));
  j["sweeps"] = json::array();
  for (const auto& sw : report.sweeps)
    j["sweeps"].push_back({{"param", sw.param}, {"values", sw.values}, {"series", sw.series}});
  {
    std::ofstream out(dir + "/report.json");
    if (!out) throw IoError("cannot open " + dir + "/report.json for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + dir + "/report.json");
  }

  for (const auto& sw : report.sweeps) {
    const std::string path = dir + "/sweep_" + sw.param + ".svg";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << svg_chart(sw);
    if (!out) throw IoError("write failed for " + path);
  }
}

ExperimentReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": bad report JSON: " + e.what());
  }
  ExperimentReport r;
  r.seed = j.at("seed");
  r.budget = j.at("budget");
  r.n = j.at("n");
  r.clean_acc = j.at("clean_acc").get<std::map<std::string, double>>();
  r.undefended_acc_mask_agreement =
      j.at("mask_agreement_with_undefended").get<std::map<std::string, double>>();
  for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
  for (const auto& sw : j.at("sweeps")) {
    SweepCurve curve;
    curve.param = sw.at("param");
    curve.values = sw.at("values").get<std::vector<double>>();
    curve.series = sw.at("series").get<std::map<std::string, std::vector<double>>>();
    r.sweeps.push_back(std::move(curve));
  }
  return r;
}

}  // namespace cslab
