#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CSLAB_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[512];
  while (fgets(buf, sizeof buf, p)) r.output += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::string base_config(const std::string& weights_path) {
  return R"({
  "model": {"arch": "conv-small", "weights_path": ")" + weights_path + R"("},
  "data": {"format": "synth", "classes": 3, "per_class": 40, "dim": 36,
           "separation": 7.0, "seed": 7, "train_fraction": 0.8},
  "train": {"epochs": 6, "learning_rate": 0.08, "batch_size": 16, "seed": 5},
  "defenses": [{"kind": "none"}, {"kind": "snd", "sigma": 0.01}],
  "attacks": [{"kind": "simba", "epsilon": 0.2}],
  "experiment": {"n": 8, "budget": 30, "seed": 11, "trials": 2},
  "output": {"dir": "cli_out"}
})";
}

std::string slurp_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("cli: missing required flag exits 2") {
  const CliResult r = run_cli("train");
  CHECK(r.code == 2);
  CHECK(r.output.find("--config") != std::string::npos);
}

TEST_CASE("cli: config without weights_path exits 2 and names the key") {
  write_file("cli_cfg_nokey.json", R"({"data": {"format": "synth"}})");
  const CliResult r = run_cli("train --config cli_cfg_nokey.json");
  CHECK(r.code == 2);
  CHECK(r.output.find("model.weights_path") != std::string::npos);
  std::filesystem::remove("cli_cfg_nokey.json");
}

TEST_CASE("cli: unknown attack kind exits 2 and lists the valid names") {
  write_file("cli_cfg_badattack.json", R"({
    "model": {"weights_path": "w.cslb"},
    "attacks": [{"kind": "pgd"}]
  })");
  const CliResult r = run_cli("train --config cli_cfg_badattack.json");
  CHECK(r.code == 2);
  CHECK(r.output.find("signhunter") != std::string::npos);
  std::filesystem::remove("cli_cfg_badattack.json");
}

TEST_CASE("cli: unknown config key exits 2 and names it") {
  write_file("cli_cfg_unknown.json",
             R"({"model": {"weights_path": "w.cslb"}, "experiments": {}})");
  const CliResult r = run_cli("train --config cli_cfg_unknown.json");
  CHECK(r.code == 2);
  CHECK(r.output.find("experiments") != std::string::npos);
  std::filesystem::remove("cli_cfg_unknown.json");
}

TEST_CASE("cli: training is deterministic and the weights power later stages") {
  write_file("cli_cfg_a.json", base_config("cli_w_a.cslb"));
  write_file("cli_cfg_b.json", base_config("cli_w_b.cslb"));
  const CliResult a = run_cli("train --config cli_cfg_a.json");
  REQUIRE(a.code == 0);
  CHECK(a.output.find("test accuracy") != std::string::npos);
  const CliResult b = run_cli("train --config cli_cfg_b.json");
  REQUIRE(b.code == 0);
  CHECK(slurp_bytes("cli_w_a.cslb") == slurp_bytes("cli_w_b.cslb"));

  SUBCASE("zero budget forces AFR 1 through the real pipeline") {
    const CliResult r =
        run_cli("attack --config cli_cfg_a.json --defense snd --attack simba --budget 0");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("AFR 1.000") != std::string::npos);
  }

  SUBCASE("grid emits the report files and the report renders") {
    const CliResult g = run_cli("grid --config cli_cfg_a.json --out cli_grid_out");
    REQUIRE(g.code == 0);
    CHECK(std::filesystem::exists("cli_grid_out/report.json"));
    CHECK(std::filesystem::exists("cli_grid_out/grid.csv"));
    const CliResult rep = run_cli("report cli_grid_out");
    CHECK(rep.code == 0);
    CHECK(rep.output.find("simba") != std::string::npos);
    std::filesystem::remove_all("cli_grid_out");
  }

  std::filesystem::remove("cli_cfg_a.json");
  std::filesystem::remove("cli_cfg_b.json");
  std::filesystem::remove("cli_w_a.cslb");
  std::filesystem::remove("cli_w_b.cslb");
}

TEST_CASE("cli: attack on a missing weights file exits nonzero") {
  write_file("cli_cfg_noweights.json", base_config("cli_missing.cslb"));
  const CliResult r =
      run_cli("attack --config cli_cfg_noweights.json --defense none --attack simba");
  CHECK(r.code != 0);
  std::filesystem::remove("cli_cfg_noweights.json");
}

TEST_CASE("cli: report on a corrupt report exits 2") {
  std::filesystem::create_directories("cli_bad_report");
  write_file("cli_bad_report/report.json", "{ nope");
  const CliResult r = run_cli("report cli_bad_report");
  CHECK(r.code == 2);
  std::filesystem::remove_all("cli_bad_report");
}
