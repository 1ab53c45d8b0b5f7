#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef RAR_CLI_PATH
#error "RAR_CLI_PATH must point at the built CLI binary"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = fs::temp_directory_path() / ("rar_cli_out_" + std::to_string(counter));
  const fs::path err = fs::temp_directory_path() / ("rar_cli_err_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(RAR_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

fs::path scratch(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("rar_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kSmallGen =
    " --n-users 120 --n-items 200 --latent-dim 6 --exposure-depth 6 --r 14 --l 10 --seed 33";
const std::string kSmallCfg =
    " --d1 8 --k_l 3 --k_r 3 --l 10 --r 14 --batch_size 32 --mlp_hidden 8";

double parse_metric(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(out.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("cli: usage errors exit with code 1") {
  CHECK(run_cli("no-such-command").exit_code == 1);
  CHECK(run_cli("gen-data").exit_code == 1);  // --out is required
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli: gen-data is byte-deterministic and validates its spec") {
  const fs::path a = scratch("gen_a");
  const fs::path b = scratch("gen_b");
  CHECK(run_cli("gen-data --out " + a.string() + kSmallGen).exit_code == 0);
  CHECK(run_cli("gen-data --out " + b.string() + kSmallGen).exit_code == 0);
  for (const char* name :
       {"meta.txt", "interactions.csv", "recall.txt", "lookalike.txt", "exposure.txt"}) {
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(!slurp(a / name).empty());
  }

  const RunResult bad = run_cli("gen-data --out " + a.string() + " --n-items 10 --r 50");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("r <= n_items") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("cli: train writes deterministic checkpoints and echoes its config") {
  const fs::path data = scratch("train_data");
  REQUIRE(run_cli("gen-data --out " + data.string() + kSmallGen).exit_code == 0);

  const fs::path run1 = scratch("train_run1");
  const fs::path run2 = scratch("train_run2");
  const std::string train_args = "train --data " + data.string() + kSmallCfg + " --epochs 0";
  const RunResult r1 = run_cli(train_args + " --out " + run1.string());
  CHECK(r1.exit_code == 0);
  CHECK(r1.out.find("# effective config") != std::string::npos);
  CHECK(r1.out.find("# epochs=0") != std::string::npos);
  const RunResult r2 = run_cli(train_args + " --out " + run2.string());
  CHECK(r2.exit_code == 0);
  CHECK(slurp(run1 / "model.ckpt") == slurp(run2 / "model.ckpt"));

  // epochs=0 keeps the initialization; one epoch moves it
  const fs::path run3 = scratch("train_run3");
  REQUIRE(run_cli("train --data " + data.string() + kSmallCfg + " --epochs 1 --out " +
                  run3.string())
              .exit_code == 0);
  CHECK(slurp(run1 / "model.ckpt") != slurp(run3 / "model.ckpt"));

  // ablation flag round-trips through checkpoint metadata
  const fs::path run4 = scratch("train_run4");
  REQUIRE(run_cli("train --data " + data.string() + kSmallCfg +
                  " --epochs 0 --ablation wght --out " + run4.string())
              .exit_code == 0);
  CHECK(slurp(run4 / "model.ckpt").find("ablation=wght") != std::string::npos);

  // config file + flag override
  const fs::path cfg_file = data / "cfg.txt";
  std::ofstream(cfg_file) << "d1=8\nk_l=3\nk_r=3\nl=10\nr=14\nepochs=0\nmlp_hidden=8\n";
  const fs::path run5 = scratch("train_run5");
  const RunResult r5 = run_cli("train --data " + data.string() + " --config " +
                               cfg_file.string() + " --batch_size 16 --out " + run5.string());
  CHECK(r5.exit_code == 0);
  CHECK(r5.out.find("# batch_size=16") != std::string::npos);
  CHECK(r5.out.find("# d1=8") != std::string::npos);

  // invalid config -> validation exit code
  CHECK(run_cli("train --data " + data.string() + kSmallCfg + " --k_l 99 --out " +
                run1.string())
            .exit_code == 2);

  for (const auto& d : {run1, run2, run3, run4, run5, data}) fs::remove_all(d);
}

TEST_CASE("cli: fresh-init eval sits at chance level") {
  const fs::path data = scratch("eval_data");
  REQUIRE(run_cli("gen-data --out " + data.string() + kSmallGen + " --train-frac 0.4").exit_code ==
          0);
  double sum = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    const fs::path run = scratch("eval_run");
    REQUIRE(run_cli("train --data " + data.string() + kSmallCfg + " --epochs 0 --seed " +
                    std::to_string(1000 + seed) + " --out " + run.string())
                .exit_code == 0);
    const RunResult ev = run_cli("eval --checkpoint " + (run / "model.ckpt").string() +
                                 " --data " + data.string() + " --split test");
    CHECK(ev.exit_code == 0);
    sum += parse_metric(ev.out, "auc");
    fs::remove_all(run);
  }
  CHECK(std::abs(sum / 10.0 - 0.5) < 0.05);
  fs::remove_all(data);
}

TEST_CASE("cli: bench-selection degenerate grid reports without verdicts") {
  const RunResult r = run_cli(
      "bench-selection --pool-sizes 500 --dim 16 --k 5 --batch 4 --trials 3");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("exact") != std::string::npos);
  CHECK(r.out.find("hamming") != std::string::npos);
  CHECK(r.out.find("slope") == std::string::npos);
}

TEST_CASE("cli: gradcheck smoke run passes") {
  const RunResult r = run_cli(
      "gradcheck --d1 6 --k_l 2 --k_r 2 --l 6 --r 8 --mlp_hidden 6 --records 2");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("gradcheck passed") != std::string::npos);
}
