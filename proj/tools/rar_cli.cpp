// Command-line entry points: dataset generation, training, evaluation,
// ablation tables, selection benchmarking, and gradient checking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rar/bench.hpp"
#include "rar/config.hpp"
#include "rar/data.hpp"
#include "rar/metrics.hpp"
#include "rar/model.hpp"
#include "rar/train.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Config file first, then flag overrides in command-line order.
struct ConfigCli {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    static const char* keys[] = {"d1",         "d2",        "m_bits",     "k_l",
                                 "k_r",        "l",         "r",          "alpha",
                                 "mlp_hidden", "lr",        "epochs",     "batch_size",
                                 "seed",       "ablation",  "hash_variant", "backend",
                                 "head",       "optimizer", "exposure_labels", "use_rar",
                                 "share_towers", "init_scale"};
    for (const char* key : keys) {
      cmd->add_option_function<std::string>(
              std::string("--") + key,
              [this, key](const std::string& v) { overrides.emplace_back(key, v); },
              std::string("config key ") + key)
          ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  rar::Config resolve() const {
    rar::Config cfg;
    if (!config_path.empty()) cfg = rar::Config::from_kv_file(config_path);
    for (const auto& [k, v] : overrides) cfg.apply_kv(k, v);
    return cfg;
  }
};

void print_banner(const rar::Config& cfg) {
  std::istringstream is(cfg.to_kv());
  std::string line;
  std::cout << "# effective config\n";
  while (std::getline(is, line)) std::cout << "# " << line << '\n';
}

rar::Dataset load_data(const std::string& dir, bool build_sets, const rar::Config& cfg) {
  rar::Dataset ds = rar::load_dataset(dir);
  if (!ds.has_sets() && build_sets) {
    rar::build_sets_twotower(ds, cfg.d1, 10, 0.1, cfg.r, cfg.l, cfg.seed);
  }
  return ds;
}

std::string metric_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int cmd_gen_data(const rar::SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  const rar::Dataset ds = rar::generate(spec);
  rar::save_dataset(ds, out_dir);
  std::cout << "wrote " << out_dir << ": " << ds.interactions.size() << " interactions, "
            << ds.n_users << " users, " << ds.n_items << " items, " << ds.exposure_log.size()
            << " exposures\n";
  return 0;
}

int cmd_train(const rar::Config& cfg, const std::string& data_dir, const std::string& out_dir,
              bool build_sets) {
  cfg.validate();
  print_banner(cfg);
  const rar::Dataset ds = load_data(data_dir, build_sets, cfg);
  rar::RarModel model = rar::RarModel::create(cfg, ds.n_users, ds.n_items);

  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir + "/metrics.log", std::ios::binary);
  if (!metrics) throw rar::ValidationError("cannot open " + out_dir + "/metrics.log");

  std::ostringstream tee;
  const rar::TrainResult result = rar::train(model, ds, &tee);
  metrics << tee.str();
  std::cout << tee.str();

  rar::save_checkpoint(model, out_dir + "/model.ckpt");
  std::cout << "checkpoint: " << out_dir << "/model.ckpt (" << result.log.size() << " epochs)\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& split_name, bool build_sets) {
  rar::RarModel model = rar::load_checkpoint(ckpt_path);
  print_banner(model.cfg);
  const rar::Dataset ds = load_data(data_dir, build_sets, model.cfg);
  const rar::Split split = rar::parse_split(split_name);
  const rar::EvalBatch batch = rar::predict_split(model, ds, split);
  if (batch.empty()) throw rar::ValidationError("split '" + split_name + "' is empty");
  const auto a = rar::auc(batch);
  const auto g = rar::gauc(batch);
  std::cout << "auc=" << (a ? metric_str(*a) : "undefined")
            << " gauc=" << (g ? metric_str(*g) : "undefined") << '\n';
  return 0;
}

struct VariantSpec {
  std::string name;
  bool use_rar;
  rar::Ablation ablation;
};

const std::vector<VariantSpec>& ablation_variants() {
  static const std::vector<VariantSpec> kVariants = {
      {"Raw", false, rar::Ablation::kFull},
      {"RAR-user", true, rar::Ablation::kUser},
      {"RAR-select", true, rar::Ablation::kSelect},
      {"RAR-aux-wght", true, rar::Ablation::kAuxWght},
      {"RAR-wght", true, rar::Ablation::kWght},
      {"RAR", true, rar::Ablation::kFull},
  };
  return kVariants;
}

int cmd_ablate(const rar::Config& base_cfg, const std::string& data_dir, bool build_sets,
               const std::string& out_path) {
  base_cfg.validate();
  print_banner(base_cfg);
  const rar::Dataset ds = load_data(data_dir, build_sets, base_cfg);

  std::ostringstream table;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-14s %10s %10s\n", "variant", "AUC", "gAUC");
  table << buf;
  for (const VariantSpec& v : ablation_variants()) {
    rar::Config cfg = base_cfg;
    cfg.use_rar = v.use_rar;
    cfg.ablation = v.ablation;
    rar::RarModel model = rar::RarModel::create(cfg, ds.n_users, ds.n_items);
    rar::train(model, ds);
    const rar::EvalBatch batch = rar::predict_split(model, ds, rar::Split::kTest);
    const auto a = rar::auc(batch);
    const auto g = rar::gauc(batch);
    std::snprintf(buf, sizeof(buf), "%-14s %10s %10s\n", v.name.c_str(),
                  a ? metric_str(*a).c_str() : "undefined",
                  g ? metric_str(*g).c_str() : "undefined");
    table << buf;
    std::cout << buf << std::flush;
  }
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw rar::ValidationError("cannot open " + out_path);
    os << table.str();
  }
  return 0;
}

int cmd_bench(const rar::BenchOptions& opts, const std::string& out_path) {
  const rar::BenchReport report = rar::bench_selection(opts);
  std::cout << rar::format_report(report);
  if (!out_path.empty()) {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw rar::ValidationError("cannot open " + out_path);
    os << rar::format_report_tsv(report);
  }
  return 0;
}

int cmd_gradcheck(const rar::Config& cfg, const std::string& data_dir, int n_records,
                  double tolerance) {
  cfg.validate();
  print_banner(cfg);

  rar::Dataset ds;
  if (!data_dir.empty()) {
    ds = rar::load_dataset(data_dir);
    if (!ds.has_sets()) throw rar::ValidationError("gradcheck needs recall/look-alike sets");
  } else {
    rar::SyntheticSpec spec;
    spec.n_users = 60;
    spec.n_items = 120;
    spec.r = cfg.r;
    spec.l = cfg.l;
    spec.exposure_depth = std::min(10, cfg.r);
    spec.seed = cfg.seed;
    ds = rar::generate(spec);
  }

  const rar::RarModel model = rar::RarModel::create(cfg, ds.n_users, ds.n_items);
  rar::Rng rng(cfg.seed ^ 0x9d39247e33776d41ULL);
  double worst = 0.0;
  bool all_pass = true;
  for (int rec = 0; rec < n_records; ++rec) {
    const auto& it = ds.interactions[static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(ds.interactions.size())))];
    const auto report = rar::gradcheck(
        model, it.user, it.item, ds.lookalike_sets[static_cast<size_t>(it.user)],
        ds.recall_sets[static_cast<size_t>(it.user)], &ds.exposure_log, it.click, tolerance,
        rng.next_u64());
    worst = std::max(worst, report.max_rel);
    all_pass = all_pass && report.pass;
    std::printf("record %2d (user %d, item %d): max relative error %.3e %s\n", rec, it.user,
                it.item, report.max_rel, report.pass ? "ok" : "FAIL");
  }
  std::printf("gradcheck %s: max relative error %.3e (tolerance %.1e, %d records)\n",
              all_pass ? "passed" : "FAILED", worst, tolerance, n_records);
  return all_pass ? 0 : kExitNumeric;
}

std::vector<size_t> parse_sizes(const std::string& csv) {
  std::vector<size_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recall-augmented ranking toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  rar::SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n-users", spec.n_users);
  gen->add_option("--n-items", spec.n_items);
  gen->add_option("--latent-dim", spec.latent_dim);
  gen->add_option("--click-bias", spec.click_bias);
  gen->add_option("--exposure-depth", spec.exposure_depth);
  gen->add_option("--r", spec.r);
  gen->add_option("--l", spec.l);
  gen->add_option("--noise", spec.noise);
  gen->add_flag("--noise-pools", spec.noise_pools, "replace sets with uniform random ids");
  gen->add_option("--train-frac", spec.train_frac);
  gen->add_option("--val-frac", spec.val_frac);
  gen->add_option("--seed", spec.seed);

  // train
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  ConfigCli tr_cfg;
  tr_cfg.attach(tr);
  std::string tr_data, tr_out = ".";
  bool tr_build_sets = false;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory for checkpoint and metrics log");
  tr->add_flag("--build-sets", tr_build_sets, "build missing sets with a two-tower model");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_split = "test";
  bool ev_build_sets = false;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--split", ev_split, "train|val|test");
  ev->add_flag("--build-sets", ev_build_sets);

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and score every ablation variant");
  ConfigCli ab_cfg;
  ab_cfg.attach(ab);
  std::string ab_data, ab_out;
  bool ab_build_sets = false;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--out", ab_out, "optional table output file");
  ab->add_flag("--build-sets", ab_build_sets);

  // bench-selection
  auto* be = app.add_subcommand("bench-selection", "time hamming vs exact top-k selection");
  rar::BenchOptions bopts;
  std::string be_sizes, be_out;
  be->add_option("--pool-sizes", be_sizes, "comma-separated pool sizes");
  be->add_option("--dim", bopts.dim);
  be->add_option("--k", bopts.k);
  be->add_option("--m-bits", bopts.m_bits);
  be->add_option("--batch", bopts.batch);
  be->add_option("--trials", bopts.trials);
  be->add_option("--threads", bopts.threads, "parallel query mode (default single-threaded)");
  be->add_option("--seed", bopts.seed);
  be->add_option("--out", be_out, "optional TSV output file");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the joint gradients");
  ConfigCli gc_cfg;
  gc_cfg.attach(gc);
  std::string gc_data;
  int gc_records = 10;
  double gc_tol = 1e-4;
  gc->add_option("--data", gc_data, "dataset directory (default: small built-in synthetic)");
  gc->add_option("--records", gc_records);
  gc->add_option("--tolerance", gc_tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (tr->parsed()) return cmd_train(tr_cfg.resolve(), tr_data, tr_out, tr_build_sets);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_build_sets);
    if (ab->parsed()) return cmd_ablate(ab_cfg.resolve(), ab_data, ab_build_sets, ab_out);
    if (be->parsed()) {
      if (!be_sizes.empty()) bopts.pool_sizes = parse_sizes(be_sizes);
      return cmd_bench(bopts, be_out);
    }
    if (gc->parsed()) return cmd_gradcheck(gc_cfg.resolve(), gc_data, gc_records, gc_tol);
  } catch (const rar::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const rar::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
