#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedrouter/harness.hpp"

namespace {

using fedrouter::RunConfig;

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (tok.empty()) throw CLI::ValidationError("--seeds", "empty seed value");
    seeds.push_back(std::stoull(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

struct CommonOpts {
  std::string config_path;
  std::string method;
  std::string scenario;
  std::string eval_mode;
  std::string seeds_csv;
  std::string out_dir;
  bool auto_k = false;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty()
                      ? RunConfig{}
                      : fedrouter::load_config(opts.config_path);
  if (!opts.method.empty()) cfg.methods = {opts.method};
  if (!opts.scenario.empty()) cfg.scenarios = {opts.scenario};
  if (!opts.eval_mode.empty()) {
    if (opts.eval_mode == "local") {
      cfg.eval_mode = fedrouter::EvalMode::Local;
    } else if (opts.eval_mode == "global") {
      cfg.eval_mode = fedrouter::EvalMode::Global;
    } else {
      throw CLI::ValidationError("--eval-mode", "must be local or global");
    }
  }
  if (!opts.seeds_csv.empty()) cfg.seeds = parse_seeds(opts.seeds_csv);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.auto_k) {
    cfg.n_l_policy = fedrouter::LocalKPolicy::Auto;
    cfg.n_g_auto = true;
  }
  fedrouter::validate_config(cfg);
  return cfg;
}

void add_common(CLI::App* app, CommonOpts& opts, bool with_method) {
  app->add_option("--config", opts.config_path, "JSON config file");
  if (with_method)
    app->add_option("--method", opts.method,
                    "fedrouter|fedrouter-star|fedavg|local|fedcluster");
  app->add_option("--scenario", opts.scenario, "single|dual|all");
  app->add_option("--eval-mode", opts.eval_mode, "local|global");
  app->add_option("--seeds", opts.seeds_csv, "comma-separated seed list");
  app->add_flag("--auto-k", opts.auto_k,
                "select local and global cluster counts by silhouette");
  app->add_option("--out", opts.out_dir, "output directory");
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << std::fixed << v;
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedrouter: task-centric federated learning simulator"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  CLI::App* run = app.add_subcommand("run", "execute an experiment grid");
  add_common(run, run_opts, true);
  bool routing_dump = false;
  bool export_flag = false;
  bool save_adapters = false;
  run->add_flag("--routing-dump", routing_dump,
                "write per-sample routing decisions (routing.csv)");
  run->add_flag("--export-embeddings", export_flag,
                "also write per-client embedding CSVs");
  run->add_flag("--save-adapters", save_adapters,
                "write final adapter checkpoints");

  CommonOpts sil_opts;
  std::string scope = "global";
  int k_min = 2;
  int k_max = 8;
  CLI::App* sil =
      app.add_subcommand("silhouette", "score-vs-k tables for cluster counts");
  add_common(sil, sil_opts, false);
  sil->add_option("--scope", scope, "local|global")->required();
  sil->add_option("--k-min", k_min, "smallest k (default 2)");
  sil->add_option("--k-max", k_max, "largest k (default 8)");

  CommonOpts exp_opts;
  CLI::App* exp = app.add_subcommand(
      "export-embeddings", "write per-client embedding CSVs with clusters");
  add_common(exp, exp_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) {
      RunConfig cfg = resolve_config(run_opts);
      if (routing_dump) cfg.routing_dump = true;
      if (export_flag) cfg.export_embeddings = true;
      if (save_adapters) cfg.save_adapters = true;
      const auto result = fedrouter::run_experiment(cfg, &std::cout);
      std::cout << "\nmethod,scenario,mean,std\n";
      for (const auto& row : result.summary) {
        std::cout << row.method << "," << row.scenario << ","
                  << fmt_double(row.mean) << ",";
        if (row.n_seeds >= 2) std::cout << fmt_double(row.stddev);
        std::cout << "\n";
      }
      std::cout << "artifacts written to " << result.out_dir << "\n";
    } else if (sil->parsed()) {
      RunConfig cfg = resolve_config(sil_opts);
      namespace fs = std::filesystem;
      fs::create_directories(cfg.out_dir);
      const std::string hash = fedrouter::config_hash(cfg);
      const fs::path path =
          fs::path(cfg.out_dir) / ("silhouette_" + scope + ".csv");
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      std::string seeds;
      for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
      out << "# config_hash=" << hash << " master_seeds=" << seeds << "\n";
      if (scope == "global") {
        out << "scenario,seed,k,score\n";
      } else {
        out << "scenario,seed,k,mean,std\n";
      }
      for (const std::string& scenario : cfg.scenarios) {
        for (std::uint64_t seed : cfg.seeds) {
          const auto dataset = fedrouter::build_scenario(
              fedrouter::scenario_config_for(cfg, scenario, seed));
          const auto fc =
              fedrouter::federation_config_for(cfg, "fedrouter", seed);
          const auto report =
              fedrouter::silhouette_report(dataset, fc, scope, k_min, k_max);
          if (report.skipped) {
            std::cerr << "notice (" << scenario << ", seed " << seed
                      << "): " << report.notice << "\n";
            continue;
          }
          for (const auto& [k, mean, sd] : report.rows) {
            out << scenario << "," << seed << "," << k << "," << mean;
            if (scope == "local") out << "," << sd;
            out << "\n";
          }
        }
      }
      std::cout << "silhouette table written to " << path.string() << "\n";
    } else if (exp->parsed()) {
      RunConfig cfg = resolve_config(exp_opts);
      const std::string hash = fedrouter::config_hash(cfg);
      for (const std::string& scenario : cfg.scenarios) {
        for (std::uint64_t seed : cfg.seeds) {
          const auto dataset = fedrouter::build_scenario(
              fedrouter::scenario_config_for(cfg, scenario, seed));
          const auto fc =
              fedrouter::federation_config_for(cfg, "fedrouter", seed);
          fedrouter::export_embeddings(
              dataset, fc, cfg.out_dir,
              "config_hash=" + hash + " master_seed=" + std::to_string(seed));
        }
      }
      std::cout << "embeddings written to " << cfg.out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
