#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "fedrouter/datagen.hpp"
#include "fedrouter/server.hpp"

namespace fedrouter {

// Full experiment configuration: the (method x scenario x seed) grid plus
// the scenario, federation, and training knobs every cell shares. JSON keys
// mirror the field names; unknown keys are rejected.
struct RunConfig {
  std::vector<std::string> methods = {"fedrouter", "fedrouter-star", "fedavg",
                                      "local", "fedcluster"};
  std::vector<std::string> scenarios = {"single", "dual", "all"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  int n_clients = 8;
  int n_tasks = 4;
  int rounds = 25;
  int train_per_client = 600;
  int test_per_client = 300;
  int dim = 32;
  double separation = 10.0;
  double noise_sigma = 1.0;
  int class_count = 4;
  bool conflict = false;

  int n_g = 4;
  bool n_g_auto = false;
  LocalKPolicy n_l_policy = LocalKPolicy::Scripted;
  int n_l_fixed = 1;
  EvalMode eval_mode = EvalMode::Global;
  Aggregation aggregation = Aggregation::Uniform;

  double learning_rate = 0.0025;
  int steps_per_round = 10;
  int batch_size = 16;

  std::string out_dir = "out";
  bool routing_dump = false;
  bool export_embeddings = false;
  bool save_adapters = false;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
void validate_config(const RunConfig& cfg);

// Stable hash of the fully materialized config (canonical JSON, FNV-1a 64),
// stamped into every artifact header for traceability.
std::string config_hash(const RunConfig& cfg);

ScenarioConfig scenario_config_for(const RunConfig& cfg,
                                   const std::string& scenario,
                                   std::uint64_t seed);
FederationConfig federation_config_for(const RunConfig& cfg,
                                       const std::string& method,
                                       std::uint64_t seed);
TrainConfig train_config_for(const RunConfig& cfg);

struct SummaryRow {
  std::string method;
  std::string scenario;
  double mean = 0.0;
  double stddev = 0.0;  // sample std; NaN when fewer than 2 seeds
  int n_seeds = 0;
};

struct ExperimentResult {
  std::vector<SummaryRow> summary;
  std::string out_dir;
};

// Runs the full grid and writes metrics.jsonl, summary.csv, trace.csv and
// the optional routing/embedding/adapter artifacts into cfg.out_dir.
// `log` (optional) receives one progress line per completed cell.
ExperimentResult run_experiment(const RunConfig& cfg,
                                std::ostream* log = nullptr);

// Per-client embedding CSVs (train with local-cluster column from setup,
// test with nearest-local-centroid column), import-compatible.
void export_embeddings(const FederationDataset& dataset,
                       const FederationConfig& cfg,
                       const std::string& out_dir,
                       const std::string& header_comment);

struct SilhouetteReport {
  std::string scope;  // "local" or "global"
  bool skipped = false;
  std::string notice;
  // (k, mean score, std across clients) — std is NaN for global scope.
  std::vector<std::tuple<int, double, double>> rows;
};

// Global scope: silhouette vs k over the pooled local centroids of all
// clients. Local scope: per-client silhouette over raw embeddings, mean and
// std across clients per k; skipped (with a notice) for single-task clients.
SilhouetteReport silhouette_report(const FederationDataset& dataset,
                                   const FederationConfig& cfg,
                                   const std::string& scope, int k_min,
                                   int k_max);

}  // namespace fedrouter
