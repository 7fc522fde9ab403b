#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedrouter/adapter.hpp"
#include "fedrouter/client.hpp"
#include "fedrouter/clustering.hpp"
#include "fedrouter/datagen.hpp"

namespace fedrouter {

enum class ScheduleMode { Standard, Star };
enum class Aggregation { Uniform, SampleWeighted };
enum class EvalMode { Local, Global };

// How each client's local cluster count is chosen: the ground-truth task
// count of its scripted scenario, silhouette-based selection, or a fixed
// value for every client.
enum class LocalKPolicy { Scripted, Auto, Fixed };

struct FederationConfig {
  int n_clients = 8;
  int rounds = 25;
  int n_g = 4;
  bool n_g_auto = false;
  ScheduleMode mode = ScheduleMode::Standard;
  Aggregation aggregation = Aggregation::Uniform;
  std::uint64_t master_seed = 1;
  EvalMode eval_mode = EvalMode::Global;
  LocalKPolicy n_l_policy = LocalKPolicy::Scripted;
  int n_l_fixed = 1;
};

// Frozen after setup: the clustering of all clients' local centroids, which
// local centroid belongs to which global cluster, and the per-global-cluster
// aggregated adapters (the only adapters that exist after round 1).
struct GlobalClusterModel {
  CentroidSet global_centroids;  // fit over pooled_centroids
  std::vector<Vec> pooled_centroids;
  std::vector<std::pair<int, int>> pooled_owner;  // (client_id, local index)
  std::vector<std::vector<std::pair<int, int>>> membership;  // per gid
  std::vector<AdapterParams> adapters;                       // per gid
  int n_g = 0;
};

GlobalClusterModel server_setup(const std::vector<ClientReport>& reports,
                                const FederationConfig& cfg);

struct RoundPlan {
  int round = 0;
  std::vector<Assignment> assignments;  // ordered by (client_id, cluster)
};

// Standard mode: client i trains M_i[round mod |M_i|] where M_i is its
// sorted matched-cluster list. Star mode: every cluster in M_i, every round.
RoundPlan plan_round(const GlobalClusterModel& model, int round,
                     const FederationConfig& cfg);

// Per-cluster (uniform or sample-weighted) averaging of this round's
// updates; clusters that received none keep their previous adapter.
// Results are canonicalized by (client_id, cluster) before reduction.
void aggregate_round(GlobalClusterModel& model,
                     const std::vector<TrainResult>& results,
                     const FederationConfig& cfg);

struct TraceRow {
  int round = 0;
  int client_id = 0;
  int global_cluster = 0;
  std::string mode;
  int samples = 0;
};

struct RoundMetrics {
  int round = 0;
  double overall_acc = 0.0;
  std::vector<std::pair<int, double>> per_task_acc;  // (task, accuracy)
  double routing_acc = 0.0;
  double mean_loss = 0.0;
};

struct EvalFragment;  // defined in router.hpp

struct FederationRun {
  GlobalClusterModel model;
  std::vector<ClientState> clients;
  std::vector<std::vector<int>> local_to_global;  // per client, per local idx
  std::vector<int> majority_task;                 // per gid (ground truth)
  std::vector<RoundMetrics> rounds;
  std::vector<TraceRow> trace;
  // Final-round per-client routing decisions and correctness, for dumps.
  std::vector<EvalFragment> final_eval;

  FederationRun();
  FederationRun(FederationRun&&) noexcept;
  FederationRun& operator=(FederationRun&&) noexcept;
  ~FederationRun();
};

FederationRun run_federation(const FederationDataset& dataset,
                             const FederationConfig& cfg,
                             const TrainConfig& train_cfg);

}  // namespace fedrouter
