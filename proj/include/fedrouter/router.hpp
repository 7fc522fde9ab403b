#pragma once

#include <vector>

#include "fedrouter/server.hpp"
#include "fedrouter/types.hpp"

namespace fedrouter {

struct RoutingDecision {
  int sample_index = 0;
  // Local mode: index of the chosen local cluster; Global mode: the chosen
  // global cluster id. Either way global_cluster is the resolved gid whose
  // aggregated adapter serves the sample.
  int centroid_index = 0;
  int global_cluster = 0;
  double distance = 0.0;
};

// Everything evaluation needs from one client's point of view: its frozen
// local centroids, how those map into global clusters, the global model,
// and the ground-truth majority task per global cluster (evaluation-only).
struct EvalContext {
  const CentroidSet* local_clusters = nullptr;
  std::vector<int> local_to_global;
  const GlobalClusterModel* model = nullptr;
  const std::vector<int>* majority_task = nullptr;
};

RoutingDecision route(const Vec& sample, EvalMode mode, const EvalContext& ctx);

// Evaluation results as raw counts so callers can pool across clients.
struct EvalFragment {
  int n = 0;
  int correct = 0;
  int routing_correct = 0;
  double loss_sum = 0.0;
  int adapter_activations = 0;  // number of distinct adapters used
  std::vector<std::pair<int, int>> per_task;  // (task, correct) counts
  std::vector<std::pair<int, int>> per_task_total;
  std::vector<RoutingDecision> decisions;  // per sample, in row order
  std::vector<bool> sample_correct;

  double accuracy() const { return n ? static_cast<double>(correct) / n : 0.0; }
  double routing_accuracy() const {
    return n ? static_cast<double>(routing_correct) / n : 0.0;
  }
  double mean_loss() const { return n ? loss_sum / n : 0.0; }
};

// Routes every sample, groups them by resolved adapter, and evaluates each
// group with a single adapter activation. Identical in outcome to routing
// and predicting one sample at a time.
EvalFragment batch_evaluate(const EmbeddingMatrix& test_data, EvalMode mode,
                            const EvalContext& ctx);

// Ground-truth majority task of each global cluster, derived from the
// member shards' training rows (ties -> lowest task id).
std::vector<int> compute_majority_tasks(const GlobalClusterModel& model,
                                        const std::vector<ClientState>& clients);

}  // namespace fedrouter
