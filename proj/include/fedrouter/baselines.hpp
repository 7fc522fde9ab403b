#pragma once

#include <vector>

#include "fedrouter/adapter.hpp"
#include "fedrouter/datagen.hpp"
#include "fedrouter/server.hpp"

namespace fedrouter {

enum class BaselineKind { FedAvg, LocalOnly, FedCluster };

// Outcome of a baseline run: the trained adapters, which adapter serves
// each client at evaluation time, and per-round pooled metrics (routing
// accuracy is NaN — these methods do not route).
struct BaselineRun {
  std::vector<AdapterParams> adapters;
  std::vector<int> client_adapter;  // per client -> index into adapters
  std::vector<RoundMetrics> rounds;
};

// One shared adapter; every round every client trains it on its full data
// and the server takes the uniform average.
BaselineRun run_fedavg(const FederationDataset& dataset,
                       const FederationConfig& cfg,
                       const TrainConfig& train_cfg);

// No communication: each client trains its own adapter every round.
BaselineRun run_local_only(const FederationDataset& dataset,
                           const FederationConfig& cfg,
                           const TrainConfig& train_cfg);

// Clusters clients by their mean training embedding into n_g groups, then
// runs FedAvg independently inside each group.
BaselineRun run_fedcluster(const FederationDataset& dataset,
                           const FederationConfig& cfg,
                           const TrainConfig& train_cfg);

}  // namespace fedrouter
