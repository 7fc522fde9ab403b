#pragma once

#include <cstdint>
#include <vector>

#include "fedrouter/adapter.hpp"
#include "fedrouter/clustering.hpp"
#include "fedrouter/types.hpp"

namespace fedrouter {

// Client-side state: the local clustering is computed exactly once at setup
// and frozen; rounds only ever train adapters on the matched shard.
struct ClientState {
  int client_id = 0;
  int class_count = 0;
  EmbeddingMatrix train_data;
  CentroidSet local_clusters;
  std::vector<std::vector<int>> shard_index;  // local cluster -> row indices
};

ClientState client_setup(EmbeddingMatrix data, int n_l, int class_count,
                         std::uint64_t seed);

struct ClientReport {
  int client_id = 0;
  std::vector<Vec> centroids;           // ordered by local cluster index
  std::vector<AdapterParams> adapters;  // zero-initialized, one per cluster
};

ClientReport first_round_report(const ClientState& state);

// Index of the nearest local centroid (ties -> lowest index).
int match_global_to_local(const ClientState& state, const Vec& global_centroid);

struct Assignment {
  int client_id = 0;
  int global_cluster = 0;
  Vec centroid;
  AdapterParams adapter;
};

struct TrainResult {
  int client_id = 0;
  int global_cluster = 0;
  AdapterParams adapter;
  int sample_count = 0;
};

// Trains the received adapter on the shard matched to the assignment's
// centroid. An empty matched shard (guarded; cannot occur after repair)
// returns the adapter untrained with sample_count 0.
TrainResult train_assignment(const ClientState& state,
                             const Assignment& assignment,
                             const TrainConfig& cfg);

}  // namespace fedrouter
