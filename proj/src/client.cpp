#include "fedrouter/client.hpp"

#include <stdexcept>

namespace fedrouter {

ClientState client_setup(EmbeddingMatrix data, int n_l, int class_count,
                         std::uint64_t seed) {
  if (data.rows.empty())
    throw std::invalid_argument("client_setup: empty dataset");
  if (n_l < 1 || static_cast<std::size_t>(n_l) > data.rows.size())
    throw std::invalid_argument("client_setup: n_l must be in [1, D]");
  if (class_count < 2)
    throw std::invalid_argument("client_setup: class_count must be >= 2");

  std::vector<Vec> points;
  points.reserve(data.rows.size());
  for (const EmbeddingRow& r : data.rows) points.push_back(r.embedding);

  ClientState state;
  state.client_id = data.client_id;
  state.class_count = class_count;
  state.local_clusters = kmeans_fit(points, n_l, seed);
  state.shard_index.assign(static_cast<std::size_t>(n_l), {});
  for (std::size_t i = 0; i < state.local_clusters.assignments.size(); ++i)
    state.shard_index[static_cast<std::size_t>(
                          state.local_clusters.assignments[i])]
        .push_back(static_cast<int>(i));
  state.train_data = std::move(data);
  return state;
}

ClientReport first_round_report(const ClientState& state) {
  if (state.local_clusters.k == 0)
    throw std::logic_error("first_round_report: setup not run");
  ClientReport report;
  report.client_id = state.client_id;
  report.centroids = state.local_clusters.centroids;
  for (int c = 0; c < state.local_clusters.k; ++c)
    report.adapters.push_back(
        init_adapter(state.train_data.dim, state.class_count, c));
  return report;
}

int match_global_to_local(const ClientState& state,
                          const Vec& global_centroid) {
  if (state.local_clusters.k == 0)
    throw std::logic_error("match_global_to_local: setup not run");
  return assign_nearest(global_centroid, state.local_clusters.centroids).first;
}

TrainResult train_assignment(const ClientState& state,
                             const Assignment& assignment,
                             const TrainConfig& cfg) {
  const int local = match_global_to_local(state, assignment.centroid);
  const std::vector<int>& shard = state.shard_index[static_cast<std::size_t>(local)];
  TrainResult result;
  result.client_id = state.client_id;
  result.global_cluster = assignment.global_cluster;
  if (shard.empty()) {
    result.adapter = assignment.adapter;
    result.sample_count = 0;
    return result;
  }
  std::vector<EmbeddingRow> rows;
  rows.reserve(shard.size());
  for (int idx : shard)
    rows.push_back(state.train_data.rows[static_cast<std::size_t>(idx)]);
  result.adapter = train_sgd(assignment.adapter, rows, cfg);
  result.sample_count = static_cast<int>(shard.size());
  return result;
}

}  // namespace fedrouter
