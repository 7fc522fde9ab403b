#include "fedrouter/router.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace fedrouter {

RoutingDecision route(const Vec& sample, EvalMode mode,
                      const EvalContext& ctx) {
  if (ctx.model == nullptr)
    throw std::invalid_argument("route: missing global model");
  RoutingDecision d;
  if (mode == EvalMode::Local) {
    if (ctx.local_clusters == nullptr || ctx.local_clusters->centroids.empty())
      throw std::invalid_argument("route: empty local centroid set");
    if (ctx.local_to_global.size() != ctx.local_clusters->centroids.size())
      throw std::invalid_argument("route: local-to-global map mismatch");
    const auto [idx, dist] = assign_nearest(sample, ctx.local_clusters->centroids);
    d.centroid_index = idx;
    d.global_cluster = ctx.local_to_global[static_cast<std::size_t>(idx)];
    d.distance = dist;
  } else {
    if (ctx.model->global_centroids.centroids.empty())
      throw std::invalid_argument("route: empty global centroid set");
    const auto [idx, dist] =
        assign_nearest(sample, ctx.model->global_centroids.centroids);
    d.centroid_index = idx;
    d.global_cluster = idx;
    d.distance = dist;
  }
  return d;
}

EvalFragment batch_evaluate(const EmbeddingMatrix& test_data, EvalMode mode,
                            const EvalContext& ctx) {
  if (test_data.rows.empty())
    throw std::invalid_argument("batch_evaluate: empty test data");
  if (ctx.model == nullptr)
    throw std::invalid_argument("batch_evaluate: missing global model");

  const std::size_t n = test_data.rows.size();
  EvalFragment frag;
  frag.n = static_cast<int>(n);
  frag.decisions.resize(n);
  frag.sample_correct.assign(n, false);

  // Route everything first, then bucket samples per resolved adapter.
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    RoutingDecision d = route(test_data.rows[i].embedding, mode, ctx);
    d.sample_index = static_cast<int>(i);
    groups[d.global_cluster].push_back(i);
    frag.decisions[i] = d;
  }
  frag.adapter_activations = static_cast<int>(groups.size());

  std::map<int, std::pair<int, int>> task_counts;  // task -> (correct, total)
  for (const auto& [gid, members] : groups) {
    if (gid < 0 || gid >= ctx.model->n_g)
      throw std::logic_error("batch_evaluate: routed to unknown cluster");
    const AdapterParams& adapter =
        ctx.model->adapters[static_cast<std::size_t>(gid)];
    Vec probs;
    for (std::size_t i : members) {
      const EmbeddingRow& row = test_data.rows[i];
      probs = predict(adapter, row.embedding);
      int best = 0;
      for (int c = 1; c < adapter.class_count; ++c)
        if (probs[static_cast<std::size_t>(c)] >
            probs[static_cast<std::size_t>(best)])
          best = c;
      const bool ok = (best == row.class_label);
      frag.correct += ok;
      frag.sample_correct[i] = ok;
      frag.loss_sum += -std::log(
          std::max(probs[static_cast<std::size_t>(row.class_label)], 1e-300));
      auto& tc = task_counts[row.task_id];
      tc.first += ok;
      tc.second += 1;
      if (ctx.majority_task != nullptr &&
          (*ctx.majority_task)[static_cast<std::size_t>(gid)] == row.task_id)
        ++frag.routing_correct;
    }
  }
  for (const auto& [task, counts] : task_counts) {
    frag.per_task.emplace_back(task, counts.first);
    frag.per_task_total.emplace_back(task, counts.second);
  }
  return frag;
}

std::vector<int> compute_majority_tasks(
    const GlobalClusterModel& model, const std::vector<ClientState>& clients) {
  std::map<int, const ClientState*> by_id;
  for (const ClientState& c : clients) by_id[c.client_id] = &c;
  std::vector<int> majority(static_cast<std::size_t>(model.n_g), 0);
  for (int g = 0; g < model.n_g; ++g) {
    std::map<int, int> counts;
    for (const auto& [client_id, local_idx] :
         model.membership[static_cast<std::size_t>(g)]) {
      auto it = by_id.find(client_id);
      if (it == by_id.end())
        throw std::invalid_argument("compute_majority_tasks: unknown client");
      const ClientState& state = *it->second;
      for (int row :
           state.shard_index[static_cast<std::size_t>(local_idx)])
        ++counts[state.train_data.rows[static_cast<std::size_t>(row)].task_id];
    }
    int best_task = 0;
    int best_count = -1;
    for (const auto& [task, count] : counts) {
      if (count > best_count) {  // map order -> ties pick the lowest task
        best_count = count;
        best_task = task;
      }
    }
    majority[static_cast<std::size_t>(g)] = best_task;
  }
  return majority;
}

}  // namespace fedrouter
