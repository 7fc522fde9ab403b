#include "fedrouter/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "fedrouter/rng.hpp"

namespace fedrouter {

namespace {

std::uint64_t train_seed(std::uint64_t master, int client, int round) {
  return derive_seed(master, {seed_tag::kTrain,
                              static_cast<std::uint64_t>(client),
                              static_cast<std::uint64_t>(round)});
}

// Pooled evaluation of per-client adapters on the test splits.
RoundMetrics eval_round(int round, const FederationDataset& dataset,
                        const std::vector<AdapterParams>& adapters,
                        const std::vector<int>& client_adapter) {
  RoundMetrics m;
  m.round = round;
  m.routing_acc = std::numeric_limits<double>::quiet_NaN();
  long long correct = 0, total = 0;
  double loss_sum = 0.0;
  std::map<int, std::pair<long long, long long>> per_task;
  for (std::size_t i = 0; i < dataset.clients.size(); ++i) {
    const AdapterParams& adapter =
        adapters[static_cast<std::size_t>(client_adapter[i])];
    for (const EmbeddingRow& row : dataset.clients[i].test.rows) {
      const Vec probs = predict(adapter, row.embedding);
      int best = 0;
      for (int c = 1; c < adapter.class_count; ++c)
        if (probs[static_cast<std::size_t>(c)] >
            probs[static_cast<std::size_t>(best)])
          best = c;
      const bool ok = (best == row.class_label);
      correct += ok;
      total += 1;
      loss_sum += -std::log(
          std::max(probs[static_cast<std::size_t>(row.class_label)], 1e-300));
      auto& pt = per_task[row.task_id];
      pt.first += ok;
      pt.second += 1;
    }
  }
  m.overall_acc = static_cast<double>(correct) / static_cast<double>(total);
  m.mean_loss = loss_sum / static_cast<double>(total);
  for (const auto& [task, counts] : per_task)
    m.per_task_acc.emplace_back(task, static_cast<double>(counts.first) /
                                          static_cast<double>(counts.second));
  return m;
}

void check_inputs(const FederationDataset& dataset,
                  const FederationConfig& cfg) {
  if (static_cast<int>(dataset.clients.size()) != cfg.n_clients)
    throw std::invalid_argument("baseline: n_clients mismatch");
  if (cfg.rounds < 0)
    throw std::invalid_argument("baseline: negative round count");
  if (dataset.clients.empty())
    throw std::invalid_argument("baseline: no clients");
}

}  // namespace

BaselineRun run_fedavg(const FederationDataset& dataset,
                       const FederationConfig& cfg,
                       const TrainConfig& train_cfg) {
  check_inputs(dataset, cfg);
  BaselineRun run;
  run.adapters.push_back(
      init_adapter(dataset.config.dim, dataset.config.class_count, 0));
  run.client_adapter.assign(dataset.clients.size(), 0);

  for (int round = 0; round < cfg.rounds; ++round) {
    std::vector<AdapterParams> updates;
    updates.reserve(dataset.clients.size());
    for (const ClientDataset& client : dataset.clients) {
      TrainConfig c = train_cfg;
      c.seed = train_seed(cfg.master_seed, client.client_id, round);
      updates.push_back(train_sgd(run.adapters[0], client.train.rows, c));
    }
    run.adapters[0] = average_adapters(updates);
    run.adapters[0].adapter_id = 0;
    run.rounds.push_back(
        eval_round(round, dataset, run.adapters, run.client_adapter));
  }
  return run;
}

BaselineRun run_local_only(const FederationDataset& dataset,
                           const FederationConfig& cfg,
                           const TrainConfig& train_cfg) {
  check_inputs(dataset, cfg);
  BaselineRun run;
  for (std::size_t i = 0; i < dataset.clients.size(); ++i) {
    run.adapters.push_back(init_adapter(dataset.config.dim,
                                        dataset.config.class_count,
                                        static_cast<int>(i)));
    run.client_adapter.push_back(static_cast<int>(i));
  }
  for (int round = 0; round < cfg.rounds; ++round) {
    for (std::size_t i = 0; i < dataset.clients.size(); ++i) {
      TrainConfig c = train_cfg;
      c.seed = train_seed(cfg.master_seed,
                          dataset.clients[i].client_id, round);
      run.adapters[i] =
          train_sgd(run.adapters[i], dataset.clients[i].train.rows, c);
    }
    run.rounds.push_back(
        eval_round(round, dataset, run.adapters, run.client_adapter));
  }
  return run;
}

BaselineRun run_fedcluster(const FederationDataset& dataset,
                           const FederationConfig& cfg,
                           const TrainConfig& train_cfg) {
  check_inputs(dataset, cfg);
  const int n = static_cast<int>(dataset.clients.size());

  std::vector<Vec> means;
  means.reserve(static_cast<std::size_t>(n));
  for (const ClientDataset& client : dataset.clients) {
    Vec mean(static_cast<std::size_t>(dataset.config.dim), 0.0);
    for (const EmbeddingRow& row : client.train.rows)
      for (std::size_t j = 0; j < mean.size(); ++j)
        mean[j] += row.embedding[j];
    for (double& v : mean) v /= static_cast<double>(client.train.rows.size());
    means.push_back(std::move(mean));
  }

  int n_g = cfg.n_g;
  if (cfg.n_g_auto) {
    const int k_max = std::min(8, n - 1);
    if (k_max < 2)
      throw std::invalid_argument(
          "run_fedcluster: too few clients for auto cluster selection");
    n_g = select_k_silhouette(
              means, 2, k_max,
              derive_seed(cfg.master_seed, {seed_tag::kSilhouette}))
              .best_k;
  }
  if (n_g < 1 || n_g > n)
    throw std::invalid_argument("run_fedcluster: n_g must be in [1, n_clients]");

  const CentroidSet groups =
      kmeans_fit(means, n_g,
                 derive_seed(cfg.master_seed, {seed_tag::kGlobalCluster}));

  BaselineRun run;
  for (int g = 0; g < n_g; ++g)
    run.adapters.push_back(
        init_adapter(dataset.config.dim, dataset.config.class_count, g));
  run.client_adapter.assign(groups.assignments.begin(),
                            groups.assignments.end());

  for (int round = 0; round < cfg.rounds; ++round) {
    std::map<int, std::vector<AdapterParams>> updates;
    for (std::size_t i = 0; i < dataset.clients.size(); ++i) {
      const int g = run.client_adapter[i];
      TrainConfig c = train_cfg;
      c.seed = train_seed(cfg.master_seed,
                          dataset.clients[i].client_id, round);
      updates[g].push_back(train_sgd(run.adapters[static_cast<std::size_t>(g)],
                                     dataset.clients[i].train.rows, c));
    }
    for (auto& [g, params] : updates) {
      run.adapters[static_cast<std::size_t>(g)] = average_adapters(params);
      run.adapters[static_cast<std::size_t>(g)].adapter_id = g;
    }
    run.rounds.push_back(
        eval_round(round, dataset, run.adapters, run.client_adapter));
  }
  return run;
}

}  // namespace fedrouter
