#include "fedrouter/server.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "fedrouter/rng.hpp"
#include "fedrouter/router.hpp"

namespace fedrouter {

FederationRun::FederationRun() = default;
FederationRun::FederationRun(FederationRun&&) noexcept = default;
FederationRun& FederationRun::operator=(FederationRun&&) noexcept = default;
FederationRun::~FederationRun() = default;

GlobalClusterModel server_setup(const std::vector<ClientReport>& reports,
                                const FederationConfig& cfg) {
  if (reports.empty()) throw std::invalid_argument("server_setup: no reports");

  std::vector<const ClientReport*> ordered;
  ordered.reserve(reports.size());
  for (const ClientReport& r : reports) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientReport* a, const ClientReport* b) {
              return a->client_id < b->client_id;
            });

  GlobalClusterModel model;
  int dim = -1;
  int class_count = -1;
  for (const ClientReport* r : ordered) {
    if (r->centroids.empty() || r->centroids.size() != r->adapters.size())
      throw std::invalid_argument("server_setup: malformed report");
    for (std::size_t l = 0; l < r->centroids.size(); ++l) {
      if (dim < 0) dim = static_cast<int>(r->centroids[l].size());
      if (static_cast<int>(r->centroids[l].size()) != dim)
        throw std::invalid_argument("server_setup: centroid dim mismatch");
      if (class_count < 0) class_count = r->adapters[l].class_count;
      if (r->adapters[l].class_count != class_count ||
          r->adapters[l].dim != dim)
        throw std::invalid_argument("server_setup: adapter shape mismatch");
      model.pooled_centroids.push_back(r->centroids[l]);
      model.pooled_owner.emplace_back(r->client_id, static_cast<int>(l));
    }
  }

  const int pool = static_cast<int>(model.pooled_centroids.size());
  int n_g = cfg.n_g;
  if (cfg.n_g_auto) {
    const int k_max = std::min(8, pool - 1);
    if (k_max < 2)
      throw std::invalid_argument(
          "server_setup: too few centroids for auto cluster selection");
    n_g = select_k_silhouette(model.pooled_centroids, 2, k_max,
                              derive_seed(cfg.master_seed,
                                          {seed_tag::kSilhouette}))
              .best_k;
  }
  if (n_g < 1 || n_g > pool)
    throw std::invalid_argument("server_setup: n_g must be in [1, " +
                                std::to_string(pool) + "]");

  model.global_centroids =
      kmeans_fit(model.pooled_centroids, n_g,
                 derive_seed(cfg.master_seed, {seed_tag::kGlobalCluster}));
  model.n_g = n_g;
  model.membership.assign(static_cast<std::size_t>(n_g), {});
  for (std::size_t p = 0; p < model.pooled_owner.size(); ++p)
    model.membership[static_cast<std::size_t>(
                         model.global_centroids.assignments[p])]
        .push_back(model.pooled_owner[p]);
  for (int g = 0; g < n_g; ++g)
    model.adapters.push_back(init_adapter(dim, class_count, g));
  return model;
}

namespace {

// Sorted matched-cluster list per client, from the frozen membership.
std::map<int, std::vector<int>> matched_clusters(
    const GlobalClusterModel& model) {
  std::map<int, std::vector<int>> matched;
  for (int g = 0; g < model.n_g; ++g)
    for (const auto& [client_id, local_idx] :
         model.membership[static_cast<std::size_t>(g)]) {
      auto& m = matched[client_id];
      if (m.empty() || m.back() != g) m.push_back(g);
    }
  return matched;  // gids arrive in ascending order by construction
}

}  // namespace

RoundPlan plan_round(const GlobalClusterModel& model, int round,
                     const FederationConfig& cfg) {
  if (round < 0) throw std::invalid_argument("plan_round: negative round");
  if (model.n_g == 0) throw std::logic_error("plan_round: setup not run");
  RoundPlan plan;
  plan.round = round;
  for (const auto& [client_id, m] : matched_clusters(model)) {
    if (m.empty())
      throw std::logic_error("plan_round: client with no matched cluster");
    std::vector<int> todo;
    if (cfg.mode == ScheduleMode::Standard) {
      todo.push_back(m[static_cast<std::size_t>(round) % m.size()]);
    } else {
      todo = m;
    }
    for (int g : todo) {
      Assignment a;
      a.client_id = client_id;
      a.global_cluster = g;
      a.centroid = model.global_centroids.centroids[static_cast<std::size_t>(g)];
      a.adapter = model.adapters[static_cast<std::size_t>(g)];
      plan.assignments.push_back(std::move(a));
    }
  }
  return plan;
}

void aggregate_round(GlobalClusterModel& model,
                     const std::vector<TrainResult>& results,
                     const FederationConfig& cfg) {
  for (const TrainResult& r : results) {
    if (r.global_cluster < 0 || r.global_cluster >= model.n_g)
      throw std::invalid_argument("aggregate_round: unknown cluster id");
    if (r.adapter.dim != model.adapters[0].dim ||
        r.adapter.class_count != model.adapters[0].class_count)
      throw std::invalid_argument("aggregate_round: adapter shape mismatch");
  }
  std::vector<const TrainResult*> ordered;
  ordered.reserve(results.size());
  for (const TrainResult& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const TrainResult* a, const TrainResult* b) {
              if (a->client_id != b->client_id)
                return a->client_id < b->client_id;
              return a->global_cluster < b->global_cluster;
            });

  std::map<int, std::vector<const TrainResult*>> per_cluster;
  for (const TrainResult* r : ordered) per_cluster[r->global_cluster].push_back(r);

  for (const auto& [gid, updates] : per_cluster) {
    std::vector<AdapterParams> params;
    params.reserve(updates.size());
    for (const TrainResult* r : updates) params.push_back(r->adapter);
    std::vector<double> weights;
    if (cfg.aggregation == Aggregation::SampleWeighted) {
      double total = 0.0;
      for (const TrainResult* r : updates) total += r->sample_count;
      if (total > 0.0) {
        for (const TrainResult* r : updates)
          weights.push_back(static_cast<double>(r->sample_count) / total);
      }
    }
    model.adapters[static_cast<std::size_t>(gid)] =
        average_adapters(params, weights);
    model.adapters[static_cast<std::size_t>(gid)].adapter_id = gid;
  }
}

FederationRun run_federation(const FederationDataset& dataset,
                             const FederationConfig& cfg,
                             const TrainConfig& train_cfg) {
  if (static_cast<int>(dataset.clients.size()) != cfg.n_clients)
    throw std::invalid_argument("run_federation: n_clients mismatch");
  if (cfg.rounds < 0)
    throw std::invalid_argument("run_federation: negative round count");

  FederationRun run;

  for (const ClientDataset& client : dataset.clients) {
    int n_l;
    switch (cfg.n_l_policy) {
      case LocalKPolicy::Scripted:
        n_l = static_cast<int>(client.task_set.size());
        break;
      case LocalKPolicy::Auto: {
        std::vector<Vec> points;
        points.reserve(client.train.rows.size());
        for (const EmbeddingRow& r : client.train.rows)
          points.push_back(r.embedding);
        const int k_max =
            std::min(8, static_cast<int>(points.size()) - 1);
        if (k_max < 2)
          throw std::invalid_argument(
              "run_federation: too few rows for auto cluster selection");
        n_l = select_k_silhouette(
                  points, 2, k_max,
                  derive_seed(cfg.master_seed,
                              {seed_tag::kSilhouette,
                               static_cast<std::uint64_t>(client.client_id)}))
                  .best_k;
        break;
      }
      case LocalKPolicy::Fixed:
        n_l = cfg.n_l_fixed;
        break;
      default:
        throw std::logic_error("run_federation: bad n_l policy");
    }
    run.clients.push_back(client_setup(
        client.train, n_l, dataset.config.class_count,
        derive_seed(cfg.master_seed,
                    {seed_tag::kLocalCluster,
                     static_cast<std::uint64_t>(client.client_id)})));
  }

  std::vector<ClientReport> reports;
  reports.reserve(run.clients.size());
  for (const ClientState& state : run.clients)
    reports.push_back(first_round_report(state));
  run.model = server_setup(reports, cfg);

  // Map each client's local clusters into global clusters via the pooled
  // assignment vector (pooled order = ascending client, ascending local).
  run.local_to_global.assign(run.clients.size(), {});
  for (std::size_t p = 0; p < run.model.pooled_owner.size(); ++p) {
    const auto& [client_id, local_idx] = run.model.pooled_owner[p];
    auto& m = run.local_to_global[static_cast<std::size_t>(client_id)];
    if (static_cast<int>(m.size()) <= local_idx)
      m.resize(static_cast<std::size_t>(local_idx) + 1, -1);
    m[static_cast<std::size_t>(local_idx)] =
        run.model.global_centroids.assignments[p];
  }

  run.majority_task = compute_majority_tasks(run.model, run.clients);

  const std::string mode_name =
      cfg.mode == ScheduleMode::Standard ? "standard" : "star";

  for (int round = 0; round < cfg.rounds; ++round) {
    const RoundPlan plan = plan_round(run.model, round, cfg);
    std::vector<TrainResult> results;
    results.reserve(plan.assignments.size());
    for (const Assignment& a : plan.assignments) {
      TrainConfig c = train_cfg;
      if (cfg.mode == ScheduleMode::Standard) {
        c.seed = derive_seed(cfg.master_seed,
                             {seed_tag::kTrain,
                              static_cast<std::uint64_t>(a.client_id),
                              static_cast<std::uint64_t>(round)});
      } else {
        c.seed = derive_seed(cfg.master_seed,
                             {seed_tag::kTrain,
                              static_cast<std::uint64_t>(a.client_id),
                              static_cast<std::uint64_t>(round),
                              static_cast<std::uint64_t>(a.global_cluster)});
      }
      TrainResult r = train_assignment(
          run.clients[static_cast<std::size_t>(a.client_id)], a, c);
      run.trace.push_back({round, a.client_id, a.global_cluster, mode_name,
                           r.sample_count});
      results.push_back(std::move(r));
    }
    aggregate_round(run.model, results, cfg);

    // Evaluate the updated model on every client's test split.
    RoundMetrics metrics;
    metrics.round = round;
    long long correct = 0, total = 0, routing_correct = 0;
    double loss_sum = 0.0;
    std::map<int, std::pair<long long, long long>> per_task;
    std::vector<EvalFragment> fragments;
    for (std::size_t i = 0; i < run.clients.size(); ++i) {
      EvalContext ctx;
      ctx.local_clusters = &run.clients[i].local_clusters;
      ctx.local_to_global = run.local_to_global[i];
      ctx.model = &run.model;
      ctx.majority_task = &run.majority_task;
      EvalFragment frag =
          batch_evaluate(dataset.clients[i].test, cfg.eval_mode, ctx);
      correct += frag.correct;
      total += frag.n;
      routing_correct += frag.routing_correct;
      loss_sum += frag.loss_sum;
      for (std::size_t t = 0; t < frag.per_task.size(); ++t) {
        auto& pt = per_task[frag.per_task[t].first];
        pt.first += frag.per_task[t].second;
        pt.second += frag.per_task_total[t].second;
      }
      fragments.push_back(std::move(frag));
    }
    metrics.overall_acc = static_cast<double>(correct) / static_cast<double>(total);
    metrics.routing_acc =
        static_cast<double>(routing_correct) / static_cast<double>(total);
    metrics.mean_loss = loss_sum / static_cast<double>(total);
    for (const auto& [task, counts] : per_task)
      metrics.per_task_acc.emplace_back(
          task, static_cast<double>(counts.first) /
                    static_cast<double>(counts.second));
    run.rounds.push_back(std::move(metrics));
    if (round == cfg.rounds - 1) run.final_eval = std::move(fragments);
  }
  return run;
}

}  // namespace fedrouter
