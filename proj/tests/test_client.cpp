#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fedrouter/client.hpp"
#include "fedrouter/datagen.hpp"
#include "fedrouter/rng.hpp"

using namespace fedrouter;

namespace {

ScenarioConfig small_config(Scenario s) {
  ScenarioConfig cfg;
  cfg.scenario = s;
  cfg.train_per_client = 120;
  cfg.test_per_client = 60;
  cfg.master_seed = 1;
  return cfg;
}

bool adapters_equal(const AdapterParams& a, const AdapterParams& b) {
  return a.class_count == b.class_count && a.dim == b.dim &&
         a.weights == b.weights && a.bias == b.bias;
}

}  // namespace

TEST_CASE("single-cluster setup puts every row in one shard") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Single));
  const ClientState state = client_setup(ds.clients[0].train, 1, 4, 7);
  CHECK(state.client_id == ds.clients[0].client_id);
  REQUIRE(state.local_clusters.centroids.size() == 1);
  REQUIRE(state.shard_index.size() == 1);
  CHECK(state.shard_index[0].size() == 120);
  // Shard indices are the original row order.
  for (std::size_t i = 0; i < state.shard_index[0].size(); ++i)
    CHECK(state.shard_index[0][i] == static_cast<int>(i));
}

TEST_CASE("two-task client shards are pure at high separation") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Dual));
  for (const ClientDataset& c : ds.clients) {
    const ClientState state = client_setup(c.train, 2, 4, 7);
    REQUIRE(state.shard_index.size() == 2);
    int impure = 0;
    for (const std::vector<int>& shard : state.shard_index) {
      REQUIRE(!shard.empty());
      std::set<int> tasks;
      for (int row : shard)
        tasks.insert(c.train.rows[static_cast<std::size_t>(row)].task_id);
      if (tasks.size() != 1) ++impure;
    }
    CHECK(impure == 0);
    // The two shards cover all rows exactly once.
    CHECK(state.shard_index[0].size() + state.shard_index[1].size() == 120);
  }
}

TEST_CASE("client_setup validates inputs") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Single));
  CHECK_THROWS_AS(client_setup(ds.clients[0].train, 0, 4, 7),
                  std::invalid_argument);
  EmbeddingMatrix empty;
  empty.dim = 4;
  CHECK_THROWS_AS(client_setup(empty, 1, 4, 7), std::invalid_argument);
}

TEST_CASE("first_round_report mirrors the local clustering with fresh adapters") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Dual));
  const ClientState state = client_setup(ds.clients[3].train, 2, 4, 9);
  const ClientReport report = first_round_report(state);
  CHECK(report.client_id == state.client_id);
  REQUIRE(report.centroids.size() == 2);
  CHECK(report.centroids == state.local_clusters.centroids);
  REQUIRE(report.adapters.size() == 2);
  for (std::size_t i = 0; i < report.adapters.size(); ++i) {
    CHECK(report.adapters[i].adapter_id == static_cast<int>(i));
    CHECK(report.adapters[i].dim == 32);
    CHECK(report.adapters[i].class_count == 4);
    CHECK(report.adapters[i].steps_trained == 0);
    for (double w : report.adapters[i].weights) CHECK(w == 0.0);
    for (double b : report.adapters[i].bias) CHECK(b == 0.0);
  }
}

TEST_CASE("match_global_to_local picks the nearest local centroid") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Dual));
  const ClientState state = client_setup(ds.clients[0].train, 2, 4, 9);
  // A global centroid placed exactly on a local centroid matches it.
  CHECK(match_global_to_local(state, state.local_clusters.centroids[0]) == 0);
  CHECK(match_global_to_local(state, state.local_clusters.centroids[1]) == 1);
  // A centroid at a task center matches the shard dominated by that task.
  const int task_a = ds.clients[0].task_set[0];
  const int idx = match_global_to_local(state, ds.tasks[static_cast<std::size_t>(task_a)].center);
  std::set<int> tasks;
  for (int row : state.shard_index[static_cast<std::size_t>(idx)])
    tasks.insert(ds.clients[0].train.rows[static_cast<std::size_t>(row)].task_id);
  CHECK(tasks.count(task_a) == 1);
}

TEST_CASE("train_assignment trains only on the matched shard") {
  // Hand-built state: two far-apart shards; training against one must be
  // unaffected by arbitrary edits to the other.
  auto build_state = [](double far_value) {
    ClientState s;
    s.client_id = 0;
    s.class_count = 2;
    s.train_data.client_id = 0;
    s.train_data.dim = 2;
    Rng rng(31);
    for (int i = 0; i < 12; ++i) {
      EmbeddingRow r;
      r.task_id = 0;
      r.class_label = i % 2;
      r.embedding = {(r.class_label ? 1.0 : -1.0) + 0.1 * rng.normal(),
                     0.1 * rng.normal()};
      s.train_data.rows.push_back(std::move(r));
    }
    for (int i = 0; i < 12; ++i) {
      EmbeddingRow r;
      r.task_id = 1;
      r.class_label = i % 2;
      r.embedding = {far_value, far_value + i};
      s.train_data.rows.push_back(std::move(r));
    }
    s.local_clusters.k = 2;
    s.local_clusters.centroids = {{0.0, 0.0}, {far_value, far_value}};
    s.shard_index.resize(2);
    for (int i = 0; i < 12; ++i) s.shard_index[0].push_back(i);
    for (int i = 12; i < 24; ++i) s.shard_index[1].push_back(i);
    return s;
  };

  const ClientState base = build_state(50.0);
  const ClientState edited = build_state(80.0);  // other shard differs wildly

  Assignment assign;
  assign.client_id = 0;
  assign.global_cluster = 3;
  assign.centroid = {0.1, -0.1};  // nearest to shard 0
  assign.adapter = init_adapter(2, 2, 3);

  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.steps_per_round = 30;
  cfg.seed = 12;

  const TrainResult r1 = train_assignment(base, assign, cfg);
  const TrainResult r2 = train_assignment(edited, assign, cfg);
  CHECK(r1.client_id == 0);
  CHECK(r1.global_cluster == 3);
  CHECK(r1.sample_count == 12);
  CHECK(adapters_equal(r1.adapter, r2.adapter));  // foreign rows are invisible
  CHECK(r1.adapter.steps_trained == 30);
}

TEST_CASE("train_assignment with zero rate returns the adapter unchanged") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Single));
  const ClientState state = client_setup(ds.clients[0].train, 1, 4, 3);
  Assignment assign;
  assign.client_id = 0;
  assign.global_cluster = 0;
  assign.centroid = state.local_clusters.centroids[0];
  assign.adapter = init_adapter(32, 4, 0);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.seed = 1;
  const TrainResult res = train_assignment(state, assign, cfg);
  CHECK(adapters_equal(res.adapter, assign.adapter));
  CHECK(res.sample_count == 120);  // single shard holds the whole dataset
}

TEST_CASE("local clustering stays frozen through training") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Dual));
  ClientState state = client_setup(ds.clients[1].train, 2, 4, 5);
  const std::vector<Vec> before = state.local_clusters.centroids;
  const std::vector<std::vector<int>> shards_before = state.shard_index;
  Assignment assign;
  assign.client_id = state.client_id;
  assign.global_cluster = 0;
  assign.centroid = state.local_clusters.centroids[0];
  assign.adapter = init_adapter(32, 4, 0);
  TrainConfig cfg;
  cfg.seed = 8;
  (void)train_assignment(state, assign, cfg);
  CHECK(state.local_clusters.centroids == before);
  CHECK(state.shard_index == shards_before);
}
