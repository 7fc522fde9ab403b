#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedrouter/types.hpp"

namespace fedrouter {

enum class Scenario { Single, Dual, All };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

struct TaskSpec {
  int task_id = 0;
  Vec center;
  int class_count = 0;
  std::vector<Vec> class_offsets;  // one per class label
  double noise_sigma = 1.0;
  int conflict_group = 0;
};

struct ScenarioConfig {
  Scenario scenario = Scenario::Single;
  int n_clients = 8;
  int n_tasks = 4;
  int train_per_client = 600;
  int test_per_client = 300;
  int dim = 32;
  double separation = 10.0;
  bool conflict = false;
  std::uint64_t master_seed = 1;
  double noise_sigma = 1.0;
  int class_count = 4;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<int> task_set;
  EmbeddingMatrix train;
  EmbeddingMatrix test;
};

struct FederationDataset {
  ScenarioConfig config;
  std::vector<TaskSpec> tasks;
  std::vector<ClientDataset> clients;
};

// Deterministic task geometry: centers on scaled coordinate axes (pairwise
// distance exactly `separation`), class offsets on two per-task axes that
// are orthogonal to every center. Tasks in the same conflict group share
// offset axes with a cyclically shifted label mapping, so no single linear
// model can fit both members of a group.
std::vector<TaskSpec> make_task_specs(const ScenarioConfig& cfg);

std::vector<EmbeddingRow> generate_task(const TaskSpec& spec, int n,
                                        std::uint64_t seed);

// Which tasks each client holds, per scenario. Single: client i gets task
// i / (n_clients / n_tasks). Dual: ring pairs {s, s+1 mod T} with the same
// grouping. All: every task.
std::vector<std::vector<int>> task_sets_for_scenario(Scenario scenario,
                                                     int n_clients,
                                                     int n_tasks);

FederationDataset build_scenario(const ScenarioConfig& cfg);

EmbeddingMatrix import_embeddings(const std::string& path);

// Writer for the same CSV contract; `clusters` (optional, may be empty)
// adds a trailing cluster column that import_embeddings tolerates.
void write_embeddings_csv(const EmbeddingMatrix& matrix,
                          const std::vector<int>& clusters,
                          const std::string& path,
                          const std::string& header_comment);

}  // namespace fedrouter
