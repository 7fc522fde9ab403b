#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedrouter/adapter.hpp"
#include "fedrouter/clustering.hpp"
#include "fedrouter/datagen.hpp"

using namespace fedrouter;

namespace {

ScenarioConfig small_config(Scenario s) {
  ScenarioConfig cfg;
  cfg.scenario = s;
  cfg.n_clients = 8;
  cfg.n_tasks = 4;
  cfg.train_per_client = 120;
  cfg.test_per_client = 60;
  cfg.dim = 32;
  cfg.master_seed = 1;
  return cfg;
}

bool rows_equal(const std::vector<EmbeddingRow>& a,
                const std::vector<EmbeddingRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].class_label != b[i].class_label) return false;
    if (a[i].task_id != b[i].task_id) return false;
    if (a[i].embedding != b[i].embedding) return false;
  }
  return true;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("scenario names round-trip") {
  for (Scenario s : {Scenario::Single, Scenario::Dual, Scenario::All})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scenario_from_string("triple"), std::invalid_argument);
}

TEST_CASE("task centers are pairwise separated by exactly the configured distance") {
  ScenarioConfig cfg = small_config(Scenario::All);
  const std::vector<TaskSpec> specs = make_task_specs(cfg);
  REQUIRE(specs.size() == 4);
  for (std::size_t a = 0; a < specs.size(); ++a)
    for (std::size_t b = a + 1; b < specs.size(); ++b)
      CHECK(distance(specs[a].center, specs[b].center) ==
            doctest::Approx(cfg.separation).epsilon(1e-12));
}

TEST_CASE("class offsets are orthogonal to all task centers and distinct per class") {
  ScenarioConfig cfg = small_config(Scenario::All);
  const std::vector<TaskSpec> specs = make_task_specs(cfg);
  for (const TaskSpec& spec : specs) {
    REQUIRE(static_cast<int>(spec.class_offsets.size()) == cfg.class_count);
    for (const Vec& off : spec.class_offsets) {
      // Offsets live on axes beyond the first n_tasks coordinates, so the
      // dot product with every center (supported on axis task_id) is zero.
      for (const TaskSpec& other : specs) {
        double dot = 0.0;
        for (std::size_t j = 0; j < off.size(); ++j)
          dot += off[j] * other.center[j];
        CHECK(dot == doctest::Approx(0.0).epsilon(1e-12));
      }
    }
    for (int a = 0; a < cfg.class_count; ++a)
      for (int b = a + 1; b < cfg.class_count; ++b)
        CHECK(distance(spec.class_offsets[static_cast<std::size_t>(a)],
                       spec.class_offsets[static_cast<std::size_t>(b)]) > 0.5);
  }
}

TEST_CASE("dimension guard rejects embeddings too small for the geometry") {
  ScenarioConfig cfg = small_config(Scenario::All);
  cfg.dim = 5;  // needs 4 center axes + 2 offset axes per conflict group
  CHECK_THROWS_AS(make_task_specs(cfg), std::invalid_argument);
}

TEST_CASE("zero noise produces rows exactly at center plus class offset") {
  TaskSpec spec;
  spec.task_id = 0;
  spec.center = {2.0, 0.0, 0.0};
  spec.class_count = 2;
  spec.class_offsets = {{0.0, 1.0, 0.0}, {0.0, -1.0, 0.0}};
  spec.noise_sigma = 0.0;
  const std::vector<EmbeddingRow> rows = generate_task(spec, 50, 9);
  REQUIRE(rows.size() == 50);
  for (const EmbeddingRow& r : rows) {
    CHECK(r.task_id == 0);
    REQUIRE((r.class_label == 0 || r.class_label == 1));
    const double off = r.class_label == 0 ? 1.0 : -1.0;
    CHECK(r.embedding[0] == 2.0);
    CHECK(r.embedding[1] == off);
    CHECK(r.embedding[2] == 0.0);
  }
}

TEST_CASE("generate_task is deterministic in the seed") {
  ScenarioConfig cfg = small_config(Scenario::All);
  const TaskSpec spec = make_task_specs(cfg)[1];
  CHECK(rows_equal(generate_task(spec, 100, 5), generate_task(spec, 100, 5)));
  CHECK_FALSE(rows_equal(generate_task(spec, 100, 5), generate_task(spec, 100, 6)));
}

TEST_CASE("noise has the configured per-coordinate statistics") {
  ScenarioConfig cfg = small_config(Scenario::All);
  const TaskSpec spec = make_task_specs(cfg)[0];
  const int n = 2000;
  const std::vector<EmbeddingRow> rows = generate_task(spec, n, 3);
  // Mean residual (row - center - offset[label]) should vanish like
  // sigma/sqrt(n) per coordinate; allow 4 sigma.
  Vec residual_sum(static_cast<std::size_t>(cfg.dim), 0.0);
  for (const EmbeddingRow& r : rows)
    for (int j = 0; j < cfg.dim; ++j)
      residual_sum[static_cast<std::size_t>(j)] +=
          r.embedding[static_cast<std::size_t>(j)] -
          spec.center[static_cast<std::size_t>(j)] -
          spec.class_offsets[static_cast<std::size_t>(r.class_label)]
                            [static_cast<std::size_t>(j)];
  for (double s : residual_sum)
    CHECK(std::abs(s / n) < 4.0 * spec.noise_sigma / std::sqrt(static_cast<double>(n)));
  // Labels are drawn uniformly: each class within 5 sigma of n/C.
  std::vector<int> label_counts(static_cast<std::size_t>(cfg.class_count), 0);
  for (const EmbeddingRow& r : rows)
    ++label_counts[static_cast<std::size_t>(r.class_label)];
  const double expected = static_cast<double>(n) / cfg.class_count;
  for (int c : label_counts)
    CHECK(std::abs(c - expected) < 5.0 * std::sqrt(expected));
}

TEST_CASE("task layout per scenario") {
  const auto single = task_sets_for_scenario(Scenario::Single, 8, 4);
  REQUIRE(single.size() == 8);
  CHECK(single[0] == std::vector<int>{0});
  CHECK(single[1] == std::vector<int>{0});
  CHECK(single[2] == std::vector<int>{1});
  CHECK(single[7] == std::vector<int>{3});

  const auto dual = task_sets_for_scenario(Scenario::Dual, 8, 4);
  CHECK(dual[0] == std::vector<int>{0, 1});
  CHECK(dual[1] == std::vector<int>{0, 1});
  CHECK(dual[2] == std::vector<int>{1, 2});
  CHECK(dual[6] == std::vector<int>{3, 0});  // ring wraps around

  const auto all = task_sets_for_scenario(Scenario::All, 8, 4);
  for (const auto& ts : all) CHECK(ts == std::vector<int>{0, 1, 2, 3});

  CHECK_THROWS_AS(task_sets_for_scenario(Scenario::Single, 7, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(task_sets_for_scenario(Scenario::Dual, 10, 4),
                  std::invalid_argument);
}

TEST_CASE("build_scenario fills per-client counts and splits tasks evenly") {
  FederationDataset ds = build_scenario(small_config(Scenario::All));
  REQUIRE(ds.clients.size() == 8);
  for (const ClientDataset& c : ds.clients) {
    CHECK(static_cast<int>(c.train.rows.size()) == 120);
    CHECK(static_cast<int>(c.test.rows.size()) == 60);
    CHECK(c.train.client_id == c.client_id);
    std::vector<int> per_task(4, 0);
    for (const EmbeddingRow& r : c.train.rows)
      ++per_task[static_cast<std::size_t>(r.task_id)];
    for (int n : per_task) CHECK(n == 30);
  }
  CHECK_THROWS_AS(
      [] {
        ScenarioConfig bad = small_config(Scenario::Dual);
        bad.train_per_client = 121;  // not divisible by |task_set| = 2
        return build_scenario(bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("build_scenario is deterministic and seed-sensitive") {
  const FederationDataset a = build_scenario(small_config(Scenario::Dual));
  const FederationDataset b = build_scenario(small_config(Scenario::Dual));
  ScenarioConfig other = small_config(Scenario::Dual);
  other.master_seed = 2;
  const FederationDataset c = build_scenario(other);
  for (std::size_t i = 0; i < a.clients.size(); ++i) {
    CHECK(rows_equal(a.clients[i].train.rows, b.clients[i].train.rows));
    CHECK(rows_equal(a.clients[i].test.rows, b.clients[i].test.rows));
  }
  CHECK_FALSE(rows_equal(a.clients[0].train.rows, c.clients[0].train.rows));
}

TEST_CASE("clients sharing a task draw distinct samples") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Single));
  // Clients 0 and 1 both hold task 0 but must not see identical rows.
  CHECK_FALSE(rows_equal(ds.clients[0].train.rows, ds.clients[1].train.rows));
  // Train and test splits of one client are disjoint draws.
  CHECK_FALSE(rows_equal(
      ds.clients[0].train.rows,
      {ds.clients[0].test.rows.begin(), ds.clients[0].test.rows.end()}));
}

TEST_CASE("tasks are linearly identifiable by nearest center at default separation") {
  ScenarioConfig cfg = small_config(Scenario::All);
  const FederationDataset ds = build_scenario(cfg);
  std::vector<Vec> centers;
  for (const TaskSpec& t : ds.tasks) centers.push_back(t.center);
  int correct = 0, total = 0;
  for (const ClientDataset& c : ds.clients)
    for (const EmbeddingRow& r : c.test.rows) {
      ++total;
      if (assign_nearest(r.embedding, centers).first == r.task_id) ++correct;
    }
  CHECK(correct == total);  // separation 10 vs noise sigma 1 in 32 dims
}

TEST_CASE("conflict groups share offset geometry under a shifted label map") {
  ScenarioConfig cfg = small_config(Scenario::All);
  cfg.conflict = true;
  const std::vector<TaskSpec> specs = make_task_specs(cfg);
  // Tasks 0 and 1 form a group: same offset vectors as sets, but the label
  // that owns each vector differs, so one linear map cannot fit both.
  auto as_set = [](const TaskSpec& t) {
    std::set<std::vector<double>> s;
    for (const Vec& o : t.class_offsets) s.insert(o);
    return s;
  };
  CHECK(as_set(specs[0]) == as_set(specs[1]));
  CHECK(as_set(specs[2]) == as_set(specs[3]));
  CHECK(as_set(specs[0]) != as_set(specs[2]));
  int moved = 0;
  for (int c = 0; c < cfg.class_count; ++c)
    if (specs[0].class_offsets[static_cast<std::size_t>(c)] !=
        specs[1].class_offsets[static_cast<std::size_t>(c)])
      ++moved;
  CHECK(moved == cfg.class_count);  // every label's offset is reassigned
  // Without conflict, groups are {t}: offsets of different tasks never collide.
  cfg.conflict = false;
  const std::vector<TaskSpec> plain = make_task_specs(cfg);
  CHECK(as_set(plain[0]) != as_set(plain[1]));
}

TEST_CASE("one adapter fits a single task but not a conflicted pair") {
  ScenarioConfig cfg = small_config(Scenario::All);
  cfg.conflict = true;
  const std::vector<TaskSpec> specs = make_task_specs(cfg);
  const std::vector<EmbeddingRow> rows0 = generate_task(specs[0], 300, 21);
  const std::vector<EmbeddingRow> rows1 = generate_task(specs[1], 300, 22);

  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.steps_per_round = 400;
  tc.batch_size = 16;
  tc.seed = 3;

  AdapterParams solo = init_adapter(cfg.dim, cfg.class_count, 0);
  solo = train_sgd(solo, rows0, tc);
  const double solo_acc = evaluate(solo, rows0).accuracy;

  std::vector<EmbeddingRow> pooled = rows0;
  pooled.insert(pooled.end(), rows1.begin(), rows1.end());
  AdapterParams mixed = init_adapter(cfg.dim, cfg.class_count, 0);
  mixed = train_sgd(mixed, pooled, tc);
  const double mixed_acc = evaluate(mixed, pooled).accuracy;

  CHECK(solo_acc >= 0.95);
  CHECK(mixed_acc <= solo_acc - 0.15);  // conflicting label maps cap pooled fit
}

TEST_CASE("embedding CSV round-trips exactly") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Dual));
  const EmbeddingMatrix& m = ds.clients[2].train;
  const auto path = temp_file("fedrouter_test_roundtrip.csv");
  write_embeddings_csv(m, {}, path.string(), "round-trip test");
  const EmbeddingMatrix back = import_embeddings(path.string());
  CHECK(back.dim == m.dim);
  REQUIRE(back.rows.size() == m.rows.size());
  CHECK(rows_equal(back.rows, m.rows));
  std::filesystem::remove(path);
}

TEST_CASE("embedding CSV with cluster column still imports") {
  const FederationDataset ds = build_scenario(small_config(Scenario::Single));
  const EmbeddingMatrix& m = ds.clients[0].train;
  std::vector<int> clusters(m.rows.size(), 1);
  const auto path = temp_file("fedrouter_test_cluster_col.csv");
  write_embeddings_csv(m, clusters, path.string(), "");
  const EmbeddingMatrix back = import_embeddings(path.string());
  CHECK(rows_equal(back.rows, m.rows));
  std::filesystem::remove(path);
}

TEST_CASE("import rejects malformed files") {
  const auto path = temp_file("fedrouter_test_bad.csv");
  auto write_text = [&](const std::string& text) {
    std::ofstream out(path);
    out << text;
  };

  write_text("");
  CHECK_THROWS_AS(import_embeddings(path.string()), std::runtime_error);

  write_text("task,label,e0\n0,0,1.0\n");  // wrong header spelling
  CHECK_THROWS_AS(import_embeddings(path.string()), std::runtime_error);

  write_text("task_id,label,e0,e1\n0,0,1.0\n");  // ragged row
  CHECK_THROWS_AS(import_embeddings(path.string()), std::runtime_error);

  write_text("task_id,label,e0,e1\n0,0,1.0,nope\n");  // non-numeric cell
  CHECK_THROWS_AS(import_embeddings(path.string()), std::runtime_error);

  write_text("task_id,label,e0,e1\n");  // header only, no data
  CHECK_THROWS_AS(import_embeddings(path.string()), std::runtime_error);

  CHECK_THROWS_AS(import_embeddings((path.string() + ".missing")),
                  std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("import skips comment lines") {
  const auto path = temp_file("fedrouter_test_comments.csv");
  {
    std::ofstream out(path);
    out << "# produced by a tool\n";
    out << "task_id,label,e0,e1\n";
    out << "2,1,0.5,-0.25\n";
  }
  const EmbeddingMatrix m = import_embeddings(path.string());
  REQUIRE(m.rows.size() == 1);
  CHECK(m.rows[0].task_id == 2);
  CHECK(m.rows[0].class_label == 1);
  CHECK(m.rows[0].embedding == Vec{0.5, -0.25});
  std::filesystem::remove(path);
}
