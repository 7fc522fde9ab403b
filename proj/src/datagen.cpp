#include "fedrouter/datagen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedrouter/rng.hpp"

namespace fedrouter {

namespace {

constexpr double kClassOffsetScale = 3.5;

void validate(const ScenarioConfig& cfg) {
  if (cfg.n_clients < 1) throw std::invalid_argument("n_clients must be >= 1");
  if (cfg.n_tasks < 1) throw std::invalid_argument("n_tasks must be >= 1");
  if (cfg.train_per_client < 1 || cfg.test_per_client < 1)
    throw std::invalid_argument("per-client sample counts must be >= 1");
  if (cfg.separation <= 0.0)
    throw std::invalid_argument("separation must be positive");
  if (cfg.noise_sigma < 0.0)
    throw std::invalid_argument("noise_sigma must be >= 0");
  if (cfg.class_count < 2)
    throw std::invalid_argument("class_count must be >= 2");
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error("non-numeric field '" + field + "' in " + context);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Single: return "single";
    case Scenario::Dual: return "dual";
    case Scenario::All: return "all";
  }
  throw std::logic_error("unreachable scenario");
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "single") return Scenario::Single;
  if (name == "dual") return Scenario::Dual;
  if (name == "all") return Scenario::All;
  throw std::invalid_argument("unknown scenario '" + name +
                              "' (expected single|dual|all)");
}

std::vector<TaskSpec> make_task_specs(const ScenarioConfig& cfg) {
  validate(cfg);
  const int T = cfg.n_tasks;
  const int C = cfg.class_count;
  // Offset axes: two per offset group, placed after the T center axes.
  // Without conflict every task is its own group; with conflict tasks pair
  // up as {0,1},{2,3},... and each pair shares its axes.
  const int group_of_last = cfg.conflict ? (T - 1) / 2 : T - 1;
  const int needed = T + 2 * (group_of_last + 1);
  if (cfg.dim < needed)
    throw std::invalid_argument("dim=" + std::to_string(cfg.dim) +
                                " too small for " + std::to_string(T) +
                                " tasks (need >= " + std::to_string(needed) +
                                ")");

  const double center_scale = cfg.separation / std::sqrt(2.0);
  const double d = kClassOffsetScale;
  std::vector<TaskSpec> specs;
  specs.reserve(T);
  for (int t = 0; t < T; ++t) {
    TaskSpec spec;
    spec.task_id = t;
    spec.noise_sigma = cfg.noise_sigma;
    spec.class_count = C;
    spec.conflict_group = cfg.conflict ? t / 2 : t;
    spec.center.assign(cfg.dim, 0.0);
    spec.center[t] = center_scale;

    const int axis_a = T + 2 * spec.conflict_group;
    const int axis_b = axis_a + 1;
    // Group members see the same physical offsets; the label that owns a
    // given offset is cyclically shifted between members, which is what
    // makes a single shared linear adapter unable to fit the whole group.
    int shift = 0;
    if (cfg.conflict) {
      const int rank = t % 2;
      shift = (C % 2 == 0) ? rank * (C / 2) : rank;
    }
    spec.class_offsets.assign(C, Vec(cfg.dim, 0.0));
    for (int label = 0; label < C; ++label) {
      const int region = (label + shift) % C;
      const double angle = 2.0 * 3.14159265358979323846 * region / C;
      spec.class_offsets[label][axis_a] = d * std::cos(angle);
      spec.class_offsets[label][axis_b] = d * std::sin(angle);
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<EmbeddingRow> generate_task(const TaskSpec& spec, int n,
                                        std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("generate_task: n must be positive");
  if (spec.class_count < 1 ||
      static_cast<int>(spec.class_offsets.size()) != spec.class_count)
    throw std::invalid_argument("generate_task: offsets/class_count mismatch");
  if (spec.noise_sigma < 0.0)
    throw std::invalid_argument("generate_task: noise_sigma must be >= 0");
  const std::size_t dim = spec.center.size();
  for (const Vec& off : spec.class_offsets)
    if (off.size() != dim)
      throw std::invalid_argument("generate_task: offset dimension mismatch");

  Rng rng(seed);
  std::vector<EmbeddingRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label =
        static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.class_count)));
    EmbeddingRow row;
    row.task_id = spec.task_id;
    row.class_label = label;
    row.embedding.resize(dim);
    const Vec& off = spec.class_offsets[label];
    for (std::size_t j = 0; j < dim; ++j)
      row.embedding[j] =
          spec.center[j] + off[j] + spec.noise_sigma * rng.normal();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::vector<int>> task_sets_for_scenario(Scenario scenario,
                                                     int n_clients,
                                                     int n_tasks) {
  if (n_clients < 1 || n_tasks < 1)
    throw std::invalid_argument("client/task counts must be >= 1");
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(n_clients));
  if (scenario == Scenario::All) {
    for (auto& s : sets) {
      s.resize(static_cast<std::size_t>(n_tasks));
      for (int t = 0; t < n_tasks; ++t) s[static_cast<std::size_t>(t)] = t;
    }
    return sets;
  }
  if (n_clients % n_tasks != 0)
    throw std::invalid_argument(
        "indivisible client/task layout: n_clients must be a multiple of "
        "n_tasks for single/dual scenarios");
  const int group_size = n_clients / n_tasks;
  for (int i = 0; i < n_clients; ++i) {
    const int s = i / group_size;
    if (scenario == Scenario::Single) {
      sets[static_cast<std::size_t>(i)] = {s};
    } else {
      sets[static_cast<std::size_t>(i)] = {s, (s + 1) % n_tasks};
    }
  }
  return sets;
}

FederationDataset build_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  FederationDataset ds;
  ds.config = cfg;
  ds.tasks = make_task_specs(cfg);
  const auto sets =
      task_sets_for_scenario(cfg.scenario, cfg.n_clients, cfg.n_tasks);

  ds.clients.reserve(static_cast<std::size_t>(cfg.n_clients));
  for (int i = 0; i < cfg.n_clients; ++i) {
    const auto& task_set = sets[static_cast<std::size_t>(i)];
    const int per = static_cast<int>(task_set.size());
    if (cfg.train_per_client % per != 0 || cfg.test_per_client % per != 0)
      throw std::invalid_argument(
          "per-client sample counts must divide evenly across " +
          std::to_string(per) + " tasks");
    ClientDataset client;
    client.client_id = i;
    client.task_set = task_set;
    client.train.client_id = i;
    client.train.dim = cfg.dim;
    client.test.client_id = i;
    client.test.dim = cfg.dim;
    for (int t : task_set) {
      const TaskSpec& spec = ds.tasks[static_cast<std::size_t>(t)];
      auto train_rows = generate_task(
          spec, cfg.train_per_client / per,
          derive_seed(cfg.master_seed,
                      {seed_tag::kData, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(t), 0}));
      auto test_rows = generate_task(
          spec, cfg.test_per_client / per,
          derive_seed(cfg.master_seed,
                      {seed_tag::kData, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(t), 1}));
      for (auto& r : train_rows) client.train.rows.push_back(std::move(r));
      for (auto& r : test_rows) client.test.rows.push_back(std::move(r));
    }
    ds.clients.push_back(std::move(client));
  }
  return ds;
}

EmbeddingMatrix import_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  std::string line;
  // Skip comment lines, find the header.
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.size() < 3 || header[0] != "task_id" || header[1] != "label")
    throw std::runtime_error(
        "embeddings header must start with task_id,label,e0,... in " + path);
  bool has_cluster = false;
  std::size_t dim = header.size() - 2;
  if (header.back() == "cluster") {
    has_cluster = true;
    dim -= 1;
  }
  if (dim == 0) throw std::runtime_error("no embedding columns in " + path);
  for (std::size_t j = 0; j < dim; ++j)
    if (header[2 + j] != "e" + std::to_string(j))
      throw std::runtime_error("unexpected embedding column '" +
                               header[2 + j] + "' in " + path);

  EmbeddingMatrix m;
  m.dim = static_cast<int>(dim);
  const std::size_t expected = header.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected)
      throw std::runtime_error("ragged row (line " + std::to_string(line_no) +
                               ") in " + path);
    const std::string ctx = path + ":" + std::to_string(line_no);
    EmbeddingRow row;
    row.task_id = static_cast<int>(parse_double(fields[0], ctx));
    row.class_label = static_cast<int>(parse_double(fields[1], ctx));
    row.embedding.resize(dim);
    for (std::size_t j = 0; j < dim; ++j)
      row.embedding[j] = parse_double(fields[2 + j], ctx);
    if (has_cluster) parse_double(fields.back(), ctx);  // validated, ignored
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) throw std::runtime_error("empty embeddings file: " + path);
  return m;
}

void write_embeddings_csv(const EmbeddingMatrix& matrix,
                          const std::vector<int>& clusters,
                          const std::string& path,
                          const std::string& header_comment) {
  if (!clusters.empty() && clusters.size() != matrix.rows.size())
    throw std::invalid_argument("cluster column length mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "task_id,label";
  for (int j = 0; j < matrix.dim; ++j) out << ",e" << j;
  if (!clusters.empty()) out << ",cluster";
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
    const EmbeddingRow& row = matrix.rows[i];
    out << row.task_id << "," << row.class_label;
    for (double v : row.embedding) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << "," << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      (void)ec;
    }
    if (!clusters.empty()) out << "," << clusters[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fedrouter
