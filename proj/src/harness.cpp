#include "fedrouter/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fedrouter/baselines.hpp"
#include "fedrouter/router.hpp"
#include "fedrouter/rng.hpp"

namespace fedrouter {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::set<std::string> kKnownMethods = {
    "fedrouter", "fedrouter-star", "fedavg", "local", "fedcluster"};

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

template <class T>
T get_field(json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  T v = j.at(key).get<T>();
  j.erase(key);
  return v;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

  RunConfig cfg;
  try {
    cfg.methods = get_field<std::vector<std::string>>(j, "methods", cfg.methods);
    cfg.scenarios =
        get_field<std::vector<std::string>>(j, "scenarios", cfg.scenarios);
    cfg.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
    cfg.n_clients = get_field<int>(j, "n_clients", cfg.n_clients);
    cfg.n_tasks = get_field<int>(j, "n_tasks", cfg.n_tasks);
    cfg.rounds = get_field<int>(j, "rounds", cfg.rounds);
    cfg.train_per_client =
        get_field<int>(j, "train_per_client", cfg.train_per_client);
    cfg.test_per_client =
        get_field<int>(j, "test_per_client", cfg.test_per_client);
    cfg.dim = get_field<int>(j, "dim", cfg.dim);
    cfg.separation = get_field<double>(j, "separation", cfg.separation);
    cfg.noise_sigma = get_field<double>(j, "noise_sigma", cfg.noise_sigma);
    cfg.class_count = get_field<int>(j, "class_count", cfg.class_count);
    cfg.conflict = get_field<bool>(j, "conflict", cfg.conflict);

    if (j.contains("n_g")) {
      if (j.at("n_g").is_string()) {
        if (j.at("n_g").get<std::string>() != "auto")
          throw std::invalid_argument("n_g must be an integer or \"auto\"");
        cfg.n_g_auto = true;
      } else {
        cfg.n_g = j.at("n_g").get<int>();
        cfg.n_g_auto = false;
      }
      j.erase("n_g");
    }
    if (j.contains("n_l")) {
      if (j.at("n_l").is_string()) {
        const std::string s = j.at("n_l").get<std::string>();
        if (s == "scripted") {
          cfg.n_l_policy = LocalKPolicy::Scripted;
        } else if (s == "auto") {
          cfg.n_l_policy = LocalKPolicy::Auto;
        } else {
          throw std::invalid_argument(
              "n_l must be an integer, \"scripted\", or \"auto\"");
        }
      } else {
        cfg.n_l_policy = LocalKPolicy::Fixed;
        cfg.n_l_fixed = j.at("n_l").get<int>();
      }
      j.erase("n_l");
    }
    if (j.contains("eval_mode")) {
      const std::string s = j.at("eval_mode").get<std::string>();
      if (s == "local") {
        cfg.eval_mode = EvalMode::Local;
      } else if (s == "global") {
        cfg.eval_mode = EvalMode::Global;
      } else {
        throw std::invalid_argument("eval_mode must be local or global");
      }
      j.erase("eval_mode");
    }
    if (j.contains("aggregation")) {
      const std::string s = j.at("aggregation").get<std::string>();
      if (s == "uniform") {
        cfg.aggregation = Aggregation::Uniform;
      } else if (s == "sample_weighted") {
        cfg.aggregation = Aggregation::SampleWeighted;
      } else {
        throw std::invalid_argument(
            "aggregation must be uniform or sample_weighted");
      }
      j.erase("aggregation");
    }

    cfg.learning_rate = get_field<double>(j, "learning_rate", cfg.learning_rate);
    cfg.steps_per_round =
        get_field<int>(j, "steps_per_round", cfg.steps_per_round);
    cfg.batch_size = get_field<int>(j, "batch_size", cfg.batch_size);
    cfg.out_dir = get_field<std::string>(j, "out_dir", cfg.out_dir);
    cfg.routing_dump = get_field<bool>(j, "routing_dump", cfg.routing_dump);
    cfg.export_embeddings =
        get_field<bool>(j, "export_embeddings", cfg.export_embeddings);
    cfg.save_adapters = get_field<bool>(j, "save_adapters", cfg.save_adapters);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }

  if (!j.empty()) {
    std::string keys;
    for (const auto& [k, v] : j.items()) {
      if (!keys.empty()) keys += ", ";
      keys += k;
    }
    throw std::invalid_argument("unknown config key(s): " + keys);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const RunConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("methods is empty");
  for (const std::string& m : cfg.methods)
    if (!kKnownMethods.count(m))
      throw std::invalid_argument("unknown method '" + m + "'");
  if (cfg.scenarios.empty()) throw std::invalid_argument("scenarios is empty");
  for (const std::string& s : cfg.scenarios) scenario_from_string(s);
  if (cfg.seeds.empty()) throw std::invalid_argument("seeds is empty");
  if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("learning_rate must be positive");
  if (cfg.steps_per_round < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("steps_per_round and batch_size must be >= 1");
  if (!cfg.n_g_auto && cfg.n_g < 1)
    throw std::invalid_argument("n_g must be >= 1 or \"auto\"");
  if (cfg.n_l_policy == LocalKPolicy::Fixed && cfg.n_l_fixed < 1)
    throw std::invalid_argument("fixed n_l must be >= 1");
  // Scenario-level checks (dims, divisibility) run per cell via
  // build_scenario; validate the shared knobs here.
  if (cfg.n_clients < 1 || cfg.n_tasks < 1)
    throw std::invalid_argument("n_clients and n_tasks must be >= 1");
  if (cfg.train_per_client < 1 || cfg.test_per_client < 1)
    throw std::invalid_argument("sample counts must be >= 1");
  if (cfg.separation <= 0) throw std::invalid_argument("separation must be > 0");
  if (cfg.noise_sigma < 0) throw std::invalid_argument("noise_sigma must be >= 0");
  if (cfg.class_count < 2) throw std::invalid_argument("class_count must be >= 2");
  if (cfg.out_dir.empty()) throw std::invalid_argument("out_dir is empty");
}

namespace {

// Everything that determines the numbers; output paths and dump toggles are
// deliberately excluded so the hash identifies the experiment itself.
json config_to_json(const RunConfig& cfg) {
  json j;  // std::map-backed: keys serialize in sorted order (canonical)
  j["methods"] = cfg.methods;
  j["scenarios"] = cfg.scenarios;
  j["seeds"] = cfg.seeds;
  j["n_clients"] = cfg.n_clients;
  j["n_tasks"] = cfg.n_tasks;
  j["rounds"] = cfg.rounds;
  j["train_per_client"] = cfg.train_per_client;
  j["test_per_client"] = cfg.test_per_client;
  j["dim"] = cfg.dim;
  j["separation"] = cfg.separation;
  j["noise_sigma"] = cfg.noise_sigma;
  j["class_count"] = cfg.class_count;
  j["conflict"] = cfg.conflict;
  if (cfg.n_g_auto) {
    j["n_g"] = "auto";
  } else {
    j["n_g"] = cfg.n_g;
  }
  switch (cfg.n_l_policy) {
    case LocalKPolicy::Scripted: j["n_l"] = "scripted"; break;
    case LocalKPolicy::Auto: j["n_l"] = "auto"; break;
    case LocalKPolicy::Fixed: j["n_l"] = cfg.n_l_fixed; break;
  }
  j["eval_mode"] = cfg.eval_mode == EvalMode::Local ? "local" : "global";
  j["aggregation"] =
      cfg.aggregation == Aggregation::Uniform ? "uniform" : "sample_weighted";
  j["learning_rate"] = cfg.learning_rate;
  j["steps_per_round"] = cfg.steps_per_round;
  j["batch_size"] = cfg.batch_size;
  return j;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

ScenarioConfig scenario_config_for(const RunConfig& cfg,
                                   const std::string& scenario,
                                   std::uint64_t seed) {
  ScenarioConfig sc;
  sc.scenario = scenario_from_string(scenario);
  sc.n_clients = cfg.n_clients;
  sc.n_tasks = cfg.n_tasks;
  sc.train_per_client = cfg.train_per_client;
  sc.test_per_client = cfg.test_per_client;
  sc.dim = cfg.dim;
  sc.separation = cfg.separation;
  sc.conflict = cfg.conflict;
  sc.master_seed = seed;
  sc.noise_sigma = cfg.noise_sigma;
  sc.class_count = cfg.class_count;
  return sc;
}

FederationConfig federation_config_for(const RunConfig& cfg,
                                       const std::string& method,
                                       std::uint64_t seed) {
  FederationConfig fc;
  fc.n_clients = cfg.n_clients;
  fc.rounds = cfg.rounds;
  fc.n_g = cfg.n_g;
  fc.n_g_auto = cfg.n_g_auto;
  fc.mode = method == "fedrouter-star" ? ScheduleMode::Star
                                       : ScheduleMode::Standard;
  fc.aggregation = cfg.aggregation;
  fc.master_seed = seed;
  fc.eval_mode = cfg.eval_mode;
  fc.n_l_policy = cfg.n_l_policy;
  fc.n_l_fixed = cfg.n_l_fixed;
  return fc;
}

TrainConfig train_config_for(const RunConfig& cfg) {
  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.steps_per_round = cfg.steps_per_round;
  tc.batch_size = cfg.batch_size;
  return tc;
}

namespace {

std::string seeds_csv(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(seeds[i]);
  }
  return s;
}

ordered_json round_record(const std::string& method,
                          const std::string& scenario, std::uint64_t seed,
                          const RoundMetrics& m) {
  ordered_json rec;
  rec["method"] = method;
  rec["scenario"] = scenario;
  rec["seed"] = seed;
  rec["round"] = m.round;
  rec["overall_acc"] = m.overall_acc;
  if (std::isnan(m.routing_acc)) {
    rec["routing_acc"] = nullptr;
  } else {
    rec["routing_acc"] = m.routing_acc;
  }
  rec["loss"] = m.mean_loss;
  ordered_json pt = ordered_json::object();
  for (const auto& [task, acc] : m.per_task_acc)
    pt[std::to_string(task)] = acc;
  rec["per_task_acc"] = pt;
  return rec;
}

struct CellOutput {
  std::vector<RoundMetrics> rounds;
  std::vector<TraceRow> trace;                  // empty for baselines
  std::vector<EvalFragment> final_eval;         // fedrouter methods only
  std::vector<const EmbeddingMatrix*> test_ref; // aligned with final_eval
  std::vector<AdapterParams> adapters;
};

CellOutput run_cell(const RunConfig& cfg, const std::string& method,
                    const std::string& scenario, std::uint64_t seed,
                    const FederationDataset& dataset) {
  const FederationConfig fc = federation_config_for(cfg, method, seed);
  const TrainConfig tc = train_config_for(cfg);
  CellOutput out;
  if (method == "fedrouter" || method == "fedrouter-star") {
    FederationRun run = run_federation(dataset, fc, tc);
    out.rounds = std::move(run.rounds);
    out.trace = std::move(run.trace);
    out.final_eval = std::move(run.final_eval);
    for (const ClientDataset& c : dataset.clients) out.test_ref.push_back(&c.test);
    out.adapters = std::move(run.model.adapters);
  } else if (method == "fedavg") {
    BaselineRun run = run_fedavg(dataset, fc, tc);
    out.rounds = std::move(run.rounds);
    out.adapters = std::move(run.adapters);
  } else if (method == "local") {
    BaselineRun run = run_local_only(dataset, fc, tc);
    out.rounds = std::move(run.rounds);
    out.adapters = std::move(run.adapters);
  } else if (method == "fedcluster") {
    BaselineRun run = run_fedcluster(dataset, fc, tc);
    out.rounds = std::move(run.rounds);
    out.adapters = std::move(run.adapters);
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg, std::ostream* log) {
  validate_config(cfg);
  const std::string hash = config_hash(cfg);
  const std::string header =
      "# config_hash=" + hash + " master_seeds=" + seeds_csv(cfg.seeds);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);

  std::ofstream metrics(out / "metrics.jsonl");
  std::ofstream trace(out / "trace.csv");
  if (!metrics || !trace)
    throw std::runtime_error("cannot write into output dir " + cfg.out_dir);
  metrics << header << "\n";
  trace << header << "\n";
  trace << "round,client_id,global_cluster,mode,samples\n";
  std::ofstream routing;
  if (cfg.routing_dump) {
    routing.open(out / "routing.csv");
    if (!routing) throw std::runtime_error("cannot write routing.csv");
    routing << header << "\n";
    routing << "sample,true_task,mode,chosen_cluster,distance,correct\n";
  }

  ExperimentResult result;
  result.out_dir = cfg.out_dir;
  const std::string mode_name =
      cfg.eval_mode == EvalMode::Local ? "local" : "global";

  for (const std::string& method : cfg.methods) {
    for (const std::string& scenario : cfg.scenarios) {
      std::vector<double> finals;
      for (std::uint64_t seed : cfg.seeds) {
        const FederationDataset dataset =
            build_scenario(scenario_config_for(cfg, scenario, seed));
        CellOutput cell = run_cell(cfg, method, scenario, seed, dataset);

        const std::string run_tag = "# run: method=" + method +
                                    " scenario=" + scenario +
                                    " seed=" + std::to_string(seed);
        for (const RoundMetrics& m : cell.rounds)
          metrics << round_record(method, scenario, seed, m).dump() << "\n";
        metrics.flush();

        if (!cell.trace.empty()) {
          trace << run_tag << "\n";
          for (const TraceRow& row : cell.trace)
            trace << row.round << "," << row.client_id << ","
                  << row.global_cluster << "," << row.mode << ","
                  << row.samples << "\n";
          trace.flush();
        }

        if (cfg.routing_dump && !cell.final_eval.empty()) {
          routing << run_tag << "\n";
          for (std::size_t i = 0; i < cell.final_eval.size(); ++i) {
            const EvalFragment& frag = cell.final_eval[i];
            const EmbeddingMatrix& test = *cell.test_ref[i];
            const int base = static_cast<int>(i) * cfg.test_per_client;
            for (std::size_t s = 0; s < frag.decisions.size(); ++s) {
              const RoutingDecision& d = frag.decisions[s];
              routing << (base + d.sample_index) << ","
                      << test.rows[s].task_id << "," << mode_name << ","
                      << d.centroid_index << "," << fmt(d.distance) << ","
                      << (frag.sample_correct[s] ? 1 : 0) << "\n";
            }
          }
          routing.flush();
        }

        if (cfg.save_adapters) {
          for (const AdapterParams& a : cell.adapters) {
            const std::string name = "adapter_" + method + "_" + scenario +
                                     "_s" + std::to_string(seed) + "_" +
                                     std::to_string(a.adapter_id) + ".csv";
            save_adapter_csv(a, (out / name).string(),
                             "config_hash=" + hash +
                                 " master_seed=" + std::to_string(seed));
          }
        }

        if (!cell.rounds.empty())
          finals.push_back(cell.rounds.back().overall_acc);
        if (log)
          *log << method << "/" << scenario << "/seed" << seed
               << ": final_acc="
               << (cell.rounds.empty() ? std::string("n/a")
                                       : fmt(cell.rounds.back().overall_acc))
               << "\n";
      }
      SummaryRow row;
      row.method = method;
      row.scenario = scenario;
      row.n_seeds = static_cast<int>(finals.size());
      double sum = 0.0;
      for (double v : finals) sum += v;
      row.mean = finals.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : sum / static_cast<double>(finals.size());
      if (finals.size() >= 2) {
        double ss = 0.0;
        for (double v : finals) ss += (v - row.mean) * (v - row.mean);
        row.stddev = std::sqrt(ss / static_cast<double>(finals.size() - 1));
      } else {
        row.stddev = std::numeric_limits<double>::quiet_NaN();
      }
      result.summary.push_back(std::move(row));
    }
  }

  std::ofstream summary(out / "summary.csv");
  if (!summary) throw std::runtime_error("cannot write summary.csv");
  summary << header << "\n";
  summary << "method,scenario,mean,std\n";
  for (const SummaryRow& row : result.summary) {
    summary << row.method << "," << row.scenario << "," << fmt(row.mean) << ",";
    if (!std::isnan(row.stddev)) summary << fmt(row.stddev);
    summary << "\n";
  }

  if (cfg.export_embeddings) {
    for (const std::string& scenario : cfg.scenarios) {
      for (std::uint64_t seed : cfg.seeds) {
        const FederationDataset dataset =
            build_scenario(scenario_config_for(cfg, scenario, seed));
        const FederationConfig fc =
            federation_config_for(cfg, "fedrouter", seed);
        export_embeddings(dataset, fc, cfg.out_dir,
                          "config_hash=" + hash +
                              " master_seed=" + std::to_string(seed));
      }
    }
  }
  return result;
}

void export_embeddings(const FederationDataset& dataset,
                       const FederationConfig& cfg,
                       const std::string& out_dir,
                       const std::string& header_comment) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const std::string scen = to_string(dataset.config.scenario);
  const std::string seed_tag_str = std::to_string(dataset.config.master_seed);
  for (const ClientDataset& client : dataset.clients) {
    int n_l;
    switch (cfg.n_l_policy) {
      case LocalKPolicy::Auto:
      case LocalKPolicy::Scripted:
        n_l = static_cast<int>(client.task_set.size());
        break;
      case LocalKPolicy::Fixed:
      default:
        n_l = cfg.n_l_fixed;
        break;
    }
    const ClientState state = client_setup(
        client.train, n_l, dataset.config.class_count,
        derive_seed(cfg.master_seed,
                    {seed_tag::kLocalCluster,
                     static_cast<std::uint64_t>(client.client_id)}));
    const std::string base = "embeddings_" + scen + "_s" + seed_tag_str +
                             "_client" + std::to_string(client.client_id);
    write_embeddings_csv(state.train_data, state.local_clusters.assignments,
                         (out / (base + "_train.csv")).string(),
                         header_comment);
    std::vector<int> test_clusters;
    test_clusters.reserve(client.test.rows.size());
    for (const EmbeddingRow& row : client.test.rows)
      test_clusters.push_back(
          assign_nearest(row.embedding, state.local_clusters.centroids).first);
    write_embeddings_csv(client.test, test_clusters,
                         (out / (base + "_test.csv")).string(),
                         header_comment);
  }
}

SilhouetteReport silhouette_report(const FederationDataset& dataset,
                                   const FederationConfig& cfg,
                                   const std::string& scope, int k_min,
                                   int k_max) {
  if (scope != "local" && scope != "global")
    throw std::invalid_argument("scope must be local or global");
  if (k_min < 2 || k_max < k_min)
    throw std::invalid_argument("silhouette k range invalid");

  SilhouetteReport report;
  report.scope = scope;

  if (scope == "global") {
    std::vector<Vec> pooled;
    for (const ClientDataset& client : dataset.clients) {
      const ClientState state = client_setup(
          client.train, static_cast<int>(client.task_set.size()),
          dataset.config.class_count,
          derive_seed(cfg.master_seed,
                      {seed_tag::kLocalCluster,
                       static_cast<std::uint64_t>(client.client_id)}));
      for (const Vec& c : state.local_clusters.centroids)
        pooled.push_back(c);
    }
    const int clamped = std::min(k_max, static_cast<int>(pooled.size()) - 1);
    if (clamped < k_min)
      throw std::invalid_argument(
          "too few pooled centroids for the requested k range");
    const KSelection sel = select_k_silhouette(
        pooled, k_min, clamped,
        derive_seed(cfg.master_seed, {seed_tag::kSilhouette}));
    for (const auto& [k, score] : sel.scores)
      report.rows.emplace_back(k, score,
                               std::numeric_limits<double>::quiet_NaN());
    return report;
  }

  if (dataset.config.scenario == Scenario::Single) {
    report.skipped = true;
    report.notice =
        "local-scope silhouette skipped: single-task clients have no "
        "within-client cluster structure to select";
    return report;
  }

  int clamped = k_max;
  for (const ClientDataset& client : dataset.clients)
    clamped =
        std::min(clamped, static_cast<int>(client.train.rows.size()) - 1);
  if (clamped < k_min)
    throw std::invalid_argument("too few rows for the requested k range");

  std::vector<std::vector<double>> per_client_scores;
  for (const ClientDataset& client : dataset.clients) {
    std::vector<Vec> points;
    points.reserve(client.train.rows.size());
    for (const EmbeddingRow& row : client.train.rows)
      points.push_back(row.embedding);
    const KSelection sel = select_k_silhouette(
        points, k_min, clamped,
        derive_seed(cfg.master_seed,
                    {seed_tag::kSilhouette,
                     static_cast<std::uint64_t>(client.client_id)}));
    std::vector<double> scores;
    for (const auto& [k, score] : sel.scores) scores.push_back(score);
    per_client_scores.push_back(std::move(scores));
  }
  const std::size_t n_clients = per_client_scores.size();
  const std::size_t n_k = static_cast<std::size_t>(clamped - k_min + 1);
  for (std::size_t ki = 0; ki < n_k; ++ki) {
    double sum = 0.0;
    for (const auto& s : per_client_scores) sum += s[ki];
    const double mean = sum / static_cast<double>(n_clients);
    double std_dev = std::numeric_limits<double>::quiet_NaN();
    if (n_clients >= 2) {
      double ss = 0.0;
      for (const auto& s : per_client_scores)
        ss += (s[ki] - mean) * (s[ki] - mean);
      std_dev = std::sqrt(ss / static_cast<double>(n_clients - 1));
    }
    report.rows.emplace_back(k_min + static_cast<int>(ki), mean, std_dev);
  }
  return report;
}

}  // namespace fedrouter
