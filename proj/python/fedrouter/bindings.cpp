// Python bindings for the core operations: clustering, cluster-count
// selection, adapter training, scenario simulation, and the experiment grid.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedrouter/baselines.hpp"
#include "fedrouter/clustering.hpp"
#include "fedrouter/datagen.hpp"
#include "fedrouter/harness.hpp"
#include "fedrouter/server.hpp"

namespace py = pybind11;
using namespace fedrouter;

namespace {

py::object routing_or_none(double v) {
  if (std::isnan(v)) return py::none();
  return py::float_(v);
}

py::dict metrics_to_dict(const RoundMetrics& m) {
  py::dict d;
  d["round"] = m.round;
  d["overall_acc"] = m.overall_acc;
  d["routing_acc"] = routing_or_none(m.routing_acc);
  d["loss"] = m.mean_loss;
  py::dict pt;
  for (const auto& [task, acc] : m.per_task_acc)
    pt[py::int_(task)] = acc;
  d["per_task_acc"] = pt;
  return d;
}

std::vector<EmbeddingRow> rows_from(const std::vector<Vec>& embeddings,
                                    const std::vector<int>& labels) {
  if (embeddings.size() != labels.size())
    throw std::invalid_argument("embeddings and labels differ in length");
  std::vector<EmbeddingRow> rows(embeddings.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].embedding = embeddings[i];
    rows[i].class_label = labels[i];
    rows[i].task_id = 0;
  }
  return rows;
}

AdapterParams adapter_from(const std::vector<Vec>& weights, const Vec& bias) {
  if (weights.empty() || weights.size() != bias.size())
    throw std::invalid_argument("weights must be class_count rows, one bias each");
  AdapterParams a = init_adapter(static_cast<int>(weights[0].size()),
                                 static_cast<int>(weights.size()), 0);
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c].size() != weights[0].size())
      throw std::invalid_argument("ragged weight rows");
    for (std::size_t j = 0; j < weights[c].size(); ++j)
      a.weights[c * weights[c].size() + j] = weights[c][j];
  }
  a.bias = bias;
  return a;
}

py::dict adapter_to_dict(const AdapterParams& a) {
  std::vector<Vec> rows(static_cast<std::size_t>(a.class_count));
  for (int c = 0; c < a.class_count; ++c) {
    rows[static_cast<std::size_t>(c)].resize(static_cast<std::size_t>(a.dim));
    for (int j = 0; j < a.dim; ++j)
      rows[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] = a.w(c, j);
  }
  py::dict d;
  d["weights"] = rows;
  d["bias"] = a.bias;
  d["steps_trained"] = a.steps_trained;
  return d;
}

py::list simulate(const std::string& config_json, const std::string& method,
                  const std::string& scenario, std::uint64_t seed) {
  const RunConfig cfg = parse_config(config_json);
  const FederationDataset dataset =
      build_scenario(scenario_config_for(cfg, scenario, seed));
  const FederationConfig fc = federation_config_for(cfg, method, seed);
  const TrainConfig tc = train_config_for(cfg);

  std::vector<RoundMetrics> rounds;
  if (method == "fedrouter" || method == "fedrouter-star") {
    rounds = run_federation(dataset, fc, tc).rounds;
  } else if (method == "fedavg") {
    rounds = run_fedavg(dataset, fc, tc).rounds;
  } else if (method == "local") {
    rounds = run_local_only(dataset, fc, tc).rounds;
  } else if (method == "fedcluster") {
    rounds = run_fedcluster(dataset, fc, tc).rounds;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  py::list out;
  for (const RoundMetrics& m : rounds) out.append(metrics_to_dict(m));
  return out;
}

}  // namespace

PYBIND11_MODULE(_fedrouter, m) {
  m.doc() =
      "Task-clustered personalized federated learning simulator: k-means "
      "utilities, linear adapters, and the federated experiment harness.";

  m.def(
      "fit_kmeans",
      [](const std::vector<Vec>& points, int k, std::uint64_t seed,
         int max_iters, int n_init) {
        KMeansOptions opts;
        opts.max_iters = max_iters;
        opts.n_init = n_init;
        const CentroidSet cs = kmeans_fit(points, k, seed, opts);
        py::dict d;
        d["centroids"] = cs.centroids;
        d["assignments"] = cs.assignments;
        d["inertia"] = cs.inertia;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0,
      py::arg("max_iters") = 100, py::arg("n_init") = 10,
      "Seeded multi-restart k-means; returns centroids, assignments and "
      "inertia.");

  m.def(
      "silhouette_score",
      [](const std::vector<Vec>& points, const std::vector<int>& assignments) {
        return silhouette_score(points, assignments);
      },
      py::arg("points"), py::arg("assignments"),
      "Mean silhouette of a labeled point set (singletons score 0).");

  m.def(
      "select_k",
      [](const std::vector<Vec>& points, int k_min, int k_max,
         std::uint64_t seed) {
        const KSelection sel = select_k_silhouette(points, k_min, k_max, seed);
        py::dict d;
        d["best_k"] = sel.best_k;
        d["scores"] = sel.scores;
        return d;
      },
      py::arg("points"), py::arg("k_min"), py::arg("k_max"),
      py::arg("seed") = 0,
      "Silhouette-based cluster-count selection over [k_min, k_max].");

  m.def(
      "train_adapter",
      [](const std::vector<Vec>& embeddings, const std::vector<int>& labels,
         int class_count, double learning_rate, int steps, int batch_size,
         std::uint64_t seed) {
        const std::vector<EmbeddingRow> rows = rows_from(embeddings, labels);
        AdapterParams a = init_adapter(
            static_cast<int>(embeddings.at(0).size()), class_count, 0);
        TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.steps_per_round = steps;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        return adapter_to_dict(train_sgd(a, rows, cfg));
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("class_count"),
      py::arg("learning_rate") = 0.0025, py::arg("steps") = 10,
      py::arg("batch_size") = 16, py::arg("seed") = 0,
      "Train a linear softmax adapter from zero init with seeded "
      "mini-batch SGD.");

  m.def(
      "evaluate_adapter",
      [](const std::vector<Vec>& weights, const Vec& bias,
         const std::vector<Vec>& embeddings, const std::vector<int>& labels) {
        const AdapterParams a = adapter_from(weights, bias);
        const EvalResult res = evaluate(a, rows_from(embeddings, labels));
        py::dict d;
        d["accuracy"] = res.accuracy;
        d["mean_loss"] = res.mean_loss;
        return d;
      },
      py::arg("weights"), py::arg("bias"), py::arg("embeddings"),
      py::arg("labels"),
      "Accuracy and mean cross-entropy of an adapter on labeled embeddings.");

  m.def("simulate", &simulate, py::arg("config_json"), py::arg("method"),
        py::arg("scenario"), py::arg("seed"),
        "Run one (method, scenario, seed) cell in memory and return the "
        "per-round metrics without writing artifacts.");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const RunConfig cfg = parse_config(config_json);
        const ExperimentResult result = run_experiment(cfg, nullptr);
        py::list rows;
        for (const SummaryRow& r : result.summary) {
          py::dict d;
          d["method"] = r.method;
          d["scenario"] = r.scenario;
          d["mean"] = r.mean;
          d["std"] = std::isnan(r.stddev) ? py::object(py::none())
                                          : py::object(py::float_(r.stddev));
          d["n_seeds"] = r.n_seeds;
          rows.append(d);
        }
        py::dict out;
        out["summary"] = rows;
        out["out_dir"] = result.out_dir;
        return out;
      },
      py::arg("config_json"),
      "Run the full (methods x scenarios x seeds) grid, writing "
      "metrics.jsonl, summary.csv and trace.csv to the configured out_dir.");

  m.def(
      "config_hash",
      [](const std::string& config_json) {
        return config_hash(parse_config(config_json));
      },
      py::arg("config_json"),
      "Stable 16-hex-digit hash of the experiment-determining settings.");

  m.attr("__version__") = "0.1.0";
}
