#include "fedrouter/adapter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedrouter/rng.hpp"

namespace fedrouter {

namespace {

void check_shape(const AdapterParams& a) {
  if (a.dim < 1 || a.class_count < 1)
    throw std::invalid_argument("adapter: non-positive dimensions");
  if (a.weights.size() !=
          static_cast<std::size_t>(a.class_count) * static_cast<std::size_t>(a.dim) ||
      a.bias.size() != static_cast<std::size_t>(a.class_count))
    throw std::invalid_argument("adapter: parameter shape mismatch");
}

void check_rows(const AdapterParams& a, const std::vector<EmbeddingRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("adapter: empty data");
  for (const EmbeddingRow& r : rows) {
    if (r.embedding.size() != static_cast<std::size_t>(a.dim))
      throw std::invalid_argument("adapter: embedding dimension mismatch");
    if (r.class_label < 0 || r.class_label >= a.class_count)
      throw std::invalid_argument("adapter: label out of range");
  }
}

// logits -> (loss contribution, softmax probabilities in place)
double softmax_loss_inplace(Vec& logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  const double loss = std::log(sum) - std::log(logits[static_cast<std::size_t>(label)]);
  for (double& z : logits) z /= sum;
  return loss;
}

void logits_of(const AdapterParams& a, const Vec& x, Vec& out) {
  for (int c = 0; c < a.class_count; ++c) {
    double z = a.bias[static_cast<std::size_t>(c)];
    const double* wr = a.weights.data() + static_cast<std::size_t>(c) * a.dim;
    for (int j = 0; j < a.dim; ++j) z += wr[j] * x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(c)] = z;
  }
}

// Accumulates the mean gradient and loss of one batch of row pointers.
double batch_gradient(const AdapterParams& a,
                      const std::vector<EmbeddingRow>& data,
                      const std::vector<std::size_t>& batch,
                      std::vector<double>& gw, Vec& gb) {
  std::fill(gw.begin(), gw.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
  Vec z(static_cast<std::size_t>(a.class_count));
  double loss = 0.0;
  for (std::size_t idx : batch) {
    const EmbeddingRow& row = data[idx];
    logits_of(a, row.embedding, z);
    loss += softmax_loss_inplace(z, row.class_label);
    z[static_cast<std::size_t>(row.class_label)] -= 1.0;  // dL/dlogits
    for (int c = 0; c < a.class_count; ++c) {
      const double g = z[static_cast<std::size_t>(c)];
      gb[static_cast<std::size_t>(c)] += g;
      double* gr = gw.data() + static_cast<std::size_t>(c) * a.dim;
      const double* x = row.embedding.data();
      for (int j = 0; j < a.dim; ++j) gr[j] += g * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : gw) v *= inv;
  for (double& v : gb) v *= inv;
  return loss * inv;
}

}  // namespace

AdapterParams init_adapter(int dim, int class_count, int adapter_id,
                           std::uint64_t /*seed*/) {
  if (dim < 1 || class_count < 1)
    throw std::invalid_argument("init_adapter: non-positive dimensions");
  AdapterParams a;
  a.adapter_id = adapter_id;
  a.class_count = class_count;
  a.dim = dim;
  a.weights.assign(static_cast<std::size_t>(class_count) * dim, 0.0);
  a.bias.assign(static_cast<std::size_t>(class_count), 0.0);
  return a;
}

Vec predict(const AdapterParams& adapter, const Vec& embedding) {
  check_shape(adapter);
  if (embedding.size() != static_cast<std::size_t>(adapter.dim))
    throw std::invalid_argument("predict: dimension mismatch");
  Vec z(static_cast<std::size_t>(adapter.class_count));
  logits_of(adapter, embedding, z);
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

int predict_class(const AdapterParams& adapter, const Vec& embedding) {
  check_shape(adapter);
  if (embedding.size() != static_cast<std::size_t>(adapter.dim))
    throw std::invalid_argument("predict_class: dimension mismatch");
  Vec z(static_cast<std::size_t>(adapter.class_count));
  logits_of(adapter, embedding, z);
  // ties -> lowest class index
  int best = 0;
  for (int c = 1; c < adapter.class_count; ++c)
    if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) best = c;
  return best;
}

GradientResult cross_entropy_gradient(const AdapterParams& adapter,
                                      const std::vector<EmbeddingRow>& rows) {
  check_shape(adapter);
  check_rows(adapter, rows);
  std::vector<std::size_t> all(rows.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  GradientResult g;
  g.grad_weights.assign(adapter.weights.size(), 0.0);
  g.grad_bias.assign(adapter.bias.size(), 0.0);
  g.loss = batch_gradient(adapter, rows, all, g.grad_weights, g.grad_bias);
  return g;
}

AdapterParams train_sgd(const AdapterParams& adapter,
                        const std::vector<EmbeddingRow>& data,
                        const TrainConfig& cfg) {
  check_shape(adapter);
  check_rows(adapter, data);
  if (cfg.learning_rate < 0.0)
    throw std::invalid_argument("train_sgd: negative learning rate");
  if (cfg.steps_per_round < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train_sgd: steps and batch size must be >= 1");

  const std::size_t n = data.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(cfg.seed);
  rng.shuffle(perm);

  AdapterParams out = adapter;
  std::vector<double> gw(out.weights.size());
  Vec gb(out.bias.size());
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
  std::size_t cursor = 0;
  for (int step = 0; step < cfg.steps_per_round; ++step) {
    for (int j = 0; j < cfg.batch_size; ++j) {
      batch[static_cast<std::size_t>(j)] = perm[cursor];
      cursor = (cursor + 1) % n;
    }
    batch_gradient(out, data, batch, gw, gb);
    for (std::size_t i = 0; i < out.weights.size(); ++i)
      out.weights[i] -= cfg.learning_rate * gw[i];
    for (std::size_t i = 0; i < out.bias.size(); ++i)
      out.bias[i] -= cfg.learning_rate * gb[i];
  }
  for (double v : out.weights)
    if (!std::isfinite(v)) throw std::runtime_error("train_sgd: non-finite weight");
  for (double v : out.bias)
    if (!std::isfinite(v)) throw std::runtime_error("train_sgd: non-finite bias");
  out.steps_trained += cfg.steps_per_round;
  return out;
}

EvalResult evaluate(const AdapterParams& adapter,
                    const std::vector<EmbeddingRow>& data) {
  check_shape(adapter);
  check_rows(adapter, data);
  Vec z(static_cast<std::size_t>(adapter.class_count));
  std::size_t correct = 0;
  double loss = 0.0;
  for (const EmbeddingRow& row : data) {
    logits_of(adapter, row.embedding, z);
    int best = 0;
    for (int c = 1; c < adapter.class_count; ++c)
      if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(best)]) best = c;
    correct += (best == row.class_label);
    loss += softmax_loss_inplace(z, row.class_label);
  }
  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.mean_loss = loss / static_cast<double>(data.size());
  return r;
}

AdapterParams average_adapters(const std::vector<AdapterParams>& adapters,
                               const std::vector<double>& weights) {
  if (adapters.empty())
    throw std::invalid_argument("average_adapters: empty list");
  for (const AdapterParams& a : adapters) {
    check_shape(a);
    if (a.dim != adapters[0].dim || a.class_count != adapters[0].class_count)
      throw std::invalid_argument("average_adapters: shape mismatch");
  }
  std::vector<double> w = weights;
  if (w.empty()) {
    w.assign(adapters.size(), 1.0 / static_cast<double>(adapters.size()));
  } else {
    if (w.size() != adapters.size())
      throw std::invalid_argument("average_adapters: weights length mismatch");
    double sum = 0.0;
    for (double v : w) {
      if (v < 0.0)
        throw std::invalid_argument("average_adapters: negative weight");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("average_adapters: weights must sum to 1");
  }

  AdapterParams out = adapters[0];
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  std::fill(out.bias.begin(), out.bias.end(), 0.0);
  out.steps_trained = 0;
  for (std::size_t m = 0; m < adapters.size(); ++m) {
    const AdapterParams& a = adapters[m];
    for (std::size_t i = 0; i < out.weights.size(); ++i)
      out.weights[i] += w[m] * a.weights[i];
    for (std::size_t i = 0; i < out.bias.size(); ++i)
      out.bias[i] += w[m] * a.bias[i];
    out.steps_trained = std::max(out.steps_trained, a.steps_trained);
  }
  return out;
}

void save_adapter_csv(const AdapterParams& adapter, const std::string& path,
                      const std::string& header_comment) {
  check_shape(adapter);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write adapter file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "adapter_id,steps_trained\n"
      << adapter.adapter_id << "," << adapter.steps_trained << "\n";
  char buf[64];
  auto emit = [&](double v, bool first) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    if (!first) out << ",";
    out << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  };
  for (int c = 0; c < adapter.class_count; ++c) {
    for (int j = 0; j < adapter.dim; ++j) emit(adapter.w(c, j), j == 0);
    out << "\n";
  }
  for (int c = 0; c < adapter.class_count; ++c)
    emit(adapter.bias[static_cast<std::size_t>(c)], c == 0);
  out << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

AdapterParams load_adapter_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open adapter file: " + path);
  std::string line;
  std::vector<std::vector<double>> numeric;
  bool saw_header = false;
  int adapter_id = 0;
  long long steps = 0;
  bool saw_meta = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "adapter_id,steps_trained")
        throw std::runtime_error("bad adapter header in " + path);
      saw_header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size())
        throw std::runtime_error("non-numeric adapter field in " + path);
      row.push_back(v);
    }
    if (!saw_meta) {
      if (row.size() != 2)
        throw std::runtime_error("bad adapter meta row in " + path);
      adapter_id = static_cast<int>(row[0]);
      steps = static_cast<long long>(row[1]);
      saw_meta = true;
      continue;
    }
    numeric.push_back(std::move(row));
  }
  if (!saw_meta || numeric.size() < 2)
    throw std::runtime_error("truncated adapter file: " + path);
  const std::size_t class_count = numeric.size() - 1;
  const std::vector<double>& bias = numeric.back();
  if (bias.size() != class_count)
    throw std::runtime_error("adapter bias row length mismatch in " + path);
  const std::size_t dim = numeric[0].size();
  AdapterParams a = init_adapter(static_cast<int>(dim),
                                 static_cast<int>(class_count), adapter_id);
  a.steps_trained = steps;
  for (std::size_t c = 0; c < class_count; ++c) {
    if (numeric[c].size() != dim)
      throw std::runtime_error("adapter weight row length mismatch in " + path);
    for (std::size_t j = 0; j < dim; ++j)
      a.weights[c * dim + j] = numeric[c][j];
  }
  a.bias = bias;
  return a;
}

}  // namespace fedrouter
