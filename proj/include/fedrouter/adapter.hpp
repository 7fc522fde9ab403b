#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedrouter/types.hpp"

namespace fedrouter {

// Linear softmax classifier over embeddings; the trainable unit that gets
// averaged by the server. Weights are row-major class_count x dim.
struct AdapterParams {
  int adapter_id = 0;
  int class_count = 0;
  int dim = 0;
  std::vector<double> weights;
  Vec bias;
  long long steps_trained = 0;

  double& w(int c, int j) { return weights[static_cast<std::size_t>(c) * dim + j]; }
  double w(int c, int j) const {
    return weights[static_cast<std::size_t>(c) * dim + j];
  }
};

struct TrainConfig {
  double learning_rate = 0.0025;
  int steps_per_round = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;
};

// Zero initialization: every fresh adapter is identical, standing in for a
// shared pretrained base. The seed parameter is accepted but unused.
AdapterParams init_adapter(int dim, int class_count, int adapter_id,
                           std::uint64_t seed = 0);

Vec predict(const AdapterParams& adapter, const Vec& embedding);
int predict_class(const AdapterParams& adapter, const Vec& embedding);

struct GradientResult {
  std::vector<double> grad_weights;  // same layout as AdapterParams::weights
  Vec grad_bias;
  double loss = 0.0;  // mean cross-entropy over the rows
};

// Mean cross-entropy gradient over all given rows (the oracle surface for
// finite-difference checks; training uses the same math on mini-batches).
GradientResult cross_entropy_gradient(const AdapterParams& adapter,
                                      const std::vector<EmbeddingRow>& rows);

// steps_per_round mini-batch SGD steps; batches come from one seeded
// shuffle of the row indices, consumed with wraparound. Returns an updated
// copy; deterministic for a fixed (adapter, data, cfg).
AdapterParams train_sgd(const AdapterParams& adapter,
                        const std::vector<EmbeddingRow>& data,
                        const TrainConfig& cfg);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate(const AdapterParams& adapter,
                    const std::vector<EmbeddingRow>& data);

// Elementwise weighted mean; uniform when weights is empty. Weights must be
// nonnegative and sum to 1 (within 1e-9). steps_trained of the result is
// the max over inputs.
AdapterParams average_adapters(const std::vector<AdapterParams>& adapters,
                               const std::vector<double>& weights = {});

void save_adapter_csv(const AdapterParams& adapter, const std::string& path,
                      const std::string& header_comment = "");
AdapterParams load_adapter_csv(const std::string& path);

}  // namespace fedrouter
