#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedrouter {

using Vec = std::vector<double>;

struct EmbeddingRow {
  Vec embedding;
  int class_label = 0;
  int task_id = 0;
};

// A client's rows for one split (train or test), in generation order.
struct EmbeddingMatrix {
  int client_id = 0;
  int dim = 0;
  std::vector<EmbeddingRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

inline double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("squared_distance: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double distance(const Vec& a, const Vec& b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace fedrouter
