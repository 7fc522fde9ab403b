#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedrouter/types.hpp"

namespace fedrouter {

struct CentroidSet {
  int k = 0;
  std::vector<Vec> centroids;
  std::vector<int> assignments;  // one per input point
  double inertia = 0.0;          // sum of squared distances to assigned centroid
};

struct KMeansOptions {
  int max_iters = 100;
  int n_init = 10;
};

// k-means++ init followed by Lloyd iterations until the assignment fixpoint
// (or max_iters); n_init seeded restarts, keeping the lowest inertia with
// ties broken by restart index. Empty clusters are repaired by donating the
// point farthest from its current centroid.
CentroidSet kmeans_fit(const std::vector<Vec>& points, int k,
                       std::uint64_t seed, const KMeansOptions& opts = {});

// Same fit, also returning the per-iteration inertia path of every restart
// (each path is non-increasing; exposed so that property can be audited).
struct KMeansTrace {
  CentroidSet result;
  std::vector<std::vector<double>> restart_inertia;
};
KMeansTrace kmeans_fit_traced(const std::vector<Vec>& points, int k,
                              std::uint64_t seed,
                              const KMeansOptions& opts = {});

// Nearest centroid by Euclidean distance; ties go to the lowest index.
std::pair<int, double> assign_nearest(const Vec& point,
                                      const std::vector<Vec>& centroids);

// Mean silhouette over all points: (b - a) / max(a, b) with a = mean
// intra-cluster distance (excluding self) and b = the smallest mean
// distance to any other cluster; points alone in their cluster score 0.
double silhouette_score(const std::vector<Vec>& points,
                        const std::vector<int>& assignments);

struct KSelection {
  int best_k = 0;
  std::vector<std::pair<int, double>> scores;  // (k, silhouette)
};

// Fits every k in [k_min, k_max] (per-k derived seeds) and returns the k
// with the highest silhouette; ties go to the smaller k.
KSelection select_k_silhouette(const std::vector<Vec>& points, int k_min,
                               int k_max, std::uint64_t seed,
                               const KMeansOptions& opts = {});

}  // namespace fedrouter
