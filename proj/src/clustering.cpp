#include "fedrouter/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedrouter/rng.hpp"

namespace fedrouter {

namespace {

void check_points(const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("kmeans: empty input");
  const std::size_t dim = points[0].size();
  if (dim == 0) throw std::invalid_argument("kmeans: zero-dimensional points");
  for (const Vec& p : points)
    if (p.size() != dim)
      throw std::invalid_argument("kmeans: dimension mismatch across points");
}

std::vector<Vec> kmeanspp_init(const std::vector<Vec>& points, int k,
                               Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Vec> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& ctr : centers)
        best = std::min(best, squared_distance(points[i], ctr));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total > 0.0) {
      const double u = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      // all remaining points coincide with chosen centers
      pick = rng.below(n);
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

struct LloydResult {
  CentroidSet set;
  std::vector<double> inertia_path;
};

LloydResult lloyd(const std::vector<Vec>& points, std::vector<Vec> centers,
                  int max_iters) {
  const std::size_t n = points.size();
  const int k = static_cast<int>(centers.size());
  const std::size_t dim = points[0].size();
  std::vector<int> assign(n, -1);
  std::vector<int> counts(static_cast<std::size_t>(k));
  std::vector<double> inertia_path;

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int a = assign_nearest(points[i], centers).first;
      if (a != assign[i]) changed = true;
      assign[i] = a;
      ++counts[static_cast<std::size_t>(a)];
    }

    // Repair: each empty cluster takes the point currently farthest from
    // its own centroid (among clusters that can spare one).
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      double worst = -1.0;
      std::size_t victim = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(assign[i])] < 2) continue;
        const double d =
            squared_distance(points[i], centers[static_cast<std::size_t>(assign[i])]);
        if (d > worst) {
          worst = d;
          victim = i;
        }
      }
      if (victim == n)
        throw std::logic_error("kmeans repair: no donatable point");
      --counts[static_cast<std::size_t>(assign[victim])];
      assign[victim] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }

    for (auto& ctr : centers) std::fill(ctr.begin(), ctr.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Vec& ctr = centers[static_cast<std::size_t>(assign[i])];
      for (std::size_t j = 0; j < dim; ++j) ctr[j] += points[i][j];
    }
    for (int c = 0; c < k; ++c)
      for (std::size_t j = 0; j < dim; ++j)
        centers[static_cast<std::size_t>(c)][j] /=
            counts[static_cast<std::size_t>(c)];

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia +=
          squared_distance(points[i], centers[static_cast<std::size_t>(assign[i])]);
    if (!inertia_path.empty() &&
        inertia > inertia_path.back() * (1.0 + 1e-12) + 1e-12)
      throw std::logic_error("kmeans: inertia increased across an iteration");
    inertia_path.push_back(inertia);
    if (!changed) break;
  }

  LloydResult r;
  r.set.k = k;
  r.set.centroids = std::move(centers);
  r.set.assignments = std::move(assign);
  r.set.inertia = inertia_path.back();
  r.inertia_path = std::move(inertia_path);
  return r;
}

}  // namespace

std::pair<int, double> assign_nearest(const Vec& point,
                                      const std::vector<Vec>& centroids) {
  if (centroids.empty())
    throw std::invalid_argument("assign_nearest: empty centroid list");
  int best = 0;
  double best_d2 = squared_distance(point, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d2 = squared_distance(point, centroids[c]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(c);
    }
  }
  return {best, std::sqrt(best_d2)};
}

KMeansTrace kmeans_fit_traced(const std::vector<Vec>& points, int k,
                              std::uint64_t seed, const KMeansOptions& opts) {
  check_points(points);
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > points.size())
    throw std::invalid_argument("kmeans: k exceeds number of points");
  if (opts.n_init < 1 || opts.max_iters < 1)
    throw std::invalid_argument("kmeans: options must be positive");

  KMeansTrace trace;
  bool have_best = false;
  for (int r = 0; r < opts.n_init; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    auto res = lloyd(points, kmeanspp_init(points, k, rng), opts.max_iters);
    trace.restart_inertia.push_back(std::move(res.inertia_path));
    if (!have_best || res.set.inertia < trace.result.inertia) {
      trace.result = std::move(res.set);
      have_best = true;
    }
  }
  return trace;
}

CentroidSet kmeans_fit(const std::vector<Vec>& points, int k,
                       std::uint64_t seed, const KMeansOptions& opts) {
  return kmeans_fit_traced(points, k, seed, opts).result;
}

double silhouette_score(const std::vector<Vec>& points,
                        const std::vector<int>& assignments) {
  if (points.size() != assignments.size())
    throw std::invalid_argument("silhouette: assignment length mismatch");
  if (points.empty()) throw std::invalid_argument("silhouette: empty input");
  const std::size_t n = points.size();
  int k = 0;
  for (int a : assignments) {
    if (a < 0) throw std::invalid_argument("silhouette: negative assignment");
    k = std::max(k, a + 1);
  }
  std::vector<std::size_t> cluster_size(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++cluster_size[static_cast<std::size_t>(a)];
  int nonempty = 0;
  for (std::size_t s : cluster_size) nonempty += (s > 0);
  if (nonempty < 2)
    throw std::invalid_argument("silhouette: needs at least 2 clusters");

  // sums[i][c] = total distance from point i to every point of cluster c
  std::vector<std::vector<double>> sums(
      n, std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = distance(points[i], points[j]);
      sums[i][static_cast<std::size_t>(assignments[j])] += d;
      sums[j][static_cast<std::size_t>(assignments[i])] += d;
    }
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(assignments[i]);
    if (cluster_size[own] == 1) continue;  // singleton scores 0
    const double a =
        sums[i][own] / static_cast<double>(cluster_size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (c == own || cluster_size[c] == 0) continue;
      b = std::min(b, sums[i][c] / static_cast<double>(cluster_size[c]));
    }
    const double m = std::max(a, b);
    total += (m > 0.0) ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

KSelection select_k_silhouette(const std::vector<Vec>& points, int k_min,
                               int k_max, std::uint64_t seed,
                               const KMeansOptions& opts) {
  if (k_min < 2)
    throw std::invalid_argument("select_k: k_min must be >= 2");
  if (k_max < k_min)
    throw std::invalid_argument("select_k: k_max must be >= k_min");
  if (static_cast<std::size_t>(k_max) + 1 > points.size())
    throw std::invalid_argument("select_k: k_max must be <= n_points - 1");

  KSelection sel;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const auto fit = kmeans_fit(
        points, k, derive_seed(seed, {static_cast<std::uint64_t>(k)}), opts);
    const double score = silhouette_score(points, fit.assignments);
    sel.scores.emplace_back(k, score);
    if (score > best_score) {
      best_score = score;
      sel.best_k = k;
    }
  }
  return sel;
}

}  // namespace fedrouter
