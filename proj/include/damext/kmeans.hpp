#pragma once

#include <vector>

#include "damext/rng.hpp"
#include "damext/tensor.hpp"

namespace damext {

template <class S>
struct ClusterAssignment {
  std::vector<int> labels;
  Matrix<S> centroids;            // Z x D
  std::vector<S> objective;       // sum of squared distances, per assignment pass
};

namespace detail {

template <class S>
std::vector<int> kmeans_assign(const Matrix<S>& points, const Matrix<S>& centroids, S* ssd) {
  std::vector<int> labels(points.rows());
  S total = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    S best = -1;
    int best_z = 0;
    for (Eigen::Index z = 0; z < centroids.rows(); ++z) {
      const S d2 = (points.row(i) - centroids.row(z)).squaredNorm();
      if (best < 0 || d2 < best) {
        best = d2;
        best_z = static_cast<int>(z);
      }
    }
    labels[i] = best_z;
    total += best;
  }
  if (ssd) *ssd = total;
  return labels;
}

}  // namespace detail

/// Lloyd iterations with distance-weighted seeding. Assignment ties go to the
/// lowest centroid index; an emptied cluster is reseeded to the point
/// farthest from its own assigned centroid. Stops early once assignments are
/// a fixed point, so the recorded objective sequence is non-increasing.
template <class S>
ClusterAssignment<S> kmeans(const Matrix<S>& points, int Z, int iters, Rng& rng) {
  const Eigen::Index n = points.rows();
  if (Z < 1) throw ConfigError("kmeans: Z must be >= 1");
  if (n < Z) throw DataError("kmeans: need at least Z samples");

  ClusterAssignment<S> out;
  out.centroids.resize(Z, points.cols());

  // distance-weighted seeding
  out.centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.index(n)));
  std::vector<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2[i] = static_cast<double>((points.row(i) - out.centroids.row(0)).squaredNorm());
  for (int z = 1; z < Z; ++z) {
    const int pick = rng.categorical(d2);
    out.centroids.row(z) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double nd = static_cast<double>((points.row(i) - out.centroids.row(z)).squaredNorm());
      if (nd < d2[i]) d2[i] = nd;
    }
  }

  S ssd = 0;
  out.labels = detail::kmeans_assign(points, out.centroids, &ssd);
  out.objective.push_back(ssd);

  for (int it = 0; it < iters; ++it) {
    // means per cluster
    Matrix<S> sums = Matrix<S>::Zero(Z, points.cols());
    std::vector<int> counts(Z, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.labels[i]) += points.row(i);
      ++counts[out.labels[i]];
    }
    std::vector<char> taken(n, 0);
    for (int z = 0; z < Z; ++z) {
      if (counts[z] > 0) {
        out.centroids.row(z) = sums.row(z) / static_cast<S>(counts[z]);
        continue;
      }
      // reseed an empty cluster at the point farthest from its own centroid
      S far_d = -1;
      Eigen::Index far_i = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const S d = (points.row(i) - out.centroids.row(out.labels[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      out.centroids.row(z) = points.row(far_i);
      taken[far_i] = 1;
    }

    std::vector<int> next = detail::kmeans_assign(points, out.centroids, &ssd);
    out.objective.push_back(ssd);
    const bool converged = next == out.labels;
    out.labels = std::move(next);
    if (converged) break;
  }
  return out;
}

template <class S>
struct SilhouetteReport {
  std::vector<S> per_sample;  // SC, in [-1, 1]
  S mean = 0;
};

/// SC = (b - a) / max(a, b) with a = mean distance to own cluster,
/// b = mean distance to the nearest other cluster. Singletons score 0.
template <class S>
SilhouetteReport<S> silhouette(const Matrix<S>& points, const std::vector<int>& labels) {
  const Eigen::Index n = points.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw DataError("silhouette: label count mismatch");

  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<int> counts(max_label + 1, 0);
  for (int l : labels) ++counts[l];
  int nonempty = 0;
  for (int c : counts) nonempty += c > 0;
  if (nonempty < 2) throw DataError("silhouette: need at least 2 non-empty clusters");

  SilhouetteReport<S> rep;
  rep.per_sample.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts[labels[i]] == 1) {
      rep.per_sample[i] = 0;
      continue;
    }
    std::vector<S> sum(max_label + 1, 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += (points.row(i) - points.row(j)).norm();
    }
    const S a = sum[labels[i]] / static_cast<S>(counts[labels[i]] - 1);
    S b = -1;
    for (int z = 0; z <= max_label; ++z) {
      if (z == labels[i] || counts[z] == 0) continue;
      const S mean_d = sum[z] / static_cast<S>(counts[z]);
      if (b < 0 || mean_d < b) b = mean_d;
    }
    const S denom = std::max(a, b);
    rep.per_sample[i] = denom > S(0) ? (b - a) / denom : S(0);
  }
  S total = 0;
  for (const S v : rep.per_sample) total += v;
  rep.mean = n > 0 ? total / static_cast<S>(n) : S(0);
  return rep;
}

}  // namespace damext
