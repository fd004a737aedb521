#include "adsgnn/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace adsgnn {

namespace {

double metric_key(const AdSPoint& a, const AdSPoint& b, Metric metric) {
  if (metric == Metric::euclidean) return (a.x - b.x).squaredNorm();
  // cosh D - 1 is monotone in D
  return cosh_distance_minus_one(a, b);
}

std::vector<AdSPoint> as_boundary_points(const Mat& positions, double z) {
  std::vector<AdSPoint> pts;
  pts.reserve(static_cast<std::size_t>(positions.rows()));
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    pts.push_back({positions.row(i).transpose(), z});
  }
  return pts;
}

}  // namespace

NeighborLists knn(std::span<const AdSPoint> points, int k, Metric metric) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || k >= n) {
    throw InputError("knn: k must satisfy 1 <= k <= N - 1");
  }
  NeighborLists out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand.emplace_back(metric_key(points[i], points[j], metric), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    auto& nb = out[static_cast<std::size_t>(i)];
    nb.reserve(static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r) nb.push_back(cand[static_cast<std::size_t>(r)].second);
  }
  return out;
}

NeighborLists knn(const Mat& positions, int k) {
  const auto pts = as_boundary_points(positions, 1.0);
  return knn(pts, k, Metric::euclidean);
}

LiftedCloud ads_embed(const PointCloud& cloud, int k_lift, double z0, double feature_delta) {
  const int n = cloud.size();
  if (n < 2) throw InputError("ads_embed: need at least two points");
  if (!(z0 > 0.0)) throw InputError("ads_embed: z0 must be positive");
  if (!cloud.positions.allFinite()) throw InputError("ads_embed: non-finite coordinates");
  if (cloud.features.size() != 0 && cloud.features.rows() != n) {
    throw InputError("ads_embed: feature rows do not match point count");
  }

  const auto boundary = as_boundary_points(cloud.positions, z0);
  const NeighborLists nbrs = knn(boundary, k_lift, Metric::euclidean);

  LiftedCloud out;
  out.zhat.resize(n);
  out.positions.reserve(static_cast<std::size_t>(n));
  std::vector<AdSPoint> hood;
  for (int i = 0; i < n; ++i) {
    const auto& nb = nbrs[static_cast<std::size_t>(i)];
    // centred on x_i: translations act exactly and the sums stay well conditioned
    hood.clear();
    hood.push_back({Vec::Zero(cloud.dim()), z0});
    bool all_duplicates = true;
    for (int j : nb) {
      Vec dx = boundary[static_cast<std::size_t>(j)].x - boundary[static_cast<std::size_t>(i)].x;
      if (dx.squaredNorm() > 0.0) all_duplicates = false;
      hood.push_back({std::move(dx), z0});
    }
    if (all_duplicates) ++out.degenerate_count;
    const AdSPoint com = ads_center_of_mass(hood);
    out.zhat(i) = com.z;
    out.positions.push_back({boundary[static_cast<std::size_t>(i)].x, com.z});
  }
  out.lifted_features = cloud.features.size() == 0
                            ? Mat(n, 0)
                            : lift_features(cloud.features, out.zhat, feature_delta);
  return out;
}

Mat lift_features(const Mat& h, const Vec& zhat, double delta) {
  if (h.rows() != zhat.size()) throw InputError("lift_features: shape mismatch");
  if (delta == 0.0) return h;
  const Eigen::ArrayXd factor = zhat.array().pow(delta);
  return (h.array().colwise() * factor).matrix();
}

Mat readout(const Mat& h, const Vec& zhat, double delta) {
  if (h.rows() != zhat.size()) throw InputError("readout: shape mismatch");
  if (delta == 0.0) return h;
  const Eigen::ArrayXd factor = zhat.array().pow(delta);
  return (h.array().colwise() / factor).matrix();
}

std::vector<Edge> build_edges(std::span<const AdSPoint> points, int k_con, Metric metric) {
  const int n = static_cast<int>(points.size());
  std::vector<Edge> edges;
  if (n < 2) return edges;
  if (k_con >= n - 1) {
    edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) edges.push_back({i, j});
      }
    }
    return edges;
  }
  const NeighborLists nbrs = knn(points, k_con, metric);
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k_con));
  for (int i = 0; i < n; ++i) {
    for (int j : nbrs[static_cast<std::size_t>(i)]) edges.push_back({i, j});
  }
  return edges;
}

}  // namespace adsgnn
