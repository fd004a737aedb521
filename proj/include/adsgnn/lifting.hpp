#pragma once

// Lifting of a boundary point cloud into AdS_{d+1} and graph construction.

#include <cstddef>
#include <span>
#include <vector>

#include "adsgnn/ads_geometry.hpp"

namespace adsgnn {

inline constexpr double kDefaultZ0 = 1e-6;

struct PointCloud {
  Mat positions;  // N x d
  Mat features;   // N x F, F may be 0

  int size() const { return static_cast<int>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }
};

/// Directed edge: node `target` receives the message computed from `source`.
struct Edge {
  int target;
  int source;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct LiftedCloud {
  std::vector<AdSPoint> positions;  // (x_i, zhat_i)
  Vec zhat;
  Mat lifted_features;
  std::vector<Edge> edges;
  // points whose lifting neighbourhood consisted of duplicates only (zhat == z0)
  std::size_t degenerate_count = 0;

  int size() const { return static_cast<int>(positions.size()); }
};

enum class Metric { euclidean, ads_proper };

using NeighborLists = std::vector<std::vector<int>>;

/// k nearest other nodes of every node; ties broken by lower index.
/// The euclidean metric only looks at the x part of each point.
NeighborLists knn(std::span<const AdSPoint> points, int k, Metric metric);

/// Euclidean kNN on an N x d position matrix.
NeighborLists knn(const Mat& positions, int k);

/// Places every point at (x_i, z0), replaces its depth by the z of the AdS
/// centre of mass of {i} and its k_lift nearest euclidean neighbours, and
/// lifts the input features with dimension `feature_delta`. No edges are built.
LiftedCloud ads_embed(const PointCloud& cloud, int k_lift, double z0 = kDefaultZ0,
                      double feature_delta = 0.0);

/// h_i * zhat_i^delta.
Mat lift_features(const Mat& h, const Vec& zhat, double delta);

/// h_i * zhat_i^-delta.
Mat readout(const Mat& h, const Vec& zhat, double delta);

/// Edges j -> i for the k_con nearest neighbours j of every i under `metric`;
/// the complete directed graph when k_con >= N - 1. Sorted by (target, rank).
std::vector<Edge> build_edges(std::span<const AdSPoint> points, int k_con, Metric metric);

}  // namespace adsgnn
