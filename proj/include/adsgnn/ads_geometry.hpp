#pragma once

// The hyperboloid model of AdS_{d+1} and its upper-half-space chart.
//
// Embedding vectors follow the ordering (Y^0, Y^1..Y^d, Y^{d+1}) with metric
// diag(-1, +1, ..., +1); Y^0 is the timelike coordinate and the branch Y^0 > 0
// is used throughout. The conformal-group matrices of quadratic_space.hpp use
// a different ordering; to_extended_basis / from_extended_basis convert.

#include <span>
#include <vector>

#include "adsgnn/quadratic_space.hpp"

namespace adsgnn {

struct AdSPoint {
  Vec x;
  double z = 1.0;

  int dim() const { return static_cast<int>(x.size()); }
};

struct EmbeddingVector {
  Vec y;
};

enum class IsometryKind { translate, rotate, scale, sct };

/// <u, v> under diag(-1, +1, ..., +1).
double ads_inner(const Vec& u, const Vec& v);

EmbeddingVector lift_coords(const AdSPoint& p);

/// Inverse chart: z = 1/(Y^0 - Y^{d+1}), x = Y^a/(Y^0 - Y^{d+1}).
AdSPoint unlift(const EmbeddingVector& e);

/// cosh(D) - 1 = (|x - x'|^2 + (z - z')^2) / (2 z z'); exact at coincidence.
double cosh_distance_minus_one(const AdSPoint& a, const AdSPoint& b);

/// acosh(1 + u) evaluated through log1p; accurate for small u.
double acosh1p(double u);

double proper_distance(const AdSPoint& a, const AdSPoint& b);

/// Generator action in upper-half-space coordinates.
AdSPoint isometry_apply(const ConformalParams& params, const AdSPoint& p, IsometryKind kind);

/// Action of [Lambda] in PO(d+1,1) on AdS points, via the embedding vector
/// with the branch sign correction.
AdSPoint group_apply(const GroupElement& g, const AdSPoint& p);

/// Galperin centroid: normalized sum of embedding vectors. The norm of the
/// summed vector is evaluated from pairwise proper distances, and all sums run
/// in a canonical (sorted) order so the result does not depend on input order.
AdSPoint ads_center_of_mass(std::span<const AdSPoint> points);

/// Main-text embedding vector -> extended-space ordering (+, ..., +, -):
/// (Y^0, Y^a, Y^{d+1}) -> (-Y^{d+1}, Y^a, Y^0).
Vec to_extended_basis(const Vec& main_y);
Vec from_extended_basis(const Vec& extended_y);

/// phi: R_{>0} x R^{p,q} -> R^{p+1,q+1}, image on eta(y,y) = -1, y^0 + y^{d+1} > 0.
Vec parameterize_general(double x0, const Vec& x_rest, const Signature& sig);

struct GeneralChartPoint {
  double x0;
  Vec rest;
};

GeneralChartPoint parameterize_general_inverse(const Vec& y, const Signature& sig);

/// Geodesic distance between two chart points of A^{d+1,0}.
double chart_geodesic_distance(const GeneralChartPoint& a, const GeneralChartPoint& b);

}  // namespace adsgnn
