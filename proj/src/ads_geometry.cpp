#include "adsgnn/ads_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adsgnn {

namespace {

void require_valid(const AdSPoint& p, const char* what) {
  if (!(p.z > 0.0) || !std::isfinite(p.z) || !p.x.allFinite()) {
    throw InputError(std::string(what) + ": AdS point requires finite x and z > 0");
  }
}

// Pairwise (tree) reduction over [first, last) of a precomputed sequence.
double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n == 1) return v[0];
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

bool lex_less(const AdSPoint& a, const AdSPoint& b) {
  for (Eigen::Index i = 0; i < a.x.size(); ++i) {
    if (a.x(i) != b.x(i)) return a.x(i) < b.x(i);
  }
  return a.z < b.z;
}

}  // namespace

double ads_inner(const Vec& u, const Vec& v) {
  if (u.size() != v.size() || u.size() < 2) {
    throw InputError("ads_inner: dimension mismatch");
  }
  return u.dot(v) - 2.0 * u(0) * v(0);
}

EmbeddingVector lift_coords(const AdSPoint& p) {
  require_valid(p, "lift_coords");
  const int d = p.dim();
  const double z = p.z;
  const double xx = p.x.squaredNorm();
  Vec y(d + 2);
  y(0) = 0.5 * z * (1.0 + (1.0 + xx) / (z * z));
  y.segment(1, d) = p.x / z;
  y(d + 1) = 0.5 * z * (1.0 - (1.0 - xx) / (z * z));
  return {std::move(y)};
}

AdSPoint unlift(const EmbeddingVector& e) {
  const Eigen::Index n = e.y.size();
  if (n < 3) throw InputError("unlift: embedding vector too short");
  const double w = e.y(0) - e.y(n - 1);
  if (!(w > 0.0)) {
    throw OutOfChartError("unlift: Y^0 - Y^{d+1} must be positive");
  }
  return {e.y.segment(1, n - 2) / w, 1.0 / w};
}

double cosh_distance_minus_one(const AdSPoint& a, const AdSPoint& b) {
  if (a.dim() != b.dim()) throw InputError("proper_distance: dimension mismatch");
  const double dz = a.z - b.z;
  return ((a.x - b.x).squaredNorm() + dz * dz) / (2.0 * a.z * b.z);
}

double acosh1p(double u) {
  u = std::max(u, 0.0);
  return std::log1p(u + std::sqrt(u * (2.0 + u)));
}

double proper_distance(const AdSPoint& a, const AdSPoint& b) {
  return acosh1p(cosh_distance_minus_one(a, b));
}

AdSPoint isometry_apply(const ConformalParams& params, const AdSPoint& p, IsometryKind kind) {
  require_valid(p, "isometry_apply");
  switch (kind) {
    case IsometryKind::translate:
      if (params.translation.size() != p.dim()) throw InputError("isometry_apply: bad translation");
      return {p.x + params.translation, p.z};
    case IsometryKind::rotate:
      if (params.rotation.rows() != p.dim() || params.rotation.cols() != p.dim()) {
        throw InputError("isometry_apply: bad rotation");
      }
      if ((params.rotation.transpose() * params.rotation - Mat::Identity(p.dim(), p.dim()))
              .cwiseAbs()
              .maxCoeff() > 1e-12) {
        throw InputError("isometry_apply: rotation is not orthogonal");
      }
      return {params.rotation * p.x, p.z};
    case IsometryKind::scale:
      if (!(params.scale > 0.0)) throw InputError("isometry_apply: scale must be positive");
      return {params.scale * p.x, params.scale * p.z};
    case IsometryKind::sct: {
      if (params.sct.size() != p.dim()) throw InputError("isometry_apply: bad sct vector");
      // invert at the unit sphere of R^{d+1}, shift the boundary part by -b, invert back
      const double r2 = p.x.squaredNorm() + p.z * p.z;
      Vec ix = p.x / r2 - params.sct;
      const double iz = p.z / r2;
      const double s2 = ix.squaredNorm() + iz * iz;
      if (!(s2 > 0.0) || !std::isfinite(1.0 / s2)) {
        throw OutOfChartError("isometry_apply: sct image leaves the chart");
      }
      return {ix / s2, iz / s2};
    }
  }
  throw InputError("isometry_apply: unknown kind");
}

AdSPoint group_apply(const GroupElement& g, const AdSPoint& p) {
  if (g.signature().q() != 0 || g.signature().dim() != p.dim()) {
    throw InputError("group_apply: element must act on R^{d,0} with matching d");
  }
  Vec y = g.matrix() * to_extended_basis(lift_coords(p).y);
  const int d = p.dim();
  if (y(d + 1) < 0.0) y = -y;
  return unlift({from_extended_basis(y)});
}

AdSPoint ads_center_of_mass(std::span<const AdSPoint> points) {
  if (points.empty()) throw InputError("ads_center_of_mass: empty point list");
  const int d = points.front().dim();
  for (const auto& p : points) {
    require_valid(p, "ads_center_of_mass");
    if (p.dim() != d) throw InputError("ads_center_of_mass: dimension mismatch");
  }
  std::vector<AdSPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), lex_less);
  const std::size_t n = sorted.size();

  // Sum Y = sum_i Y_i.  Y^0 - Y^{d+1} = sum 1/z_i and Y^a = sum x_i/z_i, while
  // -<Y,Y> = sum_{i,j} cosh D_ij = n^2 + sum_{i,j} (cosh D_ij - 1).
  std::vector<double> inv_z(n);
  std::vector<double> row(n);
  std::vector<double> scratch(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_z[i] = 1.0 / sorted[i].z;
    for (std::size_t j = 0; j < n; ++j) {
      scratch[j] = (i == j) ? 0.0 : cosh_distance_minus_one(sorted[i], sorted[j]);
    }
    row[i] = pairwise_sum(scratch.data(), n);
  }
  const double w = pairwise_sum(inv_z.data(), n);
  const double nn = static_cast<double>(n);
  const double norm = std::sqrt(nn * nn + pairwise_sum(row.data(), n));

  Vec xbar(d);
  for (int a = 0; a < d; ++a) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = sorted[i].x(a) * inv_z[i];
    xbar(a) = pairwise_sum(scratch.data(), n) / w;
  }
  return {std::move(xbar), norm / w};
}

Vec to_extended_basis(const Vec& main_y) {
  const Eigen::Index n = main_y.size();
  Vec y = main_y;
  y(0) = -main_y(n - 1);
  y(n - 1) = main_y(0);
  return y;
}

Vec from_extended_basis(const Vec& extended_y) {
  const Eigen::Index n = extended_y.size();
  Vec y = extended_y;
  y(0) = extended_y(n - 1);
  y(n - 1) = -extended_y(0);
  return y;
}

Vec parameterize_general(double x0, const Vec& x_rest, const Signature& sig) {
  if (!(x0 > 0.0)) throw InputError("parameterize_general: x0 must be positive");
  const int d = sig.dim();
  const double n = x0 * x0 + eta(x_rest, x_rest, sig);
  Vec y(d + 2);
  y(0) = (1.0 - n) / (2.0 * x0);
  y.segment(1, d) = x_rest / x0;
  y(d + 1) = (1.0 + n) / (2.0 * x0);
  return y;
}

GeneralChartPoint parameterize_general_inverse(const Vec& y, const Signature& sig) {
  const int d = sig.dim();
  if (y.size() != d + 2) throw InputError("parameterize_general_inverse: dimension mismatch");
  const double s = y(0) + y(d + 1);
  if (!(s > 0.0)) throw OutOfChartError("parameterize_general_inverse: y^0 + y^{d+1} <= 0");
  return {1.0 / s, y.segment(1, d) / s};
}

double chart_geodesic_distance(const GeneralChartPoint& a, const GeneralChartPoint& b) {
  return proper_distance(AdSPoint{a.rest, a.x0}, AdSPoint{b.rest, b.x0});
}

}  // namespace adsgnn
