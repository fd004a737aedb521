#include "adsgnn/quadratic_space.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace adsgnn {

namespace {

void require_dim(const Vec& v, int n, const char* what) {
  if (v.size() != n) {
    std::ostringstream oss;
    oss << what << ": expected dimension " << n << ", got " << v.size();
    throw InputError(oss.str());
  }
}

}  // namespace

Signature::Signature(int p, int q) : p_(p), q_(q) {
  if (p < 0 || q < 0 || p + q < 1) {
    throw InputError("signature requires p, q >= 0 and p + q >= 1");
  }
}

Vec Signature::metric_diag() const {
  Vec d(dim());
  d.head(p_).setOnes();
  d.tail(q_).setConstant(-1.0);
  return d;
}

Vec Signature::extended_metric_diag() const {
  Vec d(extended_dim());
  d(0) = 1.0;
  d.segment(1, dim()) = metric_diag();
  d(dim() + 1) = -1.0;
  return d;
}

ConformalParams ConformalParams::identity(int d) {
  ConformalParams p;
  p.scale = 1.0;
  p.translation = Vec::Zero(d);
  p.sct = Vec::Zero(d);
  p.rotation = Mat::Identity(d, d);
  return p;
}

GroupElement::GroupElement(Signature sig, Mat matrix) : sig_(sig), matrix_(std::move(matrix)) {
  const int n = sig_.extended_dim();
  if (matrix_.rows() != n || matrix_.cols() != n) {
    throw InputError("group element matrix has wrong shape for its signature");
  }
}

GroupElement GroupElement::identity(Signature sig) {
  const int n = sig.extended_dim();
  return GroupElement(sig, Mat::Identity(n, n));
}

double GroupElement::pseudo_orthogonality_defect() const {
  const Vec diag = sig_.extended_metric_diag();
  const Mat metric = diag.asDiagonal();
  return (matrix_.transpose() * metric * matrix_ - metric).cwiseAbs().maxCoeff();
}

bool GroupElement::equals_mod_sign(const GroupElement& other, double tol) const {
  if (!(sig_ == other.sig_)) return false;
  return (matrix_ - other.matrix_).cwiseAbs().maxCoeff() <= tol ||
         (matrix_ + other.matrix_).cwiseAbs().maxCoeff() <= tol;
}

double eta(const Vec& x, const Vec& y, const Signature& sig) {
  require_dim(x, sig.dim(), "eta");
  require_dim(y, sig.dim(), "eta");
  return x.dot(sig.metric_diag().cwiseProduct(y));
}

double minkowski_inner(const Vec& u, const Vec& v, const Signature& sig) {
  require_dim(u, sig.extended_dim(), "minkowski_inner");
  require_dim(v, sig.extended_dim(), "minkowski_inner");
  return u.dot(sig.extended_metric_diag().cwiseProduct(v));
}

Vec iota_embed(const Vec& x, const Signature& sig) {
  const double n = eta(x, x, sig);
  Vec y(sig.extended_dim());
  y(0) = 0.5 * (1.0 - n);
  y.segment(1, sig.dim()) = x;
  y(sig.dim() + 1) = 0.5 * (1.0 + n);
  return y;
}

Vec inversion(const Vec& x, const Signature& sig, double eps) {
  const double n = eta(x, x, sig);
  if (std::abs(n) < eps) {
    throw SingularLocusError("inversion: eta(x,x) vanishes");
  }
  return x / n;
}

ConformalImage special_conformal(const Vec& x, const Vec& b, const Signature& sig, double eps) {
  const double xx = eta(x, x, sig);
  const double nu = 1.0 - 2.0 * eta(x, b, sig) + eta(b, b, sig) * xx;
  if (std::abs(nu) < eps) {
    throw SingularLocusError("special_conformal: nu(x,b) vanishes");
  }
  return {(x - xx * b) / nu, 1.0 / std::abs(nu)};
}

GroupElement linear_element(double c, const Mat& lambda, const Signature& sig) {
  const int d = sig.dim();
  if (!(c > 0.0)) throw InputError("linear_element: scale must be positive");
  if (lambda.rows() != d || lambda.cols() != d) {
    throw InputError("linear_element: rotation has wrong shape");
  }
  const Mat metric = sig.metric_diag().asDiagonal();
  if ((lambda.transpose() * metric * lambda - metric).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError("linear_element: rotation is not in O(p,q)");
  }
  Mat g = Mat::Zero(d + 2, d + 2);
  const double ch = (1.0 + c * c) / (2.0 * c);
  const double sh = (1.0 - c * c) / (2.0 * c);
  g(0, 0) = ch;
  g(0, d + 1) = sh;
  g(d + 1, 0) = sh;
  g(d + 1, d + 1) = ch;
  g.block(1, 1, d, d) = lambda;
  return GroupElement(sig, std::move(g));
}

GroupElement translation_element(const Vec& b, const Signature& sig) {
  const int d = sig.dim();
  require_dim(b, d, "translation_element");
  const double half_bb = 0.5 * eta(b, b, sig);
  const Vec b_lowered = sig.metric_diag().cwiseProduct(b);
  Mat g = Mat::Identity(d + 2, d + 2);
  g(0, 0) -= half_bb;
  g(0, d + 1) = -half_bb;
  g(d + 1, 0) = half_bb;
  g(d + 1, d + 1) += half_bb;
  g.block(0, 1, 1, d) = -b_lowered.transpose();
  g.block(d + 1, 1, 1, d) = b_lowered.transpose();
  g.block(1, 0, d, 1) = b;
  g.block(1, d + 1, d, 1) = b;
  return GroupElement(sig, std::move(g));
}

GroupElement sct_element(const Vec& b, const Signature& sig) {
  const int d = sig.dim();
  require_dim(b, d, "sct_element");
  const double half_bb = 0.5 * eta(b, b, sig);
  const Vec b_lowered = sig.metric_diag().cwiseProduct(b);
  Mat g = Mat::Identity(d + 2, d + 2);
  g(0, 0) -= half_bb;
  g(0, d + 1) = half_bb;
  g(d + 1, 0) = -half_bb;
  g(d + 1, d + 1) += half_bb;
  g.block(0, 1, 1, d) = -b_lowered.transpose();
  g.block(d + 1, 1, 1, d) = -b_lowered.transpose();
  g.block(1, 0, d, 1) = b;
  g.block(1, d + 1, d, 1) = -b;
  return GroupElement(sig, std::move(g));
}

GroupElement inversion_element(const Signature& sig) {
  const int n = sig.extended_dim();
  Mat g = Mat::Identity(n, n);
  g(0, 0) = -1.0;
  return GroupElement(sig, std::move(g));
}

GroupElement build_element(const ConformalParams& params, const Signature& sig, ElementKind kind) {
  switch (kind) {
    case ElementKind::affine:
      return compose(translation_element(params.translation, sig),
                     linear_element(params.scale, params.rotation, sig));
    case ElementKind::sct:
      return sct_element(params.sct, sig);
    case ElementKind::inversion:
      return inversion_element(sig);
  }
  throw InputError("build_element: unknown kind");
}

GroupElement compose(const GroupElement& a, const GroupElement& b) {
  if (!(a.signature() == b.signature())) {
    throw InputError("compose: signature mismatch");
  }
  return GroupElement(a.signature(), a.matrix() * b.matrix());
}

Vec apply_to_boundary(const GroupElement& g, const Vec& x, double eps) {
  const Signature& sig = g.signature();
  const Vec y = g.matrix() * iota_embed(x, sig);
  const int d = sig.dim();
  const double denom = y(0) + y(d + 1);
  if (std::abs(denom) < eps) {
    throw PointAtInfinityError("apply_to_boundary: image lies at projective infinity");
  }
  return y.segment(1, d) / denom;
}

}  // namespace adsgnn
