#pragma once

// Conformal geometry of the pseudo-Euclidean space R^{p,q} and its linear
// model inside R^{p+1,q+1}.
//
// Vectors of the extended space use the ordering (y^0, y^1..y^d, y^{d+1})
// with metric diag(+1, Delta^{p,q}, -1), i.e. the first coordinate is the
// extra positive direction and the last coordinate the extra negative one.

#include <Eigen/Dense>

#include "adsgnn/errors.hpp"

namespace adsgnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kSingularEps = 1e-12;
inline constexpr double kPseudoOrthoTol = 1e-10;

class Signature {
 public:
  Signature(int p, int q);

  /// Euclidean signature (d, 0).
  static Signature euclidean(int d) { return Signature(d, 0); }

  int p() const { return p_; }
  int q() const { return q_; }
  int dim() const { return p_ + q_; }
  int extended_dim() const { return p_ + q_ + 2; }

  /// Delta^{p,q} as a diagonal vector.
  Vec metric_diag() const;
  /// Delta^{p+1,q+1} in extended ordering.
  Vec extended_metric_diag() const;

  friend bool operator==(const Signature&, const Signature&) = default;

 private:
  int p_;
  int q_;
};

/// Parameters of the generators: x' = scale * rotation * x + translation,
/// and the special conformal vector `sct`.
struct ConformalParams {
  double scale = 1.0;
  Vec translation;
  Vec sct;
  Mat rotation;

  /// Identity parameters for dimension d.
  static ConformalParams identity(int d);
};

enum class ElementKind { affine, sct, inversion };

/// A representative of [Lambda] in PO(p+1,q+1) = O(p+1,q+1)/{+-1}.
class GroupElement {
 public:
  GroupElement(Signature sig, Mat matrix);

  static GroupElement identity(Signature sig);

  const Signature& signature() const { return sig_; }
  const Mat& matrix() const { return matrix_; }

  /// max |M^T Delta M - Delta|.
  double pseudo_orthogonality_defect() const;

  /// Equality in PO(p+1,q+1): compares against both +M and -M.
  bool equals_mod_sign(const GroupElement& other, double tol = 1e-10) const;

 private:
  Signature sig_;
  Mat matrix_;
};

/// eta^{p,q}(x, y) on R^{p,q}.
double eta(const Vec& x, const Vec& y, const Signature& sig);

/// eta^{p+1,q+1}(u, v) on the extended space.
double minkowski_inner(const Vec& u, const Vec& v, const Signature& sig);

/// Null embedding x -> ((1 - eta(x,x))/2, x, (1 + eta(x,x))/2).
Vec iota_embed(const Vec& x, const Signature& sig);

/// x / eta(x,x). Throws SingularLocusError when |eta(x,x)| < eps.
Vec inversion(const Vec& x, const Signature& sig, double eps = kSingularEps);

struct ConformalImage {
  Vec point;
  double conformal_factor;
};

/// sigma_b(x) = (x - eta(x,x) b) / nu(x,b) with factor 1/|nu(x,b)|.
ConformalImage special_conformal(const Vec& x, const Vec& b, const Signature& sig,
                                 double eps = kSingularEps);

/// Generator matrices.
GroupElement linear_element(double c, const Mat& lambda, const Signature& sig);
GroupElement translation_element(const Vec& b, const Signature& sig);
GroupElement sct_element(const Vec& b, const Signature& sig);
GroupElement inversion_element(const Signature& sig);

/// Affine: Gamma_{I,t} Gamma_{scale*M}. Sct: Sigma_b. Inversion: Lambda_inv.
GroupElement build_element(const ConformalParams& params, const Signature& sig,
                           ElementKind kind);

GroupElement compose(const GroupElement& a, const GroupElement& b);

/// Unique x' with [g iota(x)] = [iota(x')].
Vec apply_to_boundary(const GroupElement& g, const Vec& x, double eps = kSingularEps);

}  // namespace adsgnn
