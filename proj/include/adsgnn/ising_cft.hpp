#pragma once

// Exact correlators of the critical 2d Ising model: energy moments through a
// Pfaffian, spin moments through the balanced-sign enumeration formula.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "adsgnn/errors.hpp"

namespace adsgnn {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;

inline constexpr double kCollisionEps = 1e-9;
inline constexpr int kMaxMatchingOracleN = 8;
inline constexpr int kMaxSpinN = 20;

/// Pfaffian by skew-symmetric elimination with partial pivoting, O(n^3).
Complex pfaffian(const CMat& a);

struct LogPfaffian {
  double log_abs;  // -inf when the Pfaffian vanishes
  Complex phase;   // unit modulus (or 0)
};

/// Same elimination, with the product of pivots accumulated as a log-modulus.
LogPfaffian log_pfaffian(const CMat& a);

/// Signed sum over all perfect matchings; reference implementation for n <= 8.
Complex pfaffian_matching_oracle(const CMat& a);

class PlanarPoints {
 public:
  explicit PlanarPoints(std::vector<Complex> zeta, double collision_eps = kCollisionEps);

  const std::vector<Complex>& zeta() const { return zeta_; }
  int size() const { return static_cast<int>(zeta_.size()); }
  double min_pairwise_distance() const;

 private:
  std::vector<Complex> zeta_;
};

/// [1 / (zeta_i - zeta_j)] with zero diagonal.
CMat inverse_difference_matrix(const PlanarPoints& pts);

/// |Pf[1/(zeta_i - zeta_j)]|^2; zero for odd N.
double energy_correlator(const PlanarPoints& pts);

/// |det[1/(zeta_i - zeta_j)]|, the independent route (Pf^2 = det).
double energy_correlator_det(const PlanarPoints& pts);

/// log of energy_correlator without forming the correlator itself.
double log_energy_correlator(const PlanarPoints& pts);

/// 2^{-2N} sum_{eps = +-1, sum eps = 0} prod_{i<j} |zeta_i - zeta_j|^{eps_i eps_j / 2};
/// zero (empty sum) for odd N. Refuses N > 20.
double spin_correlator_squared(const PlanarPoints& pts);

double log_spin_correlator_squared(const PlanarPoints& pts);

struct CorrelatorTargets {
  double log_energy = 0.0;
  double log_spin = 0.0;
};

/// log <eps...eps> and log <sigma...sigma> = 0.5 log <sigma...sigma>^2.
/// Throws SampleRejected if either is not finite.
CorrelatorTargets make_targets(const PlanarPoints& pts);

}  // namespace adsgnn
