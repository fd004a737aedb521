#include "adsgnn/ising_cft.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace adsgnn {

namespace {

void check_skew(const CMat& a) {
  if (a.rows() != a.cols()) throw InputError("pfaffian: matrix must be square");
  if (a.rows() % 2 != 0) throw InputError("pfaffian: odd dimension");
  if (a.size() > 0 && (a + a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError("pfaffian: matrix is not skew-symmetric");
  }
}

// Reduces `a` in place. Calls on_pivot(value) for every pivot; returns the sign
// accumulated from row/column interchanges, or 0 if a pivot vanishes.
template <typename OnPivot>
double eliminate(CMat& a, OnPivot&& on_pivot) {
  const Eigen::Index n = a.rows();
  double sign = 1.0;
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    Eigen::Index piv = k + 1;
    double best = std::abs(a(k, k + 1));
    for (Eigen::Index j = k + 2; j < n; ++j) {
      const double v = std::abs(a(k, j));
      if (v > best) {
        best = v;
        piv = j;
      }
    }
    if (piv != k + 1) {
      a.row(k + 1).swap(a.row(piv));
      a.col(k + 1).swap(a.col(piv));
      sign = -sign;
    }
    const Complex p = a(k, k + 1);
    if (p == Complex(0.0, 0.0)) return 0.0;
    on_pivot(p);
    const Eigen::Index m = n - k - 2;
    if (m > 0) {
      // Pf(A) = a * Pf(B + (v u^T - u v^T) / a), u = A[k, k+2:], v = A[k+1, k+2:]
      const Eigen::VectorXcd u = a.row(k).tail(m).transpose() / p;
      const Eigen::VectorXcd v = a.row(k + 1).tail(m).transpose();
      a.bottomRightCorner(m, m).noalias() += v * u.transpose() - u * v.transpose();
    }
  }
  return sign;
}

Complex matching_sum(const CMat& a, std::vector<int>& idx) {
  if (idx.empty()) return {1.0, 0.0};
  const int first = idx.front();
  Complex total{0.0, 0.0};
  double sign = 1.0;
  for (std::size_t t = 1; t < idx.size(); ++t) {
    const int partner = idx[t];
    std::vector<int> rest;
    rest.reserve(idx.size() - 2);
    for (std::size_t s = 1; s < idx.size(); ++s) {
      if (s != t) rest.push_back(idx[s]);
    }
    total += sign * a(first, partner) * matching_sum(a, rest);
    sign = -sign;
  }
  return total;
}

}  // namespace

Complex pfaffian(const CMat& a) {
  check_skew(a);
  CMat w = a;
  Complex prod{1.0, 0.0};
  const double sign = eliminate(w, [&](Complex p) { prod *= p; });
  return sign == 0.0 ? Complex{0.0, 0.0} : sign * prod;
}

LogPfaffian log_pfaffian(const CMat& a) {
  check_skew(a);
  CMat w = a;
  double log_abs = 0.0;
  Complex phase{1.0, 0.0};
  const double sign = eliminate(w, [&](Complex p) {
    const double r = std::abs(p);
    log_abs += std::log(r);
    phase *= p / r;
  });
  if (sign == 0.0) return {-std::numeric_limits<double>::infinity(), {0.0, 0.0}};
  return {log_abs, sign * phase};
}

Complex pfaffian_matching_oracle(const CMat& a) {
  check_skew(a);
  if (a.rows() > kMaxMatchingOracleN) {
    throw InputError("pfaffian_matching_oracle: refused for n > 8");
  }
  std::vector<int> idx(static_cast<std::size_t>(a.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return matching_sum(a, idx);
}

PlanarPoints::PlanarPoints(std::vector<Complex> zeta, double collision_eps)
    : zeta_(std::move(zeta)) {
  for (const auto& z : zeta_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw InputError("PlanarPoints: non-finite coordinate");
    }
  }
  if (zeta_.size() >= 2 && !(min_pairwise_distance() > collision_eps)) {
    throw CollisionError("PlanarPoints: coincident insertion points");
  }
}

double PlanarPoints::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < zeta_.size(); ++i) {
    for (std::size_t j = i + 1; j < zeta_.size(); ++j) {
      best = std::min(best, std::abs(zeta_[i] - zeta_[j]));
    }
  }
  return best;
}

CMat inverse_difference_matrix(const PlanarPoints& pts) {
  const int n = pts.size();
  const auto& z = pts.zeta();
  CMat m = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Complex v = 1.0 / (z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = -v;
    }
  }
  return m;
}

double energy_correlator(const PlanarPoints& pts) {
  if (pts.size() % 2 != 0) return 0.0;
  return std::norm(pfaffian(inverse_difference_matrix(pts)));
}

double energy_correlator_det(const PlanarPoints& pts) {
  if (pts.size() % 2 != 0) return 0.0;
  const CMat m = inverse_difference_matrix(pts);
  return std::abs(m.partialPivLu().determinant());
}

double log_energy_correlator(const PlanarPoints& pts) {
  if (pts.size() % 2 != 0) return -std::numeric_limits<double>::infinity();
  return 2.0 * log_pfaffian(inverse_difference_matrix(pts)).log_abs;
}

double log_spin_correlator_squared(const PlanarPoints& pts) {
  const int n = pts.size();
  if (n > kMaxSpinN) throw InputError("spin_correlator_squared: refused for N > 20");
  if (n % 2 != 0 || n == 0) return -std::numeric_limits<double>::infinity();

  const auto& z = pts.zeta();
  std::vector<double> logd(static_cast<std::size_t>(n * n), 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double l = std::log(std::abs(z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)]));
      logd[static_cast<std::size_t>(i * n + j)] = l;
      logd[static_cast<std::size_t>(j * n + i)] = l;
      total += l;
    }
  }

  // Balanced assignments come in +-eps pairs with equal weight: fix eps_0 = +1
  // and enumerate the remaining N/2 - 1 plus-signs among indices 1..N-1 with
  // Gosper's hack. exponent = sum_{i<j} eps_i eps_j L_ij / 2 = total/2 - cross,
  // where cross sums L_ij over (plus, minus) pairs.
  const int rest = n - 1;
  const int pick = n / 2 - 1;
  double run_max = -std::numeric_limits<double>::infinity();
  double run_sum = 0.0;
  std::vector<int> plus;
  std::vector<int> minus;
  auto accumulate = [&](std::uint32_t mask) {
    plus.assign(1, 0);
    minus.clear();
    for (int b = 0; b < rest; ++b) {
      ((mask >> b) & 1u ? plus : minus).push_back(b + 1);
    }
    double cross = 0.0;
    for (int i : plus) {
      const double* row = &logd[static_cast<std::size_t>(i * n)];
      for (int j : minus) cross += row[j];
    }
    const double e = 0.5 * total - cross;
    if (e > run_max) {
      run_sum = run_sum * std::exp(run_max - e) + 1.0;
      run_max = e;
    } else {
      run_sum += std::exp(e - run_max);
    }
  };
  if (pick == 0) {
    accumulate(0u);
  } else {
    std::uint32_t mask = (1u << pick) - 1u;
    const std::uint32_t limit = 1u << rest;
    while (mask < limit) {
      accumulate(mask);
      const std::uint32_t c = mask & (~mask + 1u);
      const std::uint32_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
  }
  // 2^{-2N} * 2 * sum_half
  return run_max + std::log(run_sum) + (1.0 - 2.0 * n) * std::numbers::ln2;
}

double spin_correlator_squared(const PlanarPoints& pts) {
  const double l = log_spin_correlator_squared(pts);
  return std::exp(l);
}

CorrelatorTargets make_targets(const PlanarPoints& pts) {
  if (pts.size() % 2 != 0 || pts.size() == 0) {
    throw InputError("make_targets: N must be even and positive");
  }
  CorrelatorTargets t;
  t.log_energy = log_energy_correlator(pts);
  t.log_spin = 0.5 * log_spin_correlator_squared(pts);
  if (!std::isfinite(t.log_energy) || !std::isfinite(t.log_spin)) {
    throw SampleRejected("make_targets: correlator not representable");
  }
  return t;
}

}  // namespace adsgnn
