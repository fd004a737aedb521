#include "doctest.h"

#include <algorithm>
#include <random>

#include "adsgnn/ising_cft.hpp"
#include "test_util.hpp"

using namespace adsgnn;
using testutil::rel;

namespace {

CMat random_skew(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  CMat a = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      a(i, j) = Complex(nd(g), nd(g));
      a(j, i) = -a(i, j);
    }
  return a;
}

double crel(Complex a, Complex b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

std::vector<Complex> random_zeta(std::mt19937_64& g, int n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Complex> z;
  for (int i = 0; i < n; ++i) z.emplace_back(u(g), u(g));
  return z;
}

// Every balanced sign assignment, accumulated directly.
double spin_brute(const std::vector<Complex>& z) {
  const int n = static_cast<int>(z.size());
  double sum = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) * 2 != n) continue;
    double prod = 1.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double s = (((mask >> i) & 1u) == ((mask >> j) & 1u)) ? 1.0 : -1.0;
        prod *= std::pow(std::abs(z[i] - z[j]), s / 2.0);
      }
    sum += prod;
  }
  return sum / std::pow(2.0, 2 * n);
}

std::vector<Complex> transformed(const std::vector<Complex>& z, Complex mul, Complex add) {
  std::vector<Complex> out;
  for (auto v : z) out.push_back(mul * v + add);
  return out;
}

}  // namespace

TEST_CASE("small pfaffians") {
  CMat a(2, 2);
  a << 0, Complex(2, 1), -Complex(2, 1), 0;
  CHECK(pfaffian(a) == Complex(2, 1));
  CHECK(pfaffian_matching_oracle(a) == Complex(2, 1));

  std::mt19937_64 g(31);
  const CMat b = random_skew(g, 4);
  const Complex want = b(0, 1) * b(2, 3) - b(0, 2) * b(1, 3) + b(0, 3) * b(1, 2);
  CHECK(crel(pfaffian_matching_oracle(b), want) <= 1e-15);
  CHECK(crel(pfaffian(b), want) <= 1e-13);

  CHECK(pfaffian(CMat::Zero(4, 4)) == Complex(0, 0));
  CHECK(pfaffian(CMat(0, 0)) == Complex(1, 0));
  CHECK_THROWS_AS(pfaffian(CMat::Zero(3, 3)), InputError);
  CMat ns = b;
  ns(1, 0) += 0.1;
  CHECK_THROWS_AS(pfaffian(ns), InputError);
  CHECK_THROWS_AS(pfaffian_matching_oracle(CMat::Zero(10, 10)), InputError);
}

TEST_CASE("pfaffian against the matching sum and the determinant") {
  std::mt19937_64 g(32);
  for (int t = 0; t < 100; ++t) {
    const CMat a = random_skew(g, 6);
    CHECK(crel(pfaffian(a), pfaffian_matching_oracle(a)) <= 1e-10);
    const CMat b = random_skew(g, 8);
    CHECK(crel(pfaffian(b), pfaffian_matching_oracle(b)) <= 1e-10);
  }
  for (int n : {2, 4, 6, 10, 16}) {
    for (int t = 0; t < 20; ++t) {
      const CMat a = random_skew(g, n);
      const Complex pf = pfaffian(a);
      CHECK(crel(pf * pf, a.determinant()) <= 1e-8);
      const LogPfaffian lp = log_pfaffian(a);
      CHECK(rel(lp.log_abs, std::log(std::abs(pf))) <= 1e-12);
      CHECK(crel(lp.phase * std::exp(lp.log_abs), pf) <= 1e-12);
    }
  }
  // a zero leading entry forces a pivot swap
  CMat p = CMat::Zero(4, 4);
  p(0, 2) = 1.0;
  p(2, 0) = -1.0;
  p(1, 3) = 2.0;
  p(3, 1) = -2.0;
  CHECK(crel(pfaffian(p), pfaffian_matching_oracle(p)) <= 1e-15);
  CHECK(pfaffian(p) == Complex(-2.0, 0.0));
}

TEST_CASE("planar points") {
  CHECK_THROWS_AS(PlanarPoints({Complex(0, 0), Complex(0, 0)}), CollisionError);
  CHECK_THROWS_AS(PlanarPoints({Complex(0, 0), Complex(1e-10, 0)}), CollisionError);
  CHECK_THROWS_AS(PlanarPoints({Complex(0, 0), Complex(std::nan(""), 0)}), InputError);
  const PlanarPoints p({Complex(0, 0), Complex(3, 4)});
  CHECK(p.min_pairwise_distance() == 5.0);
}

TEST_CASE("energy correlator") {
  std::mt19937_64 g(33);
  for (int t = 0; t < 50; ++t) {
    const auto z = random_zeta(g, 2);
    const double want = 1.0 / std::norm(z[0] - z[1]);
    CHECK(rel(energy_correlator(PlanarPoints(z)), want) <= 1e-14);
  }
  const PlanarPoints sq({Complex(0, 0), Complex(1, 0), Complex(0, 1), Complex(1, 1)});
  const double oracle = std::norm(pfaffian_matching_oracle(inverse_difference_matrix(sq)));
  CHECK(rel(energy_correlator(sq), oracle) <= 1e-14);
  CHECK(energy_correlator(PlanarPoints({Complex(0, 0), Complex(1, 0), Complex(0, 1)})) == 0.0);

  for (int n : {2, 4, 6, 8, 12, 16}) {
    for (int t = 0; t < 20; ++t) {
      const PlanarPoints p(random_zeta(g, n));
      CHECK(rel(energy_correlator(p), energy_correlator_det(p)) <= 1e-9);
      CHECK(rel(log_energy_correlator(p), std::log(energy_correlator(p))) <= 1e-12);
    }
  }
}

TEST_CASE("spin correlator") {
  std::mt19937_64 g(34);
  for (int t = 0; t < 50; ++t) {
    const auto z = random_zeta(g, 2);
    const double want = std::pow(std::abs(z[0] - z[1]), -0.5) / 8.0;
    CHECK(rel(spin_correlator_squared(PlanarPoints(z)), want) <= 1e-14);
  }
  for (int n : {4, 6, 8, 10, 12}) {
    for (int t = 0; t < 10; ++t) {
      const auto z = random_zeta(g, n);
      const PlanarPoints p(z);
      CHECK(rel(spin_correlator_squared(p), spin_brute(z)) <= 1e-12);
      CHECK(rel(log_spin_correlator_squared(p), std::log(spin_brute(z))) <= 1e-12);
      auto perm = z;
      std::shuffle(perm.begin(), perm.end(), g);
      CHECK(rel(spin_correlator_squared(PlanarPoints(perm)), spin_correlator_squared(p)) <= 1e-13);
    }
  }
  CHECK(spin_correlator_squared(PlanarPoints(random_zeta(g, 3))) == 0.0);
  CHECK_THROWS_AS(spin_correlator_squared(PlanarPoints(random_zeta(g, 22))), InputError);
  // N = 20 stays finite through the log-space sum
  const double l20 = log_spin_correlator_squared(PlanarPoints(random_zeta(g, 20)));
  CHECK(std::isfinite(l20));
}

TEST_CASE("conformal covariance of the correlators") {
  std::mt19937_64 g(35);
  std::uniform_real_distribution<double> ang(0.0, 6.283185307179586);
  for (int n : {2, 4, 8}) {
    for (int t = 0; t < 10; ++t) {
      const auto z = random_zeta(g, n);
      const PlanarPoints p(z);
      const double e = energy_correlator(p), s = spin_correlator_squared(p);

      const auto moved = transformed(z, std::polar(1.0, ang(g)), Complex(0.7, -1.3));
      CHECK(rel(energy_correlator(PlanarPoints(moved)), e) <= 1e-10);
      CHECK(rel(spin_correlator_squared(PlanarPoints(moved)), s) <= 1e-10);

      for (double lambda : {0.5, 2.0}) {
        const PlanarPoints scaled(transformed(z, lambda, 0.0));
        CHECK(rel(energy_correlator(scaled), std::pow(lambda, -n) * e) <= 1e-10);
        CHECK(rel(spin_correlator_squared(scaled), std::pow(lambda, -2.0 * n / 8.0) * s) <= 1e-10);
      }
    }
  }
}

TEST_CASE("collision divergence of the energy correlator") {
  std::mt19937_64 g(36);
  auto z = random_zeta(g, 4);
  std::vector<double> lr, le;
  for (double r = 1e-4; r <= 1e-2 * 1.0001; r *= std::sqrt(10.0)) {
    z[1] = z[0] + Complex(r, 0.0);
    lr.push_back(std::log(r));
    le.push_back(make_targets(PlanarPoints(z)).log_energy);
  }
  const double slope = (le.back() - le.front()) / (lr.back() - lr.front());
  CHECK(std::abs(slope + 2.0) <= 0.04);
}

TEST_CASE("targets") {
  const PlanarPoints unit({Complex(0.3, 0.1), Complex(1.3, 0.1)});
  const CorrelatorTargets t = make_targets(unit);
  CHECK(std::abs(t.log_energy) <= 1e-15);
  CHECK(rel(t.log_spin, 0.5 * std::log(1.0 / 8.0)) <= 1e-14);

  std::mt19937_64 g(37);
  const auto z = random_zeta(g, 6);
  const CorrelatorTargets a = make_targets(PlanarPoints(z));
  const CorrelatorTargets b = make_targets(PlanarPoints(transformed(z, 1.0, Complex(5.0, -3.0))));
  CHECK(std::abs(a.log_energy - b.log_energy) <= 1e-10 * (1.0 + std::abs(a.log_energy)));
  CHECK(std::abs(a.log_spin - b.log_spin) <= 1e-10 * (1.0 + std::abs(a.log_spin)));
  CHECK_THROWS_AS(make_targets(PlanarPoints(random_zeta(g, 3))), InputError);
}
