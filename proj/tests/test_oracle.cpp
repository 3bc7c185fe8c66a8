#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "raretail/oracle.hpp"

using namespace raretail;

TEST_CASE("normal tail at zero and in the left tail") {
  CHECK(log_normal_tail(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(log_normal_tail(-40.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(log_normal_tail(-3.0) < 0.0);
}

TEST_CASE("normal tail against 50-digit reference values") {
  // Reference values computed with a 50-digit erfc evaluation.
  struct Ref {
    double t, logphibar;
  };
  const Ref refs[] = {
      {1, -1.84102164500926350577078307323},
      {5, -15.0649983939887257360837047919},
      {8, -35.0134371599145498955041281525},
      {10, -53.2312851505124705783470273541},
      {12, -75.4106730015687959388396832681},
      {20, -203.917155371097263936804458655},
      {25, -316.639408008020258935195763525},
      {30, -454.321243956343197107355771338},
      {40, -804.608442013753788166606832919},
  };
  for (const auto& r : refs)
    CHECK(log_normal_tail(r.t) == doctest::Approx(r.logphibar).epsilon(1e-13));
}

TEST_CASE("continued fraction and erfc branches agree at the switch point") {
  for (double t : {7.5, 7.9, 8.0}) {
    const double via_erfc = std::log(0.5 * std::erfc(t / std::sqrt(2.0)));
    double cf = 0.0;
    for (int k = 160; k >= 1; --k) cf = k / (t + cf);
    const double via_cf = -0.5 * t * t - 0.5 * std::log(2 * M_PI) - std::log(t + cf);
    CHECK(via_erfc == doctest::Approx(via_cf).epsilon(1e-13));
  }
}

TEST_CASE("radial oracle reduces to the plain tail for a flat boundary") {
  for (double lambda : {25.0, 100.0, 400.0}) {
    for (int d : {1, 4, 16}) {
      const auto r = oracle_radial([](double) { return 0.0; }, d, lambda, 1e-10);
      CHECK(r.log_p == doctest::Approx(log_normal_tail(std::sqrt(lambda))).epsilon(1e-10));
    }
  }
}

TEST_CASE("radial and Rao-Blackwellized oracles agree for B = beta I") {
  const int d = 3;
  const double lambda = 16;
  for (double beta : {1.0, 1.0 / d}) {
    const auto rq = oracle_radial([beta](double r) { return 0.5 * beta * r * r; }, d, lambda, 1e-10);
    const auto rm = oracle_quadratic(beta * Eigen::MatrixXd::Identity(d, d), lambda, 1000000, 99);
    const double gap = std::abs(rq.log_p - rm.log_p);
    CHECK(gap <= 3.0 * (rq.abs_log_error_estimate + rm.abs_log_error_estimate));
  }
}

TEST_CASE("quadratic oracle with B = 0 is the flat tail with zero variance") {
  const auto r = oracle_quadratic(Eigen::MatrixXd::Zero(2, 2), 49.0, 2000, 7);
  CHECK(r.log_p == doctest::Approx(log_normal_tail(7.0)).epsilon(1e-13));
  CHECK(r.abs_log_error_estimate <= 1e-12);
}

TEST_CASE("quadratic oracle respects an effective dimension drop") {
  // B = diag(1, 0): only the first coordinate matters, so the answer matches
  // the 1-d radial reduction.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
  B(0, 0) = 1.0;
  const double lambda = 25;
  const auto rm = oracle_quadratic(B, lambda, 1000000, 5);
  const auto rq = oracle_radial([](double r) { return 0.5 * r * r; }, 1, lambda, 1e-10);
  CHECK(std::abs(rm.log_p - rq.log_p) <= 3.0 * (rm.abs_log_error_estimate + rq.abs_log_error_estimate));
}

TEST_CASE("quadratic oracle is deterministic under its seed") {
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(3, 3);
  const auto a = oracle_quadratic(B, 25.0, 20000, 1234);
  const auto b = oracle_quadratic(B, 25.0, 20000, 1234);
  CHECK(a.log_p == b.log_p);
  const auto c = oracle_quadratic(B, 25.0, 20000, 1235);
  CHECK(a.log_p != c.log_p);
}

TEST_CASE("radial and Monte Carlo oracles agree across the quadratic grid") {
  // beta in {0, 1/d, 1, sqrt(lambda)} x d in {2,4,8} x lambda in {25,100,400},
  // fixed seeds, so the comparison is deterministic.
  std::uint64_t seed = 1000;
  for (int d : {2, 4, 8}) {
    for (double lambda : {25.0, 100.0, 400.0}) {
      for (double beta : {0.0, 1.0 / d, 1.0, std::sqrt(lambda)}) {
        const auto rq =
            oracle_radial([beta](double r) { return 0.5 * beta * r * r; }, d, lambda, 1e-10);
        const auto rm =
            oracle_quadratic(beta * Eigen::MatrixXd::Identity(d, d), lambda, 200000, ++seed);
        const double gap = std::abs(rq.log_p - rm.log_p);
        INFO("d=", d, " lambda=", lambda, " beta=", beta);
        CHECK(gap <= 3.0 * (rq.abs_log_error_estimate + rm.abs_log_error_estimate) + 1e-12);
      }
    }
  }
}

TEST_CASE("tail values respect the norm concentration bound") {
  // P(|Z| >= R) = 2 Phibar(R) <= exp(-(R-1)^2/2) for R >= 1.
  for (double R : {1.0, 1.5, 2.0, 4.0, 8.0, 12.0, 20.0}) {
    CHECK(std::log(2.0) + log_normal_tail(R) <= -0.5 * (R - 1) * (R - 1) + 1e-12);
  }
}

TEST_CASE("oracles are monotone: a larger boundary function lowers the probability") {
  const int d = 4;
  const double lambda = 100;
  double prev = 1e300;
  for (double beta : {0.0, 0.5, 1.0, 2.0}) {
    const auto r = oracle_radial([beta](double s) { return 0.5 * beta * s * s; }, d, lambda, 1e-9);
    CHECK(r.log_p < prev);
    prev = r.log_p;
  }
}

TEST_CASE("grid oracle matches the closed-form half-plane integral") {
  // z = x^2/2 + t on {t >= 0}: the integral is sqrt(2 pi / lambda) / lambda.
  const double lambda = 30;
  GridBox box;
  box.lo = Eigen::Vector2d(-8.0 / std::sqrt(lambda), 0.0);
  box.hi = Eigen::Vector2d(8.0 / std::sqrt(lambda), 40.0 / lambda);
  const auto r = oracle_low_d(
      [](const Eigen::VectorXd& u) { return 0.5 * u(0) * u(0) + u(1); },
      [](const Eigen::VectorXd& u) { return u(1) >= 0.0; }, 1, lambda, box, 16, 12, 1e-9);
  const double truth = std::log(std::sqrt(2 * M_PI / lambda) / lambda);
  CHECK(r.log_p == doctest::Approx(truth).epsilon(1e-8));
}

TEST_CASE("grid oracle reproduces the flat Gaussian tail after normalization") {
  // z = x^2/2 + (t+1)^2/2 over {t >= 0}; multiplying by lambda/(2 pi)
  // turns the integral into the tail probability of one normal coordinate.
  const double lambda = 30;
  GridBox box;
  const double xr = 8.0 / std::sqrt(lambda);
  box.lo = Eigen::Vector2d(-xr, 0.0);
  box.hi = Eigen::Vector2d(xr, xr);
  const auto r = oracle_low_d(
      [](const Eigen::VectorXd& u) {
        return 0.5 * u(0) * u(0) + 0.5 * (u(1) + 1.0) * (u(1) + 1.0);
      },
      [](const Eigen::VectorXd& u) { return u(1) >= 0.0; }, 1, lambda, box, 16, 12, 1e-8);
  const double log_p = r.log_p + std::log(lambda / (2 * M_PI));
  CHECK(log_p == doctest::Approx(log_normal_tail(std::sqrt(lambda))).epsilon(1e-6));
}

TEST_CASE("grid oracle returns log zero for an empty event") {
  GridBox box;
  box.lo = Eigen::Vector2d(-1, 0);
  box.hi = Eigen::Vector2d(1, 1);
  const auto r = oracle_low_d([](const Eigen::VectorXd&) { return 0.0; },
                              [](const Eigen::VectorXd&) { return false; }, 1, 10.0, box);
  CHECK(std::isinf(r.log_p));
  CHECK(r.log_p < 0);
}

TEST_CASE("grid oracle handles two tangent dimensions") {
  // z = ||x||^2/2 + (t+1)^2/2 over {t >= 0} factorizes:
  // integral = (2 pi / lambda) * sqrt(2 pi / lambda) * Phibar(sqrt(lambda)).
  const double lambda = 30;
  const double xr = 6.0 / std::sqrt(lambda);
  GridBox box;
  box.lo = Eigen::Vector3d(-xr, -xr, 0.0);
  box.hi = Eigen::Vector3d(xr, xr, 1.0);
  const auto r = oracle_low_d(
      [](const Eigen::VectorXd& u) {
        return 0.5 * (u(0) * u(0) + u(1) * u(1)) + 0.5 * (u(2) + 1.0) * (u(2) + 1.0);
      },
      [](const Eigen::VectorXd& u) { return u(2) >= 0.0; }, 2, lambda, box, 16, 6, 1e-7);
  const double truth = std::log(2 * M_PI / lambda) + 0.5 * std::log(2 * M_PI / lambda) +
                       log_normal_tail(std::sqrt(lambda));
  CHECK(r.log_p == doctest::Approx(truth).epsilon(1e-6));
}
