#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "raretail/rng.hpp"
#include "raretail/symtensor.hpp"

using namespace raretail;

namespace {

Eigen::MatrixXd random_symmetric(int d, RngStream& rng, double scale = 1.0) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) a(i, j) = a(j, i) = scale * rng.normal();
  return a;
}

Eigen::MatrixXd random_spd(int d, RngStream& rng) {
  const Eigen::MatrixXd a = random_symmetric(d, rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

SymTensor3d random_sym3(int d, RngStream& rng) {
  SymTensor3d t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) t(i, j, k) = rng.normal();
  return t.symmetrized();
}

SymTensor4d random_sym4(int d, RngStream& rng) {
  SymTensor4d t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) t(i, j, k, l) = rng.normal();
  return t.symmetrized();
}

SymTensor4d sym_identity4(int d) {
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  return sym_outer(id, id);
}

}  // namespace

TEST_CASE("HMetric factors and log-determinant reproduce the input matrix") {
  RngStream rng(7);
  for (int d : {1, 2, 5, 9}) {
    const Eigen::MatrixXd m = random_spd(d, rng);
    const HMetricd h(m);
    const double scale = m.norm();
    CHECK((h.root() * h.root().transpose() - m).norm() <= 1e-10 * scale);
    CHECK((h.inv_root() * h.root() - Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-10 * std::max(1.0, scale));
    CHECK(h.log_det() == doctest::Approx(std::log(m.determinant())).epsilon(1e-10));
  }
}

TEST_CASE("HMetric rejects asymmetric and indefinite matrices") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0.5, -0.5, 1;
  CHECK_THROWS_AS(HMetricd{a}, std::invalid_argument);
  Eigen::MatrixXd b(2, 2);
  b << 1, 0, 0, -2;
  CHECK_THROWS_AS(HMetricd{b}, std::invalid_argument);
  Eigen::MatrixXd c(2, 2);
  c << 1, 0, 0, 0;
  CHECK_THROWS_AS(HMetricd{c}, std::invalid_argument);
}

TEST_CASE("whiten scales a vector by the inverse root") {
  const HMetricd h(4.0 * Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd v(2);
  v << 2, 0;
  const Eigen::VectorXd w = whiten(v, h);
  CHECK(w(0) == doctest::Approx(1.0));
  CHECK(w(1) == doctest::Approx(0.0));
}

TEST_CASE("whiten with the identity metric is a no-op") {
  RngStream rng(11);
  const HMetricd id = HMetricd::identity(3);
  const SymTensor3d t = random_sym3(3, rng);
  const SymTensor3d w = whiten(t, id);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) CHECK(w(i, j, k) == doctest::Approx(t(i, j, k)).epsilon(1e-14));
}

TEST_CASE("a Hessian whitened by its own metric is the identity") {
  Eigen::MatrixXd a = Eigen::Vector2d(1, 4).asDiagonal();
  const HMetricd h(a);
  const Eigen::MatrixXd w = whiten(a, h);
  CHECK((w - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("whitening by H then by the inverse metric restores the tensor") {
  RngStream rng(13);
  const int d = 4;
  const Eigen::MatrixXd m = random_spd(d, rng);
  const HMetricd h(m);
  const HMetricd hinv = h.inverse_metric();
  const SymTensor4d t = random_sym4(d, rng);
  const SymTensor4d back = whiten(whiten(t, h), hinv);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          CHECK(back(i, j, k, l) == doctest::Approx(t(i, j, k, l)).epsilon(1e-10));
}

TEST_CASE("weighted norms of gradients and Hessians use the inverse root") {
  const HMetricd h1(4.0 * Eigen::MatrixXd::Identity(1, 1));
  Eigen::VectorXd v(1);
  v << 2;
  CHECK(h_opnorm(v, h1) == doctest::Approx(1.0));

  const HMetricd id2 = HMetricd::identity(2);
  Eigen::MatrixXd a = Eigen::Vector2d(3, -5).asDiagonal();
  CHECK(h_opnorm(a, id2) == doctest::Approx(5.0));
}

TEST_CASE("order-4 norm of Sym(I⊗I) at d=3 matches the unit-sphere grid search") {
  // Exhaustive 1-degree sweep of <Sym(I⊗I), u^{⊗4}> = ||u||^4 over S^2 gives
  // 1.0; the Frobenius norm of the tensor is sqrt(5).
  const HMetricd id = HMetricd::identity(3);
  const auto r = h_opnorm(sym_identity4(3), id);
  CHECK(r.estimate == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.frobenius_bound == doctest::Approx(2.23606797749979).epsilon(1e-12));
  CHECK(r.estimate <= r.frobenius_bound);
}

TEST_CASE("order-3 norm estimate never exceeds the certified bound") {
  RngStream rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const int d = 2 + rep;
    const Eigen::MatrixXd m = random_spd(d, rng);
    const HMetricd h(m);
    const SymTensor3d t = random_sym3(d, rng);
    const auto r = h_opnorm(t, h);
    CHECK(r.estimate >= 0.0);
    CHECK(r.estimate <= r.frobenius_bound * (1 + 1e-12));
  }
}

TEST_CASE("weighted operator norm equals the identity-metric norm of the whitened tensor") {
  RngStream rng(19);
  const int d = 4;
  const Eigen::MatrixXd m = random_spd(d, rng);
  const HMetricd h(m);
  const HMetricd id = HMetricd::identity(d);

  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  CHECK(h_opnorm(v, h) == doctest::Approx(h_opnorm(Eigen::VectorXd(whiten(v, h)), id)).epsilon(1e-10));

  const Eigen::MatrixXd a = random_symmetric(d, rng);
  CHECK(h_opnorm(a, h) == doctest::Approx(h_opnorm(Eigen::MatrixXd(whiten(a, h)), id)).epsilon(1e-10));

  const SymTensor3d t3 = random_sym3(d, rng);
  const auto n3 = h_opnorm(t3, h);
  const auto n3w = h_opnorm(whiten(t3, h), id);
  CHECK(n3.estimate == doctest::Approx(n3w.estimate).epsilon(1e-10));

  const SymTensor4d t4 = random_sym4(d, rng);
  const auto n4 = h_opnorm(t4, h);
  const auto n4w = h_opnorm(whiten(t4, h), id);
  CHECK(n4.estimate == doctest::Approx(n4w.estimate).epsilon(1e-10));
}

TEST_CASE("identity contractions match brute-force index sums") {
  RngStream rng(23);
  const int d = 3;
  const SymTensor3d t = random_sym3(d, rng);
  const Eigen::VectorXd c = contract_identity3(t);
  for (int i = 0; i < d; ++i) {
    double s = 0;
    for (int j = 0; j < d; ++j) s += t(i, j, j);
    CHECK(c(i) == doctest::Approx(s).epsilon(1e-14));
  }
  const SymTensor3d z = SymTensor3d::zero(4);
  CHECK(contract_identity3(z).norm() == 0.0);
}

TEST_CASE("contraction of Sym(I⊗I) with I⊗I is d²/3 + 2d/3") {
  for (int d : {1, 2, 3, 5, 8}) {
    const double v = contract_identity4(sym_identity4(d));
    CHECK(v == doctest::Approx(d * d / 3.0 + 2.0 * d / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("sym_outer against the symmetric pairing identity") {
  RngStream rng(29);
  const int d = 3;
  const Eigen::MatrixXd a = random_symmetric(d, rng);
  const Eigen::MatrixXd b = random_symmetric(d, rng);
  // Direct tensor contraction of Sym(A⊗A) with B⊗B versus the closed form.
  const SymTensor4d s = sym_outer(a, a);
  CHECK(s.contract_pair(b, b) == doctest::Approx(contract_AB(a, b)).epsilon(1e-12));

  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
  CHECK(contract_AB(zero, b) == 0.0);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  CHECK(contract_AB(id, id) == doctest::Approx(d * d / 3.0 + 2.0 * d / 3.0).epsilon(1e-12));
}

TEST_CASE("symmetrization is idempotent and linear; contractions are linear") {
  RngStream rng(31);
  const int d = 3;
  SymTensor4d raw(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) raw(i, j, k, l) = rng.normal();
  const SymTensor4d once = raw.symmetrized();
  const SymTensor4d twice = once.symmetrized();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          CHECK(twice(i, j, k, l) == doctest::Approx(once(i, j, k, l)).epsilon(1e-13));

  SymTensor3d t1 = random_sym3(d, rng);
  SymTensor3d t2 = random_sym3(d, rng);
  SymTensor3d lin = t1;
  lin *= 2.0;
  lin += t2;
  const Eigen::VectorXd lhs = contract_identity3(lin);
  const Eigen::VectorXd rhs = 2.0 * contract_identity3(t1) + contract_identity3(t2);
  CHECK((lhs - rhs).norm() <= 1e-12);
}

TEST_CASE("non-symmetric tensors are rejected by the weighted norm") {
  SymTensor3d t(2);
  t(0, 0, 1) = 1.0;  // deliberately asymmetric
  CHECK_THROWS_AS(h_opnorm(t, HMetricd::identity(2)), std::invalid_argument);
  SymTensor4d q(2);
  q(0, 0, 0, 1) = 1.0;
  CHECK_THROWS_AS(h_opnorm(q, HMetricd::identity(2)), std::invalid_argument);
}

TEST_CASE("dimension mismatches are rejected") {
  const HMetricd h = HMetricd::identity(3);
  Eigen::VectorXd v(2);
  v << 1, 2;
  CHECK_THROWS_AS(whiten(v, h), std::invalid_argument);
  CHECK_THROWS_AS(h_opnorm(SymTensor3d::zero(2), h), std::invalid_argument);
  Eigen::MatrixXd a(2, 2), b(3, 3);
  a.setIdentity();
  b.setIdentity();
  CHECK_THROWS_AS(sym_outer(a, b), std::invalid_argument);
}
