#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "raretail/rng.hpp"

namespace raretail {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Positive-definite metric H with its symmetric square root, inverse root,
/// and log-determinant. All weighted norms and whitening go through it.
template <typename Scalar>
class HMetric {
 public:
  explicit HMetric(const MatrixX<Scalar>& m) : matrix_(m) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw std::invalid_argument("HMetric: matrix must be square and nonempty");
    const Scalar scale = m.template lpNorm<Eigen::Infinity>();
    if ((m - m.transpose()).template lpNorm<Eigen::Infinity>() >
        Scalar(1e-12) * std::max(scale, Scalar(1)))
      throw std::invalid_argument("HMetric: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(Scalar(0.5) * (m + m.transpose()));
    const VectorX<Scalar> ev = es.eigenvalues();
    if (ev(0) <= Scalar(1e-10) * ev(ev.size() - 1) || ev(0) <= Scalar(0))
      throw std::invalid_argument("HMetric: matrix is not positive definite");
    root_ = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    inv_root_ =
        es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    log_det_ = ev.array().log().sum();
  }

  static HMetric identity(Eigen::Index d) { return HMetric(MatrixX<Scalar>::Identity(d, d)); }

  Eigen::Index dim() const { return matrix_.rows(); }
  const MatrixX<Scalar>& matrix() const { return matrix_; }
  const MatrixX<Scalar>& root() const { return root_; }
  const MatrixX<Scalar>& inv_root() const { return inv_root_; }
  Scalar log_det() const { return log_det_; }

  /// Metric of H^{-1}; whitening by it undoes whitening by H.
  HMetric inverse_metric() const { return HMetric(inv_root_ * inv_root_); }

 private:
  MatrixX<Scalar> matrix_, root_, inv_root_;
  Scalar log_det_;
};

/// Dense symmetric order-3 tensor, stored as the full d^3 array.
template <typename Scalar>
class SymTensor3 {
 public:
  SymTensor3() : d_(0) {}
  explicit SymTensor3(Eigen::Index d) : d_(d), e_(static_cast<std::size_t>(d * d * d), Scalar(0)) {}

  static SymTensor3 zero(Eigen::Index d) { return SymTensor3(d); }

  Eigen::Index dim() const { return d_; }
  Scalar& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) { return e_[idx(i, j, k)]; }
  Scalar operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const { return e_[idx(i, j, k)]; }

  /// Average over the 6 index permutations.
  SymTensor3 symmetrized() const {
    SymTensor3 s(d_);
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index k = 0; k < d_; ++k)
          s(i, j, k) = ((*this)(i, j, k) + (*this)(i, k, j) + (*this)(j, i, k) + (*this)(j, k, i) +
                        (*this)(k, i, j) + (*this)(k, j, i)) /
                       Scalar(6);
    return s;
  }

  bool is_symmetric(Scalar tol = Scalar(1e-12)) const {
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = i; j < d_; ++j)
        for (Eigen::Index k = j; k < d_; ++k) {
          const Scalar v = (*this)(i, j, k);
          if (std::abs((*this)(i, k, j) - v) > tol || std::abs((*this)(j, i, k) - v) > tol ||
              std::abs((*this)(j, k, i) - v) > tol || std::abs((*this)(k, i, j) - v) > tol ||
              std::abs((*this)(k, j, i) - v) > tol)
            return false;
        }
    return true;
  }

  Scalar frobenius_norm() const {
    Scalar s(0);
    for (const Scalar& v : e_) s += v * v;
    return std::sqrt(s);
  }

  SymTensor3& operator+=(const SymTensor3& o) {
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
  }
  SymTensor3& operator*=(Scalar c) {
    for (Scalar& v : e_) v *= c;
    return *this;
  }

  /// v_i = <T, e_i ⊗ u ⊗ u>.
  VectorX<Scalar> contract2(const VectorX<Scalar>& u) const {
    VectorX<Scalar> r = VectorX<Scalar>::Zero(d_);
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index k = 0; k < d_; ++k) r(i) += (*this)(i, j, k) * u(j) * u(k);
    return r;
  }

  Scalar contract3(const VectorX<Scalar>& u) const { return contract2(u).dot(u); }

 private:
  std::size_t idx(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return static_cast<std::size_t>((i * d_ + j) * d_ + k);
  }
  Eigen::Index d_;
  std::vector<Scalar> e_;
};

/// Dense symmetric order-4 tensor, stored as the full d^4 array.
template <typename Scalar>
class SymTensor4 {
 public:
  SymTensor4() : d_(0) {}
  explicit SymTensor4(Eigen::Index d)
      : d_(d), e_(static_cast<std::size_t>(d * d * d * d), Scalar(0)) {}

  static SymTensor4 zero(Eigen::Index d) { return SymTensor4(d); }

  Eigen::Index dim() const { return d_; }
  Scalar& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) {
    return e_[idx(i, j, k, l)];
  }
  Scalar operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
    return e_[idx(i, j, k, l)];
  }

  /// Average over the 24 index permutations.
  SymTensor4 symmetrized() const {
    static constexpr int P[24][4] = {
        {0, 1, 2, 3}, {0, 1, 3, 2}, {0, 2, 1, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {0, 3, 2, 1},
        {1, 0, 2, 3}, {1, 0, 3, 2}, {1, 2, 0, 3}, {1, 2, 3, 0}, {1, 3, 0, 2}, {1, 3, 2, 0},
        {2, 0, 1, 3}, {2, 0, 3, 1}, {2, 1, 0, 3}, {2, 1, 3, 0}, {2, 3, 0, 1}, {2, 3, 1, 0},
        {3, 0, 1, 2}, {3, 0, 2, 1}, {3, 1, 0, 2}, {3, 1, 2, 0}, {3, 2, 0, 1}, {3, 2, 1, 0}};
    SymTensor4 s(d_);
    Eigen::Index ix[4];
    for (ix[0] = 0; ix[0] < d_; ++ix[0])
      for (ix[1] = 0; ix[1] < d_; ++ix[1])
        for (ix[2] = 0; ix[2] < d_; ++ix[2])
          for (ix[3] = 0; ix[3] < d_; ++ix[3]) {
            Scalar acc(0);
            for (const auto& p : P) acc += (*this)(ix[p[0]], ix[p[1]], ix[p[2]], ix[p[3]]);
            s(ix[0], ix[1], ix[2], ix[3]) = acc / Scalar(24);
          }
    return s;
  }

  bool is_symmetric(Scalar tol = Scalar(1e-12)) const {
    const SymTensor4 s = symmetrized();
    for (std::size_t i = 0; i < e_.size(); ++i)
      if (std::abs(e_[i] - s.e_[i]) > tol) return false;
    return true;
  }

  Scalar frobenius_norm() const {
    Scalar s(0);
    for (const Scalar& v : e_) s += v * v;
    return std::sqrt(s);
  }

  SymTensor4& operator+=(const SymTensor4& o) {
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
  }
  SymTensor4& operator*=(Scalar c) {
    for (Scalar& v : e_) v *= c;
    return *this;
  }

  /// v_i = <T, e_i ⊗ u ⊗ u ⊗ u>.
  VectorX<Scalar> contract3(const VectorX<Scalar>& u) const {
    VectorX<Scalar> r = VectorX<Scalar>::Zero(d_);
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index k = 0; k < d_; ++k)
          for (Eigen::Index l = 0; l < d_; ++l) r(i) += (*this)(i, j, k, l) * u(j) * u(k) * u(l);
    return r;
  }

  Scalar contract4(const VectorX<Scalar>& u) const { return contract3(u).dot(u); }

  /// <T, A ⊗ B> = sum_{ijkl} T_ijkl A_ij B_kl.
  Scalar contract_pair(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) const {
    Scalar s(0);
    for (Eigen::Index i = 0; i < d_; ++i)
      for (Eigen::Index j = 0; j < d_; ++j)
        for (Eigen::Index k = 0; k < d_; ++k)
          for (Eigen::Index l = 0; l < d_; ++l) s += (*this)(i, j, k, l) * a(i, j) * b(k, l);
    return s;
  }

 private:
  std::size_t idx(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
    return static_cast<std::size_t>(((i * d_ + j) * d_ + k) * d_ + l);
  }
  Eigen::Index d_;
  std::vector<Scalar> e_;
};

namespace detail {
template <typename Scalar>
void check_dims(Eigen::Index td, const HMetric<Scalar>& m) {
  if (td != m.dim()) throw std::invalid_argument("whiten: tensor/metric dimension mismatch");
}
}  // namespace detail

/// Whitening: contract every slot with H^{-1/2}.
template <typename Scalar>
VectorX<Scalar> whiten(const VectorX<Scalar>& v, const HMetric<Scalar>& m) {
  detail::check_dims(v.size(), m);
  return m.inv_root() * v;
}

template <typename Scalar>
MatrixX<Scalar> whiten(const MatrixX<Scalar>& a, const HMetric<Scalar>& m) {
  detail::check_dims(a.rows(), m);
  return m.inv_root() * a * m.inv_root();
}

template <typename Scalar>
SymTensor3<Scalar> whiten(const SymTensor3<Scalar>& t, const HMetric<Scalar>& m) {
  detail::check_dims(t.dim(), m);
  const Eigen::Index d = t.dim();
  const MatrixX<Scalar>& w = m.inv_root();
  // One slot at a time; w is symmetric so slot order does not matter.
  SymTensor3<Scalar> a(d), b(d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index i = 0; i < d; ++i) {
        Scalar s(0);
        for (Eigen::Index p = 0; p < d; ++p) s += t(p, j, k) * w(p, i);
        a(i, j, k) = s;
      }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index j = 0; j < d; ++j) {
        Scalar s(0);
        for (Eigen::Index p = 0; p < d; ++p) s += a(i, p, k) * w(p, j);
        b(i, j, k) = s;
      }
  SymTensor3<Scalar> c(d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = 0; k < d; ++k) {
        Scalar s(0);
        for (Eigen::Index p = 0; p < d; ++p) s += b(i, j, p) * w(p, k);
        c(i, j, k) = s;
      }
  return c;
}

template <typename Scalar>
SymTensor4<Scalar> whiten(const SymTensor4<Scalar>& t, const HMetric<Scalar>& m) {
  detail::check_dims(t.dim(), m);
  const Eigen::Index d = t.dim();
  const MatrixX<Scalar>& w = m.inv_root();
  SymTensor4<Scalar> cur = t;
  for (int slot = 0; slot < 4; ++slot) {
    SymTensor4<Scalar> next(d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k)
          for (Eigen::Index l = 0; l < d; ++l) {
            Scalar s(0);
            for (Eigen::Index p = 0; p < d; ++p) {
              switch (slot) {
                case 0: s += cur(p, j, k, l) * w(p, i); break;
                case 1: s += cur(i, p, k, l) * w(p, j); break;
                case 2: s += cur(i, j, p, l) * w(p, k); break;
                default: s += cur(i, j, k, p) * w(p, l); break;
              }
            }
            next(i, j, k, l) = s;
          }
    cur = std::move(next);
  }
  return cur;
}

/// v_i = sum_j T_ijj.
template <typename Scalar>
VectorX<Scalar> contract_identity3(const SymTensor3<Scalar>& t) {
  VectorX<Scalar> r = VectorX<Scalar>::Zero(t.dim());
  for (Eigen::Index i = 0; i < t.dim(); ++i)
    for (Eigen::Index j = 0; j < t.dim(); ++j) r(i) += t(i, j, j);
  return r;
}

/// sum_{ij} T_iijj.
template <typename Scalar>
Scalar contract_identity4(const SymTensor4<Scalar>& t) {
  Scalar s(0);
  for (Eigen::Index i = 0; i < t.dim(); ++i)
    for (Eigen::Index j = 0; j < t.dim(); ++j) s += t(i, i, j, j);
  return s;
}

/// Sym(A ⊗ B) for symmetric matrices A, B.
template <typename Scalar>
SymTensor4<Scalar> sym_outer(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("sym_outer: dimension mismatch");
  const Eigen::Index d = a.rows();
  SymTensor4<Scalar> t(d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) t(i, j, k, l) = a(i, j) * b(k, l);
  return t.symmetrized();
}

/// <Sym(A⊗A), B⊗B> = (1/3)<A,B>^2 + (2/3) Tr(ABAB), A and B symmetric.
template <typename Scalar>
Scalar contract_AB(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("contract_AB: dimension mismatch");
  const Scalar ab = a.cwiseProduct(b).sum();
  const MatrixX<Scalar> p = a * b;
  return ab * ab / Scalar(3) + Scalar(2) / Scalar(3) * (p * p).trace();
}

/// Power-iteration estimate plus a certified Frobenius upper bound.
/// The operator norm lies in [estimate, frobenius_bound].
template <typename Scalar>
struct OpNormEstimate {
  Scalar estimate;
  Scalar frobenius_bound;
};

/// ||v||_H for a gradient: ||H^{-1/2} v||.
template <typename Scalar>
Scalar h_opnorm(const VectorX<Scalar>& v, const HMetric<Scalar>& m) {
  detail::check_dims(v.size(), m);
  return (m.inv_root() * v).norm();
}

/// ||A||_H for a Hessian: spectral norm of H^{-1/2} A H^{-1/2}.
template <typename Scalar>
Scalar h_opnorm(const MatrixX<Scalar>& a, const HMetric<Scalar>& m) {
  detail::check_dims(a.rows(), m);
  const Scalar scale = a.template lpNorm<Eigen::Infinity>();
  if ((a - a.transpose()).template lpNorm<Eigen::Infinity>() >
      Scalar(1e-10) * std::max(scale, Scalar(1)))
    throw std::invalid_argument("h_opnorm: matrix is not symmetric");
  const MatrixX<Scalar> w = whiten(a, m);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(w, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

// Shifted symmetric higher-order power iteration on the whitened tensor.
// Maximizes <T, u^{⊗k}> over unit u; the shift keeps the ascent monotone.
template <typename TensorT, typename Scalar>
Scalar shopm_extreme(const TensorT& t, Eigen::Index d, std::uint64_t seed) {
  const Scalar fro = t.frobenius_norm();
  if (fro == Scalar(0)) return Scalar(0);
  const Scalar alpha = fro;
  Scalar best(0);
  constexpr int kRestarts = 8;
  for (int r = 0; r < kRestarts; ++r) {
    RngStream rng(seed + static_cast<std::uint64_t>(r));
    VectorX<Scalar> u(d);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = rng.normal();
    u.normalize();
    Scalar prev = std::numeric_limits<Scalar>::lowest();
    for (int it = 0; it < 500; ++it) {
      VectorX<Scalar> g;
      if constexpr (std::is_same_v<TensorT, SymTensor3<Scalar>>)
        g = t.contract2(u);
      else
        g = t.contract3(u);
      const Scalar val = g.dot(u);
      u = (g + alpha * u).normalized();
      if (std::abs(val - prev) <= Scalar(1e-14) * std::max(std::abs(val), Scalar(1))) {
        prev = val;
        break;
      }
      prev = val;
    }
    best = std::max(best, prev);
  }
  return best;
}

}  // namespace detail

/// ||T||_H for an order-3 derivative tensor. The estimate is the best value
/// of <T_whitened, u^{⊗3}> found over restarts; the true norm never exceeds
/// the Frobenius bound.
template <typename Scalar>
OpNormEstimate<Scalar> h_opnorm(const SymTensor3<Scalar>& t, const HMetric<Scalar>& m,
                                std::uint64_t seed = 1234) {
  detail::check_dims(t.dim(), m);
  if (!t.is_symmetric()) throw std::invalid_argument("h_opnorm: tensor is not symmetric");
  const SymTensor3<Scalar> w = whiten(t, m);
  // Odd order: f(-u) = -f(u), so sup |f| = sup f.
  const Scalar est = detail::shopm_extreme<SymTensor3<Scalar>, Scalar>(w, w.dim(), seed);
  return {est, w.frobenius_norm()};
}

/// ||T||_H for an order-4 derivative tensor; runs the iteration on both signs
/// since even-order forms can attain their modulus at a minimum.
template <typename Scalar>
OpNormEstimate<Scalar> h_opnorm(const SymTensor4<Scalar>& t, const HMetric<Scalar>& m,
                                std::uint64_t seed = 1234) {
  detail::check_dims(t.dim(), m);
  if (!t.is_symmetric(Scalar(1e-10))) throw std::invalid_argument("h_opnorm: tensor is not symmetric");
  const SymTensor4<Scalar> w = whiten(t, m);
  SymTensor4<Scalar> neg = w;
  neg *= Scalar(-1);
  const Scalar up = detail::shopm_extreme<SymTensor4<Scalar>, Scalar>(w, w.dim(), seed);
  const Scalar dn = detail::shopm_extreme<SymTensor4<Scalar>, Scalar>(neg, w.dim(), seed);
  return {std::max(up, dn), w.frobenius_norm()};
}

using HMetricd = HMetric<double>;
using SymTensor3d = SymTensor3<double>;
using SymTensor4d = SymTensor4<double>;

}  // namespace raretail
