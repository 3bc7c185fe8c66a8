#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>

#include "raretail/problem.hpp"
#include "raretail/symtensor.hpp"

namespace raretail {

/// Result of a boundary-minimum expansion, carried in log space throughout;
/// e^{-lambda/2} underflows doubles near lambda ~ 1420 and the regimes of
/// interest go far past that.
struct ExpansionResult {
  double log_leading = 0;
  double a1 = 0;
  double d2a1 = 0;       // a1 * d^2, the dimensionless first-order coefficient
  double rem1_rate = 0;  // remainder *rate* with unit constant, not a bound
  bool rate_is_heuristic = true;
  int order = 0;
  ConditionReport conditions;
  std::optional<double> log_value_first_order;  // set when 1 + a1 d^2/lambda > 0

  double log_value() const {
    return (order == 1 && log_value_first_order) ? *log_value_first_order : log_leading;
  }
};

/// log of (2π/λ)^{d/2} e^{-λ z0} / (λ sqrt(det H)).
inline double log_leading_term(int d, double lambda, double z0, const HMetricd& metric) {
  if (!(lambda > 0)) throw std::invalid_argument("log_leading_term: lambda must be positive");
  return 0.5 * d * (std::log(2.0 * M_PI) - std::log(lambda)) - lambda * z0 - std::log(lambda) -
         0.5 * metric.log_det();
}

/// First Laplace correction nu_1(f) for whitened inputs:
///   (1/2)<Hess f, I> - (1/2)<v3, grad f ⊗ I>
///   + f(0) ( ||v3||_F^2 / 12 + ||<v3, I>||^2 / 8 - <v4, I⊗I> / 8 ),
/// where v3, v4 are the whitened third and fourth derivatives of the
/// exponent and f is the whitened integrand factor.
inline double nu1(double f0, const Eigen::VectorXd& f_grad_w, const Eigen::MatrixXd& f_hess_w,
                  const SymTensor3d& v3, const SymTensor4d& v4) {
  const Eigen::Index d = v3.dim();
  if (f_grad_w.size() != d || f_hess_w.rows() != d || f_hess_w.cols() != d || v4.dim() != d)
    throw std::invalid_argument("nu1: dimension mismatch");
  const Eigen::VectorXd v3_id = contract_identity3(v3);
  const double fro = v3.frobenius_norm();
  return 0.5 * f_hess_w.trace() - 0.5 * v3_id.dot(f_grad_w) +
         f0 * (fro * fro / 12.0 + v3_id.squaredNorm() / 8.0 - contract_identity4(v4) / 8.0);
}

namespace detail {

struct NuBlocks {
  SymTensor3d v3;
  SymTensor4d v4;
  Eigen::VectorXd v3_id;
  double cubic_quartic;  // ||v3||_F^2/12 + ||<v3,I>||^2/8 - <v4,I⊗I>/8
};

inline NuBlocks whitened_exponent_blocks(const NormalizedProblem& np) {
  NuBlocks b{whiten(np.w_xxx, np.metric), whiten(np.w_xxxx, np.metric), {}, 0};
  b.v3_id = contract_identity3(b.v3);
  const double fro = b.v3.frobenius_norm();
  b.cubic_quartic =
      fro * fro / 12.0 + b.v3_id.squaredNorm() / 8.0 - contract_identity4(b.v4) / 8.0;
  return b;
}

}  // namespace detail

/// d^2 a_1 for a general observable, assembled from the local derivatives of
/// q and w at the instanton:
///   q_y - q0 w_yy + <q_xx, H^{-1}>/2 - q0 <w_xxy, H^{-1}>/2
///   - w_xy' H^{-1} q_x + q0 w_xy' H^{-1} w_xy
///   - <v3, I ⊗ H^{-1/2}(q_x - q0 w_xy)>/2 + q0 (cubic/quartic block).
inline double a1_general(const NormalizedProblem& np) {
  if (!np.q_data) throw std::invalid_argument("a1_general: q_data is required");
  const QData& q = *np.q_data;
  if (q.q_x.size() != np.d || q.q_xx.rows() != np.d)
    throw std::invalid_argument("a1_general: q_data dimension mismatch");
  const auto blocks = detail::whitened_exponent_blocks(np);
  const Eigen::MatrixXd hinv = np.metric.inv_root() * np.metric.inv_root();
  const Eigen::VectorXd q1_grad_w = whiten(Eigen::VectorXd(q.q_x - q.q0 * np.w_xy), np.metric);
  return q.q_y - q.q0 * np.w_yy + 0.5 * q.q_xx.cwiseProduct(hinv).sum() -
         0.5 * q.q0 * np.w_xxy.cwiseProduct(hinv).sum() - np.w_xy.dot(hinv * q.q_x) +
         q.q0 * np.w_xy.dot(hinv * np.w_xy) - 0.5 * blocks.v3_id.dot(q1_grad_w) +
         q.q0 * blocks.cubic_quartic;
}

/// d^2 a_1 for unit observable (q ≡ 1): the q-derivative terms drop out.
inline double a1_const_g(const NormalizedProblem& np) {
  const auto blocks = detail::whitened_exponent_blocks(np);
  const Eigen::MatrixXd hinv = np.metric.inv_root() * np.metric.inv_root();
  return -np.w_yy - 0.5 * np.w_xxy.cwiseProduct(hinv).sum() + np.w_xy.dot(hinv * np.w_xy) +
         0.5 * blocks.v3_id.dot(whiten(np.w_xy, np.metric)) + blocks.cubic_quartic;
}

/// d^2 a_1 for the standard-Gaussian template with boundary derivatives
/// (psi2, psi3, psi4) at the instanton; H = I + psi2, superscript-H terms are
/// whitened:
///   -1 - Tr(psi2_H)/2 + ||psi3_H||_F^2/12 + ||<psi3_H, I>||^2/8
///   - <psi4_H, I⊗I>/8 - Tr(psi2_H)^2/8 - Tr(psi2_H^2)/4.
inline double a1_gauss(const Eigen::MatrixXd& psi2, const SymTensor3d& psi3,
                       const SymTensor4d& psi4) {
  const Eigen::Index d = psi2.rows();
  if (psi3.dim() != d || psi4.dim() != d) throw std::invalid_argument("a1_gauss: dimension mismatch");
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d) + psi2;
  const HMetricd metric(h);  // throws if not positive definite
  const Eigen::MatrixXd p2h = whiten(psi2, metric);
  const double tr = p2h.trace();
  const double quad = -1.0 - 0.5 * tr - tr * tr / 8.0 - 0.25 * (p2h * p2h).trace();
  // Zero higher tensors contribute nothing; skipping their whitening keeps
  // quadratic boundaries at O(d^3) instead of O(d^5).
  if (psi3.frobenius_norm() == 0 && psi4.frobenius_norm() == 0) return quad;
  const SymTensor3d p3h = whiten(psi3, metric);
  const SymTensor4d p4h = whiten(psi4, metric);
  const double fro3 = p3h.frobenius_norm();
  return quad + fro3 * fro3 / 12.0 + contract_identity3(p3h).squaredNorm() / 8.0 -
         contract_identity4(p4h) / 8.0;
}

/// Closed form of the quadratic case in terms of the eigenvalues b_i of B:
/// d^2 a_1 = -1 - (1/2) Σ r_i - (1/8)(Σ r_i)^2 - (1/4) Σ r_i^2, r = b/(1+b).
inline double a1_quadratic(const Eigen::VectorXd& b_eigenvalues) {
  double s1 = 0, s2 = 0;
  for (Eigen::Index i = 0; i < b_eigenvalues.size(); ++i) {
    const double r = b_eigenvalues(i) / (1.0 + b_eigenvalues(i));
    s1 += r;
    s2 += r * r;
  }
  return -1.0 - 0.5 * s1 - s1 * s1 / 8.0 - 0.25 * s2;
}

/// First-order remainder rate with unit constant:
///   (omega30^2 + omega40(R eps)) d^2/λ + (omega11^2 + omega21(R eps)) d/λ
///   + omega02 / λ + λ^{-M}.
inline double rem1_rate(const DerivBounds& db, int d, double lambda, int M) {
  return (db.omega_30 * db.omega_30 + db.omega_40_R) * d * static_cast<double>(d) / lambda +
         (db.omega_11 * db.omega_11 + db.omega_21_R) * d / lambda + db.omega_02_box / lambda +
         std::pow(lambda, -M);
}

/// c_m = sum_{k=1}^m nu_{m-k}(q_k), available for m = 1, 2 (only nu_0 and
/// nu_1 have explicit forms): c_1 = q_1(0), c_2 = q_2(0) + nu_1(q_1).
inline double assemble_c(const std::vector<double>& qk_at_zero,
                         const std::vector<double>& nu1_of_qk, int m) {
  if (m < 1) throw std::invalid_argument("assemble_c: m must be positive");
  if (m > 2) throw std::invalid_argument("assemble_c: orders m >= 3 need nu_2 and higher");
  if (static_cast<int>(qk_at_zero.size()) < m)
    throw std::invalid_argument("assemble_c: missing q_k values");
  if (m == 1) return qk_at_zero[0];
  if (nu1_of_qk.empty()) throw std::invalid_argument("assemble_c: missing nu_1(q_1)");
  return qk_at_zero[1] + nu1_of_qk[0];
}

}  // namespace raretail
