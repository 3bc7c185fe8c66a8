#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raretail/symtensor.hpp"

namespace raretail {

/// A rare-event problem described at its most likely point u*: level-set
/// event {F >= F0} under the density exp(-lambda_bar * zbar), with gradients
/// and Hessians of zbar and F evaluated at u*.
struct GeneralProblem {
  Eigen::VectorXd u_star;      // in R^{d+1}
  double lambda_bar = 1;
  double zbar_star = 0;        // zbar(u*); shifts the log integral only
  Eigen::VectorXd grad_zbar;
  Eigen::MatrixXd hess_zbar;
  Eigen::VectorXd grad_F;
  Eigen::MatrixXd hess_F;
  double F0 = 0;

  int dim_total() const { return static_cast<int>(u_star.size()); }
};

/// Local observable data for first-order coefficients: value and derivatives
/// of q(x, y) = g(x, psi(x) + y) at the origin of the canonical frame.
struct QData {
  double q0 = 1;
  double q_y = 0;
  Eigen::VectorXd q_x;
  Eigen::MatrixXd q_xx;
};

/// A problem in the canonical frame: instanton at the origin, gradient of z
/// equal to (0_d, 1), boundary parameterized as (x, psi(x)). Carries every
/// local derivative of w(x, y) = z(x, psi(x) + y) the expansions consume.
struct NormalizedProblem {
  int d = 0;
  double lambda = 1;
  HMetricd metric;             // H = Hess_x z(0) + Hess psi(0)
  double z0 = 0;               // z at the instanton
  Eigen::MatrixXd basis_U1;    // (d+1) x d, columns orthonormal, span n-perp
  Eigen::VectorXd normal_n;    // unit normal, interior direction
  Eigen::MatrixXd psi2;        // Hess psi(0)
  double w_yy = 0;
  Eigen::VectorXd w_xy;
  Eigen::MatrixXd w_xxy;
  SymTensor3d w_xxx;
  SymTensor4d w_xxxx;
  std::optional<QData> q_data;

  NormalizedProblem() : metric(Eigen::MatrixXd::Identity(1, 1)) {}

  double epsilon() const { return std::sqrt(static_cast<double>(d) / lambda); }
};

/// Sup-bounds on boundary derivatives over metric balls:
/// delta_l(r) = sup_{||x||_H <= r} ||grad^l psi(x)||_H. Closed forms are
/// built in for polynomial boundaries; the custom kind carries
/// caller-supplied constants (treated as radius-independent sups).
class DeltaBounds {
 public:
  static DeltaBounds flat() { return DeltaBounds(); }

  /// Quadratic boundary psi = x' B x / 2: delta_2 = ||B||_H, higher zero.
  static DeltaBounds quadratic(double b_norm) {
    DeltaBounds b;
    b.kind_ = Kind::kQuadratic;
    b.a_ = b_norm;
    return b;
  }

  /// Quartic boundary psi = <S, x^4>/24 with ||S||_H = s_norm:
  /// delta_2(r) = s r^2 / 2, delta_3(r) = s r, delta_4 = s.
  static DeltaBounds quartic(double s_norm) {
    DeltaBounds b;
    b.kind_ = Kind::kQuartic;
    b.a_ = s_norm;
    return b;
  }

  static DeltaBounds custom(double delta2_point, double delta3_point, double delta2_sup,
                            double delta3_sup, double delta4_sup) {
    DeltaBounds b;
    b.kind_ = Kind::kCustom;
    b.d2_point_ = delta2_point;
    b.d3_point_ = delta3_point;
    b.d2_sup_ = delta2_sup;
    b.d3_sup_ = delta3_sup;
    b.d4_sup_ = delta4_sup;
    return b;
  }

  double delta2(double r) const {
    switch (kind_) {
      case Kind::kFlat: return 0;
      case Kind::kQuadratic: return a_;
      case Kind::kQuartic: return 0.5 * a_ * r * r;
      default: return d2_sup_;
    }
  }
  double delta3(double r) const {
    switch (kind_) {
      case Kind::kFlat: return 0;
      case Kind::kQuadratic: return 0;
      case Kind::kQuartic: return a_ * r;
      default: return d3_sup_;
    }
  }
  double delta4(double r) const {
    (void)r;
    switch (kind_) {
      case Kind::kFlat: return 0;
      case Kind::kQuadratic: return 0;
      case Kind::kQuartic: return a_;
      default: return d4_sup_;
    }
  }
  double delta2_point() const { return kind_ == Kind::kCustom ? d2_point_ : delta2(0); }
  double delta3_point() const { return kind_ == Kind::kCustom ? d3_point_ : delta3(0); }

 private:
  enum class Kind { kFlat, kQuadratic, kQuartic, kCustom };
  Kind kind_ = Kind::kFlat;
  double a_ = 0;
  double d2_point_ = 0, d3_point_ = 0, d2_sup_ = 0, d3_sup_ = 0, d4_sup_ = 0;
};

/// Derivative-bound record feeding the validity checks and remainder rates.
/// Fields with the _R suffix are sups over the ball of radius R*eps; bare
/// fields are values at the instanton.
struct DerivBounds {
  double omega_11 = 0;
  double omega_21_R = 0;
  double omega_02_strip = 0;  // sup over the tall strip [0, R eps]
  double omega_02_box = 0;    // sup over the box [0, (R eps)^2]
  double omega_30 = 0;
  double omega_30_R = 0;
  double omega_40_R = 0;
  double delta_2 = 0, delta_3 = 0;
  double delta_2_R = 0, delta_3_R = 0, delta_4_R = 0;
  double s = 0;                                        // global linear-growth slope
  double rho0 = std::numeric_limits<double>::infinity();
  double rho1 = 0;
  double c_min = 1;
  bool convex_flag = false;
};

struct ConditionCheck {
  std::string name;
  double lhs = 0, rhs = 0;
  bool pass = false;
};

struct ConditionReport {
  double R_used = 0;
  int M_used = 1;
  std::vector<ConditionCheck> checks;
  bool overall = true;

  void add(std::string name, double lhs, double rhs) {
    const bool ok = lhs <= rhs;
    checks.push_back({std::move(name), lhs, rhs, ok});
    overall = overall && ok;
  }
};

/// Free constants of the validity conditions; the theory fixes none of them,
/// so they default to 1.
struct CheckConstants {
  double C34 = 1;
  double c_psi = 1;
  double c_delta = 1;
};

/// Rotates and rescales a general problem into the canonical frame:
/// n = grad zbar / ||grad zbar||, a Householder basis completes n, and
/// lambda = lambda_bar ||grad zbar||. Quadratic data only; higher w-tensors
/// are zero (supply them directly for quartic-order work).
inline NormalizedProblem normalize_general(const GeneralProblem& p) {
  const int dp1 = p.dim_total();
  if (dp1 < 2) throw std::invalid_argument("normalize_general: need at least 2 dimensions");
  const double gz = p.grad_zbar.norm();
  const double gf = p.grad_F.norm();
  if (gz <= 0 || gf <= 0) throw std::invalid_argument("normalize_general: zero gradient");
  const Eigen::VectorXd n = p.grad_zbar / gz;
  const Eigen::VectorXd f_hat = p.grad_F / gf;
  const double cosang = n.dot(f_hat);
  if (cosang < 0)
    throw std::invalid_argument(
        "normalize_general: grad F is anti-parallel to grad zbar (not a constrained minimum)");
  // The instanton is a KKT point, so the gradients must be parallel. The
  // angle is measured through the orthogonal residual, which stays accurate
  // where acos of the inner product would not.
  if ((f_hat - cosang * n).norm() > 1e-8)
    throw std::invalid_argument("normalize_general: grad F is not parallel to grad zbar");

  // Householder reflection mapping e_{d+1} to n; deterministic basis choice.
  Eigen::MatrixXd U = Eigen::MatrixXd::Identity(dp1, dp1);
  Eigen::VectorXd v = n;
  v(dp1 - 1) -= 1.0;
  const double vv = v.squaredNorm();
  if (vv > 1e-28) U -= (2.0 / vv) * (v * v.transpose());
  const Eigen::MatrixXd U1 = U.leftCols(dp1 - 1);

  NormalizedProblem np;
  np.d = dp1 - 1;
  np.lambda = p.lambda_bar * gz;
  np.z0 = p.zbar_star / gz;
  np.basis_U1 = U1;
  np.normal_n = U.col(dp1 - 1);
  const Eigen::MatrixXd zxx = U1.transpose() * p.hess_zbar * U1 / gz;
  // Differentiating F(u* + U1 x + psi(x) n) = F0 twice at x = 0 gives
  // Hess psi(0) = -U1' Hess F U1 / <grad F, n>.
  np.psi2 = -(U1.transpose() * p.hess_F * U1) / p.grad_F.dot(n);
  const Eigen::MatrixXd h = zxx + np.psi2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= 0)
    throw std::invalid_argument("normalize_general: H is not positive definite (lowest eigenvalue " +
                                std::to_string(es.eigenvalues()(0)) + ")");
  np.metric = HMetricd(h);
  np.w_yy = n.dot(p.hess_zbar * n) / gz;
  np.w_xy = U1.transpose() * p.hess_zbar * n / gz;
  np.w_xxy = Eigen::MatrixXd::Zero(np.d, np.d);
  np.w_xxx = SymTensor3d::zero(np.d);
  np.w_xxxx = SymTensor4d::zero(np.d);
  return np;
}

struct GaussComposition {
  NormalizedProblem problem;
  DerivBounds bounds;
};

/// Builds the canonical frame for the Gaussian template problem
/// z(x, t) = ||x||^2/2 + (t+1)^2/2 with boundary derivatives of psi at the
/// instanton. w derivatives compose exactly:
///   w_yy = 1, w_xy = 0, w_xxy = psi2, w_xxx = psi3,
///   w_xxxx = psi4 + 3 Sym(psi2 ⊗ psi2),
/// and the omega bounds follow from the delta profile.
inline GaussComposition gauss_compose(double lambda, const Eigen::MatrixXd& psi2,
                                      const SymTensor3d& psi3, const SymTensor4d& psi4,
                                      const DeltaBounds& deltas, int M = 1,
                                      double rho0 = std::numeric_limits<double>::infinity()) {
  const int d = static_cast<int>(psi2.rows());
  if (psi2.cols() != d || psi3.dim() != d || psi4.dim() != d)
    throw std::invalid_argument("gauss_compose: dimension mismatch");
  const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d) + psi2;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= 0)
    throw std::invalid_argument("gauss_compose: I + psi2 is not positive definite");

  GaussComposition out;
  NormalizedProblem& np = out.problem;
  np.d = d;
  np.lambda = lambda;
  np.metric = HMetricd(h);
  np.z0 = 0.5;  // z at the instanton of the template problem
  np.basis_U1 = Eigen::MatrixXd::Identity(d + 1, d);
  np.normal_n = Eigen::VectorXd::Unit(d + 1, d);
  np.psi2 = psi2;
  np.w_yy = 1;
  np.w_xy = Eigen::VectorXd::Zero(d);
  np.w_xxy = psi2;
  np.w_xxx = psi3;
  SymTensor4d t = sym_outer(psi2, psi2);
  t *= 3.0;
  t += psi4;
  np.w_xxxx = t;

  // Bounds at the radii the first-order checks use, with the convex-case
  // radius R = 24 + 2(1+2M) log(lambda)/d.
  DerivBounds& db = out.bounds;
  const double R = 24.0 + 2.0 * (1.0 + 2.0 * M) * std::log(lambda) / d;
  const double re = R * np.epsilon();
  const auto omega_l0 = [&](double r) {
    // ||grad^l_x w(x,0)||_H <= delta_l (1 + delta_0) + sum_k delta_k delta_{l-k}
    // with delta_0(r) <= r^2 delta_2(r)/2 and delta_1(r) <= r delta_2(r).
    const double d0 = 0.5 * r * r * deltas.delta2(r);
    const double d1 = r * deltas.delta2(r);
    const double d2 = deltas.delta2(r);
    const double d3 = deltas.delta3(r);
    const double d4 = deltas.delta4(r);
    return std::pair<double, double>{d3 * (1 + d0) + 3 * d1 * d2,
                                     d4 * (1 + d0) + 2 * d1 * d3 + d2 * d2};
  };
  db.omega_11 = 0;                       // grad_x dy w = grad psi, zero at the instanton
  db.omega_21_R = deltas.delta2(re);     // omega_{l,1} = delta_l
  db.omega_02_strip = 1;                 // d^2_y w = 1 identically
  db.omega_02_box = 1;
  db.omega_30 = deltas.delta3_point();
  const auto [w3, w4] = omega_l0(re);
  db.omega_30_R = w3;
  db.omega_40_R = w4;
  db.delta_2 = deltas.delta2_point();
  db.delta_3 = deltas.delta3_point();
  db.delta_2_R = deltas.delta2(re);
  db.delta_3_R = deltas.delta3(re);
  db.delta_4_R = deltas.delta4(re);
  db.rho0 = rho0;
  db.convex_flag = true;  // the template z is convex and D is star-shaped
  db.c_min = 1;
  db.s = 0;
  return out;
}

/// First-order validity conditions. The convex variant uses
/// R = 24 + 2(1+2M) log(lambda)/d; the general variant
/// R = 12/C_min + 2(1+2M) log(lambda)/d and additionally needs the global
/// growth data (s, rho1).
inline ConditionReport check_conditions(const NormalizedProblem& np, const DerivBounds& db, int M,
                                        const CheckConstants& constants = {}) {
  ConditionReport rep;
  rep.M_used = M;
  const double eps = np.epsilon();
  const double logla = std::log(np.lambda);
  const double R = (db.convex_flag ? 24.0 : 12.0 / db.c_min) + 2.0 * (1.0 + 2.0 * M) * logla / np.d;
  rep.R_used = R;
  const double re = R * eps;

  if (db.convex_flag) {
    rep.add("radius: R*eps <= min(1, rho0)", re, std::min(1.0, db.rho0));
    rep.add("boundary curvature: R*eps * delta2(R*eps/2) <= 2", re * db.delta_2_R, 2.0);
    rep.add("third-derivative growth: R*eps * omega30(R*eps) <= 3", re * db.omega_30_R, 3.0);
  } else {
    if (!(db.s > 0) || !(db.rho1 > 0))
      throw std::invalid_argument("check_conditions: general variant needs s and rho1");
    rep.add("growth slope: eps <= s", eps, db.s);
    rep.add("radius: R*eps <= min(1, rho0, 2*rho1, 2/delta2(rho1))",
            re, std::min({1.0, db.rho0, 2.0 * db.rho1, 2.0 / std::max(db.delta_2_R, 1e-300)}));
  }
  rep.add("watson slope: R*eps*(omega11 + omega02_strip) + (R*eps)^2*omega21 <= 1/2",
          re * (db.omega_11 + db.omega_02_strip) + re * re * db.omega_21_R, 0.5);
  rep.add("curvature budget: (omega30^2 + omega40(R*eps)) d^2/lambda <= C34",
          (db.omega_30 * db.omega_30 + db.omega_40_R) * np.d * np.d / np.lambda, constants.C34);
  return rep;
}

/// Gaussian-boundary conditions with R = 24 + 6 log(lambda)/d:
/// R*eps*max(1, delta2(R*eps), delta3(R*eps)) <= min(1/3, rho0) and
/// (delta2^2 + delta3^2 + delta4(R*eps)) d^2/lambda <= c_psi.
inline ConditionReport check_conditions_gauss(const DeltaBounds& deltas, int d, double lambda,
                                              double c_psi = 1,
                                              double rho0 = std::numeric_limits<double>::infinity()) {
  ConditionReport rep;
  rep.M_used = 1;
  const double eps = std::sqrt(static_cast<double>(d) / lambda);
  const double R = 24.0 + 6.0 * std::log(lambda) / d;
  rep.R_used = R;
  const double re = R * eps;
  rep.add("radius: R*eps*max(1, delta2, delta3) <= min(1/3, rho0)",
          re * std::max({1.0, deltas.delta2(re), deltas.delta3(re)}), std::min(1.0 / 3.0, rho0));
  const double d2 = deltas.delta2_point();
  const double d3 = deltas.delta3_point();
  rep.add("size: (delta2^2 + delta3^2 + delta4(R*eps)) d^2/lambda <= c_psi",
          (d2 * d2 + d3 * d3 + deltas.delta4(re)) * d * d / lambda, c_psi);
  return rep;
}

}  // namespace raretail
