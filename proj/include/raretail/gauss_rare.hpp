#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "raretail/expansion.hpp"
#include "raretail/problem.hpp"

namespace raretail {

/// Thrown in strict mode when the validity conditions fail, and whenever the
/// first-order factor 1 + a1 d^2/lambda is not positive.
struct ExpansionDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rare-event set for a standard normal in d+1 dimensions: the template
/// boundary is scaled by sqrt(lambda) and shifted to distance sqrt(lambda)
/// from the origin. Boundary kinds: flat, quadratic x'Bx/2, quartic
/// <S, x^4>/24, or general (psi2, psi3, psi4 with sup bounds).
struct GaussBoundarySpec {
  enum class Kind { kFlat, kQuadratic, kQuartic, kGeneral };

  Kind kind = Kind::kFlat;
  int d = 1;
  double lambda = 100;
  Eigen::MatrixXd B;
  SymTensor4d S;
  Eigen::MatrixXd psi2;
  SymTensor3d psi3;
  SymTensor4d psi4;
  DeltaBounds deltas;
  double rho0 = std::numeric_limits<double>::infinity();

  static GaussBoundarySpec flat(int d, double lambda) {
    GaussBoundarySpec s;
    s.kind = Kind::kFlat;
    s.d = d;
    s.lambda = lambda;
    s.finalize();
    return s;
  }

  static GaussBoundarySpec quadratic(const Eigen::MatrixXd& B, double lambda) {
    GaussBoundarySpec s;
    s.kind = Kind::kQuadratic;
    s.d = static_cast<int>(B.rows());
    s.lambda = lambda;
    s.B = B;
    s.finalize();
    return s;
  }

  static GaussBoundarySpec quartic(const SymTensor4d& S, double lambda) {
    GaussBoundarySpec s;
    s.kind = Kind::kQuartic;
    s.d = static_cast<int>(S.dim());
    s.lambda = lambda;
    s.S = S;
    s.finalize();
    return s;
  }

  /// psi(x) = c ||x||^4 / 24, i.e. S = c Sym(I ⊗ I).
  static GaussBoundarySpec radial_quartic(double c, int d, double lambda) {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    SymTensor4d s = sym_outer(id, id);
    s *= c;
    return quartic(s, lambda);
  }

  static GaussBoundarySpec general(const Eigen::MatrixXd& psi2, const SymTensor3d& psi3,
                                   const SymTensor4d& psi4, const DeltaBounds& deltas,
                                   double rho0, double lambda) {
    GaussBoundarySpec s;
    s.kind = Kind::kGeneral;
    s.d = static_cast<int>(psi2.rows());
    s.lambda = lambda;
    s.psi2 = psi2;
    s.psi3 = psi3;
    s.psi4 = psi4;
    s.deltas = deltas;
    s.rho0 = rho0;
    s.finalize(/*keep_deltas=*/true);
    return s;
  }

  const Eigen::MatrixXd& hess_psi() const { return psi2; }

  /// psi evaluated at a template point (used by membership tests for the
  /// globally parameterized kinds).
  double psi_template(const Eigen::VectorXd& x) const {
    switch (kind) {
      case Kind::kFlat: return 0.0;
      case Kind::kQuadratic: return 0.5 * x.dot(B * x);
      case Kind::kQuartic: return S.contract4(x) / 24.0;
      default:
        throw std::invalid_argument("psi_template: general boundaries have no global form");
    }
  }

 private:
  void finalize(bool keep_deltas = false) {
    if (d < 1 || !(lambda > 0))
      throw std::invalid_argument("GaussBoundarySpec: need d >= 1 and lambda > 0");
    switch (kind) {
      case Kind::kFlat:
        psi2 = Eigen::MatrixXd::Zero(d, d);
        psi3 = SymTensor3d::zero(d);
        psi4 = SymTensor4d::zero(d);
        deltas = DeltaBounds::flat();
        break;
      case Kind::kQuadratic: {
        if (B.rows() != d || B.cols() != d)
          throw std::invalid_argument("GaussBoundarySpec: B must be d x d");
        psi2 = B;
        psi3 = SymTensor3d::zero(d);
        psi4 = SymTensor4d::zero(d);
        const HMetricd h(Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d) + B));
        const double b_norm = h_opnorm(B, h);
        deltas = DeltaBounds::quadratic(b_norm);
        // Global parameterization: the graph radius is 1/sqrt(delta2).
        rho0 = b_norm > 0 ? 1.0 / std::sqrt(b_norm) : std::numeric_limits<double>::infinity();
        break;
      }
      case Kind::kQuartic: {
        if (S.dim() != d) throw std::invalid_argument("GaussBoundarySpec: S must have dimension d");
        psi2 = Eigen::MatrixXd::Zero(d, d);
        psi3 = SymTensor3d::zero(d);
        psi4 = S;
        const double s_norm = h_opnorm(S, HMetricd::identity(d)).estimate;
        deltas = DeltaBounds::quartic(s_norm);
        rho0 = 1.0 / (3.0 * std::max(1.0, s_norm));
        break;
      }
      case Kind::kGeneral: {
        if (psi2.rows() != d || psi3.dim() != d || psi4.dim() != d)
          throw std::invalid_argument("GaussBoundarySpec: psi tensors must have dimension d");
        if (!keep_deltas) deltas = DeltaBounds::flat();
        break;
      }
    }
    // All kinds require I + psi2 positive definite.
    (void)HMetricd(Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d) + psi2));
  }
};

/// Expansion of log P(N(0, I_{d+1}) in D_lambda). Order 0 gives the leading
/// term -lambda/2 - log(2 pi lambda det H)/2; order 1 multiplies in
/// 1 + a1 d^2 / lambda. Failed condition checks are attached to the result;
/// strict mode turns them into errors.
inline ExpansionResult gauss_prob(const GaussBoundarySpec& spec, int order, bool strict = false) {
  if (order != 0 && order != 1) throw std::invalid_argument("gauss_prob: order must be 0 or 1");
  ExpansionResult res;
  res.order = order;
  const Eigen::MatrixXd h_mat = Eigen::MatrixXd::Identity(spec.d, spec.d) + spec.psi2;
  const HMetricd metric(h_mat);
  res.log_leading = -0.5 * spec.lambda - 0.5 * std::log(2.0 * M_PI * spec.lambda) -
                    0.5 * metric.log_det();
  res.d2a1 = a1_gauss(spec.psi2, spec.psi3, spec.psi4);
  res.a1 = res.d2a1 / (static_cast<double>(spec.d) * spec.d);
  res.conditions = check_conditions_gauss(spec.deltas, spec.d, spec.lambda, 1.0, spec.rho0);

  const double re = res.conditions.R_used * std::sqrt(spec.d / spec.lambda);
  switch (spec.kind) {
    case GaussBoundarySpec::Kind::kFlat:
      res.rem1_rate = 1.0 / spec.lambda;
      break;
    case GaussBoundarySpec::Kind::kQuadratic: {
      const double d2d = spec.deltas.delta2_point() * spec.d;
      res.rem1_rate = std::max(d2d, 1.0) * std::max(d2d, 1.0) / spec.lambda;
      break;
    }
    default: {
      const double d2 = spec.deltas.delta2_point();
      const double d3 = spec.deltas.delta3_point();
      res.rem1_rate =
          (d2 * d2 + d3 * d3 + spec.deltas.delta4(re)) * spec.d * static_cast<double>(spec.d) /
              spec.lambda +
          1.0 / spec.lambda;
      break;
    }
  }
  if (strict && !res.conditions.overall)
    throw ExpansionDomainError("gauss_prob: validity conditions failed in strict mode");
  if (order == 1) {
    const double factor = 1.0 + res.d2a1 / spec.lambda;
    if (!(factor > 0))
      throw ExpansionDomainError(
          "gauss_prob: 1 + a1 d^2/lambda is not positive; the first-order expansion is outside "
          "its regime");
    res.log_value_first_order = res.log_leading + std::log1p(res.d2a1 / spec.lambda);
  }
  return res;
}

/// The unit quadratic boundary in closed form: d^2 a1 = -(d^2/32 + 5d/16 + 1),
/// so |a1| >= 1/32 independent of d (the first-order term cannot vanish).
struct TightBoundDemo {
  double a1 = 0;
  bool lower_const_check = false;
};

inline TightBoundDemo tight_bound_demo(int d, double lambda) {
  (void)lambda;
  if (d < 1) throw std::invalid_argument("tight_bound_demo: d must be positive");
  TightBoundDemo r;
  const double d2a1 = -(d * d / 32.0 + 5.0 * d / 16.0 + 1.0);
  r.a1 = d2a1 / (static_cast<double>(d) * d);
  r.lower_const_check = std::abs(d2a1) >= d * d / 32.0;
  return r;
}

}  // namespace raretail
