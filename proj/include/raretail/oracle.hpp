#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "raretail/rng.hpp"

namespace raretail {

/// Thrown when an oracle cannot reach its requested accuracy.
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  double log_p = -std::numeric_limits<double>::infinity();
  double abs_log_error_estimate = 0;
  std::string method;
  std::size_t cost = 0;  // integrand / sample evaluations
};

/// log of the standard normal upper tail log Φ̄(t), accurate over the whole
/// real line. Uses erfc below t = 8 and the Mills-ratio continued fraction
/// Φ̄(t) = φ(t) / (t + 1/(t + 2/(t + 3/(...)))) above, which keeps full
/// relative precision far past the erfc underflow point.
inline double log_normal_tail(double t) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;
  if (t < 0) {
    const double upper = log_normal_tail(-t);
    return std::log1p(-std::exp(upper));
  }
  if (t <= 8.0) return std::log(0.5 * std::erfc(t * 0.70710678118654752440084436210485));
  double cf = 0.0;
  for (int k = 160; k >= 1; --k) cf = static_cast<double>(k) / (t + cf);
  return -0.5 * t * t - kHalfLog2Pi - std::log(t + cf);
}

namespace detail {

// Density of the radius r = ||Z||, Z ~ N(0, I_d): smooth at r = 0 for every
// d >= 1, unlike the chi-square density of r^2.
inline double log_chi_pdf(double r, int d) {
  const double hd = 0.5 * d;
  const double lr = (d == 1) ? 0.0 : (d - 1) * std::log(r);
  return std::log(2.0) + lr - 0.5 * r * r - hd * std::log(2.0) - std::lgamma(hd);
}

// Stable streaming log-sum-exp accumulator.
struct LogSum {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0;
  void add(double log_v, double weight) {
    if (weight == 0 || log_v == -std::numeric_limits<double>::infinity()) return;
    if (log_v > max) {
      sum = sum * std::exp(max - log_v) + weight;
      max = log_v;
    } else {
      sum += weight * std::exp(log_v - max);
    }
  }
  double log_total() const {
    return sum > 0 ? max + std::log(sum) : -std::numeric_limits<double>::infinity();
  }
};

// Adaptive Simpson with a shared eval counter. Relative tolerance, so the
// subdivision pattern is invariant under scaling the integrand.
struct SimpsonState {
  std::size_t evals = 0;
  double err_acc = 0;
  int max_depth = 48;
};

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb, double m,
                            double fm, double whole, double tol, int depth, SimpsonState& st) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  st.evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw OracleError("adaptive quadrature: max depth exceeded");
  if (std::abs(delta) <= 15.0 * tol) {
    st.err_acc += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, st) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, st);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, SimpsonState& st) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  st.evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, st.max_depth, st);
}

}  // namespace detail

/// Probability that a standard normal in d+1 dimensions lands above a radial
/// boundary: P = E_{S~χ²_d}[ Φ̄(√λ (1 + φ(√(S/λ)))) ], computed by adaptive
/// quadrature in log space. Exact (to the tolerance) for flat φ.
inline OracleResult oracle_radial(const std::function<double(double)>& phi, int d, double lambda,
                                  double tol) {
  if (d < 1 || !(lambda > 0)) throw std::invalid_argument("oracle_radial: need d >= 1, lambda > 0");
  const double sqrt_lambda = std::sqrt(lambda);
  // Radial substitution r = ||x||: P = E_{r~chi_d}[ Φ̄(√λ (1 + φ(r/√λ))) ].
  const auto log_integrand = [&](double r) {
    return detail::log_chi_pdf(r, d) + log_normal_tail(sqrt_lambda * (1.0 + phi(r / sqrt_lambda)));
  };
  // Locate the peak on a wide grid, then truncate 40 nats below it: beyond
  // that the omitted mass is under the double-precision floor of the result.
  const double r_hi0 = std::sqrt(static_cast<double>(d)) + 14.0;
  constexpr int kScan = 4096;
  std::vector<double> scan(kScan + 1);
  scan[0] = (d == 1) ? log_integrand(0.0) : -std::numeric_limits<double>::infinity();
  double m = scan[0];
  for (int i = 1; i <= kScan; ++i) {
    scan[i] = log_integrand(r_hi0 * i / kScan);
    m = std::max(m, scan[i]);
  }
  if (!std::isfinite(m)) throw OracleError("oracle_radial: integrand vanished everywhere");
  const double cut = m - 40.0;
  double r_lo = 0.0, r_hi = r_hi0;
  for (int i = 0; i <= kScan; ++i)
    if (scan[i] >= cut) {
      r_lo = r_hi0 * std::max(0, i - 1) / kScan;
      break;
    }
  for (int i = kScan; i >= 0; --i)
    if (scan[i] >= cut) {
      r_hi = r_hi0 * std::min(kScan, i + 1) / kScan;
      break;
    }
  // Coarse size estimate sets the absolute tolerance for the target relative
  // accuracy.
  double rough = 0;
  for (int i = 0; i <= kScan; ++i)
    if (std::isfinite(scan[i])) rough += std::exp(scan[i] - m) * (r_hi0 / kScan);
  detail::SimpsonState st;
  const auto f = [&](double r) {
    return r < 0.0 ? 0.0 : std::exp(log_integrand(r) - m);
  };
  const double integral = detail::adaptive_simpson(f, r_lo, r_hi, tol * rough, st);
  if (!(integral > 0)) throw OracleError("oracle_radial: quadrature collapsed to zero");
  OracleResult r;
  r.log_p = m + std::log(integral);
  r.abs_log_error_estimate = st.err_acc / integral + 1e-14;
  r.method = "radial-chi-quadrature";
  r.cost = st.evals + kScan;
  return r;
}

/// Rao-Blackwellized Monte Carlo for quadratic boundaries:
/// P = E_X[ Φ̄(√λ + XᵀBX / (2√λ)) ], X ~ N(0, I_d). The normal direction is
/// integrated exactly per sample, so probabilities of order e^{-λ/2} carry no
/// hit-or-miss noise.
inline OracleResult oracle_quadratic(const Eigen::MatrixXd& B, double lambda, std::size_t n,
                                     std::uint64_t seed) {
  if (B.rows() != B.cols()) throw std::invalid_argument("oracle_quadratic: B must be square");
  if (n < 1000) throw std::invalid_argument("oracle_quadratic: need n >= 1000");
  const int d = static_cast<int>(B.rows());
  const double sqrt_lambda = std::sqrt(lambda);
  std::vector<double> vals(n);
  for_each_chunk(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    RngStream rng(seed ^ chunk);
    Eigen::VectorXd x(d);
    for (std::size_t i = begin; i < end; ++i) {
      for (int j = 0; j < d; ++j) x(j) = rng.normal();
      vals[i] = log_normal_tail(sqrt_lambda + x.dot(B * x) / (2.0 * sqrt_lambda));
    }
  });
  double m = -std::numeric_limits<double>::infinity();
  for (double v : vals) m = std::max(m, v);
  double sum = 0, sumsq = 0;
  for (double v : vals) {
    const double w = std::exp(v - m);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
  OracleResult r;
  r.log_p = m + std::log(mean);
  // Delta method: sd(log mean) ≈ sd(w) / (mean √n).
  r.abs_log_error_estimate = std::sqrt(var / static_cast<double>(n)) / mean;
  r.method = "quadratic-rb-mc";
  r.cost = n;
  return r;
}

/// Axis-aligned integration box for the desk-scale quadrature oracle.
struct GridBox {
  Eigen::VectorXd lo, hi;  // d+1 entries: x coordinates then t
};

/// Tensor-grid quadrature of ∫_D e^{-λ z} du for x-dimension 1 or 2:
/// composite Simpson per axis with nested refinement and a Richardson error
/// estimate. Everything is accumulated in log space, so λ z may exceed the
/// exp underflow range.
inline OracleResult oracle_low_d(const std::function<double(const Eigen::VectorXd&)>& z,
                                 const std::function<bool(const Eigen::VectorXd&)>& in_D, int d,
                                 double lambda, const GridBox& box, int base_divisions = 16,
                                 int max_levels = 9, double rel_tol = 1e-8) {
  if (d < 1 || d > 2) throw std::invalid_argument("oracle_low_d: x-dimension must be 1 or 2");
  const int dims = d + 1;
  if (box.lo.size() != dims || box.hi.size() != dims)
    throw std::invalid_argument("oracle_low_d: box must have d+1 coordinate ranges");
  if (base_divisions < 2 || base_divisions % 2 != 0)
    throw std::invalid_argument("oracle_low_d: base divisions must be even");
  std::size_t cost = 0;
  double prev_trap = std::numeric_limits<double>::quiet_NaN();
  double prev_extrap = std::numeric_limits<double>::quiet_NaN();
  for (int level = 0; level < max_levels; ++level) {
    const int n = base_divisions << level;  // cells per dimension, even
    // Composite Simpson with streaming log-space accumulation, so e^{-λz}
    // never flushes to zero and memory stays flat across refinements.
    Eigen::VectorXd u(dims), h(dims);
    for (int k = 0; k < dims; ++k) h(k) = (box.hi(k) - box.lo(k)) / n;
    const auto axis_weight = [n](int idx) {
      if (idx == 0 || idx == n) return 1.0 / 3.0;
      return (idx % 2 == 1) ? 4.0 / 3.0 : 2.0 / 3.0;
    };
    detail::LogSum acc;
    const int nx2 = (d == 2) ? n : 0;
    for (int i = 0; i <= n; ++i) {
      u(0) = box.lo(0) + i * h(0);
      for (int j = 0; j <= nx2; ++j) {
        if (d == 2) u(1) = box.lo(1) + j * h(1);
        for (int k = 0; k <= n; ++k) {
          u(dims - 1) = box.lo(dims - 1) + k * h(dims - 1);
          ++cost;
          if (!in_D(u)) continue;
          double w = axis_weight(i) * axis_weight(k);
          if (d == 2) w *= axis_weight(j);
          acc.add(-lambda * z(u), w);
        }
      }
    }
    double cell = 1.0;
    for (int k = 0; k < dims; ++k) cell *= h(k);
    const double log_trap = acc.log_total() + std::log(cell);
    if (!std::isfinite(log_trap)) {
      OracleResult r;
      r.log_p = -std::numeric_limits<double>::infinity();
      r.method = "grid-quadrature";
      r.cost = cost;
      return r;
    }
    if (std::isfinite(prev_trap)) {
      // Richardson step: halving h divides the Simpson error by ~16.
      const double delta = prev_trap - log_trap;
      double log_extrap = log_trap;
      if (std::abs(delta) < 1.0) log_extrap = log_trap + std::log1p((1.0 - std::exp(delta)) / 15.0);
      if (std::isfinite(prev_extrap)) {
        const double diff = std::abs(log_extrap - prev_extrap);
        if (diff <= rel_tol) {
          OracleResult r;
          r.log_p = log_extrap;
          r.abs_log_error_estimate = diff + rel_tol;
          r.method = "grid-quadrature";
          r.cost = cost;
          return r;
        }
      }
      prev_extrap = log_extrap;
    }
    prev_trap = log_trap;
  }
  throw OracleError("oracle_low_d: did not converge within the refinement budget");
}

}  // namespace raretail
