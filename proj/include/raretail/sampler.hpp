#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "raretail/problem.hpp"
#include "raretail/rng.hpp"
#include "raretail/symtensor.hpp"

namespace raretail {

/// Affine frame carrying template samples into original coordinates:
/// u = u_star + scale * (U1 x + t n). The Gaussian lambda-frame uses
/// u_star = (0_d, sqrt(lambda)), scale = sqrt(lambda), identity basis.
struct SampleFrame {
  Eigen::VectorXd u_star;
  Eigen::MatrixXd U1;   // (d+1) x d
  Eigen::VectorXd n;    // d+1
  double scale = 1;

  static SampleFrame identity(int d) {
    SampleFrame f;
    f.u_star = Eigen::VectorXd::Zero(d + 1);
    f.U1 = Eigen::MatrixXd::Identity(d + 1, d);
    f.n = Eigen::VectorXd::Unit(d + 1, d);
    f.scale = 1;
    return f;
  }

  static SampleFrame gauss_lambda(int d, double lambda) {
    SampleFrame f = identity(d);
    f.u_star(d) = std::sqrt(lambda);
    f.scale = std::sqrt(lambda);
    return f;
  }
};

/// The product-measure approximation to a conditional density near its most
/// likely point: Gaussian N(0, (lambda H)^{-1}) in the boundary-tangent
/// directions, Exp(lambda) in the height above the boundary, pushed through
/// the shear (x, y) -> (x, y + x' psi2 x / 2).
struct HatPiModel {
  int d = 1;
  double lambda = 1;
  HMetricd metric;
  Eigen::MatrixXd psi2;
  std::optional<SampleFrame> frame;
  std::uint64_t seed = 0;

  HatPiModel(int d_, double lambda_, HMetricd metric_, Eigen::MatrixXd psi2_,
             std::uint64_t seed_ = 0)
      : d(d_), lambda(lambda_), metric(std::move(metric_)), psi2(std::move(psi2_)), seed(seed_) {
    if (metric.dim() != d || psi2.rows() != d || psi2.cols() != d)
      throw std::invalid_argument("HatPiModel: dimension mismatch");
  }
};

/// Draws in the template frame (x tangent, y height, t = y + x' psi2 x / 2).
/// points holds (x, t) rows; x_part and y_part are kept so the exponential
/// height is recoverable exactly.
struct SampleBatch {
  Eigen::MatrixXd x;       // n x d
  Eigen::VectorXd y;       // n
  Eigen::MatrixXd points;  // n x (d+1); frame coordinates when a frame is set
  std::uint64_t seed = 0;
  std::size_t stream_count = 0;

  Eigen::Index n() const { return x.rows(); }
};

/// X ~ N(0, (lambda H)^{-1}), Y ~ Exp(lambda), independent; returns the shear
/// image. Deterministic in (seed, n): row i draws from the stream
/// seed ^ (i / chunk), so thread count never changes the result.
inline SampleBatch sample(const HatPiModel& model, std::size_t n) {
  if (n < 1) throw std::invalid_argument("sample: n must be positive");
  const int d = model.d;
  const double sqrt_lambda = std::sqrt(model.lambda);
  SampleBatch batch;
  batch.seed = model.seed;
  batch.stream_count = (n + kRngChunkSize - 1) / kRngChunkSize;
  batch.x.resize(static_cast<Eigen::Index>(n), d);
  batch.y.resize(static_cast<Eigen::Index>(n));
  batch.points.resize(static_cast<Eigen::Index>(n), d + 1);
  const Eigen::MatrixXd& w = model.metric.inv_root();
  for_each_chunk(n, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    RngStream rng(model.seed ^ static_cast<std::uint64_t>(chunk));
    Eigen::VectorXd z(d);
    for (std::size_t i = begin; i < end; ++i) {
      for (int j = 0; j < d; ++j) z(j) = rng.normal();
      const Eigen::VectorXd xi = (w * z) / sqrt_lambda;
      const double yi = rng.exponential(model.lambda);
      batch.x.row(static_cast<Eigen::Index>(i)) = xi;
      batch.y(static_cast<Eigen::Index>(i)) = yi;
      batch.points.row(static_cast<Eigen::Index>(i)).head(d) = xi;
      batch.points(static_cast<Eigen::Index>(i), d) = yi + 0.5 * xi.dot(model.psi2 * xi);
    }
  });
  return batch;
}

/// Same draws mapped through the model frame into original coordinates.
inline SampleBatch sample_general(const HatPiModel& model, std::size_t n) {
  if (!model.frame) throw std::invalid_argument("sample_general: model has no frame");
  const SampleFrame& f = *model.frame;
  SampleBatch batch = sample(model, n);
  const int d = model.d;
  for (Eigen::Index i = 0; i < batch.n(); ++i) {
    const Eigen::VectorXd xi = batch.points.row(i).head(d);
    const double ti = batch.points(i, d);
    batch.points.row(i) = f.u_star + f.scale * (f.U1 * xi + ti * f.n);
  }
  return batch;
}

/// Log density of the model at a point (frame coordinates when a frame is
/// set); -infinity below the sheared boundary. The shear has unit Jacobian,
/// so only the frame scaling contributes a volume factor.
inline double hatpi_logpdf(const HatPiModel& model, const Eigen::VectorXd& u) {
  const int d = model.d;
  if (u.size() != d + 1) throw std::invalid_argument("hatpi_logpdf: point dimension mismatch");
  Eigen::VectorXd x(d);
  double t = 0;
  double log_jac = 0;
  if (model.frame) {
    const SampleFrame& f = *model.frame;
    const Eigen::VectorXd v = (u - f.u_star) / f.scale;
    x = f.U1.transpose() * v;
    t = f.n.dot(v);
    log_jac = -(d + 1) * std::log(f.scale);
  } else {
    x = u.head(d);
    t = u(d);
  }
  const double yv = t - 0.5 * x.dot(model.psi2 * x);
  if (yv < 0) return -std::numeric_limits<double>::infinity();
  const double log_norm = std::log(model.lambda) +
                          0.5 * (d * std::log(model.lambda) + model.metric.log_det()) -
                          0.5 * d * std::log(2.0 * M_PI);
  return log_norm - 0.5 * model.lambda * x.dot(model.metric.matrix() * x) - model.lambda * yv +
         log_jac;
}

enum class ISVariant { kStandard, kSelfNormalized };

struct ISEstimate {
  double log_p_hat = -std::numeric_limits<double>::infinity();
  double std_err_log = std::numeric_limits<double>::infinity();
  double ess = 0;
  std::size_t n = 0;
  std::size_t n_in_d = 0;
  ISVariant variant = ISVariant::kSelfNormalized;
};

/// Importance-sampling estimate of the D-restricted integral of the target:
/// log of (1/n) sum_{X_i in D} target(X_i) / hatpi(X_i), with all weight
/// arithmetic done against the running maximum in log space. The standard
/// variant expects the caller to pass the exactly (un)normalized target and
/// shifts with it; the self-normalized variant's weights, ESS, and standard
/// error are invariant to rescaling the target.
inline ISEstimate is_estimate(const HatPiModel& model,
                              const std::function<double(const Eigen::VectorXd&)>& log_target,
                              const std::function<bool(const Eigen::VectorXd&)>& in_D,
                              std::size_t n, ISVariant variant = ISVariant::kSelfNormalized) {
  const SampleBatch batch = model.frame ? sample_general(model, n) : sample(model, n);
  Eigen::VectorXd logw(batch.n());
  Eigen::Matrix<bool, Eigen::Dynamic, 1> member(batch.n());
  double m = -std::numeric_limits<double>::infinity();
  std::size_t n_in = 0;
  for (Eigen::Index i = 0; i < batch.n(); ++i) {
    const Eigen::VectorXd u = batch.points.row(i);
    member(i) = in_D(u);
    if (!member(i)) {
      logw(i) = -std::numeric_limits<double>::infinity();
      continue;
    }
    ++n_in;
    logw(i) = log_target(u) - hatpi_logpdf(model, u);
    m = std::max(m, logw(i));
  }
  if (n_in == 0) throw std::runtime_error("is_estimate: no samples landed in the event");

  double sum = 0, sumsq = 0;
  for (Eigen::Index i = 0; i < batch.n(); ++i) {
    if (!member(i)) continue;
    const double v = std::exp(logw(i) - m);
    sum += v;
    sumsq += v * v;
  }
  ISEstimate est;
  est.n = n;
  est.n_in_d = n_in;
  est.variant = variant;
  est.ess = sum * sum / sumsq;
  est.log_p_hat = m + std::log(sum / static_cast<double>(n));
  // Delta method on the log of the mean of a_i = 1_D w_i (zeros included).
  const double mean_a = sum / static_cast<double>(n);
  const double var_a = std::max(0.0, sumsq / static_cast<double>(n) - mean_a * mean_a);
  est.std_err_log = std::sqrt(var_a / static_cast<double>(n)) / mean_a;
  return est;
}

struct CoverageResult {
  double fraction = 0;
  double ci_low = 0, ci_high = 1;  // 99% Wilson interval
  double floor = 0;                // 1 - 2 exp(-(R-1)^2 d / 2)
};

/// Empirical mass the model assigns to the event, against the concentration
/// floor at R = 24 + 6 log(lambda)/d.
inline CoverageResult coverage(const HatPiModel& model,
                               const std::function<bool(const Eigen::VectorXd&)>& in_D,
                               std::size_t n) {
  const SampleBatch batch = model.frame ? sample_general(model, n) : sample(model, n);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < batch.n(); ++i)
    if (in_D(batch.points.row(i))) ++hits;
  CoverageResult r;
  const double nn = static_cast<double>(n);
  r.fraction = static_cast<double>(hits) / nn;
  const double z = 2.5758293035489004;  // 99%
  const double denom = 1.0 + z * z / nn;
  const double center = (r.fraction + z * z / (2 * nn)) / denom;
  const double half =
      z * std::sqrt(r.fraction * (1 - r.fraction) / nn + z * z / (4 * nn * nn)) / denom;
  r.ci_low = std::max(0.0, center - half);
  r.ci_high = std::min(1.0, center + half);
  const double R = 24.0 + 6.0 * std::log(model.lambda) / model.d;
  r.floor = 1.0 - 2.0 * std::exp(-0.5 * (R - 1.0) * (R - 1.0) * model.d);
  return r;
}

/// Total-variation rate between the true conditional density and the model,
/// with unit constant:
///  (omega30 + delta3) d/sqrt(λ) + omega11/sqrt(λ)
///  + (omega11^2 + omega21(Rε)) d/λ + omega02/λ
///  + (omega40(Rε) + delta4(Rε)) d^2/λ + λ^{-M}.
inline double tv_rate(const DerivBounds& db, int d, double lambda, int M) {
  const double sq = std::sqrt(lambda);
  return (db.omega_30 + db.delta_3) * d / sq + db.omega_11 / sq +
         (db.omega_11 * db.omega_11 + db.omega_21_R) * d / lambda + db.omega_02_box / lambda +
         (db.omega_40_R + db.delta_4_R) * d * static_cast<double>(d) / lambda +
         std::pow(lambda, -M);
}

/// CSV dump: header x1..xd,t then one row per point.
inline void write_csv(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  const Eigen::Index d = batch.points.cols() - 1;
  for (Eigen::Index j = 0; j < d; ++j) out << "x" << (j + 1) << ",";
  out << "t\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < batch.n(); ++i) {
    for (Eigen::Index j = 0; j <= d; ++j) {
      if (j) out << ",";
      out << batch.points(i, j);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

/// Compact binary layout: 16-byte header (magic "RTSB", u32 version, u32 n,
/// u32 d), then row-major little-endian doubles, d+1 per row.
inline void write_binary(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_binary: cannot open " + path);
  const char magic[4] = {'R', 'T', 'S', 'B'};
  const std::uint32_t version = 1;
  const std::uint32_t n32 = static_cast<std::uint32_t>(batch.n());
  const std::uint32_t d32 = static_cast<std::uint32_t>(batch.points.cols() - 1);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&n32), 4);
  out.write(reinterpret_cast<const char*>(&d32), 4);
  for (Eigen::Index i = 0; i < batch.n(); ++i)
    for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
      const double v = batch.points(i, j);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!out) throw std::runtime_error("write_binary: write failed for " + path);
}

}  // namespace raretail
