#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "raretail/expansion.hpp"
#include "raretail/gauss_rare.hpp"
#include "raretail/oracle.hpp"
#include "raretail/problem.hpp"
#include "raretail/sampler.hpp"

namespace raretail {

/// Invalid or incomplete configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cli_detail {

inline Eigen::VectorXd to_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Eigen::MatrixXd to_matrix(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(what + ": expected a nested array");
  const std::size_t r = j.size(), c = j[0].size();
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (j[i].size() != c) throw ConfigError(what + ": ragged rows");
    for (std::size_t k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (m.rows() != m.cols() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ConfigError(what + ": matrix must be square and symmetric");
  return 0.5 * (m + m.transpose());
}

inline SymTensor3d to_tensor3(const nlohmann::json& j, const std::string& what) {
  const std::size_t d = j.size();
  SymTensor3d t(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t l = 0; l < d; ++l) t(i, k, l) = j.at(i).at(k).at(l).get<double>();
  if (!t.is_symmetric(1e-10)) throw ConfigError(what + ": tensor must be symmetric");
  return t;
}

inline SymTensor4d to_tensor4(const nlohmann::json& j, const std::string& what) {
  const std::size_t d = j.size();
  SymTensor4d t(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t l = 0; l < d; ++l)
        for (std::size_t m = 0; m < d; ++m) t(i, k, l, m) = j.at(i).at(k).at(l).at(m).get<double>();
  if (!t.is_symmetric(1e-10)) throw ConfigError(what + ": tensor must be symmetric");
  return t;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace cli_detail

/// Parsed problem description. Gaussian kinds wrap a GaussBoundarySpec; the
/// general-local kind wraps a GeneralProblem plus optional derivative-bound
/// record for the condition checks.
struct ProblemConfig {
  enum class Kind { kGaussFlat, kGaussQuadratic, kGaussQuartic, kGaussGeneral, kGeneralLocal };

  Kind kind = Kind::kGaussFlat;
  int d = 1;
  double lambda = 100;
  std::uint64_t seed = 0;
  int M = 1;
  bool strict = false;

  // gauss kinds
  std::optional<GaussBoundarySpec> gauss;
  double radial_quartic_coeff = std::numeric_limits<double>::quiet_NaN();  // set for the shorthand
  bool b_is_isotropic = false;
  double b_iso_value = 0;

  // general-local kind
  std::optional<GeneralProblem> general;
  std::optional<DerivBounds> deriv_bounds;

  nlohmann::json raw;
};

inline ProblemConfig parse_config(const nlohmann::json& j) {
  using cli_detail::to_matrix;
  using cli_detail::to_tensor3;
  using cli_detail::to_tensor4;
  using cli_detail::to_vector;
  ProblemConfig cfg;
  cfg.raw = j;
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("config: missing \"kind\"");
  const std::string kind = j["kind"].get<std::string>();
  cfg.seed = j.value("seed", 0ull);
  cfg.M = j.value("M", 1);
  cfg.strict = j.value("strict", false);
  if (cfg.M < 1) throw ConfigError("config: M must be >= 1");

  const auto need_lambda = [&] {
    if (!j.contains("lambda")) throw ConfigError("config: missing \"lambda\"");
    cfg.lambda = j["lambda"].get<double>();
    if (!(cfg.lambda > 0)) throw ConfigError("config: lambda must be positive");
  };
  const auto need_d = [&] {
    if (!j.contains("d")) throw ConfigError("config: missing \"d\"");
    cfg.d = j["d"].get<int>();
    if (cfg.d < 1) throw ConfigError("config: d must be >= 1");
  };

  try {
    if (kind == "gauss-flat") {
      cfg.kind = ProblemConfig::Kind::kGaussFlat;
      need_lambda();
      need_d();
      cfg.gauss = GaussBoundarySpec::flat(cfg.d, cfg.lambda);
    } else if (kind == "gauss-quadratic") {
      cfg.kind = ProblemConfig::Kind::kGaussQuadratic;
      need_lambda();
      if (!j.contains("B")) throw ConfigError("config: gauss-quadratic needs \"B\"");
      Eigen::MatrixXd B;
      if (j["B"].is_object() && j["B"].contains("eigenvalues")) {
        const Eigen::VectorXd ev = to_vector(j["B"]["eigenvalues"], "B.eigenvalues");
        B = ev.asDiagonal();
      } else {
        B = to_matrix(j["B"], "B");
      }
      cfg.d = static_cast<int>(B.rows());
      if (j.contains("d") && j["d"].get<int>() != cfg.d)
        throw ConfigError("config: d disagrees with the size of B");
      const Eigen::MatrixXd iso = B(0, 0) * Eigen::MatrixXd::Identity(cfg.d, cfg.d);
      cfg.b_is_isotropic = (B - iso).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(B(0, 0)));
      cfg.b_iso_value = B(0, 0);
      cfg.gauss = GaussBoundarySpec::quadratic(B, cfg.lambda);
    } else if (kind == "gauss-quartic") {
      cfg.kind = ProblemConfig::Kind::kGaussQuartic;
      need_lambda();
      if (!j.contains("S")) throw ConfigError("config: gauss-quartic needs \"S\"");
      if (j["S"].is_string() && j["S"].get<std::string>() == "radial-quartic") {
        need_d();
        cfg.radial_quartic_coeff = 1.0;
        cfg.gauss = GaussBoundarySpec::radial_quartic(1.0, cfg.d, cfg.lambda);
      } else if (j["S"].is_object() && j["S"].contains("radial_quartic")) {
        need_d();
        cfg.radial_quartic_coeff = j["S"]["radial_quartic"].get<double>();
        cfg.gauss = GaussBoundarySpec::radial_quartic(cfg.radial_quartic_coeff, cfg.d, cfg.lambda);
      } else {
        const SymTensor4d S = to_tensor4(j["S"], "S");
        cfg.d = static_cast<int>(S.dim());
        cfg.gauss = GaussBoundarySpec::quartic(S, cfg.lambda);
      }
    } else if (kind == "gauss-general") {
      cfg.kind = ProblemConfig::Kind::kGaussGeneral;
      need_lambda();
      if (!j.contains("psi2")) throw ConfigError("config: gauss-general needs \"psi2\"");
      const Eigen::MatrixXd psi2 = to_matrix(j["psi2"], "psi2");
      cfg.d = static_cast<int>(psi2.rows());
      SymTensor3d psi3 = j.contains("psi3") ? to_tensor3(j["psi3"], "psi3") : SymTensor3d::zero(cfg.d);
      SymTensor4d psi4 = j.contains("psi4") ? to_tensor4(j["psi4"], "psi4") : SymTensor4d::zero(cfg.d);
      DeltaBounds deltas = DeltaBounds::flat();
      if (j.contains("bounds")) {
        const auto& b = j["bounds"];
        deltas = DeltaBounds::custom(b.value("delta2", 0.0), b.value("delta3", 0.0),
                                     b.value("delta2_R", b.value("delta2", 0.0)),
                                     b.value("delta3_R", b.value("delta3", 0.0)),
                                     b.value("delta4_R", 0.0));
      }
      const double rho0 = j.value("rho0", std::numeric_limits<double>::infinity());
      cfg.gauss = GaussBoundarySpec::general(psi2, psi3, psi4, deltas, rho0, cfg.lambda);
    } else if (kind == "general-local") {
      cfg.kind = ProblemConfig::Kind::kGeneralLocal;
      GeneralProblem p;
      if (!j.contains("u_star") || !j.contains("grad_zbar") || !j.contains("hess_zbar") ||
          !j.contains("grad_F") || !j.contains("hess_F"))
        throw ConfigError(
            "config: general-local needs u_star, grad_zbar, hess_zbar, grad_F, hess_F");
      p.u_star = to_vector(j["u_star"], "u_star");
      p.lambda_bar = j.value("lambda_bar", 1.0);
      p.zbar_star = j.value("zbar_star", 0.0);
      p.grad_zbar = to_vector(j["grad_zbar"], "grad_zbar");
      p.hess_zbar = to_matrix(j["hess_zbar"], "hess_zbar");
      p.grad_F = to_vector(j["grad_F"], "grad_F");
      p.hess_F = to_matrix(j["hess_F"], "hess_F");
      p.F0 = j.value("F0", 0.0);
      const int n = p.dim_total();
      if (p.grad_zbar.size() != n || p.hess_zbar.rows() != n || p.grad_F.size() != n ||
          p.hess_F.rows() != n)
        throw ConfigError("config: general-local dimensions disagree");
      cfg.d = n - 1;
      cfg.lambda = p.lambda_bar * p.grad_zbar.norm();
      cfg.general = p;
      if (j.contains("deriv_bounds")) {
        const auto& b = j["deriv_bounds"];
        DerivBounds db;
        db.omega_11 = b.value("omega_11", 0.0);
        db.omega_21_R = b.value("omega_21_R", 0.0);
        db.omega_02_strip = b.value("omega_02_strip", 0.0);
        db.omega_02_box = b.value("omega_02_box", 0.0);
        db.omega_30 = b.value("omega_30", 0.0);
        db.omega_30_R = b.value("omega_30_R", db.omega_30);
        db.omega_40_R = b.value("omega_40_R", 0.0);
        db.delta_2 = b.value("delta_2", 0.0);
        db.delta_3 = b.value("delta_3", 0.0);
        db.delta_2_R = b.value("delta_2_R", db.delta_2);
        db.delta_3_R = b.value("delta_3_R", db.delta_3);
        db.delta_4_R = b.value("delta_4_R", 0.0);
        db.s = b.value("s", 0.0);
        db.rho0 = b.value("rho0", std::numeric_limits<double>::infinity());
        db.rho1 = b.value("rho1", 0.0);
        db.c_min = b.value("c_min", 1.0);
        db.convex_flag = b.value("convex", false);
        cfg.deriv_bounds = db;
      }
    } else {
      throw ConfigError("config: unknown kind \"" + kind + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  return parse_config(j);
}

/// Canonical JSON for a parsed config; parse(to_json(cfg)) round-trips.
inline nlohmann::json config_to_json(const ProblemConfig& cfg) {
  nlohmann::json j = cfg.raw;
  j["seed"] = cfg.seed;
  j["M"] = cfg.M;
  j["strict"] = cfg.strict;
  if (cfg.kind != ProblemConfig::Kind::kGeneralLocal) {
    j["lambda"] = cfg.lambda;
    j["d"] = cfg.d;
  }
  return j;
}

namespace cli_detail {

inline nlohmann::json report_json(const ConditionReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
  return {{"R", rep.R_used}, {"M", rep.M_used}, {"overall", rep.overall}, {"checks", checks}};
}

inline nlohmann::json expansion_json(const ExpansionResult& res) {
  nlohmann::json out;
  const double lp = res.log_value();
  out["log_prob"] = lp;
  if (lp >= std::log(std::numeric_limits<double>::min()))
    out["prob"] = std::exp(lp);
  else
    out["prob"] = nullptr;
  out["a1"] = res.a1;
  out["d2a1"] = res.d2a1;
  out["rem1_rate"] = res.rem1_rate;
  out["rate_is_heuristic"] = res.rate_is_heuristic;
  out["order"] = res.order;
  out["conditions"] = report_json(res.conditions);
  return out;
}

// Template-frame boundary membership in original (lambda-frame) coordinates.
inline std::function<bool(const Eigen::VectorXd&)> membership(const GaussBoundarySpec& spec) {
  const double sql = std::sqrt(spec.lambda);
  const GaussBoundarySpec s = spec;
  return [s, sql](const Eigen::VectorXd& u) {
    const Eigen::VectorXd x = u.head(u.size() - 1) / sql;
    return u(u.size() - 1) >= sql * (1.0 + s.psi_template(x));
  };
}

inline HatPiModel model_from(const ProblemConfig& cfg) {
  if (cfg.gauss) {
    const GaussBoundarySpec& spec = *cfg.gauss;
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(spec.d, spec.d) + spec.psi2;
    HatPiModel model(spec.d, spec.lambda, HMetricd(h), spec.psi2, cfg.seed);
    model.frame = SampleFrame::gauss_lambda(spec.d, spec.lambda);
    return model;
  }
  const NormalizedProblem np = normalize_general(*cfg.general);
  HatPiModel model(np.d, np.lambda, np.metric, np.psi2, cfg.seed);
  SampleFrame f;
  f.u_star = cfg.general->u_star;
  f.U1 = np.basis_U1;
  f.n = np.normal_n;
  f.scale = 1.0;
  model.frame = f;
  return model;
}

}  // namespace cli_detail

inline nlohmann::json run_approx(const ProblemConfig& cfg, int order) {
  if (!cfg.gauss)
    throw ConfigError("approx: general-local problems expose only check/sample commands");
  const ExpansionResult res = gauss_prob(*cfg.gauss, order, cfg.strict);
  return cli_detail::expansion_json(res);
}

inline nlohmann::json run_check(const ProblemConfig& cfg) {
  if (cfg.gauss) {
    const auto rep =
        check_conditions_gauss(cfg.gauss->deltas, cfg.d, cfg.lambda, 1.0, cfg.gauss->rho0);
    if (cfg.strict && !rep.overall)
      throw ExpansionDomainError("check: conditions failed in strict mode");
    return cli_detail::report_json(rep);
  }
  if (!cfg.deriv_bounds)
    throw ConfigError("check: general-local needs a deriv_bounds record");
  const NormalizedProblem np = normalize_general(*cfg.general);
  const auto rep = check_conditions(np, *cfg.deriv_bounds, cfg.M);
  if (cfg.strict && !rep.overall)
    throw ExpansionDomainError("check: conditions failed in strict mode");
  return cli_detail::report_json(rep);
}

inline nlohmann::json run_sample(const ProblemConfig& cfg, std::size_t n, const std::string& out,
                                 const std::string& format) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  const HatPiModel model = cli_detail::model_from(cfg);
  const SampleBatch batch = sample_general(model, n);
  if (format == "csv")
    write_csv(batch, out);
  else if (format == "bin")
    write_binary(batch, out);
  else
    throw ConfigError("sample: format must be csv or bin");
  return {{"n", n},       {"d", cfg.d},       {"lambda", cfg.lambda},
          {"seed", cfg.seed}, {"path", out},  {"format", format},
          {"stream_count", batch.stream_count}};
}

inline nlohmann::json run_estimate(const ProblemConfig& cfg, std::size_t n) {
  if (n < 1) throw ConfigError("estimate: n must be >= 1");
  if (!cfg.gauss || cfg.kind == ProblemConfig::Kind::kGaussGeneral)
    throw ConfigError("estimate: needs a globally parameterized gaussian boundary");
  const HatPiModel model = cli_detail::model_from(cfg);
  const int dp1 = cfg.d + 1;
  const auto log_target = [dp1](const Eigen::VectorXd& u) {
    return -0.5 * u.squaredNorm() - 0.5 * dp1 * std::log(2.0 * M_PI);
  };
  const ISEstimate est =
      is_estimate(model, log_target, cli_detail::membership(*cfg.gauss), n);
  return {{"log_p_hat", est.log_p_hat},
          {"std_err_log", est.std_err_log},
          {"ess", est.ess},
          {"n", est.n},
          {"n_in_d", est.n_in_d},
          {"variant", est.variant == ISVariant::kSelfNormalized ? "self_normalized" : "standard"}};
}

inline OracleResult run_oracle_result(const ProblemConfig& cfg, double tol, std::size_t n) {
  if (!cfg.gauss) throw ConfigError("oracle: only gaussian kinds have a built-in ground truth");
  switch (cfg.kind) {
    case ProblemConfig::Kind::kGaussFlat:
      return oracle_radial([](double) { return 0.0; }, cfg.d, cfg.lambda, tol);
    case ProblemConfig::Kind::kGaussQuadratic:
      if (cfg.b_is_isotropic) {
        const double beta = cfg.b_iso_value;
        return oracle_radial([beta](double r) { return 0.5 * beta * r * r; }, cfg.d, cfg.lambda,
                             tol);
      }
      return oracle_quadratic(cfg.gauss->B, cfg.lambda, n, cfg.seed);
    case ProblemConfig::Kind::kGaussQuartic:
      if (std::isfinite(cfg.radial_quartic_coeff)) {
        const double c = cfg.radial_quartic_coeff;
        return oracle_radial([c](double r) { return c * r * r * r * r / 24.0; }, cfg.d, cfg.lambda,
                             tol);
      }
      throw ConfigError("oracle: non-radial quartic boundaries have no built-in oracle");
    default:
      throw ConfigError("oracle: unsupported kind");
  }
}

inline nlohmann::json run_oracle(const ProblemConfig& cfg, double tol, std::size_t n) {
  const OracleResult r = run_oracle_result(cfg, tol, n);
  return {{"log_p", r.log_p},
          {"abs_log_error_estimate", r.abs_log_error_estimate},
          {"method", r.method},
          {"cost", r.cost}};
}

/// Convergence sweep: per lambda, both expansion orders against the oracle.
/// Columns: lambda, log_p_approx0, log_p_approx1, log_p_oracle, rel_err0,
/// rel_err1.
inline std::string run_bench(const ProblemConfig& cfg, const std::vector<double>& lambda_grid,
                             double tol, std::size_t n) {
  if (lambda_grid.empty()) throw ConfigError("bench: empty lambda grid");
  std::ostringstream csv;
  csv.precision(17);
  csv << "lambda,log_p_approx0,log_p_approx1,log_p_oracle,rel_err0,rel_err1\n";
  for (const double lambda : lambda_grid) {
    if (!(lambda > 0)) throw ConfigError("bench: lambda values must be positive");
    nlohmann::json j = cfg.raw;
    j["lambda"] = lambda;
    const ProblemConfig sub = parse_config(j);
    const ExpansionResult r0 = gauss_prob(*sub.gauss, 0, cfg.strict);
    const ExpansionResult r1 = gauss_prob(*sub.gauss, 1, cfg.strict);
    const OracleResult oracle = run_oracle_result(sub, tol, n);
    const double rel0 = std::abs(std::expm1(r0.log_value() - oracle.log_p));
    const double rel1 = std::abs(std::expm1(r1.log_value() - oracle.log_p));
    csv << lambda << "," << r0.log_value() << "," << r1.log_value() << "," << oracle.log_p << ","
        << rel0 << "," << rel1 << "\n";
  }
  return csv.str();
}

}  // namespace raretail
