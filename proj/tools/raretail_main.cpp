// Command-line front door for the boundary-minimum asymptotics library:
// approximations, condition checks, sampling, importance-sampling estimates,
// oracle comparisons, and lambda sweeps. JSON results go to stdout; sample
// dumps and sweep CSVs go to --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "raretail/cli_config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCondition = 3;
constexpr int kExitOracle = 4;

struct Options {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::uint64_t n = 10000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int order = 1;
  bool strict = false;
  double tol = 1e-9;
  std::vector<double> lambda_grid;
};

raretail::ProblemConfig load(const Options& opt) {
  raretail::ProblemConfig cfg = raretail::load_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (opt.strict) cfg.strict = true;
  return cfg;
}

void emit(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rare-event tail asymptotics: expansions, samplers, oracles"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "problem config JSON")->required();
    sub->add_flag("--strict", opt.strict, "treat failed validity conditions as errors");
    sub->add_option("--seed", opt.seed, "override the config seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
  };

  CLI::App* approx = app.add_subcommand("approx", "asymptotic log-probability");
  add_common(approx);
  approx->add_option("--order", opt.order, "expansion order (0 or 1)")->check(CLI::Range(0, 1));

  CLI::App* sample = app.add_subcommand("sample", "draw from the conditional approximation");
  add_common(sample);
  sample->add_option("--n", opt.n, "number of draws");
  sample->add_option("--out", opt.out_path, "output path")->required();
  sample->add_option("--format", opt.format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));

  CLI::App* estimate = app.add_subcommand("estimate", "importance-sampling probability estimate");
  add_common(estimate);
  estimate->add_option("--n", opt.n, "number of proposal draws");

  CLI::App* oracle = app.add_subcommand("oracle", "independent ground-truth probability");
  add_common(oracle);
  oracle->add_option("--tol", opt.tol, "quadrature tolerance");
  oracle->add_option("--n", opt.n, "Monte Carlo sample count for non-radial boundaries");

  CLI::App* check = app.add_subcommand("check", "evaluate the validity conditions");
  add_common(check);

  CLI::App* bench = app.add_subcommand("bench", "lambda sweep against the oracle");
  add_common(bench);
  bench->add_option("--lambda-grid", opt.lambda_grid, "comma-separated lambda values")
      ->required()
      ->delimiter(',');
  bench->add_option("--tol", opt.tol, "oracle quadrature tolerance");
  bench->add_option("--n", opt.n, "oracle Monte Carlo sample count");
  bench->add_option("--out", opt.out_path, "CSV output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    const raretail::ProblemConfig cfg = load(opt);
    if (approx->parsed()) {
      emit(raretail::run_approx(cfg, opt.order));
    } else if (sample->parsed()) {
      emit(raretail::run_sample(cfg, opt.n, opt.out_path, opt.format));
    } else if (estimate->parsed()) {
      emit(raretail::run_estimate(cfg, opt.n));
    } else if (oracle->parsed()) {
      emit(raretail::run_oracle(cfg, opt.tol, opt.n));
    } else if (check->parsed()) {
      emit(raretail::run_check(cfg));
    } else if (bench->parsed()) {
      const std::string csv = raretail::run_bench(cfg, opt.lambda_grid, opt.tol, opt.n);
      if (opt.out_path.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(opt.out_path);
        if (!out) throw raretail::ConfigError("bench: cannot open " + opt.out_path);
        out << csv;
        emit({{"path", opt.out_path}, {"rows", opt.lambda_grid.size()}});
      }
    }
  } catch (const raretail::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const raretail::ExpansionDomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCondition;
  } catch (const raretail::OracleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
