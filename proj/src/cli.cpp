#include "ngse/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ngse/errors.hpp"
#include "ngse/estimator.hpp"
#include "ngse/io.hpp"
#include "ngse/likelihood.hpp"
#include "ngse/ranking.hpp"
#include "ngse/simulator.hpp"

namespace ngse::cli {

namespace {

// Bad flags or configuration values (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    if (begin == std::string::npos) throw UsageError(what + ": empty list entry");
    item = item.substr(begin, end - begin + 1);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v))
      throw UsageError(what + ": '" + item + "' is not a finite number");
    values.push_back(v);
  }
  return values;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> names;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    names.push_back(begin == std::string::npos ? "" : item.substr(begin, end - begin + 1));
  }
  return names;
}

// Applies `key = value` entries for every option not given on the command line.
void apply_config(CLI::App& sub, const std::string& path) {
  for (const auto& [key, value] : io::parse_key_values(io::read_text_file(path))) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw UsageError("unknown config key '" + key + "' for '" + sub.get_name() + "'");
    }
    if (opt->count() > 0) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") {
        opt->add_result("true");
        opt->run_callback();
      } else if (value != "false" && value != "0") {
        throw UsageError("config key '" + key + "' expects true or false");
      }
      continue;
    }
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

std::optional<Rescaling> parse_rescale(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::vector<double> bounds = parse_list(text, "--rescale");
  if (bounds.size() != 2 || !(bounds[0] < bounds[1]))
    throw UsageError("--rescale expects 'lo,hi' with lo < hi");
  return Rescaling{bounds[0], bounds[1]};
}

std::string default_truth_path(const std::string& out) {
  std::filesystem::path p(out);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + ".truth.csv")).string();
}

struct SimulateArgs {
  std::string config;
  int patients = 0;
  int order = 1;
  std::string coefficients;
  std::string noise_sd;
  double correlation = 0.0;
  std::string covariance;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::string method_names;
  std::string out;
  std::string truth_out;
};

struct FitArgs {
  std::string config;
  std::string input;
  int order = 1;
  int nodes = 128;
  int starts = 10;
  int max_iterations = 2000;
  double nll_tol = 1e-8;
  double param_tol = 1e-6;
  std::uint64_t seed = 0;
  std::string mode;
  std::string rescale;
  int threads = 0;
  bool no_std_errors = false;
  std::string optimizer = "quasi-newton";
  std::string out;
};

int do_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.patients < 1) throw UsageError("simulate: --patients must be at least 1");
  if (a.out.empty()) throw UsageError("simulate: --out is required");
  if (a.coefficients.empty()) throw UsageError("simulate: --coefficients is required");
  const std::vector<double> coeffs = parse_list(a.coefficients, "--coefficients");
  const int cols = a.order + 1;
  if (a.order < 1 || coeffs.size() % static_cast<std::size_t>(cols) != 0)
    throw UsageError("simulate: --coefficients needs K*(order+1) values");
  const int k = static_cast<int>(coeffs.size()) / cols;

  Eigen::MatrixXd theta(k, cols);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < cols; ++c) theta(r, c) = coeffs[static_cast<std::size_t>(r * cols + c)];

  Eigen::MatrixXd cov;
  if (!a.covariance.empty()) {
    const std::vector<double> entries = parse_list(a.covariance, "--covariance");
    if (entries.size() != static_cast<std::size_t>(k * k))
      throw UsageError("simulate: --covariance needs K*K values");
    cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        entries.data(), k, k);
  } else {
    if (a.noise_sd.empty()) throw UsageError("simulate: --noise-sd or --covariance is required");
    const std::vector<double> sds = parse_list(a.noise_sd, "--noise-sd");
    if (sds.size() != static_cast<std::size_t>(k))
      throw UsageError("simulate: --noise-sd needs one value per method");
    cov = covariance_from_sds(sds, a.correlation);
  }

  SimulationSpec spec{a.patients, ModelConfig{k, a.order, 128}, ParameterBundle{
      CoefficientMatrix(theta), cholesky_factorize(cov), PriorParams(a.alpha, a.beta)}, a.seed};
  SimulationOutput sim = simulate(spec);

  MeasurementSet data = sim.data;
  if (!a.method_names.empty()) {
    std::vector<std::string> names = parse_names(a.method_names);
    if (names.size() != static_cast<std::size_t>(k))
      throw UsageError("simulate: --method-names needs one name per method");
    data = MeasurementSet(sim.data.values(), std::move(names), sim.data.patient_ids());
  }
  const std::string truth_path = a.truth_out.empty() ? default_truth_path(a.out) : a.truth_out;
  io::write_measurements(data, a.out);
  io::write_truths(data.patient_ids(), sim.truths, truth_path);
  out << "wrote " << data.num_patients() << " patients x " << k << " methods to " << a.out
      << " (truths: " << truth_path << ")\n";
  return kSuccess;
}

int do_fit(const FitArgs& a, std::ostream& out) {
  if (a.input.empty()) throw UsageError("fit: --input is required");
  if (a.out.empty()) throw UsageError("fit: --out is required");
  const std::optional<Rescaling> rescale = parse_rescale(a.rescale);

  const MeasurementSet data = io::read_measurements(a.input, rescale);
  ModelConfig config{static_cast<int>(data.num_methods()), a.order, a.nodes};
  try {
    config.validate();
  } catch (const DomainError& e) {
    if (data.num_methods() < 2) throw;
    throw UsageError(e.what());
  }
  FitOptions options;
  options.n_starts = a.starts;
  options.max_iterations = a.max_iterations;
  options.nll_tolerance = a.nll_tol;
  options.param_tolerance = a.param_tol;
  options.seed = a.seed;
  options.threads = a.threads;
  options.compute_std_errors = !a.no_std_errors;
  if (a.optimizer == "quasi-newton")
    options.optimizer = Optimizer::quasi_newton;
  else if (a.optimizer == "simplex")
    options.optimizer = Optimizer::simplex;
  else
    throw UsageError("fit: --optimizer must be quasi-newton or simplex");
  try {
    options.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const RankingMode mode = a.mode.empty()
                               ? (a.order == 1 ? RankingMode::normalized : RankingMode::raw)
                               : parse_ranking_mode(a.mode);
  if (mode == RankingMode::normalized && a.order != 1)
    throw UsageError("fit: normalized ranking requires --order 1");

  const EstimationResult result = fit(data, config, options);
  const RankingReport ranking = rank_methods(result, mode, data.method_names());
  const io::RunMetadata meta{config, options, mode, a.input, rescale, data.method_names()};
  io::write_report(result, ranking, meta, a.out);
  out << "fit converged (start " << result.best_start << " of " << result.n_starts
      << ", nll " << io::format_double(result.nll) << "); report written to " << a.out << "\n";
  return kSuccess;
}

int do_rank(const std::string& report_path, std::ostream& out) {
  const io::LoadedReport report = io::read_report(report_path);
  out << io::format_ranking_table(report.ranking);
  return kSuccess;
}

int do_check(const std::string& report_path, const std::string& input, std::ostream& out) {
  const io::LoadedReport report = io::read_report(report_path);
  const std::string data_path = input.empty() ? report.meta.input_path : input;
  const MeasurementSet data = io::read_measurements(data_path, report.meta.rescale);
  const ModelConfig& config = report.meta.config;
  if (data.num_methods() != config.num_methods)
    throw DataError("input has a different method count than the report");

  const double gap = quadrature_doubling_gap(data, report.result.params, config.quadrature_nodes);
  const Eigen::MatrixXd hessian = observed_information(data, report.result.packed, config);
  const double scale = hessian.cwiseAbs().maxCoeff();
  const double asymmetry = (hessian - hessian.transpose()).cwiseAbs().maxCoeff() / scale;

  constexpr double kGapLimit = 1e-8;
  constexpr double kAsymmetryLimit = 1e-3;
  const bool gap_ok = gap < kGapLimit;
  const bool sym_ok = std::isfinite(asymmetry) && asymmetry < kAsymmetryLimit;
  out << "quadrature doubling |NLL(" << config.quadrature_nodes << ") - NLL("
      << 2 * config.quadrature_nodes << ")| / P = " << gap << (gap_ok ? "  ok" : "  FAILED")
      << " (limit " << kGapLimit << ")\n";
  out << "hessian asymmetry max|H_ij - H_ji| / max|H| = " << asymmetry
      << (sym_ok ? "  ok" : "  FAILED") << " (limit " << kAsymmetryLimit << ")\n";
  return gap_ok && sym_ok ? kSuccess : kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"No-gold-standard evaluation of quantitative measurement methods", "ngse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kToolVersion));

  SimulateArgs sim;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic measurement CSV and truth sidecar");
  simulate_cmd->add_option("--config", sim.config, "Flat key = value file; flags override it");
  simulate_cmd->add_option("--patients", sim.patients, "Number of patients P");
  simulate_cmd->add_option("--order", sim.order, "Polynomial order M");
  simulate_cmd->add_option("--coefficients", sim.coefficients,
                           "Comma-separated K*(M+1) coefficients, row-major, highest degree first");
  simulate_cmd->add_option("--noise-sd", sim.noise_sd, "Comma-separated per-method noise SDs");
  simulate_cmd->add_option("--correlation", sim.correlation, "Common pairwise noise correlation");
  simulate_cmd->add_option("--covariance", sim.covariance, "Comma-separated K*K covariance (overrides --noise-sd)");
  simulate_cmd->add_option("--alpha", sim.alpha, "Beta prior alpha");
  simulate_cmd->add_option("--beta", sim.beta, "Beta prior beta");
  simulate_cmd->add_option("--seed", sim.seed, "Random seed");
  simulate_cmd->add_option("--method-names", sim.method_names, "Comma-separated method names");
  simulate_cmd->add_option("--out", sim.out, "Measurement CSV to write");
  simulate_cmd->add_option("--truth-out", sim.truth_out, "Truth sidecar CSV (default <out>.truth.csv)");

  FitArgs fa;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate calibration, noise and prior; write a JSON report");
  fit_cmd->add_option("--config", fa.config, "Flat key = value file; flags override it");
  fit_cmd->add_option("--input", fa.input, "Measurement CSV");
  fit_cmd->add_option("--order", fa.order, "Polynomial order M");
  fit_cmd->add_option("--nodes", fa.nodes, "Gauss-Legendre nodes");
  fit_cmd->add_option("--starts", fa.starts, "Number of optimizer starts");
  fit_cmd->add_option("--max-iterations", fa.max_iterations, "Optimizer iterations per start");
  fit_cmd->add_option("--nll-tol", fa.nll_tol, "Convergence tolerance on the NLL");
  fit_cmd->add_option("--param-tol", fa.param_tol, "Convergence tolerance on the parameter step or simplex diameter");
  fit_cmd->add_option("--seed", fa.seed, "Seed for start jitter");
  fit_cmd->add_option("--mode", fa.mode, "Ranking mode: raw or normalized");
  fit_cmd->add_option("--rescale", fa.rescale, "Map values from [lo,hi] onto [0,1]: 'lo,hi'");
  fit_cmd->add_option("--threads", fa.threads, "Worker threads (overrides NGSE_THREADS)");
  fit_cmd->add_option("--optimizer", fa.optimizer, "quasi-newton (default) or simplex");
  fit_cmd->add_flag("--no-std-errors", fa.no_std_errors, "Skip the observed-information standard errors");
  fit_cmd->add_option("--out", fa.out, "Report JSON to write");

  std::string rank_report;
  CLI::App* rank_cmd = app.add_subcommand("rank", "Print the ranking table of a report");
  rank_cmd->add_option("--report", rank_report, "Report JSON")->required();

  std::string check_report;
  std::string check_input;
  CLI::App* check_cmd = app.add_subcommand("check", "Quadrature and Hessian diagnostics for a fitted report");
  check_cmd->add_option("--report", check_report, "Report JSON")->required();
  check_cmd->add_option("--input", check_input, "Measurement CSV (default: the report's input)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (simulate_cmd->parsed()) {
      try {
        if (!sim.config.empty()) apply_config(*simulate_cmd, sim.config);
        return do_simulate(sim, out);
      } catch (const DomainError& e) {
        throw UsageError(std::string("simulate: ") + e.what());
      } catch (const NotPositiveDefinite& e) {
        throw UsageError(std::string("simulate: ") + e.what());
      }
    }
    if (fit_cmd->parsed()) {
      if (!fa.config.empty()) apply_config(*fit_cmd, fa.config);
      return do_fit(fa, out);
    }
    if (rank_cmd->parsed()) return do_rank(rank_report, out);
    if (check_cmd->parsed()) return do_check(check_report, check_input, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const NoConvergedStart& e) {
    err << "NoConvergedStart: " << e.what() << "\n";
    return kNoConvergedStart;
  } catch (const InsufficientData& e) {
    err << "InsufficientData: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace ngse::cli
