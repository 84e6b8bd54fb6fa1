#include "ngse/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "ngse/errors.hpp"

namespace ngse::io {

using json = nlohmann::ordered_json;

namespace {

std::mutex observer_mutex;
FileAccessObserver observer;

void notify(const std::string& path, AccessMode mode) {
  std::lock_guard<std::mutex> lock(observer_mutex);
  if (observer) observer(path, mode);
}

std::ifstream open_for_read(const std::string& path) {
  notify(path, AccessMode::read);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  notify(path, AccessMode::write);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw DataError("report matrix rows are ragged");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

}  // namespace

void set_file_access_observer(FileAccessObserver obs) {
  std::lock_guard<std::mutex> lock(observer_mutex);
  observer = std::move(obs);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + " is not of the form key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    for (const auto& [existing, unused] : entries)
      if (existing == key)
        throw DataError("config key '" + key + "' appears more than once");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::string format_double(double value) {
  char buffer[64];
  const auto res = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, res.ptr);
}

MeasurementSet parse_measurements(std::istream& in, std::optional<Rescaling> rescale) {
  if (rescale && !(rescale->lo < rescale->hi))
    throw DomainError("rescaling interval must satisfy lo < hi");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw EmptyData("measurement file is empty");
  if (header.size() < 2) throw ParseError("header needs a patient id column and at least one method", line_no, 1);
  const std::vector<std::string> names(header.begin() + 1, header.end());
  const std::size_t k = names.size();

  std::vector<std::string> ids;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != k + 1)
      throw RaggedRows("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(k + 1));
    ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string& text = fields[c];
      double value = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
      if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() ||
          !std::isfinite(value))
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             " (" + names[c - 1] + "): '" + text + "' is not a finite number",
                         line_no, c + 1);
      if (rescale) value = (value - rescale->lo) / (rescale->hi - rescale->lo);
      flat.push_back(value);
    }
  }
  if (ids.empty()) throw EmptyData("measurement file has a header but no patient rows");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(k));
  for (std::size_t p = 0; p < ids.size(); ++p)
    for (std::size_t c = 0; c < k; ++c)
      values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = flat[p * k + c];
  return MeasurementSet(std::move(values), names, std::move(ids), rescale);
}

MeasurementSet read_measurements(const std::string& path, std::optional<Rescaling> rescale) {
  std::ifstream in = open_for_read(path);
  return parse_measurements(in, rescale);
}

void write_measurements(const MeasurementSet& data, const std::string& path) {
  std::ofstream out = open_for_write(path);
  out << "patient_id";
  for (const auto& name : data.method_names()) out << ',' << name;
  out << '\n';
  for (Eigen::Index p = 0; p < data.num_patients(); ++p) {
    out << data.patient_ids()[static_cast<std::size_t>(p)];
    for (Eigen::Index k = 0; k < data.num_methods(); ++k) out << ',' << format_double(data.values()(p, k));
    out << '\n';
  }
  finish_write(out, path);
}

void write_truths(const std::vector<std::string>& patient_ids, const std::vector<double>& truths,
                  const std::string& path) {
  if (patient_ids.size() != truths.size())
    throw DimensionMismatch("truth count does not match patient count");
  std::ofstream out = open_for_write(path);
  out << "patient_id,true_value\n";
  for (std::size_t p = 0; p < truths.size(); ++p)
    out << patient_ids[p] << ',' << format_double(truths[p]) << '\n';
  finish_write(out, path);
}

std::vector<std::string> packed_labels(const ModelConfig& config,
                                       const std::vector<std::string>& method_names) {
  std::vector<std::string> labels;
  auto name = [&](int k) {
    return static_cast<std::size_t>(k) < method_names.size() ? method_names[static_cast<std::size_t>(k)]
                                                             : "method_" + std::to_string(k + 1);
  };
  for (int k = 0; k < config.num_methods; ++k)
    for (int d = config.poly_order; d >= 0; --d)
      labels.push_back("u[" + name(k) + "][" + std::to_string(d) + "]");
  for (int i = 0; i < config.num_methods; ++i)
    for (int j = 0; j <= i; ++j)
      labels.push_back((i == j ? "log_L[" : "L[") + std::to_string(i + 1) + "][" +
                       std::to_string(j + 1) + "]");
  labels.emplace_back("log_alpha");
  labels.emplace_back("log_beta");
  return labels;
}

std::string report_json(const EstimationResult& result, const RankingReport& ranking,
                        const RunMetadata& meta) {
  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = {{"name", kToolName}, {"version", kToolVersion}};

  json config;
  config["num_methods"] = meta.config.num_methods;
  config["poly_order"] = meta.config.poly_order;
  config["quadrature_nodes"] = meta.config.quadrature_nodes;
  config["n_starts"] = meta.options.n_starts;
  config["max_iterations"] = meta.options.max_iterations;
  config["nll_tolerance"] = meta.options.nll_tolerance;
  config["param_tolerance"] = meta.options.param_tolerance;
  config["seed"] = meta.options.seed;
  config["optimizer"] = meta.options.optimizer == Optimizer::simplex ? "simplex" : "quasi-newton";
  config["ranking_mode"] = to_string(meta.mode);
  config["input"] = meta.input_path;
  config["rescale"] = meta.rescale ? json{{"lo", meta.rescale->lo}, {"hi", meta.rescale->hi}} : json(nullptr);
  report["config"] = std::move(config);
  report["seed"] = meta.options.seed;
  report["methods"] = meta.method_names;

  report["theta"] = {{"row_layout", "highest degree first: u_M, ..., u_1, u_0"},
                     {"rows", matrix_json(result.params.theta.coeffs())}};
  report["covariance"] = matrix_json(result.params.cov.matrix());
  report["covariance_factor"] = matrix_json(result.params.cov.chol_factor());
  report["correlation"] = matrix_json(ranking.correlation);
  report["prior"] = {{"alpha", result.params.prior.alpha}, {"beta", result.params.prior.beta}};
  report["nll"] = result.nll;
  report["converged"] = result.converged;
  report["iterations"] = result.iterations;
  report["n_starts"] = result.n_starts;
  report["best_start"] = result.best_start;

  json starts = json::array();
  for (const auto& s : result.start_diagnostics)
    starts.push_back({{"start_index", s.start_index},
                      {"initial_nll", s.initial_nll},
                      {"final_nll", s.final_nll},
                      {"iterations", s.iterations},
                      {"converged", s.converged}});
  report["starts"] = std::move(starts);

  json se;
  se["coordinates"] = "packed";
  se["note"] =
      "standard errors of the packed (transformed) coordinates: theta entries as is, "
      "Cholesky-factor diagonal as logs, off-diagonal factor entries as is, ln alpha, ln beta; "
      "no delta-method back-transformation is applied";
  se["labels"] = packed_labels(meta.config, meta.method_names);
  se["values"] = result.std_errors ? json(*result.std_errors) : json(nullptr);
  report["standard_errors"] = std::move(se);

  json table = json::array();
  for (const auto& m : ranking.methods)
    table.push_back({{"name", m.name},
                     {"noise_sd", m.noise_sd},
                     {"slope", m.slope ? json(*m.slope) : json(nullptr)},
                     {"normalized_sd", m.normalized_sd ? json(*m.normalized_sd) : json(nullptr)},
                     {"rank", m.rank}});
  report["ranking"] = {{"mode", to_string(ranking.mode)}, {"methods", std::move(table)}};
  report["warnings"] = result.warnings;
  return report.dump(2) + "\n";
}

void write_report(const EstimationResult& result, const RankingReport& ranking,
                  const RunMetadata& meta, const std::string& path) {
  const std::string text = report_json(result, ranking, meta);
  std::ofstream out = open_for_write(path);
  out << text;
  finish_write(out, path);
}

LoadedReport parse_report(const std::string& text) {
  json report;
  try {
    report = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (report.at("schema_version").get<int>() != kReportSchemaVersion)
      throw DataError("unsupported report schema version");
    const json& config = report.at("config");
    RunMetadata meta;
    meta.config.num_methods = config.at("num_methods").get<int>();
    meta.config.poly_order = config.at("poly_order").get<int>();
    meta.config.quadrature_nodes = config.at("quadrature_nodes").get<int>();
    meta.options.n_starts = config.at("n_starts").get<int>();
    meta.options.max_iterations = config.at("max_iterations").get<int>();
    meta.options.nll_tolerance = config.at("nll_tolerance").get<double>();
    meta.options.param_tolerance = config.at("param_tolerance").get<double>();
    meta.options.seed = config.at("seed").get<std::uint64_t>();
    meta.options.optimizer = config.at("optimizer").get<std::string>() == "simplex"
                                 ? Optimizer::simplex
                                 : Optimizer::quasi_newton;
    meta.mode = parse_ranking_mode(config.at("ranking_mode").get<std::string>());
    meta.input_path = config.at("input").get<std::string>();
    if (!config.at("rescale").is_null())
      meta.rescale = Rescaling{config["rescale"].at("lo").get<double>(),
                               config["rescale"].at("hi").get<double>()};
    meta.method_names = report.at("methods").get<std::vector<std::string>>();

    ParameterBundle params{
        CoefficientMatrix(matrix_from_json(report.at("theta").at("rows"))),
        NoiseCovariance::from_factor(matrix_from_json(report.at("covariance_factor"))),
        PriorParams(report.at("prior").at("alpha").get<double>(),
                    report.at("prior").at("beta").get<double>())};
    PackedParams packed = pack(params);
    EstimationResult result{std::move(params), std::move(packed), report.at("nll").get<double>(),
                            report.at("converged").get<bool>(), report.at("iterations").get<int>(),
                            report.at("n_starts").get<int>(), report.at("best_start").get<int>(),
                            std::nullopt, {}, report.at("warnings").get<std::vector<std::string>>()};
    const json& se = report.at("standard_errors").at("values");
    if (!se.is_null()) result.std_errors = se.get<std::vector<double>>();
    for (const json& s : report.at("starts"))
      result.start_diagnostics.push_back({s.at("start_index").get<int>(),
                                          s.at("initial_nll").get<double>(),
                                          s.at("final_nll").get<double>(),
                                          s.at("iterations").get<int>(),
                                          s.at("converged").get<bool>()});

    RankingReport ranking;
    ranking.mode = parse_ranking_mode(report.at("ranking").at("mode").get<std::string>());
    ranking.correlation = matrix_from_json(report.at("correlation"));
    for (const json& m : report.at("ranking").at("methods")) {
      MethodRank row;
      row.name = m.at("name").get<std::string>();
      row.noise_sd = m.at("noise_sd").get<double>();
      if (!m.at("slope").is_null()) row.slope = m["slope"].get<double>();
      if (!m.at("normalized_sd").is_null()) row.normalized_sd = m["normalized_sd"].get<double>();
      row.rank = m.at("rank").get<int>();
      ranking.methods.push_back(std::move(row));
    }
    return LoadedReport{std::move(meta), std::move(result), std::move(ranking)};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

LoadedReport read_report(const std::string& path) {
  return parse_report(read_text_file(path));
}

std::string format_ranking_table(const RankingReport& ranking) {
  std::vector<const MethodRank*> ordered;
  for (const auto& m : ranking.methods) ordered.push_back(&m);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const MethodRank* a, const MethodRank* b) { return a->rank < b->rank; });
  std::size_t width = 6;
  for (const auto* m : ordered) width = std::max(width, m->name.size());

  std::ostringstream out;
  out << "ranking mode: " << to_string(ranking.mode) << "\n";
  out << std::left << std::setw(6) << "rank" << std::setw(static_cast<int>(width) + 2) << "method"
      << std::right << std::setw(14) << "noise_sd" << std::setw(14) << "slope" << std::setw(16)
      << "sd/|slope|" << "\n";
  out << std::setprecision(6);
  for (const auto* m : ordered) {
    out << std::left << std::setw(6) << m->rank << std::setw(static_cast<int>(width) + 2) << m->name
        << std::right << std::setw(14) << m->noise_sd;
    if (m->slope)
      out << std::setw(14) << *m->slope;
    else
      out << std::setw(14) << "-";
    if (m->normalized_sd)
      out << std::setw(16) << *m->normalized_sd;
    else
      out << std::setw(16) << "-";
    out << "\n";
  }
  return out.str();
}

}  // namespace ngse::io
