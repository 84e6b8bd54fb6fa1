#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ngse/estimator.hpp"
#include "ngse/model_types.hpp"
#include "ngse/ranking.hpp"

namespace ngse::io {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolName = "ngse";
inline constexpr const char* kToolVersion = "1.0.0";

enum class AccessMode { read, write };

// Every file the io layer opens is reported to this observer first. Used by
// tests to prove which files a code path touches; pass nullptr to clear.
using FileAccessObserver = std::function<void(const std::string& path, AccessMode mode)>;
void set_file_access_observer(FileAccessObserver observer);

// Whole-file read through the observed open path.
std::string read_text_file(const std::string& path);

// Flat `key = value` configuration text; `#` starts a comment. Throws
// DataError on a line without '=' or a repeated key.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

// Measurement CSV: header `patient_id,<name1>,...,<nameK>`, one row per patient.
// Throws ParseError (with 1-based line and column), EmptyData or RaggedRows.
MeasurementSet read_measurements(const std::string& path,
                                 std::optional<Rescaling> rescale = std::nullopt);
MeasurementSet parse_measurements(std::istream& in, std::optional<Rescaling> rescale = std::nullopt);
void write_measurements(const MeasurementSet& data, const std::string& path);

// Truth sidecar CSV: `patient_id,true_value`.
void write_truths(const std::vector<std::string>& patient_ids, const std::vector<double>& truths,
                  const std::string& path);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

// Everything echoed into a report besides the fitted values.
struct RunMetadata {
  ModelConfig config;
  FitOptions options;
  RankingMode mode = RankingMode::normalized;
  std::string input_path;
  std::optional<Rescaling> rescale;
  std::vector<std::string> method_names;
};

std::string report_json(const EstimationResult& result, const RankingReport& ranking,
                        const RunMetadata& meta);
void write_report(const EstimationResult& result, const RankingReport& ranking,
                  const RunMetadata& meta, const std::string& path);

struct LoadedReport {
  RunMetadata meta;
  EstimationResult result;
  RankingReport ranking;
};

LoadedReport parse_report(const std::string& text);
LoadedReport read_report(const std::string& path);

// Human-readable ranking table.
std::string format_ranking_table(const RankingReport& ranking);

// Labels of the packed coordinates, in packed order.
std::vector<std::string> packed_labels(const ModelConfig& config,
                                       const std::vector<std::string>& method_names);

}  // namespace ngse::io
