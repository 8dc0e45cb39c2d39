#pragma once

#include "jouletrace/orchestrator.hpp"
#include "jouletrace/stats.hpp"

#include <optional>
#include <string>

namespace jouletrace {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportFormat { Report, PlotData };

std::optional<ReportFormat> report_format_from_name(const std::string& name);

/// Locale-independent fixed-decimal rendering ("-0" normalized to "0").
std::string format_fixed(double value, int places);

/// Escapes and quotes a string for embedding in report JSON.
std::string json_quote(const std::string& text);

/// Structured, schema-versioned report documents. Serialization is
/// deterministic: stable field order, fixed decimal rendering (joules and
/// milliwatts at 3 decimals), and every numeric key carries its unit as a
/// suffix. Identical results serialize byte-identically.
std::string emit_experiment_report(const ExperimentResult& result);
std::string emit_baseline_report(const BaselineResult& baseline,
                                 const ExperimentPlan& plan);
std::string emit_comparison_report(const OverheadReport& report);

/// One "timestamp_us,power_mw" record per sample, ready for external
/// plotting tools.
std::string emit_plotdata(const PowerTrace& trace);

/// Parses an experiment report back into a result; the workload trace is
/// embedded in the report, so comparisons can run from report files alone.
ExperimentResult parse_experiment_report(const std::string& text);
ExperimentResult parse_experiment_report_file(const std::string& path);

/// Writes bytes to a file, or to stdout when the path is empty or "-".
void write_output(const std::string& bytes, const std::string& path);

} // namespace jouletrace
