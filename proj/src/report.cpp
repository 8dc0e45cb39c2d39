#include "jouletrace/report.hpp"

#include "jouletrace/counters.hpp"
#include "jouletrace/errors.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace jouletrace {

std::string format_fixed(double value, int places) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.*f", places, value);
    std::string text = buffer;
    // Normalize any value that rounds to zero at this precision, so that
    // "-0.000" never appears and re-rendering a parsed report is stable.
    if (text[0] == '-' && text.find_first_of("123456789") == std::string::npos)
        text.erase(0, 1);
    return text;
}

namespace {

std::string fixed_decimal(double value, int places) {
    return format_fixed(value, places);
}

std::string scientific(double value) {
    if (value == 0.0)
        value = 0.0;
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6e", value);
    return buffer;
}

void append_escaped(std::string& out, std::string_view text) {
    out += '"';
    for (const char c : text) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buffer[8];
                std::snprintf(buffer, sizeof(buffer), "\\u%04x",
                              static_cast<unsigned char>(c));
                out += buffer;
            } else {
                out += c;
            }
        }
    }
    out += '"';
}

const char* bool_name(bool value) { return value ? "true" : "false"; }

} // namespace

std::string json_quote(const std::string& text) {
    std::string out;
    out.reserve(text.size() + 2);
    append_escaped(out, text);
    return out;
}

namespace {

void append_plan(std::string& out, const ExperimentPlan& plan) {
    out += "  \"plan\": {\n";
    out += "    \"sampling_rate_hz\": " + fixed_decimal(plan.sampling_rate_hz, 3) + ",\n";
    out += "    \"baseline_samples_count\": " + std::to_string(plan.baseline_samples) + ",\n";
    out += "    \"runs_count\": " + std::to_string(plan.runs) + ",\n";
    out += "    \"warmup_discard_count\": " + std::to_string(plan.warmup_discard) + ",\n";
    out += "    \"cooldown_ms\": " + std::to_string(plan.cooldown_ms) + ",\n";
    out += "    \"backend\": ";
    append_escaped(out, plan.backend);
    out += ",\n    \"workload\": [";
    for (std::size_t i = 0; i < plan.workload.size(); ++i) {
        if (i > 0)
            out += ", ";
        append_escaped(out, plan.workload[i]);
    }
    out += "],\n    \"environment_note\": ";
    append_escaped(out, plan.environment_note);
    out += "\n  },\n";
}

void append_baseline(std::string& out, const BaselineResult& baseline) {
    out += "  \"baseline\": {\n";
    out += "    \"mean_mw\": " + fixed_decimal(baseline.stats.mean_mw, 3) + ",\n";
    out += "    \"median_mw\": " + fixed_decimal(baseline.stats.median_mw, 3) + ",\n";
    out += "    \"std_dev_mw\": " + fixed_decimal(baseline.stats.std_dev_mw, 3) + ",\n";
    out += "    \"sample_count\": " + std::to_string(baseline.stats.count) + ",\n";
    out += "    \"short_collection\": ";
    out += bool_name(baseline.short_collection);
    out += "\n  },\n";
}

void append_diagnostics(std::string& out, const TraceDiagnostics& diag,
                        const char* indent) {
    out += indent;
    out += "\"diagnostics\": {\n";
    const std::string inner = std::string(indent) + "  ";
    out += inner + "\"expected_samples_count\": " + std::to_string(diag.expected_samples) + ",\n";
    out += inner + "\"actual_samples_count\": " + std::to_string(diag.actual_samples) + ",\n";
    out += inner + "\"loss_ratio\": " + fixed_decimal(diag.loss_ratio, 6) + ",\n";
    out += inner + "\"mean_interval_us\": " + fixed_decimal(diag.mean_interval_us, 3) + ",\n";
    out += inner + "\"max_gap_us\": " + fixed_decimal(diag.max_gap_us, 3) + "\n";
    out += indent;
    out += "}";
}

void append_trace(std::string& out, const PowerTrace& trace, const char* key) {
    out += "  \"";
    out += key;
    out += "\": {\n";
    out += "    \"nominal_rate_hz\": " + fixed_decimal(trace.nominal_rate_hz, 3) + ",\n";
    out += "    \"timestamps_us\": [";
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        if (i > 0)
            out += ",";
        out += std::to_string(trace.samples[i].timestamp_us);
    }
    out += "],\n    \"powers_mw\": [";
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        if (i > 0)
            out += ",";
        out += fixed_decimal(trace.samples[i].power_mw, 3);
    }
    out += "]\n  }";
}

void append_warnings(std::string& out, const std::vector<std::string>& warnings) {
    out += "  \"warnings\": [";
    for (std::size_t i = 0; i < warnings.size(); ++i) {
        if (i > 0)
            out += ", ";
        append_escaped(out, warnings[i]);
    }
    out += "],\n";
}

void append_comparison(std::string& out, const ComparisonReport& comparison,
                       const char* indent) {
    out += indent;
    out += "\"comparison\": {\n";
    const std::string inner = std::string(indent) + "  ";
    out += inner + "\"u_statistic_count\": " + fixed_decimal(comparison.u_statistic, 1) + ",\n";
    out += inner + "\"p_value_probability\": " + scientific(comparison.p_value) + ",\n";
    out += inner + "\"p_underflow\": " + bool_name(comparison.p_underflow) + std::string(",\n");
    out += inner + "\"p_exact\": " + std::string(bool_name(comparison.exact_p)) + ",\n";
    out += inner + "\"sidedness\": \"two-sided\",\n";
    out += inner + "\"cliffs_delta_ratio\": " + fixed_decimal(comparison.cliffs_delta, 6) + ",\n";
    out += inner + "\"magnitude\": \"" + effect_magnitude_name(comparison.magnitude) + "\",\n";
    out += inner + "\"a_count\": " + std::to_string(comparison.n_a) + ",\n";
    out += inner + "\"b_count\": " + std::to_string(comparison.n_b) + "\n";
    out += indent;
    out += "}";
}

} // namespace

std::optional<ReportFormat> report_format_from_name(const std::string& name) {
    if (name == "report")
        return ReportFormat::Report;
    if (name == "plotdata")
        return ReportFormat::PlotData;
    return std::nullopt;
}

std::string emit_experiment_report(const ExperimentResult& result) {
    std::string out;
    out.reserve(4096 + result.workload_trace.size() * 24);
    out += "{\n";
    out += "  \"schema_version\": " + std::to_string(kReportSchemaVersion) + ",\n";
    out += "  \"kind\": \"experiment\",\n";
    append_plan(out, result.plan);
    append_baseline(out, result.baseline);

    out += "  \"energy\": {\n";
    out += "    \"total_joules\": " + fixed_decimal(result.total_energy.joules, 3) + ",\n";
    out += "    \"total_method\": \"" + std::string(energy_method_name(result.total_energy.method)) + "\",\n";
    out += "    \"net_joules\": " + fixed_decimal(result.net_energy_value.joules, 3) + ",\n";
    out += "    \"net_method\": \"" + std::string(energy_method_name(result.net_energy_value.method)) + "\",\n";
    out += "    \"net_clamped\": " + std::string(bool_name(result.net_energy_value.clamped)) + ",\n";
    out += "    \"measured_window_net_joules\": " + fixed_decimal(result.measured_net.joules, 3) + ",\n";
    out += "    \"measured_window_net_method\": \"" + std::string(energy_method_name(result.measured_net.method)) + "\",\n";
    out += "    \"measured_window_net_clamped\": " + std::string(bool_name(result.measured_net.clamped)) + ",\n";
    out += "    \"per_run_joules\": " + fixed_decimal(result.per_run.joules, 3) + ",\n";
    out += "    \"per_run_method\": \"" + std::string(energy_method_name(result.per_run.method)) + "\",\n";
    out += "    \"measured_runs_count\": " +
           std::to_string(result.plan.runs - result.plan.warmup_discard) + "\n";
    out += "  },\n";

    out += "  \"timing\": {\n";
    out += "    \"wall_duration_s\": " + fixed_decimal(result.wall_duration_s, 3) + ",\n";
    if (result.cpu_time_s)
        out += "    \"cpu_time_s\": " + fixed_decimal(*result.cpu_time_s, 3) + ",\n";
    out += "    \"start_skew_s\": " + fixed_decimal(result.start_skew_s, 6) + ",\n";
    out += "    \"end_skew_s\": " + fixed_decimal(result.end_skew_s, 6) + "\n";
    out += "  },\n";

    append_diagnostics(out, result.diagnostics, "  ");
    out += ",\n";

    out += "  \"run_boundaries_us\": [";
    for (std::size_t i = 0; i < result.run_boundaries.size(); ++i) {
        if (i > 0)
            out += ",";
        out += "[" + std::to_string(result.run_boundaries[i].start_us) + "," +
               std::to_string(result.run_boundaries[i].end_us) + "]";
    }
    out += "],\n";

    append_warnings(out, result.warnings);
    append_trace(out, result.workload_trace, "workload_trace");
    out += "\n}\n";
    return out;
}

std::string emit_baseline_report(const BaselineResult& baseline,
                                 const ExperimentPlan& plan) {
    std::string out;
    out.reserve(2048 + baseline.trace.size() * 24);
    out += "{\n";
    out += "  \"schema_version\": " + std::to_string(kReportSchemaVersion) + ",\n";
    out += "  \"kind\": \"baseline\",\n";
    append_plan(out, plan);
    append_baseline(out, baseline);
    append_trace(out, baseline.trace, "trace");
    out += "\n}\n";
    return out;
}

std::string emit_comparison_report(const OverheadReport& report) {
    std::string out;
    out.reserve(2048);
    out += "{\n";
    out += "  \"schema_version\": " + std::to_string(kReportSchemaVersion) + ",\n";
    out += "  \"kind\": \"comparison\",\n";

    const auto side = [&out](const char* key, double rate_hz, double net_joules,
                             const TraceDiagnostics& diag) {
        out += "  \"";
        out += key;
        out += "\": {\n";
        out += "    \"rate_hz\": " + fixed_decimal(rate_hz, 3) + ",\n";
        out += "    \"net_joules\": " + fixed_decimal(net_joules, 3) + ",\n";
        append_diagnostics(out, diag, "    ");
        out += "\n  },\n";
    };
    side("low", report.low_rate_hz, report.low_net_joules, report.low_diagnostics);
    side("high", report.high_rate_hz, report.high_net_joules, report.high_diagnostics);

    out += "  \"overhead_ratio\": " + fixed_decimal(report.overhead_ratio, 6) + ",\n";
    out += "  \"overhead_percent\": " + fixed_decimal(report.overhead_ratio * 100.0, 3) + ",\n";
    append_comparison(out, report.comparison, "  ");
    out += "\n}\n";
    return out;
}

std::string emit_plotdata(const PowerTrace& trace) {
    std::ostringstream out;
    serialize_power_csv(trace, out);
    return out.str();
}

ExperimentResult parse_experiment_report(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what(), 0);
    }

    try {
        if (doc.at("schema_version").get<int>() != kReportSchemaVersion)
            throw InvalidArgumentError("unsupported report schema version");
        if (doc.at("kind").get<std::string>() != "experiment")
            throw InvalidArgumentError("expected an experiment report");

        ExperimentResult result;
        const auto& plan = doc.at("plan");
        result.plan.sampling_rate_hz = plan.at("sampling_rate_hz").get<double>();
        result.plan.baseline_samples = plan.at("baseline_samples_count").get<int>();
        result.plan.runs = plan.at("runs_count").get<int>();
        result.plan.warmup_discard = plan.at("warmup_discard_count").get<int>();
        result.plan.cooldown_ms = plan.at("cooldown_ms").get<int>();
        result.plan.backend = plan.at("backend").get<std::string>();
        result.plan.workload = plan.at("workload").get<std::vector<std::string>>();
        result.plan.environment_note = plan.at("environment_note").get<std::string>();

        const auto& baseline = doc.at("baseline");
        result.baseline.stats.mean_mw = baseline.at("mean_mw").get<double>();
        result.baseline.stats.median_mw = baseline.at("median_mw").get<double>();
        result.baseline.stats.std_dev_mw = baseline.at("std_dev_mw").get<double>();
        result.baseline.stats.count = baseline.at("sample_count").get<std::size_t>();
        result.baseline.short_collection = baseline.at("short_collection").get<bool>();

        const auto& energy = doc.at("energy");
        result.total_energy.joules = energy.at("total_joules").get<double>();
        result.total_energy.method = EnergyMethod::TraceIntegration;
        result.net_energy_value.joules = energy.at("net_joules").get<double>();
        result.net_energy_value.method = EnergyMethod::NetOfIdle;
        result.net_energy_value.clamped = energy.at("net_clamped").get<bool>();
        result.measured_net.joules = energy.at("measured_window_net_joules").get<double>();
        result.measured_net.method = EnergyMethod::NetOfIdle;
        result.measured_net.clamped =
            energy.at("measured_window_net_clamped").get<bool>();
        result.per_run.joules = energy.at("per_run_joules").get<double>();
        result.per_run.method = EnergyMethod::PerRun;

        const auto& timing = doc.at("timing");
        result.wall_duration_s = timing.at("wall_duration_s").get<double>();
        if (timing.contains("cpu_time_s"))
            result.cpu_time_s = timing.at("cpu_time_s").get<double>();
        result.start_skew_s = timing.at("start_skew_s").get<double>();
        result.end_skew_s = timing.at("end_skew_s").get<double>();
        result.total_energy.duration_s = result.wall_duration_s;
        result.net_energy_value.duration_s = result.wall_duration_s;

        const auto& diag = doc.at("diagnostics");
        result.diagnostics.expected_samples =
            diag.at("expected_samples_count").get<int64_t>();
        result.diagnostics.actual_samples =
            diag.at("actual_samples_count").get<int64_t>();
        result.diagnostics.loss_ratio = diag.at("loss_ratio").get<double>();
        result.diagnostics.mean_interval_us = diag.at("mean_interval_us").get<double>();
        result.diagnostics.max_gap_us = diag.at("max_gap_us").get<double>();

        for (const auto& pair : doc.at("run_boundaries_us")) {
            RunBoundary boundary;
            boundary.start_us = pair.at(0).get<int64_t>();
            boundary.end_us = pair.at(1).get<int64_t>();
            result.run_boundaries.push_back(boundary);
        }
        result.warnings = doc.at("warnings").get<std::vector<std::string>>();

        const auto& trace = doc.at("workload_trace");
        result.workload_trace.nominal_rate_hz = trace.at("nominal_rate_hz").get<double>();
        const auto& timestamps = trace.at("timestamps_us");
        const auto& powers = trace.at("powers_mw");
        if (timestamps.size() != powers.size())
            throw InvalidArgumentError("trace arrays have mismatched lengths");
        for (std::size_t i = 0; i < timestamps.size(); ++i) {
            PowerSample sample;
            sample.timestamp_us = timestamps.at(i).get<int64_t>();
            sample.power_mw = powers.at(i).get<double>();
            result.workload_trace.samples.push_back(sample);
        }
        return result;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report is missing or mistypes a field: ") +
                             e.what(),
                         0);
    }
}

ExperimentResult parse_experiment_report_file(const std::string& path) {
    std::ifstream input(path);
    if (!input)
        throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << input.rdbuf();
    return parse_experiment_report(buffer.str());
}

void write_output(const std::string& bytes, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << bytes;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    out << bytes;
    out.flush();
    if (!out)
        throw IoError("failed writing " + path);
}

} // namespace jouletrace
