#include "jouletrace/model.hpp"

#include "jouletrace/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace jouletrace {

namespace {

std::string_view strip_line_ending(std::string_view line) {
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    return line;
}

double parse_csv_double(std::string_view text, std::size_t line_no) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("malformed numeric field", line_no);
    return out;
}

/// Splits "name,value" records; name may not contain a comma.
bool split_record(std::string_view record, std::string_view& name,
                  std::string_view& value) {
    const std::size_t comma = record.find(',');
    if (comma == std::string_view::npos)
        return false;
    name = record.substr(0, comma);
    value = record.substr(comma + 1);
    return !name.empty();
}

} // namespace

EnergyEstimate estimate_from_models(const OperationProfile& profile,
                                    const OperationCostModel& costs) {
    double millijoules = 0.0;
    for (const auto& [op, count] : profile.counts) {
        if (count == 0.0)
            continue;
        const auto entry = costs.costs_mj.find(op);
        if (entry == costs.costs_mj.end())
            throw MissingCostError("cost model \"" + costs.platform +
                                       "\" has no cost for operation \"" + op + "\"",
                                   op);
        millijoules += count * entry->second;
    }

    EnergyEstimate estimate;
    estimate.joules = millijoules * 1e-3;
    estimate.method = EnergyMethod::Analytical;
    return estimate;
}

LenientEstimate estimate_from_models_lenient(const OperationProfile& profile,
                                             const OperationCostModel& costs) {
    LenientEstimate result;
    double millijoules = 0.0;
    for (const auto& [op, count] : profile.counts) {
        if (count == 0.0)
            continue;
        const auto entry = costs.costs_mj.find(op);
        if (entry == costs.costs_mj.end())
            result.uncovered.push_back(op);
        else
            millijoules += count * entry->second;
    }
    result.estimate.joules = millijoules * 1e-3;
    result.estimate.method = EnergyMethod::Analytical;
    return result;
}

OperationCostModel calibrate_costs(
    const std::map<std::string, CalibrationInput>& per_operation_traces,
    const std::string& platform) {
    OperationCostModel model;
    model.platform = platform;

    std::ostringstream note;
    for (const auto& [op, input] : per_operation_traces) {
        if (input.repetitions <= 0)
            throw InvalidArgumentError("operation \"" + op +
                                       "\" was calibrated with zero repetitions");
        const EnergyEstimate energy = integrate_power_trace(input.trace);
        model.costs_mj[op] =
            energy.joules * 1e3 / static_cast<double>(input.repetitions);
        if (note.tellp() > 0)
            note << "; ";
        note << op << " from "
             << (input.trace.source_label.empty() ? "<unlabeled trace>"
                                                  : input.trace.source_label)
             << " over " << input.repetitions << " repetitions";
    }
    model.calibration_note = note.str();
    return model;
}

FlopsProxyEstimate flops_proxy(double duration_s, double flops_rate) {
    if (duration_s < 0.0)
        throw InvalidArgumentError("flops_proxy requires a non-negative duration");
    if (flops_rate <= 0.0)
        throw InvalidArgumentError("flops_proxy requires a positive rate");

    FlopsProxyEstimate estimate;
    estimate.duration_s = duration_s;
    estimate.flops_rate = flops_rate;
    estimate.flop_count = duration_s * flops_rate;
    return estimate;
}

ClockAlignment align_clocks(const std::vector<double>& reference_us,
                            const std::vector<double>& meter_us) {
    if (reference_us.size() != meter_us.size())
        throw InvalidArgumentError("alignment needs pairwise-matched event sequences");
    const std::size_t n = reference_us.size();
    if (n < 2)
        throw InsufficientPointsError("alignment needs at least 2 matched events");

    double x_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x_mean += reference_us[i];
        y_mean += meter_us[i];
    }
    x_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    // Centered sums keep the fit accurate for microsecond epochs far from 0.
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = reference_us[i] - x_mean;
        sxx += dx * dx;
        sxy += dx * (meter_us[i] - y_mean);
    }
    if (sxx == 0.0)
        throw SingularFitError("all reference timestamps coincide");

    ClockAlignment alignment;
    alignment.drift = sxy / sxx;
    alignment.offset_us = y_mean - alignment.drift * x_mean;
    alignment.n_points = n;

    double residual_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r =
            meter_us[i] - (alignment.drift * reference_us[i] + alignment.offset_us);
        residual_sq += r * r;
    }
    alignment.residual_rms_us = std::sqrt(residual_sq / static_cast<double>(n));
    return alignment;
}

PowerTrace apply_alignment(const PowerTrace& meter_trace,
                           const ClockAlignment& alignment) {
    if (alignment.drift <= 0.0)
        throw InvalidArgumentError("cannot apply an alignment with non-positive drift");

    PowerTrace aligned;
    aligned.nominal_rate_hz = meter_trace.nominal_rate_hz * alignment.drift;
    aligned.source_label = meter_trace.source_label;
    aligned.samples.reserve(meter_trace.size());
    for (const auto& sample : meter_trace.samples) {
        PowerSample mapped = sample;
        mapped.timestamp_us = static_cast<int64_t>(
            std::llround((static_cast<double>(sample.timestamp_us) -
                          alignment.offset_us) /
                         alignment.drift));
        aligned.samples.push_back(mapped);
    }
    if (!aligned.is_monotonic())
        throw MalformedTraceError(
            "alignment collapsed adjacent timestamps; trace is no longer "
            "strictly increasing");
    return aligned;
}

OperationProfile parse_profile(std::istream& input) {
    std::string line;
    if (!std::getline(input, line))
        throw ParseError("empty input", 0);
    if (strip_line_ending(line) != "operation_id,count")
        throw ParseError("expected header \"operation_id,count\"", 1);

    OperationProfile profile;
    std::size_t line_no = 1;
    while (std::getline(input, line)) {
        ++line_no;
        const auto record = strip_line_ending(line);
        if (record.empty())
            continue;
        std::string_view name;
        std::string_view value;
        if (!split_record(record, name, value))
            throw ParseError("malformed profile record", line_no);
        const double count = parse_csv_double(value, line_no);
        if (count < 0.0)
            throw ParseError("operation counts must be non-negative", line_no);
        profile.counts[std::string(name)] = count;
    }
    return profile;
}

OperationProfile parse_profile_file(const std::string& path) {
    std::ifstream input(path);
    if (!input)
        throw IoError("cannot open " + path);
    OperationProfile profile = parse_profile(input);
    profile.label = path;
    return profile;
}

OperationCostModel parse_cost_model(std::istream& input) {
    std::string line;
    if (!std::getline(input, line))
        throw ParseError("empty input", 0);
    std::string_view platform_line = strip_line_ending(line);
    std::string_view tag;
    std::string_view platform;
    if (!split_record(platform_line, tag, platform) || tag != "platform")
        throw ParseError("expected platform header \"platform,<name>\"", 1);
    // Materialize before the next getline invalidates the view into `line`.
    std::string platform_name(platform);

    if (!std::getline(input, line) ||
        strip_line_ending(line) != "operation_id,millijoules_per_op")
        throw ParseError("expected header \"operation_id,millijoules_per_op\"", 2);

    OperationCostModel model;
    model.platform = std::move(platform_name);
    std::size_t line_no = 2;
    while (std::getline(input, line)) {
        ++line_no;
        const auto record = strip_line_ending(line);
        if (record.empty())
            continue;
        std::string_view name;
        std::string_view value;
        if (!split_record(record, name, value))
            throw ParseError("malformed cost record", line_no);
        const double cost = parse_csv_double(value, line_no);
        if (cost < 0.0)
            throw ParseError("operation costs must be non-negative", line_no);
        model.costs_mj[std::string(name)] = cost;
    }
    return model;
}

OperationCostModel parse_cost_model_file(const std::string& path) {
    std::ifstream input(path);
    if (!input)
        throw IoError("cannot open " + path);
    return parse_cost_model(input);
}

void write_cost_model(const OperationCostModel& model, std::ostream& out) {
    out << "platform," << model.platform << '\n';
    out << "operation_id,millijoules_per_op\n";
    char buffer[64];
    for (const auto& [op, cost] : model.costs_mj) {
        auto [ptr, ec] =
            std::to_chars(buffer, buffer + sizeof(buffer), cost, std::chars_format::fixed);
        out << op << ',' << std::string_view(buffer, ptr - buffer) << '\n';
    }
}

void write_cost_model_file(const OperationCostModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open " + path + " for writing");
    write_cost_model(model, out);
    out.flush();
    if (!out)
        throw IoError("failed writing " + path);
}

void parse_alignment_pairs(std::istream& input, std::vector<double>& reference_us,
                           std::vector<double>& meter_us) {
    std::string line;
    if (!std::getline(input, line))
        throw ParseError("empty input", 0);
    if (strip_line_ending(line) != "reference_us,meter_us")
        throw ParseError("expected header \"reference_us,meter_us\"", 1);

    reference_us.clear();
    meter_us.clear();
    std::size_t line_no = 1;
    while (std::getline(input, line)) {
        ++line_no;
        const auto record = strip_line_ending(line);
        if (record.empty())
            continue;
        std::string_view first;
        std::string_view second;
        if (!split_record(record, first, second))
            throw ParseError("malformed event pair", line_no);
        reference_us.push_back(parse_csv_double(first, line_no));
        meter_us.push_back(parse_csv_double(second, line_no));
    }
}

} // namespace jouletrace
