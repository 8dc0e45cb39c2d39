#pragma once

#include "jouletrace/trace.hpp"

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace jouletrace {

/// Application-dependent, platform-independent operation intensities.
/// Operation identifiers are opaque: machine instructions, library calls
/// and system calls are all fair game.
struct OperationProfile {
    std::map<std::string, double> counts; ///< operation id -> count, >= 0
    std::string label;
    std::string annotation; ///< free text: path-dependence, threading caveats
};

/// Platform-dependent, application-independent per-operation costs.
struct OperationCostModel {
    std::map<std::string, double> costs_mj; ///< operation id -> millijoules per op
    std::string platform;
    std::string calibration_note;
};

/// Least-squares mapping from a reference clock to an external meter's
/// clock: meter ~= drift * reference + offset.
struct ClockAlignment {
    double offset_us = 0.0;
    double drift = 1.0;
    double residual_rms_us = 0.0;
    std::size_t n_points = 0;
};

/// Duration times peak floating-point rate: a comparison proxy for
/// GPU-bound workloads, deliberately not joules.
struct FlopsProxyEstimate {
    double flop_count = 0.0;
    double duration_s = 0.0;
    double flops_rate = 0.0;
};

/// Dot product of counts and costs, in joules (method "analytical").
/// Strict: an operation with positive count but no cost entry throws
/// MissingCostError naming it.
EnergyEstimate estimate_from_models(const OperationProfile& profile,
                                    const OperationCostModel& costs);

struct LenientEstimate {
    EnergyEstimate estimate;            ///< over the covered operations only
    std::vector<std::string> uncovered; ///< positive-count operations lacking a cost
};

LenientEstimate estimate_from_models_lenient(const OperationProfile& profile,
                                             const OperationCostModel& costs);

/// One microbenchmark trace: the operation executed `repetitions` times.
struct CalibrationInput {
    PowerTrace trace;
    long long repetitions = 0;
};

/// cost(op) = integrated trace energy / repetitions, in millijoules.
OperationCostModel calibrate_costs(
    const std::map<std::string, CalibrationInput>& per_operation_traces,
    const std::string& platform);

FlopsProxyEstimate flops_proxy(double duration_s, double flops_rate);

/// Ordinary least squares over matched event timestamp pairs. Throws
/// InsufficientPointsError below 2 points and SingularFitError when all
/// reference timestamps coincide.
ClockAlignment align_clocks(const std::vector<double>& reference_us,
                            const std::vector<double>& meter_us);

/// Re-timestamps an externally recorded trace onto the reference clock:
/// reference = (meter - offset) / drift.
PowerTrace apply_alignment(const PowerTrace& meter_trace,
                           const ClockAlignment& alignment);

/// Profile file: header "operation_id,count", one record per operation.
OperationProfile parse_profile(std::istream& input);
OperationProfile parse_profile_file(const std::string& path);

/// Cost model file: platform header "platform,<name>", then header
/// "operation_id,millijoules_per_op" and one record per operation.
OperationCostModel parse_cost_model(std::istream& input);
OperationCostModel parse_cost_model_file(const std::string& path);
void write_cost_model(const OperationCostModel& model, std::ostream& out);
void write_cost_model_file(const OperationCostModel& model, const std::string& path);

/// Matched timestamp pairs for align_clocks: header
/// "reference_us,meter_us", one pair per record.
void parse_alignment_pairs(std::istream& input, std::vector<double>& reference_us,
                           std::vector<double>& meter_us);

} // namespace jouletrace
