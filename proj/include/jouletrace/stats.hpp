#pragma once

#include "jouletrace/orchestrator.hpp"
#include "jouletrace/trace.hpp"

#include <cstddef>
#include <vector>

namespace jouletrace {

/// Confidence level and relative margin of error for baseline sizing,
/// both strictly inside (0, 1).
struct SampleSizeRequest {
    double confidence = 0.95;
    double margin = 0.05;
};

/// Inverse standard normal CDF. Rational approximation refined by one
/// Halley step; accurate to near machine precision over (0, 1).
double normal_quantile(double p);

/// Cochran's sample size for an unlimited population at maximum variance
/// (p = 0.5): ceil(z^2 / (4 margin^2)) with z the normal quantile at
/// (1 + confidence) / 2. (0.95, 0.05) gives the classic 385.
int required_sample_size(const SampleSizeRequest& request);

/// Romano's thresholds on |delta|: 0.147 / 0.33 / 0.474.
enum class EffectMagnitude { Negligible, Small, Medium, Large };

const char* effect_magnitude_name(EffectMagnitude magnitude);
EffectMagnitude classify_effect(double delta);

struct MannWhitneyResult {
    double u_statistic = 0.0; ///< U of the first sample, mid-rank ties
    double p_value = 1.0;     ///< two-sided
    bool p_underflow = false; ///< true p below 1e-300, reported as 0
    bool exact = false;       ///< permutation distribution rather than normal approximation
};

/// Two-sided Mann-Whitney U test. Exact permutation enumeration when the
/// smaller sample has at most 20 values and the pooled size at most 500;
/// otherwise the normal approximation with tie and continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b);

struct CliffsDeltaResult {
    double delta = 0.0; ///< (#{x>y} - #{x<y}) / (n_a * n_b), in [-1, 1]
    EffectMagnitude magnitude = EffectMagnitude::Negligible;
};

CliffsDeltaResult cliffs_delta(const std::vector<double>& a,
                               const std::vector<double>& b);

/// Two-sample statistical verdict.
struct ComparisonReport {
    double u_statistic = 0.0;
    double p_value = 1.0;
    bool p_underflow = false;
    bool exact_p = false;
    double cliffs_delta = 0.0;
    EffectMagnitude magnitude = EffectMagnitude::Negligible;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

ComparisonReport compare_samples(const std::vector<double>& a,
                                 const std::vector<double>& b);

/// Compares the power values of two traces.
ComparisonReport compare_traces(const PowerTrace& a, const PowerTrace& b);

/// Sampling-overhead verdict between a low-rate and a high-rate run of
/// the same experiment.
struct OverheadReport {
    double overhead_ratio = 0.0; ///< (high net - low net) / low net
    double low_net_joules = 0.0;
    double high_net_joules = 0.0;
    double low_rate_hz = 0.0;
    double high_rate_hz = 0.0;
    TraceDiagnostics low_diagnostics;
    TraceDiagnostics high_diagnostics;
    ComparisonReport comparison; ///< over the two workload traces
};

/// Requires both results to come from the same plan up to sampling rate
/// (the backend may name a rate-specific source); throws
/// InvalidComparisonError otherwise.
OverheadReport overhead_report(const ExperimentResult& low,
                               const ExperimentResult& high);

} // namespace jouletrace
