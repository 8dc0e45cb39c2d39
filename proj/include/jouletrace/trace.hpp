#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jouletrace {

/// One timestamped power observation.
///
/// Internal units are milliwatts and microseconds throughout the toolkit;
/// joules appear only at API boundaries. This keeps 1 kHz traces well away
/// from float underflow.
struct PowerSample {
    int64_t timestamp_us = 0; ///< monotonic time since trace start
    double power_mw = 0.0;    ///< instantaneous power draw, >= 0
};

/// An ordered sequence of power samples from one backend.
struct PowerTrace {
    std::vector<PowerSample> samples;
    double nominal_rate_hz = 1.0; ///< intended sampling rate, > 0
    std::string source_label;     ///< identifier of the producing backend

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }

    /// True when timestamps are strictly increasing (vacuously for n < 2).
    bool is_monotonic() const;

    /// Mean inter-sample interval in microseconds; 0 for traces with
    /// fewer than two samples.
    double mean_interval_us() const;
};

enum class EnergyMethod {
    TraceIntegration,
    NetOfIdle,
    PerRun,
    Analytical,
    FlopsProxy,
};

/// Stable textual tag for report output ("trace-integration", ...).
const char* energy_method_name(EnergyMethod method);

struct EnergyEstimate {
    double joules = 0.0;
    double duration_s = 0.0;
    EnergyMethod method = EnergyMethod::TraceIntegration;
    bool clamped = false; ///< net-of-idle subtraction went below zero and was clamped
};

struct SummaryStats {
    double mean_mw = 0.0;
    double median_mw = 0.0;
    double std_dev_mw = 0.0; ///< sample standard deviation (n-1 denominator)
    std::size_t count = 0;
};

/// Sample-loss and spacing diagnostics for a collected trace.
struct TraceDiagnostics {
    int64_t expected_samples = 0; ///< floor(wall_duration * nominal_rate)
    int64_t actual_samples = 0;
    double loss_ratio = 0.0; ///< max(0, 1 - actual/expected)
    double mean_interval_us = 0.0;
    double max_gap_us = 0.0;
};

/// Integrates a power trace into joules by the rectangle rule: each
/// sample's power is held constant until the next timestamp, and the final
/// sample is extended by the trace's mean inter-sample interval. For a
/// regular trace this is identical to mean power times wall time.
///
/// Throws EmptyTraceError for traces with fewer than two samples and
/// MalformedTraceError when timestamps are not strictly increasing.
EnergyEstimate integrate_power_trace(const PowerTrace& trace);

/// Mean, median and sample standard deviation over the power values.
/// Throws EmptyTraceError on an empty trace.
SummaryStats summarize_trace(const PowerTrace& trace);

/// Subtracts the idle-baseline energy (idle_power_mw over duration_s) from
/// a total. A result below zero is clamped to 0 with the clamped flag set:
/// idle variance makes small negatives legitimate noise, not errors.
EnergyEstimate net_energy(const EnergyEstimate& total, double idle_power_mw,
                          double duration_s);

/// Divides net energy evenly across benchmark repetitions.
EnergyEstimate per_run_energy(const EnergyEstimate& net, int runs);

/// Compares the collected sample count against what the nominal rate
/// should have produced over the measured wall time, and reports the
/// spacing statistics.
TraceDiagnostics trace_diagnostics(const PowerTrace& trace, double wall_duration_s);

/// Energy inside [from_us, to_us) under the same rectangle rule as
/// integrate_power_trace (the final sample's rectangle extends one mean
/// interval). Adjacent windows sum exactly to the enclosing window's
/// energy. Same preconditions as integrate_power_trace, plus from <= to.
double window_energy_joules(const PowerTrace& trace, int64_t from_us, int64_t to_us);

} // namespace jouletrace
