#include "jouletrace/trace.hpp"

#include "jouletrace/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jouletrace {

namespace {

// 1 mW held for 1 us is 1e-9 J.
constexpr double kJoulesPerMilliwattMicrosecond = 1e-9;
constexpr double kSecondsPerMicrosecond = 1e-6;

} // namespace

bool PowerTrace::is_monotonic() const {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].timestamp_us <= samples[i - 1].timestamp_us)
            return false;
    }
    return true;
}

double PowerTrace::mean_interval_us() const {
    if (samples.size() < 2)
        return 0.0;
    const auto span = samples.back().timestamp_us - samples.front().timestamp_us;
    return static_cast<double>(span) / static_cast<double>(samples.size() - 1);
}

const char* energy_method_name(EnergyMethod method) {
    switch (method) {
    case EnergyMethod::TraceIntegration: return "trace-integration";
    case EnergyMethod::NetOfIdle: return "net-of-idle";
    case EnergyMethod::PerRun: return "per-run";
    case EnergyMethod::Analytical: return "analytical";
    case EnergyMethod::FlopsProxy: return "flops-proxy";
    }
    return "unknown";
}

EnergyEstimate integrate_power_trace(const PowerTrace& trace) {
    if (trace.size() < 2)
        throw EmptyTraceError("cannot integrate a trace with fewer than 2 samples");
    if (!trace.is_monotonic())
        throw MalformedTraceError("trace timestamps are not strictly increasing");

    const double mean_interval = trace.mean_interval_us();

    double milliwatt_us = 0.0;
    for (std::size_t i = 0; i + 1 < trace.samples.size(); ++i) {
        const double dt = static_cast<double>(trace.samples[i + 1].timestamp_us -
                                              trace.samples[i].timestamp_us);
        milliwatt_us += trace.samples[i].power_mw * dt;
    }
    // Final sample is held for one mean interval.
    milliwatt_us += trace.samples.back().power_mw * mean_interval;

    const double span_us =
        static_cast<double>(trace.samples.back().timestamp_us -
                            trace.samples.front().timestamp_us) +
        mean_interval;

    EnergyEstimate estimate;
    estimate.joules = milliwatt_us * kJoulesPerMilliwattMicrosecond;
    estimate.duration_s = span_us * kSecondsPerMicrosecond;
    estimate.method = EnergyMethod::TraceIntegration;
    return estimate;
}

SummaryStats summarize_trace(const PowerTrace& trace) {
    if (trace.empty())
        throw EmptyTraceError("cannot summarize an empty trace");

    std::vector<double> powers;
    powers.reserve(trace.size());
    for (const auto& sample : trace.samples)
        powers.push_back(sample.power_mw);

    SummaryStats stats;
    stats.count = powers.size();
    stats.mean_mw =
        std::accumulate(powers.begin(), powers.end(), 0.0) / static_cast<double>(powers.size());

    std::sort(powers.begin(), powers.end());
    const std::size_t mid = powers.size() / 2;
    stats.median_mw = (powers.size() % 2 == 1) ? powers[mid]
                                               : 0.5 * (powers[mid - 1] + powers[mid]);

    if (powers.size() > 1) {
        double sum_sq = 0.0;
        for (double p : powers) {
            const double d = p - stats.mean_mw;
            sum_sq += d * d;
        }
        stats.std_dev_mw = std::sqrt(sum_sq / static_cast<double>(powers.size() - 1));
    }
    return stats;
}

EnergyEstimate net_energy(const EnergyEstimate& total, double idle_power_mw,
                          double duration_s) {
    if (duration_s <= 0.0)
        throw InvalidArgumentError("net_energy requires a positive duration");
    if (idle_power_mw < 0.0)
        throw InvalidArgumentError("net_energy requires a non-negative idle power");

    EnergyEstimate net;
    net.joules = total.joules - (idle_power_mw / 1000.0) * duration_s;
    net.duration_s = duration_s;
    net.method = EnergyMethod::NetOfIdle;
    if (net.joules < 0.0) {
        net.joules = 0.0;
        net.clamped = true;
    }
    return net;
}

EnergyEstimate per_run_energy(const EnergyEstimate& net, int runs) {
    if (runs < 1)
        throw InvalidArgumentError("per_run_energy requires at least one run");

    EnergyEstimate per_run = net;
    per_run.joules = net.joules / static_cast<double>(runs);
    per_run.method = EnergyMethod::PerRun;
    return per_run;
}

TraceDiagnostics trace_diagnostics(const PowerTrace& trace, double wall_duration_s) {
    if (trace.empty())
        throw EmptyTraceError("cannot diagnose an empty trace");
    if (wall_duration_s <= 0.0)
        throw InvalidArgumentError("trace_diagnostics requires a positive wall duration");

    TraceDiagnostics diag;
    diag.expected_samples =
        static_cast<int64_t>(std::floor(wall_duration_s * trace.nominal_rate_hz));
    diag.actual_samples = static_cast<int64_t>(trace.size());
    if (diag.expected_samples > 0) {
        diag.loss_ratio = std::max(
            0.0, 1.0 - static_cast<double>(diag.actual_samples) /
                           static_cast<double>(diag.expected_samples));
    }
    diag.mean_interval_us = trace.mean_interval_us();
    for (std::size_t i = 1; i < trace.samples.size(); ++i) {
        const double gap = static_cast<double>(trace.samples[i].timestamp_us -
                                               trace.samples[i - 1].timestamp_us);
        diag.max_gap_us = std::max(diag.max_gap_us, gap);
    }
    return diag;
}

double window_energy_joules(const PowerTrace& trace, int64_t from_us, int64_t to_us) {
    if (trace.size() < 2)
        throw EmptyTraceError("cannot integrate a trace with fewer than 2 samples");
    if (!trace.is_monotonic())
        throw MalformedTraceError("trace timestamps are not strictly increasing");
    if (from_us > to_us)
        throw InvalidArgumentError("window start must not exceed window end");

    const double mean_interval = trace.mean_interval_us();
    double milliwatt_us = 0.0;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const double rect_start = static_cast<double>(trace.samples[i].timestamp_us);
        const double rect_end =
            (i + 1 < trace.samples.size())
                ? static_cast<double>(trace.samples[i + 1].timestamp_us)
                : rect_start + mean_interval;
        const double overlap = std::min(rect_end, static_cast<double>(to_us)) -
                               std::max(rect_start, static_cast<double>(from_us));
        if (overlap > 0.0)
            milliwatt_us += trace.samples[i].power_mw * overlap;
    }
    return milliwatt_us * kJoulesPerMilliwattMicrosecond;
}

} // namespace jouletrace
