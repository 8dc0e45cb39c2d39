#include "jouletrace/stats.hpp"

#include "jouletrace/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jouletrace {

namespace {

constexpr double kUnderflowFloor = 1e-300;

// Exact mode is affordable while the smaller sample stays enumerable and
// the pooled size keeps the rank-sum table small.
constexpr std::size_t kExactMaxSmaller = 20;
constexpr std::size_t kExactMaxTotal = 500;

/// Mid-ranks of the pooled sample, scaled by 2 so ties stay on an integer
/// grid. Returns per-element scaled ranks aligned with `values`.
std::vector<long long> scaled_midranks(const std::vector<double>& values,
                                       std::vector<std::size_t>& order) {
    const std::size_t n = values.size();
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    std::vector<long long> scaled(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]])
            ++j;
        // 1-based ranks i+1 .. j+1 share mid-rank; twice that is an integer.
        const long long scaled_rank = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            scaled[order[k]] = scaled_rank;
        i = j + 1;
    }
    return scaled;
}

/// Two-sided p from the exact permutation distribution of the scaled
/// rank sum of an m-subset. Integer grid throughout, so the tail test is
/// exact.
double exact_two_sided_p(const std::vector<long long>& scaled, std::size_t m,
                         long long observed) {
    const std::size_t n = scaled.size();

    std::vector<long long> descending = scaled;
    std::sort(descending.begin(), descending.end(), std::greater<>());
    long long capacity = 0;
    for (std::size_t i = 0; i < m; ++i)
        capacity += descending[i];

    // count[j][t]: number of j-subsets with scaled rank sum t.
    std::vector<std::vector<double>> count(
        m + 1, std::vector<double>(static_cast<std::size_t>(capacity) + 1, 0.0));
    count[0][0] = 1.0;
    std::size_t seen = 0;
    for (const long long s : scaled) {
        ++seen;
        const std::size_t j_top = std::min(m, seen);
        for (std::size_t j = j_top; j >= 1; --j) {
            for (long long t = capacity - s; t >= 0; --t) {
                const double ways = count[j - 1][static_cast<std::size_t>(t)];
                if (ways != 0.0)
                    count[j][static_cast<std::size_t>(t + s)] += ways;
            }
        }
    }

    const long long mean = static_cast<long long>(m) * static_cast<long long>(n + 1);
    const long long deviation = std::llabs(observed - mean);
    double tail = 0.0;
    double total = 0.0;
    for (long long t = 0; t <= capacity; ++t) {
        const double ways = count[m][static_cast<std::size_t>(t)];
        if (ways == 0.0)
            continue;
        total += ways;
        if (std::llabs(t - mean) >= deviation)
            tail += ways;
    }
    return tail / total;
}

} // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgumentError("normal_quantile requires p strictly inside (0, 1)");

    // Acklam's rational approximation, then one Halley refinement through
    // erfc, which is good to full double precision.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double error = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double step =
        error * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - step / (1.0 + x * step / 2.0);
}

int required_sample_size(const SampleSizeRequest& request) {
    if (!(request.confidence > 0.0 && request.confidence < 1.0))
        throw InvalidArgumentError("confidence must be strictly inside (0, 1)");
    if (!(request.margin > 0.0 && request.margin < 1.0))
        throw InvalidArgumentError("margin must be strictly inside (0, 1)");

    const double z = normal_quantile((1.0 + request.confidence) / 2.0);
    const double n = std::ceil(z * z * 0.25 / (request.margin * request.margin));
    if (n > 2e9)
        throw InvalidArgumentError("requested margin/confidence need more than 2e9 samples");
    return static_cast<int>(n);
}

const char* effect_magnitude_name(EffectMagnitude magnitude) {
    switch (magnitude) {
    case EffectMagnitude::Negligible: return "negligible";
    case EffectMagnitude::Small: return "small";
    case EffectMagnitude::Medium: return "medium";
    case EffectMagnitude::Large: return "large";
    }
    return "unknown";
}

EffectMagnitude classify_effect(double delta) {
    const double size = std::fabs(delta);
    if (size < 0.147)
        return EffectMagnitude::Negligible;
    if (size < 0.33)
        return EffectMagnitude::Small;
    if (size < 0.474)
        return EffectMagnitude::Medium;
    return EffectMagnitude::Large;
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.empty() || b.empty())
        throw InvalidArgumentError("mann_whitney_u requires two non-empty samples");

    const std::size_t n_a = a.size();
    const std::size_t n_b = b.size();
    const std::size_t n = n_a + n_b;

    std::vector<double> pooled;
    pooled.reserve(n);
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());

    std::vector<std::size_t> order;
    const std::vector<long long> scaled = scaled_midranks(pooled, order);

    long long rank_sum_a_scaled = 0;
    for (std::size_t i = 0; i < n_a; ++i)
        rank_sum_a_scaled += scaled[i];

    MannWhitneyResult result;
    result.u_statistic =
        static_cast<double>(rank_sum_a_scaled) / 2.0 -
        static_cast<double>(n_a) * static_cast<double>(n_a + 1) / 2.0;

    const std::size_t smaller = std::min(n_a, n_b);
    if (smaller <= kExactMaxSmaller && n <= kExactMaxTotal) {
        const long long total_scaled =
            static_cast<long long>(n) * static_cast<long long>(n + 1);
        const long long observed =
            n_a <= n_b ? rank_sum_a_scaled : total_scaled - rank_sum_a_scaled;
        result.p_value = exact_two_sided_p(scaled, smaller, observed);
        result.exact = true;
    } else {
        // Normal approximation with tie correction and a 0.5 continuity
        // correction toward the mean.
        double tie_term = 0.0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && scaled[order[j + 1]] == scaled[order[i]])
                ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
        const double mean =
            static_cast<double>(n_a) * static_cast<double>(n_b) / 2.0;
        const double variance =
            static_cast<double>(n_a) * static_cast<double>(n_b) / 12.0 *
            (static_cast<double>(n + 1) -
             tie_term / (static_cast<double>(n) * static_cast<double>(n - 1)));
        if (variance <= 0.0) {
            result.p_value = 1.0; // every value tied
        } else {
            const double deviation =
                std::max(0.0, std::fabs(result.u_statistic - mean) - 0.5);
            result.p_value = std::erfc(deviation / std::sqrt(2.0 * variance));
        }
    }

    if (result.p_value < kUnderflowFloor) {
        result.p_value = 0.0;
        result.p_underflow = true;
    }
    return result;
}

CliffsDeltaResult cliffs_delta(const std::vector<double>& a,
                               const std::vector<double>& b) {
    if (a.empty() || b.empty())
        throw InvalidArgumentError("cliffs_delta requires two non-empty samples");

    std::vector<double> sorted_b = b;
    std::sort(sorted_b.begin(), sorted_b.end());

    long long wins = 0;
    long long losses = 0;
    for (const double x : a) {
        wins += std::lower_bound(sorted_b.begin(), sorted_b.end(), x) -
                sorted_b.begin();
        losses += sorted_b.end() -
                  std::upper_bound(sorted_b.begin(), sorted_b.end(), x);
    }

    CliffsDeltaResult result;
    result.delta = static_cast<double>(wins - losses) /
                   (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    result.magnitude = classify_effect(result.delta);
    return result;
}

ComparisonReport compare_samples(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    const MannWhitneyResult u = mann_whitney_u(a, b);
    const CliffsDeltaResult d = cliffs_delta(a, b);

    ComparisonReport report;
    report.u_statistic = u.u_statistic;
    report.p_value = u.p_value;
    report.p_underflow = u.p_underflow;
    report.exact_p = u.exact;
    report.cliffs_delta = d.delta;
    report.magnitude = d.magnitude;
    report.n_a = a.size();
    report.n_b = b.size();
    return report;
}

ComparisonReport compare_traces(const PowerTrace& a, const PowerTrace& b) {
    const auto powers = [](const PowerTrace& trace) {
        std::vector<double> values;
        values.reserve(trace.size());
        for (const auto& sample : trace.samples)
            values.push_back(sample.power_mw);
        return values;
    };
    return compare_samples(powers(a), powers(b));
}

OverheadReport overhead_report(const ExperimentResult& low,
                               const ExperimentResult& high) {
    const auto& lp = low.plan;
    const auto& hp = high.plan;
    if (lp.runs != hp.runs || lp.warmup_discard != hp.warmup_discard ||
        lp.baseline_samples != hp.baseline_samples ||
        lp.cooldown_ms != hp.cooldown_ms || lp.workload != hp.workload)
        throw InvalidComparisonError(
            "results come from different plans; only the sampling rate (and its "
            "rate-specific source) may differ");
    if (low.net_energy_value.joules <= 0.0)
        throw InvalidComparisonError(
            "low-rate net energy is not positive; relative overhead is undefined");

    OverheadReport report;
    report.low_net_joules = low.net_energy_value.joules;
    report.high_net_joules = high.net_energy_value.joules;
    report.overhead_ratio =
        (report.high_net_joules - report.low_net_joules) / report.low_net_joules;
    report.low_rate_hz = lp.sampling_rate_hz;
    report.high_rate_hz = hp.sampling_rate_hz;
    report.low_diagnostics = low.diagnostics;
    report.high_diagnostics = high.diagnostics;
    report.comparison = compare_traces(low.workload_trace, high.workload_trace);
    return report;
}

} // namespace jouletrace
