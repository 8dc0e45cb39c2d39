// Release gate for the toolkit. Each numbered check prints exactly one
// PASS or FAIL line; the process exits nonzero if any check fails. The
// checks here are deliberately independent of the unit suites: expected
// values are either fixed figures or recomputed by brute force.
#include "helpers.hpp"
#include "jouletrace/counters.hpp"
#include "jouletrace/errors.hpp"
#include "jouletrace/model.hpp"
#include "jouletrace/orchestrator.hpp"
#include "jouletrace/stats.hpp"
#include "jouletrace/trace.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace jouletrace;

namespace {

int g_failures = 0;

void verdict(int number, const char* label, bool ok, const std::string& detail) {
    std::string line = ok ? "PASS" : "FAIL";
    line += ": ";
    line += std::to_string(number);
    line += " ";
    line += label;
    if (!detail.empty()) {
        line += " (";
        line += detail;
        line += ")";
    }
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (!ok)
        ++g_failures;
}

template <typename Fn>
void check(int number, const char* label, Fn&& body) {
    try {
        std::string detail;
        const bool ok = body(detail);
        verdict(number, label, ok, detail);
    } catch (const std::exception& e) {
        verdict(number, label, false, std::string("threw: ") + e.what());
    }
}

// ---- check 1: fixed-figure energy accounting --------------------------------

bool check_energy_figures(std::string& detail) {
    const EnergyEstimate total{652.902, 42.91, EnergyMethod::TraceIntegration, false};
    const EnergyEstimate net = net_energy(total, 106.0, 42.91);
    const EnergyEstimate per_run = per_run_energy(net, 10);
    std::ostringstream s;
    s << "net " << net.joules << " J, per-run " << per_run.joules << " J";
    detail = s.str();
    return std::fabs(net.joules - 648.354) <= 0.01 &&
           std::fabs(per_run.joules - 64.835) <= 0.001;
}

// ---- check 2: baseline sample sizing ----------------------------------------

bool check_sample_sizing(std::string& detail) {
    const int n = required_sample_size(SampleSizeRequest{0.95, 0.05});
    detail = "n = " + std::to_string(n);
    return n == 385;
}

// ---- check 3: counter wraparound period -------------------------------------

bool check_wraparound_period(std::string& detail) {
    const double period = wraparound_period(80.0, RaplDomainSpec::sandy_bridge());
    std::ostringstream s;
    s << period << " s at 80 W";
    detail = s.str();
    return period >= 780.0 && period <= 840.0;
}

// ---- check 4: sampling overhead report --------------------------------------

ExperimentPlan replay_plan(const std::string& fixture, double rate_hz) {
    ExperimentPlan plan;
    plan.sampling_rate_hz = rate_hz;
    plan.baseline_samples = 385;
    plan.runs = 10;
    plan.backend = "replay:" + testutil::fixture_path(fixture);
    plan.workload = {"true"};
    return plan;
}

bool check_overhead_report(std::string& detail) {
    const ExperimentResult low = run_experiment(replay_plan("overhead_low", 10.0));
    const ExperimentResult high = run_experiment(replay_plan("overhead_high", 1000.0));
    const OverheadReport report = overhead_report(low, high);

    const double percent = report.overhead_ratio * 100.0;
    std::ostringstream s;
    s << "overhead " << percent << "%, losses " << low.diagnostics.loss_ratio << " / "
      << high.diagnostics.loss_ratio;
    detail = s.str();

    bool ok = std::fabs(percent - 5.6) <= 0.05;
    ok = ok && low.diagnostics.expected_samples == 429 &&
         low.diagnostics.actual_samples == 406 &&
         std::fabs(low.diagnostics.loss_ratio - 0.054) <= 0.001;
    ok = ok && high.diagnostics.expected_samples == 46790 &&
         high.diagnostics.actual_samples == 10019 &&
         std::fabs(high.diagnostics.loss_ratio - 0.786) <= 0.001;
    return ok;
}

// ---- check 5: rank statistics property suite --------------------------------

// Two-sided permutation p-value by enumerating every assignment of the
// pooled values into groups of the observed sizes (bitmask subsets).
double enumerated_p_value(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const int n = static_cast<int>(pooled.size());
    const int n_a = static_cast<int>(a.size());

    // Doubled midranks are integers even with ties.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return pooled[x] < pooled[y]; });
    std::vector<long> scaled_rank(n, 0);
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && pooled[order[j]] == pooled[order[i]])
            ++j;
        const long doubled = i + 1 + j; // (i+1) + j == twice the midrank
        for (int k = i; k < j; ++k)
            scaled_rank[order[k]] = doubled;
        i = j;
    }

    long observed = 0;
    for (int i = 0; i < n_a; ++i)
        observed += scaled_rank[i];
    const long center = static_cast<long>(n_a) * (n + 1);
    const long observed_dev = std::labs(observed - center);

    long total = 0;
    long at_least = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != n_a)
            continue;
        ++total;
        long w = 0;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i))
                w += scaled_rank[i];
        if (std::labs(w - center) >= observed_dev)
            ++at_least;
    }
    return static_cast<double>(at_least) / static_cast<double>(total);
}

double brute_force_delta(const std::vector<double>& a, const std::vector<double>& b) {
    long gt = 0;
    long lt = 0;
    for (double x : a)
        for (double y : b) {
            if (x > y)
                ++gt;
            else if (x < y)
                ++lt;
        }
    return static_cast<double>(gt - lt) /
           (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

bool check_rank_statistics(std::string& detail) {
    const auto started = std::chrono::steady_clock::now();

    // (a) exact p-values against full enumeration, every pooled size <= 8,
    // every value tuple over a 4-letter alphabet (ties included).
    long cases = 0;
    for (int n = 2; n <= 8; ++n) {
        std::vector<int> digits(n, 0);
        while (true) {
            for (int n_a = 1; n_a < n; ++n_a) {
                std::vector<double> a(digits.begin(), digits.begin() + n_a);
                std::vector<double> b(digits.begin() + n_a, digits.end());
                const MannWhitneyResult r = mann_whitney_u(a, b);
                if (!r.exact) {
                    detail = "expected the exact mode for pooled size " + std::to_string(n);
                    return false;
                }
                const double oracle = enumerated_p_value(a, b);
                if (std::fabs(r.p_value - oracle) > 1e-12) {
                    std::ostringstream s;
                    s << "p mismatch: got " << r.p_value << ", enumeration says " << oracle;
                    detail = s.str();
                    return false;
                }
                ++cases;
            }
            int pos = n - 1;
            while (pos >= 0 && digits[pos] == 3)
                digits[pos--] = 0;
            if (pos < 0)
                break;
            ++digits[pos];
        }
    }

    // (b) effect size against brute-force pair counting.
    std::mt19937_64 rng(414243);
    std::uniform_int_distribution<int> size_dist(1, 30);
    std::uniform_int_distribution<int> value_dist(-5, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(size_dist(rng));
        std::vector<double> b(size_dist(rng));
        for (double& v : a)
            v = value_dist(rng);
        for (double& v : b)
            v = value_dist(rng);
        const double got = cliffs_delta(a, b).delta;
        const double want = brute_force_delta(a, b);
        if (std::fabs(got - want) > 1e-12) {
            std::ostringstream s;
            s << "delta mismatch: got " << got << ", brute force says " << want;
            detail = s.str();
            return false;
        }
    }

    // (c) antisymmetry and invariance under a monotone transform.
    std::uniform_real_distribution<double> real_dist(-100.0, 100.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(size_dist(rng));
        std::vector<double> b(size_dist(rng));
        for (double& v : a)
            v = real_dist(rng);
        for (double& v : b)
            v = real_dist(rng);
        const double forward = cliffs_delta(a, b).delta;
        const double backward = cliffs_delta(b, a).delta;
        if (std::fabs(forward + backward) > 1e-15) {
            detail = "antisymmetry violated";
            return false;
        }
        std::vector<double> a_t(a);
        std::vector<double> b_t(b);
        for (double& v : a_t)
            v = 3.0 * v + 1.0;
        for (double& v : b_t)
            v = 3.0 * v + 1.0;
        if (cliffs_delta(a_t, b_t).delta != forward) {
            detail = "effect size changed under a monotone transform";
            return false;
        }
        const MannWhitneyResult plain = mann_whitney_u(a, b);
        const MannWhitneyResult mapped = mann_whitney_u(a_t, b_t);
        if (plain.p_value != mapped.p_value || plain.u_statistic != mapped.u_statistic) {
            detail = "rank test changed under a monotone transform";
            return false;
        }
    }

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    std::ostringstream s;
    s << cases << " enumerated cases plus 2000 random trials in " << elapsed << " ms";
    detail = s.str();
    return elapsed < 60000;
}

// ---- check 6: counter decoding ----------------------------------------------

bool check_counter_decoding(std::string& detail) {
    std::mt19937_64 rng(515253);
    for (int trial = 0; trial < 10000; ++trial) {
        const RaplDomainSpec spec = (trial % 2 == 0) ? RaplDomainSpec::sandy_bridge()
                                                     : RaplDomainSpec::powercap();
        const uint64_t mask = (spec.counter_width_bits == 32)
                                  ? 0xFFFFFFFFull
                                  : ~0ull;
        const CounterReading a{rng() & mask, 0, spec};
        const CounterReading b{rng() & mask, 1, spec};
        const CounterReading c{rng() & mask, 2, spec};

        const uint64_t ab = counter_delta(a, b);
        const uint64_t bc = counter_delta(b, c);
        const uint64_t ac = counter_delta(a, c);
        if (ab > mask || bc > mask || ac > mask) {
            detail = "delta escaped the counter range";
            return false;
        }
        // Without a second wraparound the chained path must agree.
        if (ab <= mask - bc && ab + bc != ac) {
            detail = "chained deltas disagree with the direct delta";
            return false;
        }
    }

    // A recorded counter file that wraps mid-stream must still decode to the
    // constant power it was synthesized from, give or take one tick.
    const PowerTrace trace = parse_sampler_log_file(
        testutil::fixture_path("counter_wrap.csv"), SamplerLogFormat::GenericCounterCsv);
    if (trace.size() < 2) {
        detail = "wraparound fixture decoded to too few samples";
        return false;
    }
    const double tick_mw = 15.3 / 0.1 * 1e-3; // one 15.3 uJ tick over the 100 ms step
    double low = trace.samples.front().power_mw;
    double high = low;
    for (const auto& sample : trace.samples) {
        low = std::min(low, sample.power_mw);
        high = std::max(high, sample.power_mw);
    }
    std::ostringstream s;
    s << "10000 random triples; wrapped file decodes to " << low << ".." << high << " mW";
    detail = s.str();
    return std::fabs(low - 15000.0) <= tick_mw && std::fabs(high - 15000.0) <= tick_mw &&
           (high - low) <= tick_mw;
}

// ---- check 7: trace integration oracle --------------------------------------

bool check_integration_oracle(std::string& detail) {
    // Constant power: integral is exactly power times duration.
    {
        PowerTrace trace;
        trace.nominal_rate_hz = 10.0;
        for (int k = 0; k < 10; ++k)
            trace.samples.push_back({k * 100000, 10000.0});
        const EnergyEstimate estimate = integrate_power_trace(trace);
        const double expected = 10.0 * estimate.duration_s;
        if (estimate.joules != expected) {
            std::ostringstream s;
            s << "constant trace integrated to " << estimate.joules << ", expected "
              << expected;
            detail = s.str();
            return false;
        }
    }

    // Ramp: compare against a hand-rolled rectangle sum in extended precision.
    {
        PowerTrace trace;
        trace.nominal_rate_hz = 20.0;
        for (int k = 0; k < 100; ++k)
            trace.samples.push_back({k * 50000, 100.0 + 37.0 * k});
        long double sum = 0.0L;
        for (int k = 0; k < 99; ++k)
            sum += static_cast<long double>(trace.samples[k].power_mw) * 50000.0L;
        sum += static_cast<long double>(trace.samples[99].power_mw) * 50000.0L;
        const double expected = static_cast<double>(sum * 1e-9L);
        const double got = integrate_power_trace(trace).joules;
        if (std::fabs(got - expected) > 1e-9 * expected) {
            detail = "ramp trace disagrees with the hand-computed rectangle sum";
            return false;
        }
    }

    // Random traces: scaling the powers scales the energy, and gluing two
    // equal-rate traces end to end adds their energies.
    std::mt19937_64 rng(616263);
    std::uniform_real_distribution<double> power_dist(0.0, 20000.0);
    std::uniform_int_distribution<int64_t> step_dist(100, 500000);
    std::uniform_int_distribution<int> count_dist(2, 50);
    std::uniform_real_distribution<double> factor_dist(0.1, 8.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int64_t step = step_dist(rng);
        const int n1 = count_dist(rng);
        const int n2 = count_dist(rng);

        PowerTrace first;
        PowerTrace second;
        first.nominal_rate_hz = second.nominal_rate_hz = 1e6 / static_cast<double>(step);
        for (int k = 0; k < n1; ++k)
            first.samples.push_back({k * step, power_dist(rng)});
        for (int k = 0; k < n2; ++k)
            second.samples.push_back({k * step, power_dist(rng)});

        const double factor = factor_dist(rng);
        PowerTrace scaled = first;
        for (auto& sample : scaled.samples)
            sample.power_mw *= factor;
        const double base = integrate_power_trace(first).joules;
        const double scaled_joules = integrate_power_trace(scaled).joules;
        if (std::fabs(scaled_joules - factor * base) > 1e-9 * std::max(1.0, factor * base)) {
            detail = "scaling the powers did not scale the energy";
            return false;
        }

        PowerTrace glued = first;
        const int64_t shift = first.samples.back().timestamp_us + step;
        for (const auto& sample : second.samples)
            glued.samples.push_back({sample.timestamp_us + shift, sample.power_mw});
        const double whole = integrate_power_trace(glued).joules;
        const double parts = base + integrate_power_trace(second).joules;
        if (std::fabs(whole - parts) > 1e-9 * std::max(1.0, parts)) {
            detail = "concatenation broke energy additivity";
            return false;
        }
    }
    detail = "constant, ramp, and 1000 random scaling/concatenation cases";
    return true;
}

// ---- check 8: replay determinism --------------------------------------------

bool check_replay_determinism(std::string& detail) {
    const std::string command = std::string(JOULETRACE_CLI_PATH) + " measure --backend " +
                                testutil::shell_quote("replay:" +
                                                      testutil::fixture_path("overhead_low")) +
                                " --rate-hz 10 --runs 10 -- true";
    std::string reference;
    for (int attempt = 0; attempt < 5; ++attempt) {
        const testutil::CommandResult r = testutil::run_command(command);
        if (r.exit_code != 0) {
            detail = "invocation " + std::to_string(attempt + 1) + " exited with " +
                     std::to_string(r.exit_code);
            return false;
        }
        if (attempt == 0) {
            reference = r.output;
            if (reference.empty() || reference[0] != '{') {
                detail = "first invocation produced no report";
                return false;
            }
        } else if (r.output != reference) {
            detail = "invocation " + std::to_string(attempt + 1) + " differed";
            return false;
        }
    }
    detail = "5 invocations, " + std::to_string(reference.size()) + " identical bytes";
    return true;
}

// ---- check 9: clock alignment recovery --------------------------------------

bool check_clock_alignment(std::string& detail) {
    {
        const double drift = 1.000047;
        const double offset = 123456.789;
        std::vector<double> reference;
        std::vector<double> meter;
        for (int k = 0; k < 40; ++k) {
            reference.push_back(k * 250000.0);
            meter.push_back(drift * reference.back() + offset);
        }
        const ClockAlignment fit = align_clocks(reference, meter);
        if (std::fabs(fit.drift - drift) > 1e-9 * drift ||
            std::fabs(fit.offset_us - offset) > 1e-9 * offset) {
            std::ostringstream s;
            s << "noiseless fit returned drift " << fit.drift << ", offset " << fit.offset_us;
            detail = s.str();
            return false;
        }
    }

    const double noise_std = 120.0;
    int recovered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::mt19937_64 rng(9000 + trial);
        std::normal_distribution<double> noise(0.0, noise_std);
        std::vector<double> reference;
        std::vector<double> meter;
        for (int k = 0; k < 50; ++k) {
            reference.push_back(k * 250000.0);
            meter.push_back(1.00002 * reference.back() + 5000.0 + noise(rng));
        }
        const ClockAlignment fit = align_clocks(reference, meter);
        if (std::fabs(fit.offset_us - 5000.0) <= 3.0 * noise_std)
            ++recovered;
    }
    detail = "noiseless exact; offset within 3 sigma in " + std::to_string(recovered) +
             "/100 noisy trials";
    return recovered >= 95;
}

// ---- check 10: live powercap baseline ---------------------------------------

bool check_live_baseline(std::string& detail) {
    // Hardware-dependent: pass with a note when the machine exposes no
    // usable counter hierarchy (containers, non-Intel hosts, locked-down
    // permissions).
    std::error_code ec;
    if (!std::filesystem::exists("/sys/class/powercap", ec) || ec) {
        detail = "skipped: no /sys/class/powercap on this machine";
        return true;
    }
    std::string counter_path;
    try {
        counter_path = discover_powercap_package_counter("/sys/class/powercap");
        poll_live_counter(counter_path, RaplDomainSpec::powercap());
    } catch (const UnsupportedPlatformError&) {
        detail = "skipped: no package energy counter exposed";
        return true;
    } catch (const PrivilegeError&) {
        detail = "skipped: energy counter not readable at this privilege";
        return true;
    }

    ExperimentPlan plan;
    plan.sampling_rate_hz = 10.0;
    plan.baseline_samples = 385;
    plan.backend = "powercap";
    plan.environment_note = "acceptance run";
    const BaselineResult baseline = measure_idle(plan);
    if (baseline.trace.size() != 385) {
        detail = "collected " + std::to_string(baseline.trace.size()) + " samples";
        return false;
    }
    for (const auto& sample : baseline.trace.samples)
        if (sample.power_mw < 0.0) {
            detail = "negative power sample";
            return false;
        }
    const EnergyEstimate integral = integrate_power_trace(baseline.trace);
    const TraceDiagnostics diagnostics =
        trace_diagnostics(baseline.trace, integral.duration_s);
    std::ostringstream s;
    s << "385 samples from " << counter_path << ", loss " << diagnostics.loss_ratio;
    detail = s.str();
    return diagnostics.loss_ratio < 0.1;
}

} // namespace

int main() {
    check(1, "baseline-subtracted energy figures", check_energy_figures);
    check(2, "baseline sample sizing", check_sample_sizing);
    check(3, "counter wraparound period", check_wraparound_period);
    check(4, "sampling overhead report", check_overhead_report);
    check(5, "rank statistics property suite", check_rank_statistics);
    check(6, "counter decoding", check_counter_decoding);
    check(7, "trace integration oracle", check_integration_oracle);
    check(8, "replay determinism", check_replay_determinism);
    check(9, "clock alignment recovery", check_clock_alignment);
    check(10, "live powercap baseline", check_live_baseline);

    if (g_failures > 0) {
        std::printf("%d of 10 checks failed\n", g_failures);
        return 1;
    }
    return 0;
}
