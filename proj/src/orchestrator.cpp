#include "jouletrace/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

namespace jouletrace {

namespace {

int64_t monotonic_now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
        text.remove_suffix(1);
    return text;
}

std::vector<std::string> split_command(std::string_view text) {
    std::vector<std::string> words;
    std::istringstream stream{std::string(text)};
    std::string word;
    while (stream >> word)
        words.push_back(word);
    return words;
}

template <typename T>
T parse_plan_number(std::string_view value, const std::string& key, std::size_t line) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw ParseError("invalid value for plan key \"" + key + "\"", line);
    return out;
}

PowerTrace collect_samples(SampleSource& source, int count) {
    PowerTrace trace;
    trace.nominal_rate_hz = source.nominal_rate_hz();
    trace.source_label = source.label();
    trace.samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        auto sample = source.next();
        if (!sample)
            break;
        trace.samples.push_back(*sample);
    }
    return trace;
}

std::unique_ptr<SampleSource> open_live_source(const BackendSelector& selector,
                                               const ExperimentPlan& plan) {
    const std::string counter = selector.path.empty()
                                    ? discover_powercap_package_counter()
                                    : selector.path;
    return std::make_unique<PowercapSource>(counter, plan.sampling_rate_hz);
}

struct MarkerEvent {
    long long run = 0;
    bool is_start = false;
    int64_t at_us = 0;
};

/// "##RUN <k> START" or "##RUN <k> END", exactly.
bool parse_marker(std::string_view line, long long& run, bool& is_start) {
    constexpr std::string_view prefix = "##RUN ";
    if (line.substr(0, prefix.size()) != prefix)
        return false;
    line.remove_prefix(prefix.size());
    const std::size_t space = line.find(' ');
    if (space == std::string_view::npos || space == 0)
        return false;
    const std::string_view digits = line.substr(0, space);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), run);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
        return false;
    const std::string_view verb = line.substr(space + 1);
    if (verb == "START") {
        is_start = true;
        return true;
    }
    if (verb == "END") {
        is_start = false;
        return true;
    }
    return false;
}

struct WorkloadOutcome {
    int exit_status = 0;
    int64_t start_us = 0; ///< epoch-relative
    int64_t end_us = 0;
    double cpu_time_s = 0.0;
    std::vector<MarkerEvent> markers;
};

double rusage_cpu_seconds(const rusage& usage) {
    const auto total = [](const timeval& tv) {
        return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) * 1e-6;
    };
    return total(usage.ru_utime) + total(usage.ru_stime);
}

/// Forks and execs the workload with stdout piped back. Marker lines are
/// captured (when requested) and timestamped on arrival; everything else
/// is passed through untouched.
WorkloadOutcome execute_workload(const std::vector<std::string>& argv, int64_t epoch_us,
                                 bool record_markers) {
    int fds[2];
    if (pipe(fds) != 0)
        throw IoError("cannot create workload pipe: " + std::string(std::strerror(errno)));

    rusage before{};
    getrusage(RUSAGE_CHILDREN, &before);

    WorkloadOutcome outcome;
    outcome.start_us = monotonic_now_us() - epoch_us;

    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw IoError("cannot fork workload: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        close(fds[0]);
        dup2(fds[1], STDOUT_FILENO);
        close(fds[1]);
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const auto& arg : argv)
            args.push_back(const_cast<char*>(arg.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        perror("execvp");
        _exit(127);
    }

    close(fds[1]);
    FILE* child_out = fdopen(fds[0], "r");
    if (child_out) {
        char* line = nullptr;
        std::size_t capacity = 0;
        ssize_t length;
        while ((length = getline(&line, &capacity, child_out)) != -1) {
            std::string_view view(line, static_cast<std::size_t>(length));
            if (!view.empty() && view.back() == '\n')
                view.remove_suffix(1);
            long long run = 0;
            bool is_start = false;
            if (parse_marker(view, run, is_start)) {
                if (record_markers)
                    outcome.markers.push_back(
                        {run, is_start, monotonic_now_us() - epoch_us});
            } else {
                fwrite(line, 1, static_cast<std::size_t>(length), stdout);
            }
        }
        free(line);
        fclose(child_out);
        fflush(stdout);
    } else {
        close(fds[0]);
    }

    int status = 0;
    waitpid(pid, &status, 0);
    outcome.end_us = monotonic_now_us() - epoch_us;

    rusage after{};
    getrusage(RUSAGE_CHILDREN, &after);
    outcome.cpu_time_s = rusage_cpu_seconds(after) - rusage_cpu_seconds(before);

    if (WIFEXITED(status))
        outcome.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        outcome.exit_status = 128 + WTERMSIG(status);
    else
        outcome.exit_status = -1;
    return outcome;
}

std::vector<RunBoundary> pair_markers(const std::vector<MarkerEvent>& events,
                                      std::vector<std::string>& warnings) {
    struct Window {
        std::optional<int64_t> start;
        std::optional<int64_t> end;
    };
    std::map<long long, Window> windows;
    for (const auto& event : events) {
        auto& window = windows[event.run];
        auto& slot = event.is_start ? window.start : window.end;
        if (slot)
            warnings.push_back("duplicate run marker for run " +
                               std::to_string(event.run));
        else
            slot = event.at_us;
    }

    std::vector<RunBoundary> boundaries;
    for (const auto& [run, window] : windows) {
        if (window.start && window.end && *window.start <= *window.end)
            boundaries.push_back({*window.start, *window.end});
        else
            warnings.push_back("unpaired run marker for run " + std::to_string(run));
    }
    std::sort(boundaries.begin(), boundaries.end(),
              [](const RunBoundary& a, const RunBoundary& b) {
                  return a.start_us < b.start_us;
              });
    return boundaries;
}

/// Fills total/net/window/per-run energies and diagnostics. Requires a
/// workload trace with at least 2 samples; wall_duration_s is taken from
/// the trace itself under virtual time.
void finalize_energies(ExperimentResult& r, bool virtual_time) {
    r.total_energy = integrate_power_trace(r.workload_trace);
    if (virtual_time)
        r.wall_duration_s = r.total_energy.duration_s;

    r.net_energy_value =
        net_energy(r.total_energy, r.baseline.stats.mean_mw, r.wall_duration_s);

    const int discard = r.plan.warmup_discard;
    const int measured_runs = r.plan.runs - discard;
    if (discard == 0) {
        r.measured_net = r.net_energy_value;
    } else {
        const auto& samples = r.workload_trace.samples;
        const int64_t t_first = samples.front().timestamp_us;
        const double duration_us =
            static_cast<double>(samples.back().timestamp_us - t_first) +
            r.workload_trace.mean_interval_us();

        int64_t from_us;
        if (static_cast<int>(r.run_boundaries.size()) == r.plan.runs) {
            from_us = r.run_boundaries[static_cast<std::size_t>(discard)].start_us;
        } else {
            if (!r.run_boundaries.empty())
                r.warnings.push_back(
                    "run marker count does not match plan runs; using "
                    "time-proportional warm-up discard");
            from_us = t_first + static_cast<int64_t>(std::llround(
                                    duration_us * discard / r.plan.runs));
        }
        const int64_t to_us =
            samples.back().timestamp_us +
            static_cast<int64_t>(std::ceil(r.workload_trace.mean_interval_us())) + 1;

        const double window_s =
            (static_cast<double>(t_first) + duration_us - static_cast<double>(from_us)) *
            1e-6;
        EnergyEstimate window;
        window.joules = window_energy_joules(r.workload_trace, from_us, to_us);
        window.duration_s = window_s;
        r.measured_net = net_energy(window, r.baseline.stats.mean_mw, window_s);
    }
    r.per_run = per_run_energy(r.measured_net, measured_runs);
    r.diagnostics = trace_diagnostics(r.workload_trace, r.wall_duration_s);
}

} // namespace

void ExperimentPlan::validate() const {
    if (sampling_rate_hz <= 0.0)
        throw InvalidArgumentError("sampling_rate_hz must be positive");
    if (baseline_samples < 2)
        throw InvalidArgumentError("baseline_samples must be at least 2");
    if (runs < 1)
        throw InvalidArgumentError("runs must be at least 1");
    if (warmup_discard < 0 || warmup_discard >= runs)
        throw InvalidArgumentError("warmup_discard must be in [0, runs)");
    if (cooldown_ms < 0)
        throw InvalidArgumentError("cooldown_ms must be non-negative");
    parse_backend_selector(backend);
}

ExperimentPlan parse_plan(std::istream& input) {
    ExperimentPlan plan;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        const std::string_view record = trim(line);
        if (record.empty() || record.front() == '#')
            continue;
        const std::size_t eq = record.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("plan line is not key=value", line_no);
        const std::string key{trim(record.substr(0, eq))};
        const std::string_view value = trim(record.substr(eq + 1));

        if (key == "sampling_rate_hz")
            plan.sampling_rate_hz = parse_plan_number<double>(value, key, line_no);
        else if (key == "baseline_samples")
            plan.baseline_samples = parse_plan_number<int>(value, key, line_no);
        else if (key == "runs")
            plan.runs = parse_plan_number<int>(value, key, line_no);
        else if (key == "warmup_discard")
            plan.warmup_discard = parse_plan_number<int>(value, key, line_no);
        else if (key == "cooldown_ms")
            plan.cooldown_ms = parse_plan_number<int>(value, key, line_no);
        else if (key == "backend")
            plan.backend = std::string(value);
        else if (key == "workload")
            plan.workload = split_command(value);
        else if (key == "environment_note")
            plan.environment_note = std::string(value);
        else
            throw ParseError("unknown plan key \"" + key + "\"", line_no);
    }
    plan.validate();
    return plan;
}

ExperimentPlan parse_plan_file(const std::string& path) {
    std::ifstream input(path);
    if (!input)
        throw IoError("cannot open " + path);
    return parse_plan(input);
}

BackendSelector parse_backend_selector(const std::string& selector) {
    BackendSelector parsed;
    if (selector == "powercap") {
        parsed.kind = BackendSelector::Kind::Powercap;
        return parsed;
    }
    if (selector.rfind("powercap:", 0) == 0) {
        parsed.kind = BackendSelector::Kind::Powercap;
        parsed.path = selector.substr(9);
        if (parsed.path.empty())
            throw InvalidArgumentError("powercap selector has an empty counter path");
        return parsed;
    }
    if (selector.rfind("replay:", 0) == 0) {
        parsed.kind = BackendSelector::Kind::Replay;
        parsed.path = selector.substr(7);
        if (parsed.path.empty())
            throw InvalidArgumentError("replay selector has an empty path");
        return parsed;
    }
    if (selector.rfind("log:", 0) == 0) {
        const std::string rest = selector.substr(4);
        const std::size_t colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
            throw InvalidArgumentError(
                "log selector must be log:<file>:<format>, got \"" + selector + "\"");
        parsed.kind = BackendSelector::Kind::Log;
        parsed.path = rest.substr(0, colon);
        const std::string format_name = rest.substr(colon + 1);
        const auto format = sampler_log_format_from_name(format_name);
        if (!format)
            throw InvalidArgumentError("unknown sampler log format \"" + format_name +
                                       "\"");
        parsed.format = *format;
        return parsed;
    }
    throw InvalidArgumentError("unknown backend selector \"" + selector + "\"");
}

ReplayFixture load_replay_fixture(const BackendSelector& selector,
                                  const ExperimentPlan& plan) {
    if (!selector.virtual_time())
        throw InvalidArgumentError("live backends have no replay fixture");

    namespace fs = std::filesystem;
    std::error_code ec;
    if (selector.kind == BackendSelector::Kind::Replay &&
        fs::is_directory(selector.path, ec)) {
        ReplayFixture fixture;
        fixture.baseline = parse_sampler_log_file(
            (fs::path(selector.path) / "baseline.csv").string(),
            SamplerLogFormat::GenericPowerCsv);
        fixture.workload = parse_sampler_log_file(
            (fs::path(selector.path) / "workload.csv").string(),
            SamplerLogFormat::GenericPowerCsv);
        // The fixture stands in for a sampler running at the plan's rate;
        // diagnostics must judge sample loss against that rate, not one
        // back-inferred from the (possibly lossy) recorded spacing.
        fixture.baseline.nominal_rate_hz = plan.sampling_rate_hz;
        fixture.workload.nominal_rate_hz = plan.sampling_rate_hz;
        return fixture;
    }

    const SamplerLogFormat format = selector.kind == BackendSelector::Kind::Log
                                        ? selector.format
                                        : SamplerLogFormat::GenericPowerCsv;
    const PowerTrace whole = parse_sampler_log_file(selector.path, format);

    // Single file: baseline head, workload remainder re-based to 0.
    const std::size_t head =
        std::min(whole.samples.size(), static_cast<std::size_t>(plan.baseline_samples));
    ReplayFixture fixture;
    fixture.baseline.nominal_rate_hz = plan.sampling_rate_hz;
    fixture.baseline.source_label = whole.source_label;
    fixture.baseline.samples.assign(whole.samples.begin(),
                                    whole.samples.begin() + static_cast<long>(head));
    fixture.workload.nominal_rate_hz = plan.sampling_rate_hz;
    fixture.workload.source_label = whole.source_label;
    if (head < whole.samples.size()) {
        const int64_t base = whole.samples[head].timestamp_us;
        for (std::size_t i = head; i < whole.samples.size(); ++i) {
            PowerSample sample = whole.samples[i];
            sample.timestamp_us -= base;
            fixture.workload.samples.push_back(sample);
        }
    }
    return fixture;
}

BaselineResult measure_idle(const ExperimentPlan& plan) {
    plan.validate();
    const BackendSelector selector = parse_backend_selector(plan.backend);

    std::unique_ptr<SampleSource> source;
    if (selector.virtual_time()) {
        ReplayFixture fixture = load_replay_fixture(selector, plan);
        source = std::make_unique<ReplaySource>(std::move(fixture.baseline), 0.0);
    } else {
        source = open_live_source(selector, plan);
    }

    PowerTrace trace = collect_samples(*source, plan.baseline_samples);
    if (static_cast<int>(trace.size()) < plan.baseline_samples) {
        BaselineResult partial;
        partial.trace = trace;
        partial.short_collection = true;
        if (!trace.empty())
            partial.stats = summarize_trace(trace);
        throw PartialBaselineError("baseline ended after " +
                                       std::to_string(trace.size()) + " of " +
                                       std::to_string(plan.baseline_samples) +
                                       " samples",
                                   std::move(partial));
    }

    BaselineResult baseline;
    baseline.stats = summarize_trace(trace);
    baseline.trace = std::move(trace);
    return baseline;
}

SampledWorkload sample_around_workload(SampleSource& source,
                                       const std::vector<std::string>& argv) {
    if (argv.empty())
        throw InvalidArgumentError("workload command is empty");

    // The source is expected to be freshly constructed, so its timestamp
    // base coincides with this epoch to within one sampling period.
    const int64_t epoch_us = monotonic_now_us();

    SampledWorkload result;
    result.trace.nominal_rate_hz = source.nominal_rate_hz();
    result.trace.source_label = source.label();

    // One synchronous sample before launch so the trace covers the
    // workload's start.
    if (auto first = source.next())
        result.trace.samples.push_back(*first);

    std::atomic<bool> stop{false};
    std::vector<PowerSample> collected;
    std::thread sampler([&] {
        while (true) {
            auto sample = source.next();
            if (!sample)
                break;
            collected.push_back(*sample);
            if (stop.load())
                break;
        }
    });

    WorkloadOutcome outcome;
    try {
        outcome = execute_workload(argv, epoch_us, true);
    } catch (...) {
        stop.store(true);
        sampler.join();
        throw;
    }
    stop.store(true);
    sampler.join();

    result.trace.samples.insert(result.trace.samples.end(), collected.begin(),
                                collected.end());
    result.wall_duration_s =
        static_cast<double>(outcome.end_us - outcome.start_us) * 1e-6;
    result.cpu_time_s = outcome.cpu_time_s;
    result.exit_status = outcome.exit_status;
    result.boundaries = pair_markers(outcome.markers, result.warnings);
    if (!result.trace.empty()) {
        result.start_skew_s =
            static_cast<double>(outcome.start_us -
                                result.trace.samples.front().timestamp_us) *
            1e-6;
        result.end_skew_s = static_cast<double>(
                                result.trace.samples.back().timestamp_us -
                                outcome.end_us) *
                            1e-6;
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.workload.empty())
        throw InvalidArgumentError("plan has no workload command");
    const BackendSelector selector = parse_backend_selector(plan.backend);

    ExperimentResult r;
    r.plan = plan;
    int exit_status = 0;

    if (selector.virtual_time()) {
        r.baseline = measure_idle(plan);
        ReplayFixture fixture = load_replay_fixture(selector, plan);
        r.workload_trace = std::move(fixture.workload);
        // The fixture defines the timeline: markers, skew, CPU time and
        // cooldown are wall-clock concepts with no replayed meaning.
        const WorkloadOutcome outcome =
            execute_workload(plan.workload, monotonic_now_us(), false);
        exit_status = outcome.exit_status;
    } else {
        r.baseline = measure_idle(plan);
        auto source = open_live_source(selector, plan);
        SampledWorkload sampled = sample_around_workload(*source, plan.workload);
        r.workload_trace = std::move(sampled.trace);
        r.wall_duration_s = sampled.wall_duration_s;
        r.cpu_time_s = sampled.cpu_time_s;
        r.run_boundaries = std::move(sampled.boundaries);
        r.start_skew_s = sampled.start_skew_s;
        r.end_skew_s = sampled.end_skew_s;
        r.warnings.insert(r.warnings.end(), sampled.warnings.begin(),
                          sampled.warnings.end());
        exit_status = sampled.exit_status;

        if (plan.cooldown_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(plan.cooldown_ms));
    }

    if (r.workload_trace.size() >= 2)
        finalize_energies(r, selector.virtual_time());

    if (exit_status != 0)
        throw ExperimentFailedError("workload exited with status " +
                                        std::to_string(exit_status),
                                    std::move(r), exit_status);
    if (r.workload_trace.size() < 2)
        throw TooFastWorkloadError(
            "sampler produced " + std::to_string(r.workload_trace.size()) +
            " samples; the workload finished too fast to measure at " +
            std::to_string(plan.sampling_rate_hz) + " Hz");
    return r;
}

std::optional<ComponentHint> component_hint_from_name(const std::string& name) {
    if (name == "cpu-only")
        return ComponentHint::CpuOnly;
    if (name == "gpu")
        return ComponentHint::Gpu;
    if (name == "network")
        return ComponentHint::Network;
    if (name == "gps")
        return ComponentHint::Gps;
    if (name == "sd-card")
        return ComponentHint::SdCard;
    return std::nullopt;
}

std::optional<std::string> check_tail_state_buffer(const ExperimentPlan& plan,
                                                   ComponentHint hint) {
    int floor_ms = 0;
    const char* label = "";
    switch (hint) {
    case ComponentHint::CpuOnly:
    case ComponentHint::Gpu:
        return std::nullopt; // tail states are a peripheral phenomenon
    case ComponentHint::Network:
        floor_ms = 3000;
        label = "network";
        break;
    case ComponentHint::Gps:
        floor_ms = 3000;
        label = "gps";
        break;
    case ComponentHint::SdCard:
        floor_ms = 3000;
        label = "sd-card";
        break;
    }
    if (plan.cooldown_ms >= floor_ms)
        return std::nullopt;
    return "cooldown " + std::to_string(plan.cooldown_ms) + " ms is below the " +
           std::to_string(floor_ms) + " ms tail-state buffer recommended for " + label +
           " components, which can hold elevated power for several seconds after use";
}

std::optional<std::string> check_polling_interval(const ExperimentPlan& plan,
                                                  double tdp_watts,
                                                  const RaplDomainSpec& spec) {
    const double interval_s = 1.0 / plan.sampling_rate_hz;
    const double safe_s = max_safe_polling_interval(tdp_watts, spec);
    if (interval_s <= safe_s)
        return std::nullopt;
    char buffer[160];
    std::snprintf(buffer, sizeof(buffer),
                  "polling interval %.3f s exceeds the %.3f s safe limit (half the "
                  "counter wraparound period at %.0f W); deltas may be ambiguous",
                  interval_s, safe_s, tdp_watts);
    return std::string(buffer);
}

} // namespace jouletrace
