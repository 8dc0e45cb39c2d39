#pragma once

#include "jouletrace/counters.hpp"
#include "jouletrace/errors.hpp"
#include "jouletrace/trace.hpp"

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace jouletrace {

/// Declarative description of one measurement campaign.
///
/// Machine hygiene (AC power, governor, background processes) cannot be
/// automated; environment_note carries the operator's disclosure verbatim
/// into every report.
struct ExperimentPlan {
    double sampling_rate_hz = 10.0;
    int baseline_samples = 385; ///< 95% confidence, +-5% margin (see required_sample_size)
    int runs = 10;
    int warmup_discard = 0; ///< leading runs excluded from energy accounting
    int cooldown_ms = 0;    ///< tail-state buffer after workload exit
    std::string backend = "powercap";
    std::vector<std::string> workload; ///< argv of the command to measure
    std::string environment_note;

    /// Throws InvalidArgumentError when any field is out of range.
    void validate() const;
};

/// Reads a key=value plan file ('#' comments, blank lines ignored). Keys
/// mirror ExperimentPlan field names exactly; unknown keys are errors.
ExperimentPlan parse_plan(std::istream& input);
ExperimentPlan parse_plan_file(const std::string& path);

struct BaselineResult {
    SummaryStats stats;
    PowerTrace trace;
    bool short_collection = false; ///< fewer samples than the plan requested
};

/// One workload repetition's marker-delimited window, trace-relative.
struct RunBoundary {
    int64_t start_us = 0;
    int64_t end_us = 0;
};

struct ExperimentResult {
    ExperimentPlan plan;
    BaselineResult baseline;
    PowerTrace workload_trace;
    double wall_duration_s = 0.0;
    std::optional<double> cpu_time_s; ///< absent under replayed (virtual-time) backends
    EnergyEstimate total_energy;      ///< trace integration
    EnergyEstimate net_energy_value;  ///< total minus idle over the wall duration
    EnergyEstimate measured_net;      ///< net over the post-discard window
    EnergyEstimate per_run;           ///< measured_net / (runs - warmup_discard)
    TraceDiagnostics diagnostics;
    std::vector<RunBoundary> run_boundaries; ///< empty when markers were not used
    double start_skew_s = 0.0; ///< sampler start to workload start
    double end_skew_s = 0.0;   ///< workload end to sampler stop
    std::vector<std::string> warnings;
};

/// Baseline collection aborted early; `partial` holds what was gathered.
class PartialBaselineError : public Error {
public:
    PartialBaselineError(const std::string& what, BaselineResult partial)
        : Error(what), partial_(std::move(partial)) {}
    const BaselineResult& partial() const { return partial_; }

private:
    BaselineResult partial_;
};

/// Workload exited non-zero; the captured trace and derived figures are
/// retained on the attached result.
class ExperimentFailedError : public Error {
public:
    ExperimentFailedError(const std::string& what, ExperimentResult result,
                          int exit_status)
        : Error(what), result_(std::move(result)), exit_status_(exit_status) {}
    const ExperimentResult& result() const { return result_; }
    int exit_status() const { return exit_status_; }

private:
    ExperimentResult result_;
    int exit_status_;
};

/// The workload finished before the sampler produced two samples, so no
/// energy can be integrated.
class TooFastWorkloadError : public Error {
public:
    using Error::Error;
};

/// Parsed form of a --backend selector:
///   powercap[:<counter path>]       live microjoule counter
///   replay:<file or fixture dir>    recorded trace, virtual time
///   log:<file>:<format>             recorded sampler log, virtual time
struct BackendSelector {
    enum class Kind { Powercap, Replay, Log };
    Kind kind = Kind::Powercap;
    std::string path;
    SamplerLogFormat format = SamplerLogFormat::GenericPowerCsv;

    bool virtual_time() const { return kind != Kind::Powercap; }
};

BackendSelector parse_backend_selector(const std::string& selector);

/// Baseline and workload traces resolved from a replayed backend. A
/// fixture directory supplies baseline.csv and workload.csv; a single
/// file is split at plan.baseline_samples and the remainder re-based to
/// timestamp 0.
struct ReplayFixture {
    PowerTrace baseline;
    PowerTrace workload;
};

ReplayFixture load_replay_fixture(const BackendSelector& selector,
                                  const ExperimentPlan& plan);

/// Collects exactly plan.baseline_samples samples from the plan's backend
/// at the plan's rate. Throws PartialBaselineError if the source is
/// exhausted first.
BaselineResult measure_idle(const ExperimentPlan& plan);

/// Everything observed while sampling around one workload execution.
struct SampledWorkload {
    PowerTrace trace;
    double wall_duration_s = 0.0;
    double cpu_time_s = 0.0;
    std::vector<RunBoundary> boundaries;
    double start_skew_s = 0.0;
    double end_skew_s = 0.0;
    int exit_status = 0;
    std::vector<std::string> warnings;
};

/// Live measurement core: starts sampling, runs the workload to exit with
/// marker lines ("##RUN <k> START" / "##RUN <k> END") intercepted and all
/// other output passed through, then stops sampling. The sampler's
/// lifetime strictly covers the workload's. Does not throw on non-zero
/// exit; the caller decides.
SampledWorkload sample_around_workload(SampleSource& source,
                                       const std::vector<std::string>& argv);

/// Runs the full protocol: sized idle baseline, sampled workload
/// execution, cooldown, then energy accounting with warm-up discard.
/// Throws ExperimentFailedError (non-zero exit, trace attached) and
/// TooFastWorkloadError (fewer than 2 samples).
ExperimentResult run_experiment(const ExperimentPlan& plan);

/// Hardware classes whose tail power states call for a cooldown buffer.
enum class ComponentHint { CpuOnly, Gpu, Network, Gps, SdCard };

std::optional<ComponentHint> component_hint_from_name(const std::string& name);

/// Warns when plan.cooldown_ms is below the hinted component class's
/// floor. Peripherals can hold elevated power for seconds after use;
/// advisory only, never blocks.
std::optional<std::string> check_tail_state_buffer(const ExperimentPlan& plan,
                                                   ComponentHint hint);

/// Warns when the plan's sampling interval exceeds half the counter's
/// wraparound period at the platform's TDP (two polls per wrap minimum).
std::optional<std::string> check_polling_interval(const ExperimentPlan& plan,
                                                  double tdp_watts,
                                                  const RaplDomainSpec& spec);

} // namespace jouletrace
