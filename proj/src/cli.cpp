#include "jouletrace/cli.hpp"

#include "jouletrace/counters.hpp"
#include "jouletrace/errors.hpp"
#include "jouletrace/model.hpp"
#include "jouletrace/orchestrator.hpp"
#include "jouletrace/report.hpp"
#include "jouletrace/stats.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace jouletrace {

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void deliver(const std::string& bytes, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << bytes;
        out.flush();
        return;
    }
    write_output(bytes, path);
}

struct BaselineArgs {
    double rate_hz = 10.0;
    int samples = 385;
    std::string backend = "powercap";
    std::string env_note;
    std::string output;
    std::string format = "report";
};

struct MeasureArgs {
    double rate_hz = 10.0;
    int runs = 10;
    int warmup_discard = 0;
    int cooldown_ms = 0;
    std::string backend = "powercap";
    std::string env_note;
    std::string plan_file;
    std::string output;
    std::string format = "report";
};

struct CompareArgs {
    std::string report_a;
    std::string report_b;
    std::string output;
};

struct EstimateArgs {
    std::string profile_file;
    std::string costs_file;
    bool lenient = false;
    std::string output;
};

struct CalibrateArgs {
    std::string platform;
    std::vector<std::string> ops;
    std::string output;
};

struct AlignArgs {
    std::string pairs_file;
    std::string apply_file;
    std::string output;
};

struct ReplayArgs {
    std::string file;
    double speed = 0.0;
    std::string format = "generic-power-csv";
    double rate_hz = 0.0;
    std::string output;
};

struct SampleSizeArgs {
    double confidence = 0.95;
    double margin = 0.05;
};

std::string emit_estimate_document(const std::string& profile_label,
                                   const std::string& platform, double joules,
                                   const std::vector<std::string>& uncovered) {
    std::string out;
    out += "{\n";
    out += "  \"schema_version\": " + std::to_string(kReportSchemaVersion) + ",\n";
    out += "  \"kind\": \"estimate\",\n";
    out += "  \"profile\": " + json_quote(profile_label) + ",\n";
    out += "  \"platform\": " + json_quote(platform) + ",\n";
    out += "  \"estimate_joules\": " + format_fixed(joules, 6) + ",\n";
    out += "  \"method\": \"analytical\",\n";
    out += "  \"uncovered\": [";
    for (std::size_t i = 0; i < uncovered.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += json_quote(uncovered[i]);
    }
    out += "]\n}\n";
    return out;
}

std::string emit_alignment_document(const ClockAlignment& alignment) {
    std::string out;
    out += "{\n";
    out += "  \"schema_version\": " + std::to_string(kReportSchemaVersion) + ",\n";
    out += "  \"kind\": \"alignment\",\n";
    out += "  \"offset_us\": " + format_fixed(alignment.offset_us, 3) + ",\n";
    out += "  \"drift_ratio\": " + format_fixed(alignment.drift, 9) + ",\n";
    out += "  \"residual_rms_us\": " + format_fixed(alignment.residual_rms_us, 3) + ",\n";
    out += "  \"points_count\": " + std::to_string(alignment.n_points) + "\n";
    out += "}\n";
    return out;
}

int run_baseline(const BaselineArgs& args, std::ostream& out) {
    ExperimentPlan plan;
    plan.sampling_rate_hz = args.rate_hz;
    plan.baseline_samples = args.samples;
    plan.backend = args.backend;
    plan.environment_note = args.env_note;

    const BaselineResult baseline = measure_idle(plan);
    if (args.format == "plotdata")
        deliver(emit_plotdata(baseline.trace), args.output, out);
    else
        deliver(emit_baseline_report(baseline, plan), args.output, out);
    return kExitSuccess;
}

int run_measure(const MeasureArgs& args, const CLI::App* cmd,
                std::vector<std::string> workload, std::ostream& out,
                std::ostream& err) {
    ExperimentPlan plan;
    if (!args.plan_file.empty())
        plan = parse_plan_file(args.plan_file);
    if (cmd->count("--rate-hz"))
        plan.sampling_rate_hz = args.rate_hz;
    if (cmd->count("--runs"))
        plan.runs = args.runs;
    if (cmd->count("--warmup-discard"))
        plan.warmup_discard = args.warmup_discard;
    if (cmd->count("--cooldown-ms"))
        plan.cooldown_ms = args.cooldown_ms;
    if (cmd->count("--backend"))
        plan.backend = args.backend;
    if (cmd->count("--env-note"))
        plan.environment_note = args.env_note;
    if (!workload.empty())
        plan.workload = std::move(workload);

    if (plan.workload.empty()) {
        err << "error: measure needs a workload command after --\n";
        return kExitUsage;
    }
    const BackendSelector selector = parse_backend_selector(plan.backend);
    if (!selector.virtual_time() && plan.environment_note.empty()) {
        err << "error: live measurement requires --env-note describing the machine "
               "state (power source, governor, background load)\n";
        return kExitUsage;
    }

    const ExperimentResult result = run_experiment(plan);
    if (args.format == "plotdata")
        deliver(emit_plotdata(result.workload_trace), args.output, out);
    else
        deliver(emit_experiment_report(result), args.output, out);
    return kExitSuccess;
}

int run_compare(const CompareArgs& args, std::ostream& out) {
    const ExperimentResult low = parse_experiment_report_file(args.report_a);
    const ExperimentResult high = parse_experiment_report_file(args.report_b);
    const OverheadReport report = overhead_report(low, high);
    deliver(emit_comparison_report(report), args.output, out);
    return kExitSuccess;
}

int run_estimate(const EstimateArgs& args, std::ostream& out) {
    const OperationProfile profile = parse_profile_file(args.profile_file);
    const OperationCostModel costs = parse_cost_model_file(args.costs_file);

    double joules;
    std::vector<std::string> uncovered;
    if (args.lenient) {
        LenientEstimate lenient = estimate_from_models_lenient(profile, costs);
        joules = lenient.estimate.joules;
        uncovered = std::move(lenient.uncovered);
    } else {
        joules = estimate_from_models(profile, costs).joules;
    }
    deliver(emit_estimate_document(profile.label, costs.platform, joules, uncovered),
            args.output, out);
    return kExitSuccess;
}

int run_calibrate(const CalibrateArgs& args, std::ostream& out) {
    std::map<std::string, CalibrationInput> inputs;
    for (const std::string& spec : args.ops) {
        // name:tracefile:repetitions, where the file may itself contain ':'.
        const std::size_t first = spec.find(':');
        const std::size_t last = spec.rfind(':');
        if (first == std::string::npos || first == last || first == 0 ||
            last + 1 == spec.size())
            throw InvalidArgumentError("--op expects <name>:<trace file>:<repetitions>, got \"" +
                                       spec + "\"");
        CalibrationInput input;
        const std::string name = spec.substr(0, first);
        const std::string file = spec.substr(first + 1, last - first - 1);
        input.repetitions = std::stoll(spec.substr(last + 1));
        input.trace =
            parse_sampler_log_file(file, SamplerLogFormat::GenericPowerCsv);
        inputs[name] = std::move(input);
    }

    const OperationCostModel model = calibrate_costs(inputs, args.platform);
    std::ostringstream bytes;
    write_cost_model(model, bytes);
    deliver(bytes.str(), args.output, out);
    return kExitSuccess;
}

int run_align(const AlignArgs& args, std::ostream& out) {
    std::ifstream pairs(args.pairs_file);
    if (!pairs)
        throw IoError("cannot open " + args.pairs_file);
    std::vector<double> reference_us;
    std::vector<double> meter_us;
    parse_alignment_pairs(pairs, reference_us, meter_us);
    const ClockAlignment alignment = align_clocks(reference_us, meter_us);

    if (args.apply_file.empty()) {
        deliver(emit_alignment_document(alignment), args.output, out);
        return kExitSuccess;
    }
    const PowerTrace meter_trace =
        parse_sampler_log_file(args.apply_file, SamplerLogFormat::GenericPowerCsv);
    const PowerTrace aligned = apply_alignment(meter_trace, alignment);
    deliver(emit_plotdata(aligned), args.output, out);
    return kExitSuccess;
}

int run_replay(const ReplayArgs& args, std::ostream& out) {
    const auto format = sampler_log_format_from_name(args.format);
    if (!format)
        throw InvalidArgumentError("unknown sampler log format \"" + args.format + "\"");
    ParseOptions options;
    if (args.rate_hz > 0.0)
        options.nominal_rate_hz = args.rate_hz;

    auto source = replay_trace(args.file, args.speed, *format, options);
    PowerTrace collected;
    collected.nominal_rate_hz = source->nominal_rate_hz();
    collected.source_label = source->label();
    while (auto sample = source->next())
        collected.samples.push_back(*sample);

    deliver(emit_plotdata(collected), args.output, out);
    return kExitSuccess;
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
    CLI::App app{"Software energy measurement and estimation toolkit"};
    app.name("jouletrace");
    app.require_subcommand(1);

    BaselineArgs baseline_args;
    auto* baseline = app.add_subcommand("baseline", "Measure the idle power baseline");
    baseline->add_option("--rate-hz", baseline_args.rate_hz, "Sampling rate in Hz");
    baseline->add_option("--samples", baseline_args.samples,
                         "Baseline sample count (385 gives 95% confidence, +-5%)");
    baseline->add_option("--backend", baseline_args.backend,
                         "powercap[:path], replay:<file|dir>, or log:<file>:<format>");
    baseline->add_option("--env-note", baseline_args.env_note,
                         "Machine-state disclosure embedded in the report");
    baseline->add_option("--output,-o", baseline_args.output, "Output path (- for stdout)");
    baseline->add_option("--format", baseline_args.format, "Output form")
        ->check(CLI::IsMember({"report", "plotdata"}));

    MeasureArgs measure_args;
    auto* measure = app.add_subcommand(
        "measure", "Run the full protocol around a workload: measure -- <command...>");
    measure->add_option("--rate-hz", measure_args.rate_hz, "Sampling rate in Hz");
    measure->add_option("--runs", measure_args.runs, "Workload repetitions in one execution");
    measure->add_option("--warmup-discard", measure_args.warmup_discard,
                        "Leading runs excluded from energy accounting");
    measure->add_option("--cooldown-ms", measure_args.cooldown_ms,
                        "Tail-state buffer after workload exit");
    measure->add_option("--backend", measure_args.backend,
                        "powercap[:path], replay:<file|dir>, or log:<file>:<format>");
    measure->add_option("--env-note", measure_args.env_note,
                        "Machine-state disclosure; required for live backends");
    measure->add_option("--plan", measure_args.plan_file,
                        "key=value plan file; explicit flags override it");
    measure->add_option("--output,-o", measure_args.output, "Output path (- for stdout)");
    measure->add_option("--format", measure_args.format, "Output form")
        ->check(CLI::IsMember({"report", "plotdata"}));

    CompareArgs compare_args;
    auto* compare = app.add_subcommand(
        "compare", "Sampling-overhead report between two experiment reports");
    compare->add_option("report_low", compare_args.report_a, "Low-rate experiment report")
        ->required();
    compare->add_option("report_high", compare_args.report_b, "High-rate experiment report")
        ->required();
    compare->add_option("--output,-o", compare_args.output, "Output path (- for stdout)");

    auto* model = app.add_subcommand("model", "Analytical energy estimation");
    model->require_subcommand(1);

    EstimateArgs estimate_args;
    auto* estimate = model->add_subcommand(
        "estimate", "Combine an operation profile with a per-operation cost model");
    estimate->add_option("--profile", estimate_args.profile_file,
                         "Profile file: operation_id,count")
        ->required();
    estimate->add_option("--costs", estimate_args.costs_file,
                         "Cost model file: operation_id,millijoules_per_op")
        ->required();
    estimate->add_flag("--lenient", estimate_args.lenient,
                       "Report uncovered operations instead of failing");
    estimate->add_option("--output,-o", estimate_args.output, "Output path (- for stdout)");

    CalibrateArgs calibrate_args;
    auto* calibrate = model->add_subcommand(
        "calibrate", "Derive per-operation costs from microbenchmark traces");
    calibrate->add_option("--platform", calibrate_args.platform, "Platform identifier")
        ->required();
    calibrate->add_option("--op", calibrate_args.ops,
                          "<name>:<trace file>:<repetitions>; repeatable");
    calibrate->add_option("--output,-o", calibrate_args.output, "Output path (- for stdout)");

    AlignArgs align_args;
    auto* align = app.add_subcommand(
        "align", "Fit an external meter's clock to the reference clock");
    align->add_option("--pairs", align_args.pairs_file,
                      "Matched event file: reference_us,meter_us")
        ->required();
    align->add_option("--apply", align_args.apply_file,
                      "Re-timestamp this trace onto the reference clock");
    align->add_option("--output,-o", align_args.output, "Output path (- for stdout)");

    ReplayArgs replay_args;
    auto* replay = app.add_subcommand("replay", "Replay a recorded trace file");
    replay->add_option("file", replay_args.file, "Trace or sampler log file")->required();
    replay->add_option("--speed", replay_args.speed,
                       "Replay multiplier; 0 is as fast as possible");
    replay->add_option("--log-format", replay_args.format,
                       "generic-power-csv, generic-counter-csv, or powermetrics-text");
    replay->add_option("--rate-hz", replay_args.rate_hz,
                       "Nominal rate override (powermetrics logs carry none)");
    replay->add_option("--output,-o", replay_args.output, "Output path (- for stdout)");

    SampleSizeArgs samplesize_args;
    auto* samplesize = app.add_subcommand(
        "samplesize", "Baseline sample count for a confidence level and margin");
    samplesize->add_option("--confidence", samplesize_args.confidence,
                           "Confidence level in (0, 1)");
    samplesize->add_option("--margin", samplesize_args.margin,
                           "Relative margin of error in (0, 1)");

    // Everything after a bare "--" is the workload command verbatim; the
    // option parser never sees it, so workload flags pass through intact.
    std::vector<std::string> own(args.begin(), args.end());
    std::vector<std::string> workload;
    if (auto cut = std::find(own.begin(), own.end(), "--"); cut != own.end()) {
        workload.assign(cut + 1, own.end());
        own.erase(cut, own.end());
    }

    std::vector<std::string> reversed(own.rbegin(), own.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "Run 'jouletrace --help' for usage.\n";
        return kExitUsage;
    }

    try {
        if (!workload.empty() && !measure->parsed()) {
            err << "error: only 'measure' takes a workload command after --\n";
            return kExitUsage;
        }
        if (baseline->parsed())
            return run_baseline(baseline_args, out);
        if (measure->parsed())
            return run_measure(measure_args, measure, std::move(workload), out, err);
        if (compare->parsed())
            return run_compare(compare_args, out);
        if (estimate->parsed())
            return run_estimate(estimate_args, out);
        if (calibrate->parsed())
            return run_calibrate(calibrate_args, out);
        if (align->parsed())
            return run_align(align_args, out);
        if (replay->parsed())
            return run_replay(replay_args, out);
        if (samplesize->parsed()) {
            const int n = required_sample_size(
                {samplesize_args.confidence, samplesize_args.margin});
            out << n << "\n";
            return kExitSuccess;
        }
        err << "error: no subcommand\n";
        return kExitUsage;
    } catch (const InvalidArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ExperimentFailedError& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cli_dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return cli_dispatch(args, std::cout, std::cerr);
}

} // namespace jouletrace
