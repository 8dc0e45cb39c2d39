#pragma once

#include "jouletrace/trace.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace jouletrace {

enum class RaplDomain { PKG, PP0, PP1, DRAM };

const char* rapl_domain_name(RaplDomain domain);

/// Per-architecture decoding metadata for a raw energy counter.
///
/// Energy units are configuration, not hardcoded per-CPU detection: the
/// Linux powercap hierarchy already reports microjoules (unit 1.0), and
/// raw MSR-style units only appear in recorded counter files. Shipped
/// presets cover the two widely documented CPU units; everything else,
/// DRAM included, is user-supplied.
struct RaplDomainSpec {
    RaplDomain domain = RaplDomain::PKG;
    double energy_unit_uj = 1.0; ///< microjoules per raw tick, > 0
    int counter_width_bits = 32; ///< 32 or 64

    static RaplDomainSpec sandy_bridge(RaplDomain domain = RaplDomain::PKG) {
        return {domain, 15.3, 32};
    }
    static RaplDomainSpec haswell(RaplDomain domain = RaplDomain::PKG) {
        return {domain, 61.0, 32};
    }
    /// Accumulating microjoule counter file (powercap layout).
    static RaplDomainSpec powercap(RaplDomain domain = RaplDomain::PKG) {
        return {domain, 1.0, 64};
    }
};

/// A raw value read from a monotonically wrapping energy counter.
struct CounterReading {
    uint64_t raw = 0; ///< < 2^counter_width
    int64_t timestamp_us = 0;
    RaplDomainSpec domain;
};

enum class SamplerLogFormat {
    GenericPowerCsv,   ///< "timestamp_us,power_mw" records
    GenericCounterCsv, ///< "timestamp_us,energy_raw,unit_ujoules,width_bits" records
    PowermetricsText,  ///< free text; "CPU Power: <N> mW" lines
};

/// Parses a format name as used by the CLI backend selector. Accepted:
/// generic-power-csv, generic-counter-csv, powermetrics-text.
std::optional<SamplerLogFormat> sampler_log_format_from_name(const std::string& name);
const char* sampler_log_format_name(SamplerLogFormat format);

/// Raw tick count between two readings of the same domain, modulo the
/// counter width. At most one wraparound is assumed between readings.
/// Throws DomainMismatchError when the readings disagree on domain,
/// energy unit, or width.
uint64_t counter_delta(const CounterReading& prev, const CounterReading& curr);

/// joules = ticks * energy_unit * 1e-6
double raw_to_joules(uint64_t ticks, const RaplDomainSpec& spec);

/// Seconds until a counter wraps at a sustained power draw:
/// 2^width * energy_unit * 1e-6 / power.
double wraparound_period(double power_watts, const RaplDomainSpec& spec);

/// Longest polling interval that keeps the single-wrap assumption safe at
/// the platform's TDP: half the wraparound period at that power.
double max_safe_polling_interval(double tdp_watts, const RaplDomainSpec& spec);

/// Reads the current value of an accumulating microjoule counter file
/// (powercap layout) and timestamps it with a monotonic clock taken
/// immediately after the read.
///
/// Throws UnsupportedPlatformError when the file does not exist and
/// PrivilegeError when it cannot be read for lack of permission.
CounterReading poll_live_counter(const std::string& counter_path,
                                 const RaplDomainSpec& spec = RaplDomainSpec::powercap());

struct ParseOptions {
    /// Declared rate for formats that carry no timestamps of their own
    /// (powermetrics-text), and override for the rate inferred from CSV
    /// timestamps when set.
    std::optional<double> nominal_rate_hz;
};

/// Parses a recorded sampler log into a power trace. For counter logs,
/// powers are reconstructed by differencing successive counter values via
/// counter_delta and raw_to_joules over the inter-timestamp interval; each
/// reconstructed sample carries the interval's start timestamp, matching
/// the rectangle integration convention.
PowerTrace parse_sampler_log(std::istream& input, SamplerLogFormat format,
                             const ParseOptions& options = {});

PowerTrace parse_sampler_log_file(const std::string& path, SamplerLogFormat format,
                                  const ParseOptions& options = {});

/// Writes a trace in generic-power-csv form. parse_sampler_log of the
/// output reproduces the samples exactly.
void serialize_power_csv(const PowerTrace& trace, std::ostream& out);

/// Blocking, single-consumer stream of power samples. next() returns
/// nullopt once the source is exhausted; live sources never exhaust.
class SampleSource {
public:
    virtual ~SampleSource() = default;

    virtual std::optional<PowerSample> next() = 0;
    virtual double nominal_rate_hz() const = 0;
    virtual std::string label() const = 0;

    /// True when the source's timestamps define their own timeline
    /// (replayed data) rather than following the machine's clock.
    virtual bool virtual_time() const { return false; }
};

/// Replays a previously recorded trace. At speed 0 ("as fast as
/// possible") samples are emitted immediately; at speed 1 inter-sample
/// delays match the original timestamps within scheduler tolerance.
class ReplaySource final : public SampleSource {
public:
    ReplaySource(PowerTrace trace, double speed);

    std::optional<PowerSample> next() override;
    double nominal_rate_hz() const override { return trace_.nominal_rate_hz; }
    std::string label() const override { return trace_.source_label; }
    bool virtual_time() const override { return true; }

private:
    PowerTrace trace_;
    double speed_;
    std::size_t position_ = 0;
    int64_t emitted_at_us_ = 0; // monotonic time of the previous emission
};

/// Opens a trace file and replays it.
std::unique_ptr<ReplaySource> replay_trace(const std::string& path, double speed,
                                           SamplerLogFormat format = SamplerLogFormat::GenericPowerCsv,
                                           const ParseOptions& options = {});

/// Live power sampler over an accumulating microjoule counter. Each tick
/// reads the counter and derives power from the energy delta since the
/// previous read. Exactly one poller may own a counter path at a time.
class PowercapSource final : public SampleSource {
public:
    PowercapSource(std::string counter_path, double rate_hz,
                   RaplDomainSpec spec = RaplDomainSpec::powercap());

    std::optional<PowerSample> next() override;
    double nominal_rate_hz() const override { return rate_hz_; }
    std::string label() const override { return "powercap:" + counter_path_; }

private:
    std::string counter_path_;
    double rate_hz_;
    RaplDomainSpec spec_;
    CounterReading previous_;
    int64_t anchor_us_ = 0; // monotonic time of the priming read
    int64_t tick_ = 0;
};

/// Locates the default package-domain energy counter under the powercap
/// hierarchy root. Throws UnsupportedPlatformError when none exists.
std::string discover_powercap_package_counter(
    const std::string& root = "/sys/class/powercap");

} // namespace jouletrace
