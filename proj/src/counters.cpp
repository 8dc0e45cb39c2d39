#include "jouletrace/counters.hpp"

#include "jouletrace/errors.hpp"

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <unistd.h>

namespace jouletrace {

namespace {

int64_t monotonic_now_us() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void sleep_until_monotonic_us(int64_t target_us) {
    const auto target = std::chrono::steady_clock::time_point(
        std::chrono::microseconds(target_us));
    std::this_thread::sleep_until(target);
}

std::string_view strip_line_ending(std::string_view line) {
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
    return line;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double infer_rate(const PowerTrace& trace, const ParseOptions& options) {
    if (options.nominal_rate_hz)
        return *options.nominal_rate_hz;
    const double interval_us = trace.mean_interval_us();
    if (interval_us > 0.0)
        return 1e6 / interval_us;
    return 1.0;
}

PowerTrace parse_power_csv(std::istream& input, const ParseOptions& options) {
    std::string line;
    if (!std::getline(input, line))
        throw ParseError("empty input", 0);
    if (strip_line_ending(line) != "timestamp_us,power_mw")
        throw ParseError("expected header \"timestamp_us,power_mw\"", 1);

    PowerTrace trace;
    std::size_t line_no = 1;
    while (std::getline(input, line)) {
        ++line_no;
        const auto record = strip_line_ending(line);
        if (record.empty())
            continue;
        const auto fields = split_fields(record);
        PowerSample sample;
        if (fields.size() != 2 || !parse_number(fields[0], sample.timestamp_us) ||
            !parse_number(fields[1], sample.power_mw))
            throw ParseError("malformed power record", line_no);
        if (sample.power_mw < 0.0 || sample.timestamp_us < 0)
            throw ParseError("negative power or timestamp", line_no);
        if (!trace.samples.empty() &&
            sample.timestamp_us <= trace.samples.back().timestamp_us)
            throw MalformedTraceError("timestamps not strictly increasing at line " +
                                      std::to_string(line_no));
        trace.samples.push_back(sample);
    }
    if (trace.samples.empty())
        throw ParseError("power log contains no records", line_no);
    trace.nominal_rate_hz = infer_rate(trace, options);
    return trace;
}

PowerTrace parse_counter_csv(std::istream& input, const ParseOptions& options) {
    std::string line;
    if (!std::getline(input, line))
        throw ParseError("empty input", 0);
    if (strip_line_ending(line) != "timestamp_us,energy_raw,unit_ujoules,width_bits")
        throw ParseError(
            "expected header \"timestamp_us,energy_raw,unit_ujoules,width_bits\"", 1);

    std::vector<CounterReading> readings;
    RaplDomainSpec spec;
    bool spec_fixed = false;
    std::size_t line_no = 1;
    while (std::getline(input, line)) {
        ++line_no;
        const auto record = strip_line_ending(line);
        if (record.empty())
            continue;
        const auto fields = split_fields(record);
        CounterReading reading;
        double unit = 0.0;
        int width = 0;
        if (fields.size() != 4 || !parse_number(fields[0], reading.timestamp_us) ||
            !parse_number(fields[1], reading.raw) || !parse_number(fields[2], unit) ||
            !parse_number(fields[3], width))
            throw ParseError("malformed counter record", line_no);
        if (unit <= 0.0 || (width != 32 && width != 64))
            throw ParseError("invalid energy unit or counter width", line_no);
        if (!spec_fixed) {
            spec.energy_unit_uj = unit;
            spec.counter_width_bits = width;
            spec_fixed = true;
        } else if (unit != spec.energy_unit_uj || width != spec.counter_width_bits) {
            throw ParseError("unit and width must be constant per file", line_no);
        }
        if (width == 32 && reading.raw > 0xFFFFFFFFull)
            throw ParseError("raw value exceeds 32-bit counter width", line_no);
        if (!readings.empty() && reading.timestamp_us <= readings.back().timestamp_us)
            throw MalformedTraceError("timestamps not strictly increasing at line " +
                                      std::to_string(line_no));
        reading.domain = spec;
        readings.push_back(reading);
    }
    if (readings.size() < 2)
        throw ParseError("counter log needs at least 2 records to reconstruct power",
                         line_no);

    PowerTrace trace;
    trace.samples.reserve(readings.size() - 1);
    for (std::size_t i = 0; i + 1 < readings.size(); ++i) {
        const uint64_t ticks = counter_delta(readings[i], readings[i + 1]);
        const double joules = raw_to_joules(ticks, spec);
        const double dt_us = static_cast<double>(readings[i + 1].timestamp_us -
                                                 readings[i].timestamp_us);
        // Reconstructed power is assigned to the interval's start, matching
        // the rectangle integration convention.
        PowerSample sample;
        sample.timestamp_us = readings[i].timestamp_us;
        sample.power_mw = joules * 1e9 / dt_us; // J / us -> mW
        trace.samples.push_back(sample);
    }
    trace.nominal_rate_hz = infer_rate(trace, options);
    return trace;
}

PowerTrace parse_powermetrics_text(std::istream& input, const ParseOptions& options) {
    const double rate = options.nominal_rate_hz.value_or(10.0);
    if (rate <= 0.0)
        throw InvalidArgumentError("powermetrics parsing requires a positive rate");
    const double interval_us = 1e6 / rate;

    PowerTrace trace;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        std::string_view view = strip_line_ending(line);
        while (!view.empty() && (view.front() == ' ' || view.front() == '\t'))
            view.remove_prefix(1);
        constexpr std::string_view prefix = "CPU Power:";
        if (view.substr(0, prefix.size()) != prefix)
            continue;
        view.remove_prefix(prefix.size());
        while (!view.empty() && view.front() == ' ')
            view.remove_prefix(1);
        const std::size_t digits_end = view.find_first_not_of("0123456789");
        if (digits_end == 0 || digits_end == std::string_view::npos)
            throw ParseError("malformed CPU Power line", line_no);
        int64_t milliwatts = 0;
        if (!parse_number(view.substr(0, digits_end), milliwatts))
            throw ParseError("malformed CPU Power line", line_no);
        std::string_view rest = view.substr(digits_end);
        while (!rest.empty() && rest.front() == ' ')
            rest.remove_prefix(1);
        if (rest.substr(0, 2) != "mW")
            throw ParseError("malformed CPU Power line", line_no);

        // powermetrics blocks carry no machine-parseable monotonic clock;
        // timestamps are synthesized on the declared sampling grid.
        PowerSample sample;
        sample.timestamp_us =
            static_cast<int64_t>(std::llround(static_cast<double>(trace.samples.size()) *
                                              interval_us));
        sample.power_mw = static_cast<double>(milliwatts);
        trace.samples.push_back(sample);
    }
    if (trace.samples.empty())
        throw ParseError("no \"CPU Power:\" lines found", line_no);
    trace.nominal_rate_hz = rate;
    return trace;
}

} // namespace

const char* rapl_domain_name(RaplDomain domain) {
    switch (domain) {
    case RaplDomain::PKG: return "PKG";
    case RaplDomain::PP0: return "PP0";
    case RaplDomain::PP1: return "PP1";
    case RaplDomain::DRAM: return "DRAM";
    }
    return "unknown";
}

std::optional<SamplerLogFormat> sampler_log_format_from_name(const std::string& name) {
    if (name == "generic-power-csv")
        return SamplerLogFormat::GenericPowerCsv;
    if (name == "generic-counter-csv")
        return SamplerLogFormat::GenericCounterCsv;
    if (name == "powermetrics-text")
        return SamplerLogFormat::PowermetricsText;
    return std::nullopt;
}

const char* sampler_log_format_name(SamplerLogFormat format) {
    switch (format) {
    case SamplerLogFormat::GenericPowerCsv: return "generic-power-csv";
    case SamplerLogFormat::GenericCounterCsv: return "generic-counter-csv";
    case SamplerLogFormat::PowermetricsText: return "powermetrics-text";
    }
    return "unknown";
}

uint64_t counter_delta(const CounterReading& prev, const CounterReading& curr) {
    const auto& a = prev.domain;
    const auto& b = curr.domain;
    if (a.domain != b.domain || a.energy_unit_uj != b.energy_unit_uj ||
        a.counter_width_bits != b.counter_width_bits)
        throw DomainMismatchError("counter readings from different domains");

    const uint64_t delta = curr.raw - prev.raw; // wraps mod 2^64
    if (a.counter_width_bits == 64)
        return delta;
    return delta & 0xFFFFFFFFull;
}

double raw_to_joules(uint64_t ticks, const RaplDomainSpec& spec) {
    return static_cast<double>(ticks) * spec.energy_unit_uj * 1e-6;
}

double wraparound_period(double power_watts, const RaplDomainSpec& spec) {
    if (power_watts <= 0.0)
        throw InvalidArgumentError("wraparound_period requires a positive power");
    const double range_joules =
        std::ldexp(1.0, spec.counter_width_bits) * spec.energy_unit_uj * 1e-6;
    return range_joules / power_watts;
}

double max_safe_polling_interval(double tdp_watts, const RaplDomainSpec& spec) {
    return wraparound_period(tdp_watts, spec) / 2.0;
}

CounterReading poll_live_counter(const std::string& counter_path,
                                 const RaplDomainSpec& spec) {
    const int fd = ::open(counter_path.c_str(), O_RDONLY);
    if (fd < 0) {
        const int err = errno;
        if (err == ENOENT || err == ENOTDIR)
            throw UnsupportedPlatformError("no energy counter at " + counter_path);
        if (err == EACCES || err == EPERM)
            throw PrivilegeError("cannot read " + counter_path +
                                 ": permission denied (root is typically required)");
        throw IoError("cannot open " + counter_path + ": " + std::strerror(err));
    }

    char buffer[64];
    const ssize_t n = ::read(fd, buffer, sizeof(buffer) - 1);
    const int read_err = errno;
    ::close(fd);
    if (n < 0) {
        if (read_err == EACCES || read_err == EPERM)
            throw PrivilegeError("cannot read " + counter_path + ": permission denied");
        throw IoError("cannot read " + counter_path + ": " + std::strerror(read_err));
    }
    buffer[n] = '\0';

    CounterReading reading;
    reading.domain = spec;
    char* end = nullptr;
    reading.raw = std::strtoull(buffer, &end, 10);
    if (end == buffer)
        throw IoError("counter file " + counter_path + " did not contain an integer");
    reading.timestamp_us = monotonic_now_us();
    return reading;
}

PowerTrace parse_sampler_log(std::istream& input, SamplerLogFormat format,
                             const ParseOptions& options) {
    switch (format) {
    case SamplerLogFormat::GenericPowerCsv: return parse_power_csv(input, options);
    case SamplerLogFormat::GenericCounterCsv: return parse_counter_csv(input, options);
    case SamplerLogFormat::PowermetricsText:
        return parse_powermetrics_text(input, options);
    }
    throw InvalidArgumentError("unknown sampler log format");
}

PowerTrace parse_sampler_log_file(const std::string& path, SamplerLogFormat format,
                                  const ParseOptions& options) {
    std::ifstream input(path);
    if (!input)
        throw IoError("cannot open " + path);
    PowerTrace trace = parse_sampler_log(input, format, options);
    trace.source_label = path;
    return trace;
}

void serialize_power_csv(const PowerTrace& trace, std::ostream& out) {
    out << "timestamp_us,power_mw\n";
    char buffer[64];
    for (const auto& sample : trace.samples) {
        auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), sample.power_mw,
                                       std::chars_format::fixed);
        out << sample.timestamp_us << ',' << std::string_view(buffer, ptr - buffer)
            << '\n';
    }
}

ReplaySource::ReplaySource(PowerTrace trace, double speed)
    : trace_(std::move(trace)), speed_(speed) {
    if (speed_ < 0.0)
        throw InvalidArgumentError("replay speed must be >= 0");
    if (!trace_.is_monotonic())
        throw MalformedTraceError("replay trace timestamps are not strictly increasing");
}

std::optional<PowerSample> ReplaySource::next() {
    if (position_ >= trace_.samples.size())
        return std::nullopt;
    const PowerSample sample = trace_.samples[position_];
    if (speed_ > 0.0) {
        if (position_ == 0) {
            emitted_at_us_ = monotonic_now_us();
        } else {
            const double delta_us = static_cast<double>(
                sample.timestamp_us - trace_.samples[position_ - 1].timestamp_us);
            emitted_at_us_ += static_cast<int64_t>(std::llround(delta_us / speed_));
            sleep_until_monotonic_us(emitted_at_us_);
        }
    }
    ++position_;
    return sample;
}

std::unique_ptr<ReplaySource> replay_trace(const std::string& path, double speed,
                                           SamplerLogFormat format,
                                           const ParseOptions& options) {
    return std::make_unique<ReplaySource>(parse_sampler_log_file(path, format, options),
                                          speed);
}

PowercapSource::PowercapSource(std::string counter_path, double rate_hz,
                               RaplDomainSpec spec)
    : counter_path_(std::move(counter_path)), rate_hz_(rate_hz), spec_(spec) {
    if (rate_hz_ <= 0.0)
        throw InvalidArgumentError("sampling rate must be positive");
    previous_ = poll_live_counter(counter_path_, spec_);
    anchor_us_ = previous_.timestamp_us;
}

std::optional<PowerSample> PowercapSource::next() {
    ++tick_;
    const int64_t target_us =
        anchor_us_ + static_cast<int64_t>(std::llround(static_cast<double>(tick_) * 1e6 /
                                                       rate_hz_));
    sleep_until_monotonic_us(target_us);

    const CounterReading current = poll_live_counter(counter_path_, spec_);
    const uint64_t ticks = counter_delta(previous_, current);
    const double joules = raw_to_joules(ticks, spec_);
    const double dt_us =
        static_cast<double>(current.timestamp_us - previous_.timestamp_us);
    previous_ = current;

    PowerSample sample;
    sample.timestamp_us = current.timestamp_us - anchor_us_;
    sample.power_mw = dt_us > 0.0 ? joules * 1e9 / dt_us : 0.0;
    return sample;
}

std::string discover_powercap_package_counter(const std::string& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw UnsupportedPlatformError("no powercap hierarchy at " + root);

    for (const auto& entry : fs::directory_iterator(root, ec)) {
        const fs::path name_path = entry.path() / "name";
        std::ifstream name_file(name_path);
        if (!name_file)
            continue;
        std::string name;
        std::getline(name_file, name);
        if (name.rfind("package", 0) == 0) {
            const fs::path counter = entry.path() / "energy_uj";
            if (fs::exists(counter, ec))
                return counter.string();
        }
    }
    throw UnsupportedPlatformError("no package-domain energy counter under " + root);
}

} // namespace jouletrace
