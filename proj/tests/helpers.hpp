#pragma once

#include "jouletrace/trace.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#ifndef JOULETRACE_FIXTURE_DIR
#define JOULETRACE_FIXTURE_DIR "tests/fixtures"
#endif

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(JOULETRACE_FIXTURE_DIR) + "/" + name;
}

inline jouletrace::PowerTrace
make_trace(const std::vector<std::pair<int64_t, double>>& samples,
           double nominal_rate_hz = 10.0) {
    jouletrace::PowerTrace trace;
    trace.nominal_rate_hz = nominal_rate_hz;
    for (const auto& [t, p] : samples)
        trace.samples.push_back({t, p});
    return trace;
}

/// Uniformly spaced trace: `count` samples every `step_us` at the powers
/// produced by `power(i)`.
template <typename PowerFn>
jouletrace::PowerTrace make_uniform_trace(int count, int64_t step_us, PowerFn power,
                                          double nominal_rate_hz = 10.0) {
    jouletrace::PowerTrace trace;
    trace.nominal_rate_hz = nominal_rate_hz;
    for (int i = 0; i < count; ++i)
        trace.samples.push_back({static_cast<int64_t>(i) * step_us, power(i)});
    return trace;
}

/// Random strictly monotonic trace with irregular spacing.
inline jouletrace::PowerTrace random_trace(std::mt19937& rng, int min_samples = 2,
                                           int max_samples = 60) {
    std::uniform_int_distribution<int> size_dist(min_samples, max_samples);
    std::uniform_int_distribution<int64_t> gap_dist(1, 200000);
    std::uniform_real_distribution<double> power_dist(0.0, 20000.0);

    jouletrace::PowerTrace trace;
    trace.nominal_rate_hz = 10.0;
    const int n = size_dist(rng);
    int64_t t = gap_dist(rng);
    for (int i = 0; i < n; ++i) {
        trace.samples.push_back({t, power_dist(rng)});
        t += gap_dist(rng);
    }
    return trace;
}

/// Self-deleting temporary file seeded with `content`.
class TempFile {
public:
    explicit TempFile(const std::string& content, const std::string& suffix = "") {
        std::string pattern = "/tmp/jouletrace_test_XXXXXX" + suffix;
        std::vector<char> buffer(pattern.begin(), pattern.end());
        buffer.push_back('\0');
        const int fd = ::mkstemps(buffer.data(), static_cast<int>(suffix.size()));
        if (fd < 0)
            throw std::runtime_error("mkstemps failed");
        path_ = buffer.data();
        ::close(fd);
        std::ofstream out(path_, std::ios::binary);
        out << content;
    }
    ~TempFile() { ::unlink(path_.c_str()); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Self-deleting temporary directory.
class TempDir {
public:
    TempDir() {
        char pattern[] = "/tmp/jouletrace_test_dir_XXXXXX";
        if (::mkdtemp(pattern) == nullptr)
            throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir() {
        const std::string command = "rm -rf '" + path_ + "'";
        [[maybe_unused]] const int rc = std::system(command.c_str());
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }

    std::string write(const std::string& name, const std::string& content) const {
        const std::string full = path_ + "/" + name;
        std::ofstream out(full, std::ios::binary);
        out << content;
        return full;
    }

private:
    std::string path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    return content;
}

struct CommandResult {
    int exit_code = -1;
    std::string output; ///< stdout and stderr combined
};

/// Runs a shell command, capturing combined output and the exit code.
inline CommandResult run_command(const std::string& command) {
    CommandResult result;
    FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
    if (!pipe)
        return result;
    char buffer[4096];
    std::size_t n;
    while ((n = ::fread(buffer, 1, sizeof(buffer), pipe)) > 0)
        result.output.append(buffer, n);
    const int status = ::pclose(pipe);
    if (status >= 0 && WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (status >= 0 && WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

inline std::string shell_quote(const std::string& arg) {
    std::string quoted = "'";
    for (const char c : arg) {
        if (c == '\'')
            quoted += "'\\''";
        else
            quoted += c;
    }
    quoted += "'";
    return quoted;
}

} // namespace testutil
