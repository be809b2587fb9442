#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "propcal/flow_statistics.hpp"
#include "propcal/kernel_calibration.hpp"
#include "propcal/trade_tape.hpp"

namespace propcal::cli {

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_validation = 3, exit_computation = 4, exit_io = 5 };

struct RunConfig {
    std::string subcommand;
    std::vector<std::string> inputs;
    TapeFormat format = TapeFormat::csv;
    std::vector<std::string> tags;  // empty: every tag found in the inputs, sorted
    std::string focal_tag;
    std::size_t max_lag = 1000;
    std::size_t kernel_lag = 256;
    Normalization normalization = Normalization::session_scaled;
    PoolMode pool = PoolMode::equal;
    double ridge = 0.0;
    double herding_scale = 1.0;
    DressingPath dressing = DressingPath::full;
    std::size_t replicas = 200;
    std::pair<double, double> quantiles{0.16, 0.84};
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::string out = ".";
    std::optional<LagWindow> fit_window;
    std::string synth_config;  // simulate
    std::size_t symbols = 1;   // simulate
};

/// Parses argv (without the program name). Throws ValidationError on bad
/// values; CLI parse failures are reported by run() as usage errors.
RunConfig parse_run_config(const std::vector<std::string>& args);

/// Checks every precondition that does not need the input data.
void validate(const RunConfig& config);

/// Runs one subcommand. Artifacts are written only when the whole computation
/// succeeded, each through a temporary file renamed into place; manifest.json
/// comes last. Errors are reported as a JSON object on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace propcal::cli
