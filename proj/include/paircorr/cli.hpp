#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace paircorr::cli {

enum ExitCode : int { ok = 0, usage_error = 2, io_error = 3 };

struct SimulateOptions {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;  // "section.key=value"
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    bool quiet = false;
};

struct AnalyzeOptions {
    std::string events_path;
    double tau_ns = 4.0;
    std::string out_prefix;
    bool surface = true;
    bool autos = true;
    bool accidentals = true;
    bool g12 = true;
    bool ridge = true;
    bool all_pairs = false;  // accidental pairing
    unsigned workers = 1;
    bool quiet = false;
};

struct PredictOptions {
    std::string config_path;
    std::string dt_spec = "0:400:10";
    bool polarized = false;
    double scale = 1.0;
    std::string out_path;
    std::vector<std::string> overrides;
    bool quiet = false;
};

struct ReportOptions {
    std::string sweep_dir;
    std::string model_csv;
    std::string out_path;
    bool quiet = false;
};

// Each command writes its products plus a "<output>.manifest.json" sidecar.
// Diagnostics go to err as single-line JSON; the return value is an ExitCode.
int cmd_simulate(SimulateOptions const& opts, std::ostream& out, std::ostream& err);
int cmd_analyze(AnalyzeOptions const& opts, std::ostream& out, std::ostream& err);
int cmd_predict(PredictOptions const& opts, std::ostream& out, std::ostream& err);
int cmd_report(ReportOptions const& opts, std::ostream& out, std::ostream& err);

// Parses "start:stop:step" (stop inclusive). Throws std::invalid_argument.
std::vector<double> parse_sweep(std::string const& spec);

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err);

}  // namespace paircorr::cli
