#include "paircorr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "paircorr/analysis_csv.hpp"
#include "paircorr/coincidence.hpp"
#include "paircorr/config.hpp"
#include "paircorr/event_model.hpp"
#include "paircorr/larmor_model.hpp"
#include "paircorr/pair_sim.hpp"
#include "paircorr/text_format.hpp"

#ifndef PAIRCORR_VERSION
#    define PAIRCORR_VERSION "0.0.0"
#endif

namespace paircorr::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Failure {
    int code;
    std::string message;
    std::string key;
};

void report_error(std::ostream& err, Failure const& f)
{
    json j = {{"error", f.message}, {"code", f.code}};
    if (!f.key.empty())
        j["key"] = f.key;
    err << j.dump() << '\n';
}

void warn(std::ostream& err, bool quiet, std::string const& message)
{
    if (!quiet)
        err << json{{"warning", message}}.dump() << '\n';
}

// Maps exceptions from the library onto the exit-code contract.
int guarded(std::ostream& err, std::function<int()> const& body)
{
    Failure f{usage_error, {}, {}};
    try {
        return body();
    } catch (ConfigError const& e) {
        f = {usage_error, e.what(), e.key()};
    } catch (IoError const& e) {
        f = {io_error, e.what(), {}};
    } catch (std::exception const& e) {
        f = {usage_error, e.what(), {}};
    }
    report_error(err, f);
    return f.code;
}

std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

std::ofstream open_out(std::string const& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open '" + path + "' for writing");
    return os;
}

void finish(std::ofstream& os, std::string const& path)
{
    os.flush();
    if (!os)
        throw IoError("failed writing '" + path + "'");
}

struct Manifest {
    explicit Manifest(std::string sub) : subcommand(std::move(sub)) {}

    std::string subcommand;
    std::string config_hash;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    Clock::time_point started = Clock::now();

    void write(std::string const& path) const
    {
        json j;
        j["tool_version"] = PAIRCORR_VERSION;
        j["subcommand"] = subcommand;
        j["config_hash"] = config_hash;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["wall_clock_seconds"] =
            std::chrono::duration<double>(Clock::now() - started).count();
        auto os = open_out(path);
        os << j.dump(2) << '\n';
        finish(os, path);
    }
};

SimConfig resolve_config(std::string const& path, std::vector<std::string> const& overrides)
{
    FlatConfig flat = path.empty() ? FlatConfig{} : load_flat_config(path);
    for (auto const& o : overrides)
        apply_override(flat, o);
    return build_sim_config(flat);
}

std::string read_file(std::string const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Numeric CSV with a header row; returns rows of doubles.
std::vector<std::vector<double>> read_numeric_csv(std::string const& path, std::size_t columns)
{
    std::istringstream is(read_file(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    if (!std::getline(is, line))
        throw ParseError(0, path + ": empty CSV");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            auto v = parse_double(trim(cell));
            if (!v)
                throw ParseError(lineno, path + ": not a number '" + cell + "'");
            row.push_back(*v);
        }
        if (row.size() < columns)
            throw ParseError(lineno, path + ": expected " + std::to_string(columns) + " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<double> parse_sweep(std::string const& spec)
{
    auto c1 = spec.find(':');
    auto c2 = c1 == std::string::npos ? c1 : spec.find(':', c1 + 1);
    if (c2 == std::string::npos)
        throw std::invalid_argument("sweep must be 'start:stop:step', got '" + spec + "'");
    auto start = parse_double(spec.substr(0, c1));
    auto stop = parse_double(spec.substr(c1 + 1, c2 - c1 - 1));
    auto step = parse_double(spec.substr(c2 + 1));
    if (!start || !stop || !step)
        throw std::invalid_argument("sweep must be 'start:stop:step', got '" + spec + "'");
    if (!(*step > 0))
        throw std::invalid_argument("sweep step must be > 0");
    if (*stop < *start)
        throw std::invalid_argument("sweep stop must be >= start");
    std::vector<double> out;
    for (std::size_t i = 0;; ++i) {
        double x = *start + static_cast<double>(i) * *step;
        if (x > *stop + 1e-9 * *step)
            break;
        out.push_back(x);
    }
    return out;
}

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

int cmd_simulate(SimulateOptions const& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Manifest manifest("simulate");
        SimConfig config = resolve_config(opts.config_path, opts.overrides);
        if (opts.seed)
            config.seed = *opts.seed;
        manifest.config_hash = config_hash(config);
        manifest.seed = config.seed;
        manifest.inputs = {opts.config_path};

        EventRecord record = simulate(config, opts.workers);
        write_record_file(record, opts.out_path);
        manifest.outputs = {opts.out_path};
        manifest.write(opts.out_path + ".manifest.json");
        if (!opts.quiet) {
            out << "simulated " << record.trial_count() << " trials, " << record.events().size()
                << " events -> " << opts.out_path << '\n';
        }
        return int(ok);
    });
}

//---------------------------------------------------------------------------//
// analyze
//---------------------------------------------------------------------------//

int cmd_analyze(AnalyzeOptions const& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Manifest manifest("analyze");
        manifest.inputs = {opts.events_path};
        auto loaded = read_record_file(opts.events_path);
        EventRecord const& record = loaded.record;
        if (loaded.resorted)
            warn(err, opts.quiet, "events were out of order and have been sorted");
        if (record.events().empty())
            warn(err, opts.quiet, "record contains no events");

        auto const& sched = record.schedule();
        BinningSpec binning{opts.tau_ns, 0.0, sched.window_ns};
        {
            std::ostringstream params;
            params << "tau_ns=" << format_shortest(opts.tau_ns) << ";surface=" << opts.surface
                   << ";autos=" << opts.autos << ";accidentals=" << opts.accidentals
                   << ";g12=" << opts.g12 << ";ridge=" << opts.ridge << ";all_pairs=" << opts.all_pairs
                   << ";record=" << fnv1a_hex(read_file(opts.events_path));
            manifest.config_hash = fnv1a_hex(params.str());
        }
        if (auto it = record.metadata().find("seed"); it != record.metadata().end()) {
            if (auto s = parse_uint(it->second))
                manifest.seed = *s;
        }

        auto product = [&](std::string const& suffix, auto&& writer) {
            std::string path = opts.out_prefix + suffix;
            auto os = open_out(path);
            writer(os);
            finish(os, path);
            manifest.outputs.push_back(path);
        };

        auto cross = cross_histogram(record, binning, opts.workers);
        if (cross.axis1().truncated)
            warn(err, opts.quiet, "window is not a whole number of bins; last partial bin dropped");
        product("_cross.csv", [&](std::ostream& os) { write_histogram_csv(cross, os); });

        if (opts.autos || opts.surface) {
            auto auto1 = auto_histogram(record, binning, Field::Field1, opts.workers);
            auto auto2 = auto_histogram(record, binning, Field::Field2, opts.workers);
            if (opts.autos) {
                product("_auto1.csv", [&](std::ostream& os) { write_histogram_csv(auto1, os); });
                product("_auto2.csv", [&](std::ostream& os) { write_histogram_csv(auto2, os); });
            }
            if (opts.surface) {
                auto surface = ratio_surface(cross, auto1, auto2);
                product("_R.csv", [&](std::ostream& os) { write_ratio_csv(surface, os); });
                if (!opts.quiet) {
                    if (auto peak = max_ratio(surface)) {
                        out << "max R = " << format_sig6(peak->r) << " +/- "
                            << format_sig6(peak->sigma_r) << " at (t1, t2) = ("
                            << format_sig6(surface.axis1.label_ns(peak->b1)) << ", "
                            << format_sig6(surface.axis2.label_ns(peak->b2)) << ") ns\n";
                    } else {
                        out << "max R undefined: no bin has nonzero cross and auto counts\n";
                    }
                }
            }
        }

        if (opts.accidentals) {
            auto pairing = opts.all_pairs ? Pairing::AllPairs : Pairing::Adjacent;
            std::optional<CoincidenceHistogram> acc;
            try {
                acc = accidental_histogram(record, binning, pairing, opts.workers);
            } catch (InsufficientTrials const& e) {
                warn(err, opts.quiet, e.what());
                acc.emplace(HistogramKind::Accidental12, cross.axis1(), cross.axis2(), 0);
            }
            product("_accidental.csv", [&](std::ostream& os) { write_histogram_csv(*acc, os); });
        }

        if (opts.g12) {
            G12Estimate est;
            try {
                est = g12_integrated(record);
            } catch (std::invalid_argument const& e) {
                warn(err, opts.quiet, std::string("g12: ") + e.what());
            }
            product("_g12.csv", [&](std::ostream& os) { write_g12_csv(sched.delta_t_ns, est, os); });
            if (!opts.quiet && est.trials)
                out << "g12 = " << format_sig6(est.g12) << " +/- " << format_sig6(est.sigma) << '\n';
        }

        if (opts.ridge) {
            auto ridge = ridge_profile(cross);
            product("_ridge.csv", [&](std::ostream& os) { write_ridge_csv(ridge, os); });
        }

        manifest.write(opts.out_prefix + "_manifest.json");
        return int(ok);
    });
}

//---------------------------------------------------------------------------//
// predict
//---------------------------------------------------------------------------//

int cmd_predict(PredictOptions const& opts, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Manifest manifest("predict");
        auto sweep = parse_sweep(opts.dt_spec);
        if (!(opts.scale >= 0) || !std::isfinite(opts.scale))
            throw std::invalid_argument("scale must be finite and >= 0");
        SimConfig config = resolve_config(opts.config_path, opts.overrides);
        CoherenceModel model = config.coherence;
        if (opts.polarized) {
            model = CoherenceModel(ZeemanScheme::clock_polarized(), model.field(),
                                   model.residual_decay_time_ns());
        }
        manifest.config_hash = fnv1a_hex(canonical_text(config) + "dt=" + opts.dt_spec
                                         + ";polarized=" + std::to_string(opts.polarized)
                                         + ";scale=" + format_shortest(opts.scale));
        if (!opts.config_path.empty())
            manifest.inputs = {opts.config_path};

        auto curve = predict_g12(model, config.kinetics, config.schedule, sweep, opts.scale);
        auto os = open_out(opts.out_path);
        write_prediction_csv(curve, os);
        finish(os, opts.out_path);
        manifest.outputs = {opts.out_path};
        manifest.write(opts.out_path + ".manifest.json");

        if (!opts.quiet) {
            auto fit = fit_decoherence_time(curve, 1.0);
            out << "predicted " << curve.size() << " points ("
                << (opts.polarized ? "clock-polarized" : "unpolarized") << "), tau_d = "
                << (fit.determined() ? format_sig6(*fit.tau_d_ns) + " ns"
                                     : "not determined within " + format_sig6(fit.range_end_ns) + " ns")
                << '\n';
        }
        return int(ok);
    });
}

//---------------------------------------------------------------------------//
// report
//---------------------------------------------------------------------------//

int cmd_report(ReportOptions const& opts, std::ostream& out, std::ostream& err)
{
    namespace fs = std::filesystem;
    return guarded(err, [&] {
        Manifest manifest("report");
        std::vector<std::string> files;
        std::error_code ec;
        if (!fs::is_directory(opts.sweep_dir, ec))
            throw IoError("not a directory: '" + opts.sweep_dir + "'");
        for (auto const& entry : fs::directory_iterator(opts.sweep_dir)) {
            auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name.size() > 8
                && name.compare(name.size() - 8, 8, "_g12.csv") == 0)
                files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());

        std::vector<CurvePoint> measured;
        std::string digest;
        for (auto const& f : files) {
            for (auto const& row : read_numeric_csv(f, 2))
                measured.push_back({row[0], row[1]});
            digest += fnv1a_hex(read_file(f));
        }
        std::sort(measured.begin(), measured.end(),
                  [](auto const& a, auto const& b) { return a.x < b.x; });
        if (measured.size() < 3)
            throw std::invalid_argument("insufficient points: need at least 3 simulated g12 values");

        std::vector<CurvePoint> model;
        for (auto const& row : read_numeric_csv(opts.model_csv, 2))
            model.push_back({row[0], row[1]});
        std::sort(model.begin(), model.end(), [](auto const& a, auto const& b) { return a.x < b.x; });
        if (model.size() < 2)
            throw std::invalid_argument("insufficient points: model curve needs at least 2 rows");
        digest += fnv1a_hex(read_file(opts.model_csv));

        auto model_excess = [&](double x) {
            if (x < model.front().x || x > model.back().x)
                throw std::invalid_argument("measured delta_t " + format_sig6(x)
                                            + " ns outside the model curve");
            auto hi = std::lower_bound(model.begin(), model.end(), x,
                                       [](CurvePoint const& p, double v) { return p.x < v; });
            if (hi->x == x)
                return hi->value - 1;
            auto lo = hi - 1;
            double w = (x - lo->x) / (hi->x - lo->x);
            return (1 - w) * (lo->value - 1) + w * (hi->value - 1);
        };

        double smm = 0;
        double smy = 0;
        std::vector<double> m(measured.size());
        for (std::size_t i = 0; i < measured.size(); ++i) {
            m[i] = model_excess(measured[i].x);
            smm += m[i] * m[i];
            smy += m[i] * (measured[i].value - 1);
        }
        if (!(smm > 0))
            throw std::invalid_argument("degenerate fit: model excess is zero at every point");
        double const scale = smy / smm;
        double ss = 0;
        for (std::size_t i = 0; i < measured.size(); ++i) {
            double r = (measured[i].value - 1) - scale * m[i];
            ss += r * r;
        }
        double const residual = std::sqrt(ss / static_cast<double>(measured.size()));

        auto tau_json = [](DecoherenceFit const& f) {
            return f.determined() ? json(*f.tau_d_ns) : json(nullptr);
        };
        json report = {
            {"scale", scale},
            {"residual", residual},
            {"tau_d_measured", tau_json(fit_decoherence_time(measured, 1.0))},
            {"tau_d_model", tau_json(fit_decoherence_time(model, 1.0))},
            {"points", measured.size()},
        };
        auto os = open_out(opts.out_path);
        os << report.dump(2) << '\n';
        finish(os, opts.out_path);

        manifest.config_hash = fnv1a_hex(digest);
        manifest.inputs = files;
        manifest.inputs.push_back(opts.model_csv);
        manifest.outputs = {opts.out_path};
        manifest.write(opts.out_path + ".manifest.json");
        if (!opts.quiet)
            out << report.dump() << '\n';
        return int(ok);
    });
}

//---------------------------------------------------------------------------//
// Command line
//---------------------------------------------------------------------------//

int run(int argc, char const* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Photon-pair correlation simulator and analyzer"};
    app.set_version_flag("--version", PAIRCORR_VERSION);
    app.require_subcommand(1);

    bool quiet = false;
    unsigned workers = 1;
    std::optional<std::uint64_t> seed;
    app.add_flag("--quiet", quiet, "Suppress progress and warnings");
    app.add_option("--workers", workers, "Worker threads (outputs do not depend on this)")
        ->check(CLI::PositiveNumber);

    SimulateOptions sim;
    auto* s = app.add_subcommand("simulate", "Generate an event record from a config file");
    s->add_option("config", sim.config_path, "Configuration file")->required();
    s->add_option("-o,--out", sim.out_path, "Output event record")->required();
    s->add_option("--set", sim.overrides, "Override a config entry, section.key=value");
    s->add_option("--seed", seed, "RNG seed (overrides sim.seed)");

    AnalyzeOptions ana;
    bool want_surface = false, want_autos = false, want_acc = false, want_g12 = false,
         want_ridge = false;
    auto* a = app.add_subcommand("analyze", "Correlation estimators from an event record");
    a->add_option("events", ana.events_path, "Event record file")->required();
    a->add_option("--tau", ana.tau_ns, "Bin size in ns")->check(CLI::PositiveNumber);
    a->add_option("-o,--out-prefix", ana.out_prefix, "Prefix for CSV products")->required();
    a->add_flag("--surface", want_surface, "R surface (needs autos)");
    a->add_flag("--autos", want_autos, "Auto-correlation histograms");
    a->add_flag("--accidentals", want_acc, "Accidental (cross-trial) histogram");
    a->add_flag("--g12", want_g12, "Window-integrated g12");
    a->add_flag("--ridge", want_ridge, "Profile along t2 - t1");
    a->add_flag("--all-pairs", ana.all_pairs, "Accidentals over all trial pairs");

    PredictOptions pred;
    auto* p = app.add_subcommand("predict", "Model g12 curve versus write-read delay");
    p->add_option("config", pred.config_path, "Configuration file")->required();
    p->add_option("--dt", pred.dt_spec, "Delay sweep start:stop:step in ns");
    p->add_flag("--polarized", pred.polarized, "Clock-state (m_F = 0) polarized ensemble");
    p->add_option("--scale", pred.scale, "Overall scale of the pair probability");
    p->add_option("-o,--out", pred.out_path, "Output CSV")->required();
    p->add_option("--set", pred.overrides, "Override a config entry, section.key=value");

    ReportOptions rep;
    auto* r = app.add_subcommand("report", "Fit a model curve to a simulated g12 sweep");
    r->add_option("sweep_dir", rep.sweep_dir, "Directory of *_g12.csv files")->required();
    r->add_option("model_csv", rep.model_csv, "Output of 'predict'")->required();
    r->add_option("-o,--out", rep.out_path, "Output JSON report")->required();

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return ok;
    } catch (CLI::CallForVersion const&) {
        out << PAIRCORR_VERSION << '\n';
        return ok;
    } catch (CLI::ParseError const& e) {
        report_error(err, {usage_error, e.what(), {}});
        return usage_error;
    }

    if (s->parsed()) {
        sim.seed = seed;
        sim.workers = workers;
        sim.quiet = quiet;
        return cmd_simulate(sim, out, err);
    }
    if (a->parsed()) {
        if (want_surface || want_autos || want_acc || want_g12 || want_ridge) {
            ana.surface = want_surface;
            ana.autos = want_autos;
            ana.accidentals = want_acc;
            ana.g12 = want_g12;
            ana.ridge = want_ridge;
        }
        ana.workers = workers;
        ana.quiet = quiet;
        return cmd_analyze(ana, out, err);
    }
    if (p->parsed()) {
        pred.quiet = quiet;
        return cmd_predict(pred, out, err);
    }
    rep.quiet = quiet;
    return cmd_report(rep, out, err);
}

}  // namespace paircorr::cli
