#include "paircorr/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <vector>

#include "paircorr/text_format.hpp"

namespace paircorr {

namespace {

constexpr std::array<std::string_view, 23> known_keys = {
    "schedule.delta_t_ns",       "schedule.write_duration_ns", "schedule.read_duration_ns",
    "schedule.window_ns",        "schedule.trials",            "kinetics.delta0_ns",
    "kinetics.retrieval_peak_ns", "kinetics.retrieval_fwhm_ns", "rates.p_pair",
    "rates.p1_uncorr",           "rates.p2_uncorr",            "rates.dark_per_window",
    "rates.eta1",                "rates.eta2",                 "coherence.k_hz",
    "coherence.polarization",    "coherence.residual_decay_ns", "coherence.g_a",
    "coherence.g_b",             "coherence.g_ref",            "coherence.weights",
    "sim.seed",                  "sim.dead_time_ns"};

bool is_known(std::string_view key)
{
    return std::find(known_keys.begin(), known_keys.end(), key) != known_keys.end();
}

std::pair<std::string, std::string> split_assignment(std::string_view line, std::string_view what)
{
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("", std::string(what) + ": expected 'section.key = value'");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty())
        throw ConfigError("", std::string(what) + ": empty key");
    if (!is_known(key))
        throw ConfigError(key, "unknown configuration key");
    if (value.empty())
        throw ConfigError(key, "empty value");
    return {key, value};
}

class Reader {
  public:
    explicit Reader(FlatConfig const& c) : c_(c) {}

    std::string const* raw(std::string const& key) const
    {
        auto it = c_.entries.find(key);
        return it == c_.entries.end() ? nullptr : &it->second;
    }

    void number(std::string const& key, double& out) const
    {
        if (auto v = raw(key)) {
            auto d = parse_double(*v);
            if (!d)
                throw ConfigError(key, "expected a plain number (no units), got '" + *v + "'");
            out = *d;
        }
    }

    template<class T>
    void integer(std::string const& key, T& out) const
    {
        if (auto v = raw(key)) {
            auto u = parse_uint(*v);
            if (!u)
                throw ConfigError(key, "expected a non-negative integer, got '" + *v + "'");
            out = static_cast<T>(*u);
        }
    }

  private:
    FlatConfig const& c_;
};

std::map<ZeemanChannel, double> parse_weights(std::string const& text)
{
    std::map<ZeemanChannel, double> weights;
    double total = 0;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto parts = std::string(trim(item));
        auto c1 = parts.find(':');
        auto c2 = c1 == std::string::npos ? c1 : parts.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw ConfigError("coherence.weights", "expected 'm_a:m_b:w' entries, got '" + parts + "'");
        auto ma = parse_int(parts.substr(0, c1));
        auto mb = parse_int(parts.substr(c1 + 1, c2 - c1 - 1));
        auto w = parse_double(parts.substr(c2 + 1));
        if (!ma || !mb || !w || *w < 0)
            throw ConfigError("coherence.weights", "malformed entry '" + parts + "'");
        weights[{static_cast<int>(*ma), static_cast<int>(*mb)}] += *w;
        total += *w;
    }
    if (!(total > 0))
        throw ConfigError("coherence.weights", "weights must have a positive sum");
    // already-normalized input (e.g. canonical text) is kept bit-exact
    if (std::abs(total - 1.0) > 1e-12) {
        for (auto& [ch, w] : weights)
            w /= total;
    }
    return weights;
}

}  // namespace

ConfigError::ConfigError(std::string key, std::string const& what)
    : std::runtime_error(key.empty() || what.starts_with(key) ? what : key + ": " + what),
      key_(std::move(key))
{
}

FlatConfig parse_flat_config(std::istream& is)
{
    FlatConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto body = trim(line);
        if (body.empty() || body.front() == '#')
            continue;
        auto [key, value] = split_assignment(body, "line " + std::to_string(lineno));
        if (!config.entries.emplace(key, value).second)
            throw ConfigError(key, "duplicate key on line " + std::to_string(lineno));
    }
    return config;
}

FlatConfig load_flat_config(std::string const& path)
{
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open config '" + path + "'");
    return parse_flat_config(is);
}

void apply_override(FlatConfig& config, std::string_view assignment)
{
    auto [key, value] = split_assignment(assignment, "override '" + std::string(assignment) + "'");
    config.entries[key] = value;
}

SimConfig build_sim_config(FlatConfig const& flat)
{
    Reader in(flat);
    SimConfig c;

    in.number("schedule.delta_t_ns", c.schedule.delta_t_ns);
    in.number("schedule.write_duration_ns", c.schedule.write_duration_ns);
    in.number("schedule.read_duration_ns", c.schedule.read_duration_ns);
    in.number("schedule.window_ns", c.schedule.window_ns);
    in.integer("schedule.trials", c.schedule.trial_count);
    in.number("kinetics.delta0_ns", c.kinetics.delta0_ns);
    in.number("kinetics.retrieval_peak_ns", c.kinetics.retrieval_peak_ns);
    in.number("kinetics.retrieval_fwhm_ns", c.kinetics.retrieval_fwhm_ns);
    in.number("rates.p_pair", c.rates.p_pair);
    in.number("rates.p1_uncorr", c.rates.p1_uncorr);
    in.number("rates.p2_uncorr", c.rates.p2_uncorr);
    in.number("rates.dark_per_window", c.rates.dark_per_window);
    in.number("rates.eta1", c.rates.eta1);
    in.number("rates.eta2", c.rates.eta2);
    in.integer("sim.seed", c.seed);
    in.number("sim.dead_time_ns", c.dead_time_ns);

    FieldInhomogeneity field;
    in.number("coherence.k_hz", field.k_hz);

    ZeemanScheme scheme = ZeemanScheme::unpolarized();
    if (auto pol = in.raw("coherence.polarization")) {
        if (*pol == "clock") {
            scheme = ZeemanScheme::clock_polarized();
        } else if (*pol != "unpolarized") {
            throw ConfigError("coherence.polarization", "expected 'unpolarized' or 'clock', got '" + *pol + "'");
        }
    }
    in.number("coherence.g_a", scheme.g_a);
    in.number("coherence.g_b", scheme.g_b);
    in.number("coherence.g_ref", scheme.g_ref);
    if (auto w = in.raw("coherence.weights")) {
        if (scheme.polarization == Polarization::ClockPolarized)
            throw ConfigError("coherence.weights", "custom weights conflict with clock polarization");
        scheme.weights = parse_weights(*w);
    }

    std::optional<double> residual;
    if (auto r = in.raw("coherence.residual_decay_ns"); r && *r != "off") {
        double v = 0;
        in.number("coherence.residual_decay_ns", v);
        residual = v;
    }

    // validation messages lead with the dotted key they concern
    auto section_of = [](std::string const& msg) -> std::string {
        auto word = msg.substr(0, msg.find_first_of(" :"));
        return word.find('.') != std::string::npos ? word : "coherence";
    };
    try {
        c.coherence = CoherenceModel(scheme, field, residual);
        c.validate();
    } catch (std::invalid_argument const& e) {
        throw ConfigError(section_of(e.what()), e.what());
    }
    return c;
}

FlatConfig default_flat_config()
{
    FlatConfig flat;
    std::istringstream is(canonical_text(SimConfig{}));
    return parse_flat_config(is);
}

std::string canonical_text(SimConfig const& c)
{
    std::vector<std::pair<std::string, std::string>> kv;
    auto num = [&](char const* key, double v) { kv.emplace_back(key, format_shortest(v)); };
    num("schedule.delta_t_ns", c.schedule.delta_t_ns);
    num("schedule.write_duration_ns", c.schedule.write_duration_ns);
    num("schedule.read_duration_ns", c.schedule.read_duration_ns);
    num("schedule.window_ns", c.schedule.window_ns);
    kv.emplace_back("schedule.trials", std::to_string(c.schedule.trial_count));
    num("kinetics.delta0_ns", c.kinetics.delta0_ns);
    num("kinetics.retrieval_peak_ns", c.kinetics.retrieval_peak_ns);
    num("kinetics.retrieval_fwhm_ns", c.kinetics.retrieval_fwhm_ns);
    num("rates.p_pair", c.rates.p_pair);
    num("rates.p1_uncorr", c.rates.p1_uncorr);
    num("rates.p2_uncorr", c.rates.p2_uncorr);
    num("rates.dark_per_window", c.rates.dark_per_window);
    num("rates.eta1", c.rates.eta1);
    num("rates.eta2", c.rates.eta2);
    auto const& scheme = c.coherence.scheme();
    num("coherence.k_hz", c.coherence.field().k_hz);
    kv.emplace_back("coherence.polarization",
                    scheme.polarization == Polarization::ClockPolarized ? "clock" : "unpolarized");
    auto res = c.coherence.residual_decay_time_ns();
    kv.emplace_back("coherence.residual_decay_ns", res ? format_shortest(*res) : "off");
    num("coherence.g_a", scheme.g_a);
    num("coherence.g_b", scheme.g_b);
    num("coherence.g_ref", scheme.g_ref);
    if (scheme.polarization != Polarization::ClockPolarized) {
        std::string w;
        for (auto const& [ch, weight] : scheme.weights) {
            if (!w.empty())
                w += ',';
            w += std::to_string(ch.first) + ':' + std::to_string(ch.second) + ':'
                 + format_shortest(weight);
        }
        kv.emplace_back("coherence.weights", w);
    }
    kv.emplace_back("sim.seed", std::to_string(c.seed));
    num("sim.dead_time_ns", c.dead_time_ns);
    std::sort(kv.begin(), kv.end());

    std::string out;
    for (auto const& [k, v] : kv)
        out += k + " = " + v + "\n";
    return out;
}

std::string config_hash(SimConfig const& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_text(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf.data(), 16);
}

}  // namespace paircorr
