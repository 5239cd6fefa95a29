#include "paircorr/event_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "paircorr/text_format.hpp"

namespace paircorr {

namespace {

constexpr std::array<std::string_view, 4> channel_names = {"1A", "1B", "2A", "2B"};

constexpr std::array<std::string_view, 7> header_keys = {
    "format_version", "trials", "delta_t_ns", "write_duration_ns",
    "read_duration_ns", "window_ns", "t2_axis"};

std::string describe(DetectionEvent const& ev)
{
    std::ostringstream os;
    os << ev.trial << '\t' << to_string(ev.channel) << '\t' << format_shortest(ev.time_ns());
    return os.str();
}

}  // namespace

std::string_view to_string(DetectorChannel ch)
{
    return channel_names[2 * static_cast<int>(ch.field) + static_cast<int>(ch.arm)];
}

DetectorChannel parse_channel(std::string_view token)
{
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (token == channel_names[i])
            return {static_cast<Field>(i / 2), static_cast<Arm>(i % 2)};
    }
    throw ParseError(0, "unknown channel '" + std::string(token) + "'");
}

TimePs ps_from_ns(double ns) { return static_cast<TimePs>(std::llround(ns * 1000.0)); }

bool event_less(DetectionEvent const& a, DetectionEvent const& b)
{
    return std::tuple(a.trial, a.channel.field, a.time_ps, a.channel.arm)
           < std::tuple(b.trial, b.channel.field, b.time_ps, b.channel.arm);
}

void TrialSchedule::validate() const
{
    auto require = [](bool ok, char const* what) {
        if (!ok)
            throw std::invalid_argument(what);
    };
    require(std::isfinite(delta_t_ns) && delta_t_ns >= 0, "schedule.delta_t_ns must be >= 0");
    require(std::isfinite(write_duration_ns) && write_duration_ns > 0,
            "schedule.write_duration_ns must be > 0");
    require(std::isfinite(read_duration_ns) && read_duration_ns > 0,
            "schedule.read_duration_ns must be > 0");
    require(std::isfinite(window_ns) && window_ns > 0, "schedule.window_ns must be > 0");
    require(window_ns >= write_duration_ns, "schedule.window_ns must be >= write_duration_ns");
}

ParseError::ParseError(std::size_t line, std::string const& what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
{
}

ValidationError::ValidationError(std::string const& what, std::vector<DetectionEvent> offending)
    : std::runtime_error(what), offending_(std::move(offending))
{
}

EventRecord::EventRecord(TrialSchedule schedule, Metadata metadata,
                         std::vector<DetectionEvent> events)
    : schedule_(schedule), metadata_(std::move(metadata)), events_(std::move(events))
{
    schedule_.validate();
    if (!std::is_sorted(events_.begin(), events_.end(), event_less))
        std::stable_sort(events_.begin(), events_.end(), event_less);

    TimePs const window = ps_from_ns(schedule_.window_ns);
    std::vector<DetectionEvent> bad;
    for (auto const& ev : events_) {
        if (ev.trial >= schedule_.trial_count || ev.time_ps < 0 || ev.time_ps >= window)
            bad.push_back(ev);
    }
    if (!bad.empty()) {
        std::string msg = std::to_string(bad.size()) + " event(s) outside window or trial range:";
        std::size_t shown = 0;
        for (auto const& ev : bad) {
            if (shown++ == 10) {
                msg += " ...";
                break;
            }
            msg += " [" + describe(ev) + "]";
        }
        throw ValidationError(msg, std::move(bad));
    }
}

bool is_reserved_header_key(std::string_view key)
{
    return std::find(header_keys.begin(), header_keys.end(), key) != header_keys.end();
}

void write_record(EventRecord const& record, std::ostream& os)
{
    auto const& s = record.schedule();
    os << "# format_version=1\n"
       << "# trials=" << s.trial_count << '\n'
       << "# delta_t_ns=" << format_shortest(s.delta_t_ns) << '\n'
       << "# write_duration_ns=" << format_shortest(s.write_duration_ns) << '\n'
       << "# read_duration_ns=" << format_shortest(s.read_duration_ns) << '\n'
       << "# window_ns=" << format_shortest(s.window_ns) << '\n'
       << "# t2_axis=window_relative\n";
    for (auto const& [key, value] : record.metadata()) {
        if (key.empty() || key.find_first_of("= \t\n") != std::string::npos
            || is_reserved_header_key(key) || value.find('\n') != std::string::npos)
            throw std::invalid_argument("metadata entry not representable: '" + key + "'");
        os << "# " << key << '=' << value << '\n';
    }

    std::array<char, 8> frac{};
    for (auto const& ev : record.events()) {
        // exactly three decimals from integer picoseconds
        std::snprintf(frac.data(), frac.size(), "%03lld",
                      static_cast<long long>(ev.time_ps % 1000));
        os << ev.trial << '\t' << to_string(ev.channel) << '\t' << ev.time_ps / 1000 << '.'
           << frac.data() << '\n';
    }
    if (!os)
        throw IoError("failed writing event record");
}

void write_record_file(EventRecord const& record, std::string const& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("cannot open '" + path + "' for writing");
    write_record(record, os);
    os.flush();
    if (!os)
        throw IoError("failed writing '" + path + "'");
}

LoadedRecord read_record(std::istream& is)
{
    std::map<std::string, std::string> header;
    EventRecord::Metadata metadata;
    std::vector<DetectionEvent> events;
    bool in_events = false;
    bool resorted = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            throw ParseError(lineno, "CR line ending; expected LF");
        if (line.empty())
            throw ParseError(lineno, "empty line");

        if (line[0] == '#') {
            if (in_events)
                throw ParseError(lineno, "header line after event lines");
            if (line.size() < 2 || line[1] != ' ')
                throw ParseError(lineno, "header must start with '# '");
            auto body = std::string_view(line).substr(2);
            auto eq = body.find('=');
            if (eq == std::string_view::npos || eq == 0)
                throw ParseError(lineno, "header must be '# key=value'");
            std::string key(body.substr(0, eq));
            std::string value(body.substr(eq + 1));
            if (key.find_first_of(" \t") != std::string::npos)
                throw ParseError(lineno, "whitespace in header key");
            auto& target = is_reserved_header_key(key) ? header : metadata;
            if (!target.emplace(key, value).second)
                throw ParseError(lineno, "duplicate header key '" + key + "'");
            continue;
        }

        in_events = true;
        std::string_view rest(line);
        std::array<std::string_view, 3> cols;
        for (std::size_t c = 0; c < 3; ++c) {
            auto tab = rest.find('\t');
            if (c < 2) {
                if (tab == std::string_view::npos)
                    throw ParseError(lineno, "malformed event line (expected 3 tab-separated fields)");
                cols[c] = rest.substr(0, tab);
                rest.remove_prefix(tab + 1);
            } else {
                if (tab != std::string_view::npos)
                    throw ParseError(lineno, "malformed event line (expected 3 tab-separated fields)");
                cols[c] = rest;
            }
        }
        auto trial = parse_uint(cols[0]);
        if (!trial)
            throw ParseError(lineno, "malformed trial index '" + std::string(cols[0]) + "'");
        DetectorChannel ch;
        try {
            ch = parse_channel(cols[1]);
        } catch (ParseError const& e) {
            throw ParseError(lineno, e.what());
        }
        auto t = parse_double(cols[2]);
        if (!t)
            throw ParseError(lineno, "malformed time '" + std::string(cols[2]) + "'");
        DetectionEvent ev{*trial, ch, ps_from_ns(*t)};
        if (!events.empty() && event_less(ev, events.back()))
            resorted = true;
        events.push_back(ev);
    }
    if (is.bad())
        throw IoError("failed reading event record");

    auto need = [&](char const* key) -> std::string const& {
        auto it = header.find(key);
        if (it == header.end())
            throw ParseError(0, std::string("missing header key '") + key + "'");
        return it->second;
    };
    auto need_double = [&](char const* key) {
        auto v = parse_double(need(key));
        if (!v)
            throw ParseError(0, std::string("header '") + key + "' is not a number");
        return *v;
    };

    if (need("format_version") != "1")
        throw ParseError(0, "unsupported format_version '" + need("format_version") + "'");
    if (need("t2_axis") != "window_relative")
        throw ParseError(0, "unsupported t2_axis '" + need("t2_axis") + "'");
    TrialSchedule schedule;
    auto trials = parse_uint(need("trials"));
    if (!trials)
        throw ParseError(0, "header 'trials' is not a non-negative integer");
    schedule.trial_count = *trials;
    schedule.delta_t_ns = need_double("delta_t_ns");
    schedule.write_duration_ns = need_double("write_duration_ns");
    schedule.read_duration_ns = need_double("read_duration_ns");
    schedule.window_ns = need_double("window_ns");
    try {
        schedule.validate();
    } catch (std::invalid_argument const& e) {
        throw ParseError(0, e.what());
    }

    return {EventRecord(schedule, std::move(metadata), std::move(events)), resorted};
}

LoadedRecord read_record_file(std::string const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open '" + path + "' for reading");
    return read_record(is);
}

}  // namespace paircorr
