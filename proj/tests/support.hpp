#pragma once

// Random records and brute-force reference estimators shared by the tests.
// The oracles deliberately work from raw event pairs, not occupancy lists.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "paircorr/coincidence.hpp"
#include "paircorr/event_model.hpp"

namespace paircorr::testing {

inline EventRecord random_record(std::mt19937_64& rng, std::uint64_t max_trials = 50,
                                 double window_ns = 200.0, double delta_t_ns = 50.0)
{
    TrialSchedule s;
    s.window_ns = window_ns;
    s.write_duration_ns = std::min(150.0, window_ns);
    s.delta_t_ns = delta_t_ns;
    s.trial_count = std::uniform_int_distribution<std::uint64_t>(0, max_trials)(rng);
    TimePs const window = ps_from_ns(window_ns);
    std::vector<DetectionEvent> events;
    if (s.trial_count > 0) {
        std::uniform_int_distribution<std::uint64_t> trial(0, s.trial_count - 1);
        std::uniform_int_distribution<int> ch(0, 3);
        std::uniform_int_distribution<TimePs> t(0, window - 1);
        auto n = std::uniform_int_distribution<int>(0, 6 * static_cast<int>(s.trial_count))(rng);
        for (int i = 0; i < n; ++i) {
            int c = ch(rng);
            TimePs time = t(rng);
            // coarse times make same-bin collisions common
            if (rng() % 2)
                time = time / 10000 * 10000;
            events.push_back({trial(rng), {static_cast<Field>(c / 2), static_cast<Arm>(c % 2)}, time});
        }
    }
    return EventRecord(s, {}, std::move(events));
}

using BinPair = std::pair<std::size_t, std::size_t>;

inline std::optional<std::size_t> oracle_bin(BinningSpec const& b, TimePs t)
{
    TimePs const tau = ps_from_ns(b.tau_ns);
    TimePs const start = ps_from_ns(b.t_start_ns);
    TimePs const bins = (ps_from_ns(b.t_end_ns) - start) / tau;
    if (t < start || (t - start) / tau >= bins)
        return std::nullopt;
    return static_cast<std::size_t>((t - start) / tau);
}

inline std::map<std::uint64_t, std::vector<DetectionEvent>> by_trial(EventRecord const& r)
{
    std::map<std::uint64_t, std::vector<DetectionEvent>> out;
    for (auto const& ev : r.events())
        out[ev.trial].push_back(ev);
    return out;
}

// Distinct (b1, b2) cells hit by field-1 events of trial j and field-2 events of trial k.
inline std::set<BinPair> cells(std::vector<DetectionEvent> const& tj,
                               std::vector<DetectionEvent> const& tk, BinningSpec const& b)
{
    std::set<BinPair> out;
    for (auto const& e1 : tj) {
        if (e1.channel.field != Field::Field1)
            continue;
        for (auto const& e2 : tk) {
            if (e2.channel.field != Field::Field2)
                continue;
            auto b1 = oracle_bin(b, e1.time_ps);
            auto b2 = oracle_bin(b, e2.time_ps);
            if (b1 && b2)
                out.emplace(*b1, *b2);
        }
    }
    return out;
}

inline std::map<BinPair, Count> oracle_cross(EventRecord const& r, BinningSpec const& b)
{
    std::map<BinPair, Count> out;
    for (auto const& [trial, evs] : by_trial(r))
        for (auto const& c : cells(evs, evs, b))
            ++out[c];
    return out;
}

inline std::map<BinPair, Count> oracle_accidental(EventRecord const& r, BinningSpec const& b,
                                                  Pairing pairing)
{
    std::map<BinPair, Count> out;
    auto trials = by_trial(r);
    std::vector<DetectionEvent> const none;
    auto get = [&](std::uint64_t t) -> std::vector<DetectionEvent> const& {
        auto it = trials.find(t);
        return it == trials.end() ? none : it->second;
    };
    for (std::uint64_t j = 0; j < r.trial_count(); ++j) {
        for (std::uint64_t k = 0; k < r.trial_count(); ++k) {
            bool use = pairing == Pairing::AllPairs ? j != k : k == j + 1;
            if (!use)
                continue;
            for (auto const& c : cells(get(j), get(k), b))
                ++out[c];
        }
    }
    return out;
}

inline std::map<std::size_t, Count> oracle_auto(EventRecord const& r, BinningSpec const& b,
                                                Field field)
{
    std::map<std::size_t, Count> out;
    for (auto const& [trial, evs] : by_trial(r)) {
        std::set<std::size_t> hit;
        for (auto const& ea : evs) {
            for (auto const& eb : evs) {
                if (ea.channel != DetectorChannel{field, Arm::A}
                    || eb.channel != DetectorChannel{field, Arm::B})
                    continue;
                auto ba = oracle_bin(b, ea.time_ps);
                auto bb = oracle_bin(b, eb.time_ps);
                if (ba && bb && *ba == *bb)
                    hit.insert(*ba);
            }
        }
        for (auto h : hit)
            ++out[h];
    }
    return out;
}

struct OracleG12 {
    Count c12 = 0, s1 = 0, s2 = 0;
};

inline OracleG12 oracle_g12(EventRecord const& r)
{
    OracleG12 o;
    for (auto const& [trial, evs] : by_trial(r)) {
        bool f1 = false, f2 = false;
        for (auto const& e : evs)
            (e.channel.field == Field::Field1 ? f1 : f2) = true;
        o.s1 += f1;
        o.s2 += f2;
        o.c12 += f1 && f2;
    }
    return o;
}

}  // namespace paircorr::testing
