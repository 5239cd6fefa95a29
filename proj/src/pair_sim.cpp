#include "paircorr/pair_sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <stdexcept>
#include <thread>

#include "paircorr/text_format.hpp"

namespace paircorr {

void SourceRates::validate() const
{
    auto prob = [](double p, char const* name) {
        if (!(p >= 0 && p <= 1))
            throw std::invalid_argument(std::string("rates.") + name + " must lie in [0, 1]");
    };
    auto mean = [](double m, char const* name) {
        if (!(m >= 0) || !std::isfinite(m))
            throw std::invalid_argument(std::string("rates.") + name + " must be >= 0");
    };
    prob(p_pair, "p_pair");
    mean(p1_uncorr, "p1_uncorr");
    mean(p2_uncorr, "p2_uncorr");
    mean(dark_per_window, "dark_per_window");
    prob(eta1, "eta1");
    prob(eta2, "eta2");
}

void SimConfig::validate() const
{
    schedule.validate();
    kinetics.validate();
    rates.validate();
    coherence.scheme().validate();
    if (dead_time_ns != 0)
        throw std::invalid_argument("sim.dead_time_ns: dead time is not modeled; must be 0");
}

TrialRng::TrialRng(std::uint64_t seed, std::uint64_t trial)
    : state_(mix(mix(seed) ^ (trial + 0x632be59bd9b4e019ULL)))
{
}

PairSampler::PairSampler(PairDensity density) : density_(std::move(density)) {}

template<class Rng>
PairDraw PairSampler::operator()(Rng& rng) const
{
    auto const& sched = density_.schedule();
    auto const& kernel = density_.kernel();
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::gamma_distribution<double> delay(kernel.shape(), kernel.scale_ns());

    PairDraw draw;
    draw.t1_ns = sched.write_duration_ns * uniform(rng);
    double t2 = density_.retrieval_start_ns(draw.t1_ns) + delay(rng);
    if (!(t2 >= density_.read_gate_begin_ns() && t2 < density_.read_gate_end_ns()))
        return draw;

    double const accept = density_.coherence()(t2 - draw.t1_ns);
    if (!(accept <= 1.0 + 1e-12))
        throw std::logic_error("pair sampler: coherence bound exceeded; kinetics misconfigured");
    if (uniform(rng) < accept)
        draw.t2_ns = t2;
    return draw;
}

template PairDraw PairSampler::operator()(TrialRng&) const;
template PairDraw PairSampler::operator()(std::mt19937_64&) const;

PairDraw sample_pair(PairKinetics const& kinetics, CoherenceModel const& coherence,
                     TrialSchedule const& schedule, TrialRng& rng)
{
    return PairSampler(PairDensity(coherence, kinetics, schedule))(rng);
}

namespace {

class TrialGenerator {
  public:
    explicit TrialGenerator(SimConfig const& config)
        : config_(config),
          sampler_(PairDensity(config.coherence, config.kinetics, config.schedule)),
          window_ps_(ps_from_ns(config.schedule.window_ns))
    {
    }

    void run(std::uint64_t trial, std::vector<DetectionEvent>& out) const
    {
        auto const& s = config_.schedule;
        auto const& r = config_.rates;
        TrialRng rng(config_.seed, trial);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);

        std::size_t const begin = out.size();
        auto photon = [&](Field field, double t_common_ns) {
            double eta = field == Field::Field1 ? r.eta1 : r.eta2;
            if (!(uniform(rng) < eta))
                return;
            Arm arm = uniform(rng) < 0.5 ? Arm::A : Arm::B;
            push(out, trial, {field, arm}, t_common_ns - s.window_start_ns(field));
        };

        // (1) correlated pair
        if (r.p_pair > 0 && uniform(rng) < r.p_pair) {
            PairDraw d = sampler_(rng);
            photon(Field::Field1, d.t1_ns);
            if (d.t2_ns)
                photon(Field::Field2, *d.t2_ns);
        }
        // (2) uncorrelated Raman light
        double const gate_begin = sampler_.density().read_gate_begin_ns();
        double const gate_len = sampler_.density().read_gate_end_ns() - gate_begin;
        for (int i = 0, n = poisson(rng, r.p1_uncorr); i < n; ++i)
            photon(Field::Field1, s.write_duration_ns * uniform(rng));
        for (int i = 0, n = poisson(rng, r.p2_uncorr); i < n; ++i)
            photon(Field::Field2, gate_begin + gate_len * uniform(rng));
        // (3) dark counts, uniform over each detector's window
        for (auto field : {Field::Field1, Field::Field2}) {
            for (auto arm : {Arm::A, Arm::B}) {
                for (int i = 0, n = poisson(rng, r.dark_per_window); i < n; ++i)
                    push(out, trial, {field, arm}, s.window_ns * uniform(rng));
            }
        }
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(begin), out.end(), event_less);
    }

  private:
    void push(std::vector<DetectionEvent>& out, std::uint64_t trial, DetectorChannel ch,
              double rel_ns) const
    {
        // floor keeps every event strictly inside [0, window)
        auto ps = static_cast<TimePs>(std::floor(rel_ns * 1000.0));
        if (ps < 0 || ps >= window_ps_)
            return;
        out.push_back({trial, ch, ps});
    }

    static int poisson(TrialRng& rng, double mean)
    {
        if (mean <= 0)
            return 0;
        std::poisson_distribution<int> dist(mean);
        return dist(rng);
    }

    SimConfig const& config_;
    PairSampler sampler_;
    TimePs window_ps_;
};

}  // namespace

std::vector<DetectionEvent> simulate_trials(SimConfig const& config, std::uint64_t first,
                                            std::uint64_t last)
{
    config.validate();
    TrialGenerator gen(config);
    std::vector<DetectionEvent> out;
    for (std::uint64_t j = first; j < last; ++j)
        gen.run(j, out);
    return out;
}

EventRecord::Metadata config_metadata(SimConfig const& config)
{
    auto const& k = config.kinetics;
    auto const& r = config.rates;
    auto const& c = config.coherence;
    EventRecord::Metadata m;
    m["generator"] = "paircorr-simulate";
    m["seed"] = std::to_string(config.seed);
    m["kinetics.delta0_ns"] = format_shortest(k.delta0_ns);
    m["kinetics.retrieval_peak_ns"] = format_shortest(k.retrieval_peak_ns);
    m["kinetics.retrieval_fwhm_ns"] = format_shortest(k.retrieval_fwhm_ns);
    m["rates.p_pair"] = format_shortest(r.p_pair);
    m["rates.p1_uncorr"] = format_shortest(r.p1_uncorr);
    m["rates.p2_uncorr"] = format_shortest(r.p2_uncorr);
    m["rates.dark_per_window"] = format_shortest(r.dark_per_window);
    m["rates.eta1"] = format_shortest(r.eta1);
    m["rates.eta2"] = format_shortest(r.eta2);
    m["coherence.k_hz"] = format_shortest(c.field().k_hz);
    m["coherence.polarization"] =
        c.scheme().polarization == Polarization::ClockPolarized ? "clock" : "unpolarized";
    m["coherence.residual_decay_ns"] =
        c.residual_decay_time_ns() ? format_shortest(*c.residual_decay_time_ns()) : "off";
    return m;
}

EventRecord simulate(SimConfig const& config, unsigned workers)
{
    config.validate();
    std::uint64_t const m = config.schedule.trial_count;
    workers = std::max(1u, workers);
    std::uint64_t const chunks = std::min<std::uint64_t>(workers, std::max<std::uint64_t>(m, 1));

    std::vector<std::vector<DetectionEvent>> parts(chunks);
    auto bounds = [&](std::uint64_t c) { return m * c / chunks; };
    if (chunks == 1) {
        parts[0] = simulate_trials(config, 0, m);
    } else {
        std::vector<std::exception_ptr> errors(chunks);
        {
            std::vector<std::jthread> threads;
            for (std::uint64_t c = 0; c < chunks; ++c) {
                threads.emplace_back([&, c] {
                    try {
                        parts[c] = simulate_trials(config, bounds(c), bounds(c + 1));
                    } catch (...) {
                        errors[c] = std::current_exception();
                    }
                });
            }
        }
        for (auto const& e : errors) {
            if (e)
                std::rethrow_exception(e);
        }
    }

    std::vector<DetectionEvent> events;
    std::size_t total = 0;
    for (auto const& p : parts)
        total += p.size();
    events.reserve(total);
    for (auto& p : parts)
        events.insert(events.end(), p.begin(), p.end());
    return EventRecord(config.schedule, config_metadata(config), std::move(events));
}

}  // namespace paircorr
