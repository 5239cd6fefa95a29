#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "paircorr/event_model.hpp"
#include "paircorr/larmor_model.hpp"

namespace paircorr {

struct SourceRates {
    double p_pair = 0.01;           // correlated excitation per trial
    double p1_uncorr = 0.0;         // mean uncorrelated field-1 photons per trial
    double p2_uncorr = 0.0;         // mean uncorrelated field-2 photons per trial
    double dark_per_window = 0.0;   // mean dark counts per detector per window
    double eta1 = 0.3;
    double eta2 = 0.3;

    void validate() const;
};

struct SimConfig {
    TrialSchedule schedule;
    PairKinetics kinetics;
    SourceRates rates;
    CoherenceModel coherence;
    std::uint64_t seed = 1;
    double dead_time_ns = 0;  // reserved; must be zero

    void validate() const;
};

/*!
 * SplitMix64 generator used as an independent stream per trial.
 *
 * Streams are keyed by (seed, trial) through two rounds of the SplitMix64
 * finalizer, so any trial can be regenerated without touching the others.
 */
class TrialRng {
  public:
    using result_type = std::uint64_t;

    TrialRng(std::uint64_t seed, std::uint64_t trial);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    static constexpr std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
};

struct PairDraw {
    double t1_ns = 0;                  // on the common axis
    std::optional<double> t2_ns;       // absent when photon 2 is lost
};

/*!
 * Draws one correlated pair.
 *
 * t1 is uniform over the write pulse and the retrieval delay is drawn from
 * the kernel, which samples the coherence-free density exactly. Photon 2 is
 * then kept with probability C(t2 - t1), bounded by 1, so accepted pairs
 * follow PairDensity. Photon 2 is also absent when it falls outside the read
 * gate.
 */
class PairSampler {
  public:
    explicit PairSampler(PairDensity density);

    PairDensity const& density() const { return density_; }

    template<class Rng>
    PairDraw operator()(Rng& rng) const;

  private:
    PairDensity density_;
};

// Convenience wrapper building a PairSampler for a single draw.
PairDraw sample_pair(PairKinetics const& kinetics, CoherenceModel const& coherence,
                     TrialSchedule const& schedule, TrialRng& rng);

// Events of trials [first, last), sorted.
std::vector<DetectionEvent> simulate_trials(SimConfig const& config, std::uint64_t first,
                                            std::uint64_t last);

//! Full record; output is independent of the worker count.
EventRecord simulate(SimConfig const& config, unsigned workers = 1);

// Metadata describing a configuration, echoed into simulated records.
EventRecord::Metadata config_metadata(SimConfig const& config);

}  // namespace paircorr
