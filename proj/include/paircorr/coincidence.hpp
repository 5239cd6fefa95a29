#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "paircorr/event_model.hpp"

namespace paircorr {

using Count = std::uint64_t;

//! Bin size and extent, relative to each field's window start.
struct BinningSpec {
    double tau_ns = 4.0;
    double t_start_ns = 0.0;
    double t_end_ns = 200.0;
};

/*!
 * One resolved histogram axis.
 *
 * Bin b covers [start + b tau, start + (b+1) tau) in window-relative
 * picoseconds; its label on the common time axis is that lower edge plus
 * the window start of the field. Extents that are not a whole number of
 * bins are truncated and flagged.
 */
struct Axis {
    TimePs tau_ps = 0;
    TimePs start_ps = 0;
    std::size_t bins = 0;
    double label_offset_ns = 0;
    bool truncated = false;

    double tau_ns() const { return ns_from_ps(tau_ps); }
    double label_ns(std::size_t b) const
    {
        return label_offset_ns + ns_from_ps(start_ps + static_cast<TimePs>(b) * tau_ps);
    }
    std::optional<std::size_t> bin_of(TimePs t) const
    {
        if (t < start_ps)
            return std::nullopt;
        auto b = static_cast<std::size_t>((t - start_ps) / tau_ps);
        if (b >= bins)
            return std::nullopt;
        return b;
    }

    friend bool operator==(Axis const&, Axis const&) = default;
};

// Throws std::invalid_argument for tau <= 0 or an empty extent.
Axis make_axis(BinningSpec const& spec, Field field, TrialSchedule const& schedule);

enum class HistogramKind { Cross12, Auto1, Auto2, Accidental12 };
enum class Pairing { Adjacent, AllPairs };

/*!
 * Trial-level coincidence counts on a (t1, t2) grid.
 *
 * counts(b1, b2) is the number of trials (or trial pairs) with at least one
 * event in each bin. probability = factor * count / normalization, where
 * factor is 1 for cross and accidental kinds and 4 for autos, undoing the
 * 1/4 chance that a photon pair splits across the two arms.
 */
class CoincidenceHistogram {
  public:
    CoincidenceHistogram(HistogramKind kind, Axis axis1, Axis axis2, Count normalization);

    HistogramKind kind() const { return kind_; }
    Axis const& axis1() const { return axis1_; }
    Axis const& axis2() const { return axis2_; }
    Count normalization() const { return normalization_; }
    double factor() const;

    Count count(std::size_t b1, std::size_t b2) const { return counts_[b1 * axis2_.bins + b2]; }
    Count& count(std::size_t b1, std::size_t b2) { return counts_[b1 * axis2_.bins + b2]; }
    std::span<Count const> counts() const { return counts_; }

    double probability(std::size_t b1, std::size_t b2) const;
    double sigma(std::size_t b1, std::size_t b2) const;

    // Elementwise sum of counts from a partial accumulation with the same binning.
    CoincidenceHistogram& merge_counts(CoincidenceHistogram const& other);

  private:
    HistogramKind kind_;
    Axis axis1_;
    Axis axis2_;
    Count normalization_;
    std::vector<Count> counts_;
};

class InsufficientTrials : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

CoincidenceHistogram cross_histogram(EventRecord const& record, BinningSpec const& binning,
                                     unsigned workers = 1);

// Field-1 events from trial j paired with field-2 events from trial k != j.
// Throws InsufficientTrials when the record has fewer than two trials.
CoincidenceHistogram accidental_histogram(EventRecord const& record, BinningSpec const& binning,
                                          Pairing pairing = Pairing::Adjacent,
                                          unsigned workers = 1);

// Diagonal only: trials with an arm-A and an arm-B event of one field in the same bin.
CoincidenceHistogram auto_histogram(EventRecord const& record, BinningSpec const& binning,
                                    Field field, unsigned workers = 1);

//! Number of trials with at least one event of a field in each bin.
struct SinglesProfile {
    Axis axis;
    std::vector<Count> counts;
    Count trials = 0;

    double probability(std::size_t b) const
    {
        return trials ? static_cast<double>(counts[b]) / static_cast<double>(trials) : 0.0;
    }
};

SinglesProfile singles_profile(EventRecord const& record, BinningSpec const& binning, Field field);

//! R = p12^2 / (p11 p22) with first-order Poisson uncertainty.
struct RatioSurface {
    Axis axis1;
    Axis axis2;
    std::vector<double> r;
    std::vector<double> sigma_r;
    std::vector<char> defined;  // all three raw counts nonzero

    std::size_t index(std::size_t b1, std::size_t b2) const { return b1 * axis2.bins + b2; }
};

// Throws std::invalid_argument when the inputs' binning or kinds do not match.
RatioSurface ratio_surface(CoincidenceHistogram const& cross, CoincidenceHistogram const& auto1,
                           CoincidenceHistogram const& auto2);

struct RatioPeak {
    std::size_t b1 = 0;
    std::size_t b2 = 0;
    double r = 0;
    double sigma_r = 0;
};

// Largest defined R, or nothing if no bin is defined.
std::optional<RatioPeak> max_ratio(RatioSurface const& surface);

struct G12Estimate {
    double g12 = 0;
    double sigma = 0;
    Count coincidences = 0;
    Count singles1 = 0;
    Count singles2 = 0;
    Count trials = 0;
};

/*!
 * Normalized cross-correlation over the full detection windows.
 *
 * g12 = (C12/M) / ((S1/M)(S2/M)) with trial-level indicators. When no
 * coincidence is seen sigma is the value one count would give.
 * Throws InsufficientTrials for M < 2 and std::invalid_argument("no singles")
 * when either field has no events.
 */
G12Estimate g12_integrated(EventRecord const& record);

struct RidgePoint {
    double dt_ns = 0;
    double probability = 0;
    double sigma = 0;
    Count count = 0;
};

// Sum over bins of equal t2 - t1; requires equal bin sizes on both axes.
std::vector<RidgePoint> ridge_profile(CoincidenceHistogram const& hist);

struct RidgeShape {
    double peak_dt_ns = 0;
    std::optional<double> fwhm_ns;  // empty if either half-max crossing is missing
};

/*!
 * Peak position and full width at half maximum of a ridge profile.
 *
 * An optional background profile on the same dt grid (e.g. the ridge of the
 * accidental histogram) is subtracted first. With smoothing = w > 1 the
 * profile is convolved with a triangular kernel spanning 2w - 1 points,
 * renormalized at the ends; at small M the raw argmax is dominated by
 * counting noise. Crossings are linearly interpolated.
 */
RidgeShape ridge_shape(std::span<RidgePoint const> ridge,
                       std::span<RidgePoint const> background = {}, std::size_t smoothing = 0);

}  // namespace paircorr
