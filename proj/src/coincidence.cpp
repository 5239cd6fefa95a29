#include "paircorr/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace paircorr {

Axis make_axis(BinningSpec const& spec, Field field, TrialSchedule const& schedule)
{
    if (!(spec.tau_ns > 0) || !std::isfinite(spec.tau_ns))
        throw std::invalid_argument("binning: tau must be > 0");
    Axis axis;
    axis.tau_ps = ps_from_ns(spec.tau_ns);
    axis.start_ps = ps_from_ns(spec.t_start_ns);
    TimePs const end_ps = ps_from_ns(spec.t_end_ns);
    if (axis.tau_ps <= 0)
        throw std::invalid_argument("binning: tau below 1 ps");
    if (end_ps <= axis.start_ps)
        throw std::invalid_argument("binning: empty extent");
    TimePs const extent = end_ps - axis.start_ps;
    axis.bins = static_cast<std::size_t>(extent / axis.tau_ps);
    axis.truncated = extent % axis.tau_ps != 0;
    if (axis.bins == 0)
        throw std::invalid_argument("binning: extent shorter than one bin");
    axis.label_offset_ns = schedule.window_start_ns(field);
    return axis;
}

//---------------------------------------------------------------------------//
// CoincidenceHistogram
//---------------------------------------------------------------------------//

CoincidenceHistogram::CoincidenceHistogram(HistogramKind kind, Axis axis1, Axis axis2,
                                           Count normalization)
    : kind_(kind),
      axis1_(axis1),
      axis2_(axis2),
      normalization_(normalization),
      counts_(axis1.bins * axis2.bins, 0)
{
}

double CoincidenceHistogram::factor() const
{
    return (kind_ == HistogramKind::Auto1 || kind_ == HistogramKind::Auto2) ? 4.0 : 1.0;
}

double CoincidenceHistogram::probability(std::size_t b1, std::size_t b2) const
{
    if (normalization_ == 0)
        return 0;
    return factor() * static_cast<double>(count(b1, b2)) / static_cast<double>(normalization_);
}

double CoincidenceHistogram::sigma(std::size_t b1, std::size_t b2) const
{
    if (normalization_ == 0)
        return 0;
    return factor() * std::sqrt(static_cast<double>(count(b1, b2)))
           / static_cast<double>(normalization_);
}

CoincidenceHistogram& CoincidenceHistogram::merge_counts(CoincidenceHistogram const& other)
{
    if (other.kind_ != kind_ || !(other.axis1_ == axis1_) || !(other.axis2_ == axis2_))
        throw std::invalid_argument("merge_counts: histogram binning mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i)
        counts_[i] += other.counts_[i];
    return *this;
}

//---------------------------------------------------------------------------//
// Per-trial occupancy
//---------------------------------------------------------------------------//

namespace {

struct TrialSlice {
    std::uint64_t trial;
    std::span<DetectionEvent const> events;
};

std::vector<TrialSlice> slice_by_trial(EventRecord const& record)
{
    std::vector<TrialSlice> slices;
    auto events = record.events();
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j < events.size() && events[j].trial == events[i].trial)
            ++j;
        slices.push_back({events[i].trial, events.subspan(i, j - i)});
        i = j;
    }
    return slices;
}

// Distinct bins hit by events of a field (optionally one arm) in a trial.
void occupied_bins(std::span<DetectionEvent const> events, Axis const& axis, Field field,
                   std::optional<Arm> arm, std::vector<std::size_t>& out)
{
    out.clear();
    for (auto const& ev : events) {
        if (ev.channel.field != field || (arm && ev.channel.arm != *arm))
            continue;
        if (auto b = axis.bin_of(ev.time_ps))
            out.push_back(*b);
    }
    // canonical order puts each field's events in time order
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

// Runs body(first, last, partial) over contiguous chunks and merges the partials.
template<class Body>
CoincidenceHistogram accumulate(CoincidenceHistogram prototype, std::size_t items, unsigned workers,
                                Body body)
{
    std::size_t const chunks =
        std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(items, 1));
    if (chunks == 1) {
        body(0, items, prototype);
        return prototype;
    }
    std::vector<CoincidenceHistogram> partials(chunks, prototype);
    std::vector<std::exception_ptr> errors(chunks);
    {
        std::vector<std::jthread> threads;
        for (std::size_t c = 0; c < chunks; ++c) {
            threads.emplace_back([&, c] {
                try {
                    body(items * c / chunks, items * (c + 1) / chunks, partials[c]);
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
    for (auto const& p : partials)
        prototype.merge_counts(p);
    return prototype;
}

}  // namespace

CoincidenceHistogram cross_histogram(EventRecord const& record, BinningSpec const& binning,
                                     unsigned workers)
{
    auto const& s = record.schedule();
    CoincidenceHistogram proto(HistogramKind::Cross12, make_axis(binning, Field::Field1, s),
                               make_axis(binning, Field::Field2, s), record.trial_count());
    auto slices = slice_by_trial(record);
    return accumulate(std::move(proto), slices.size(), workers,
                      [&](std::size_t first, std::size_t last, CoincidenceHistogram& h) {
                          std::vector<std::size_t> bins1, bins2;
                          for (std::size_t i = first; i < last; ++i) {
                              occupied_bins(slices[i].events, h.axis1(), Field::Field1, {}, bins1);
                              occupied_bins(slices[i].events, h.axis2(), Field::Field2, {}, bins2);
                              for (auto b1 : bins1)
                                  for (auto b2 : bins2)
                                      ++h.count(b1, b2);
                          }
                      });
}

SinglesProfile singles_profile(EventRecord const& record, BinningSpec const& binning, Field field)
{
    SinglesProfile prof;
    prof.axis = make_axis(binning, field, record.schedule());
    prof.counts.assign(prof.axis.bins, 0);
    prof.trials = record.trial_count();
    std::vector<std::size_t> bins;
    for (auto const& slice : slice_by_trial(record)) {
        occupied_bins(slice.events, prof.axis, field, {}, bins);
        for (auto b : bins)
            ++prof.counts[b];
    }
    return prof;
}

CoincidenceHistogram accidental_histogram(EventRecord const& record, BinningSpec const& binning,
                                          Pairing pairing, unsigned workers)
{
    Count const m = record.trial_count();
    if (m < 2)
        throw InsufficientTrials("insufficient trials: accidental coincidences need at least 2");
    auto const& s = record.schedule();
    Axis const a1 = make_axis(binning, Field::Field1, s);
    Axis const a2 = make_axis(binning, Field::Field2, s);

    if (pairing == Pairing::AllPairs) {
        // sum over ordered pairs j != k equals S1(b1) S2(b2) minus the same-trial terms
        auto s1 = singles_profile(record, binning, Field::Field1);
        auto s2 = singles_profile(record, binning, Field::Field2);
        auto same = cross_histogram(record, binning, workers);
        CoincidenceHistogram h(HistogramKind::Accidental12, a1, a2, m * (m - 1));
        for (std::size_t b1 = 0; b1 < a1.bins; ++b1)
            for (std::size_t b2 = 0; b2 < a2.bins; ++b2)
                h.count(b1, b2) = s1.counts[b1] * s2.counts[b2] - same.count(b1, b2);
        return h;
    }

    CoincidenceHistogram proto(HistogramKind::Accidental12, a1, a2, m - 1);
    auto slices = slice_by_trial(record);
    std::size_t const pairs = slices.empty() ? 0 : slices.size() - 1;
    return accumulate(std::move(proto), pairs, workers,
                      [&](std::size_t first, std::size_t last, CoincidenceHistogram& h) {
                          std::vector<std::size_t> bins1, bins2;
                          for (std::size_t i = first; i < last; ++i) {
                              if (slices[i + 1].trial != slices[i].trial + 1)
                                  continue;
                              occupied_bins(slices[i].events, h.axis1(), Field::Field1, {}, bins1);
                              occupied_bins(slices[i + 1].events, h.axis2(), Field::Field2, {},
                                            bins2);
                              for (auto b1 : bins1)
                                  for (auto b2 : bins2)
                                      ++h.count(b1, b2);
                          }
                      });
}

CoincidenceHistogram auto_histogram(EventRecord const& record, BinningSpec const& binning,
                                    Field field, unsigned workers)
{
    Axis const axis = make_axis(binning, field, record.schedule());
    auto kind = field == Field::Field1 ? HistogramKind::Auto1 : HistogramKind::Auto2;
    CoincidenceHistogram proto(kind, axis, axis, record.trial_count());
    auto slices = slice_by_trial(record);
    return accumulate(std::move(proto), slices.size(), workers,
                      [&](std::size_t first, std::size_t last, CoincidenceHistogram& h) {
                          std::vector<std::size_t> bins_a, bins_b;
                          for (std::size_t i = first; i < last; ++i) {
                              occupied_bins(slices[i].events, axis, field, Arm::A, bins_a);
                              occupied_bins(slices[i].events, axis, field, Arm::B, bins_b);
                              for (auto b : bins_a) {
                                  if (std::binary_search(bins_b.begin(), bins_b.end(), b))
                                      ++h.count(b, b);
                              }
                          }
                      });
}

//---------------------------------------------------------------------------//
// Derived quantities
//---------------------------------------------------------------------------//

RatioSurface ratio_surface(CoincidenceHistogram const& cross, CoincidenceHistogram const& auto1,
                           CoincidenceHistogram const& auto2)
{
    if (cross.kind() != HistogramKind::Cross12 || auto1.kind() != HistogramKind::Auto1
        || auto2.kind() != HistogramKind::Auto2)
        throw std::invalid_argument("ratio_surface: expected cross, auto1 and auto2 histograms");
    if (!(auto1.axis1() == cross.axis1()) || !(auto2.axis1() == cross.axis2()))
        throw std::invalid_argument("ratio_surface: binning mismatch");

    RatioSurface out;
    out.axis1 = cross.axis1();
    out.axis2 = cross.axis2();
    std::size_t const n = out.axis1.bins * out.axis2.bins;
    out.r.assign(n, 0);
    out.sigma_r.assign(n, 0);
    out.defined.assign(n, 0);
    for (std::size_t b1 = 0; b1 < out.axis1.bins; ++b1) {
        for (std::size_t b2 = 0; b2 < out.axis2.bins; ++b2) {
            auto n12 = static_cast<double>(cross.count(b1, b2));
            auto n11 = static_cast<double>(auto1.count(b1, b1));
            auto n22 = static_cast<double>(auto2.count(b2, b2));
            if (n12 == 0 || n11 == 0 || n22 == 0)
                continue;
            double p12 = cross.probability(b1, b2);
            double r = p12 * p12 / (auto1.probability(b1, b1) * auto2.probability(b2, b2));
            auto i = out.index(b1, b2);
            out.r[i] = r;
            out.sigma_r[i] = r * std::sqrt(4 / n12 + 1 / n11 + 1 / n22);
            out.defined[i] = 1;
        }
    }
    return out;
}

std::optional<RatioPeak> max_ratio(RatioSurface const& surface)
{
    std::optional<RatioPeak> best;
    for (std::size_t b1 = 0; b1 < surface.axis1.bins; ++b1) {
        for (std::size_t b2 = 0; b2 < surface.axis2.bins; ++b2) {
            auto i = surface.index(b1, b2);
            if (surface.defined[i] && (!best || surface.r[i] > best->r))
                best = RatioPeak{b1, b2, surface.r[i], surface.sigma_r[i]};
        }
    }
    return best;
}

G12Estimate g12_integrated(EventRecord const& record)
{
    G12Estimate est;
    est.trials = record.trial_count();
    if (est.trials < 2)
        throw InsufficientTrials("insufficient trials: g12 needs at least 2");
    for (auto const& slice : slice_by_trial(record)) {
        bool has1 = false;
        bool has2 = false;
        for (auto const& ev : slice.events)
            (ev.channel.field == Field::Field1 ? has1 : has2) = true;
        est.singles1 += has1;
        est.singles2 += has2;
        est.coincidences += has1 && has2;
    }
    if (est.singles1 == 0 || est.singles2 == 0)
        throw std::invalid_argument("no singles");

    auto const m = static_cast<double>(est.trials);
    auto const s1 = static_cast<double>(est.singles1);
    auto const s2 = static_cast<double>(est.singles2);
    auto const c12 = static_cast<double>(est.coincidences);
    est.g12 = c12 * m / (s1 * s2);
    if (est.coincidences == 0)
        est.sigma = m / (s1 * s2);
    else
        est.sigma = est.g12 * std::sqrt(1 / c12 + 1 / s1 + 1 / s2);
    return est;
}

std::vector<RidgePoint> ridge_profile(CoincidenceHistogram const& hist)
{
    if (hist.kind() != HistogramKind::Cross12 && hist.kind() != HistogramKind::Accidental12)
        throw std::invalid_argument("ridge_profile: needs a cross or accidental histogram");
    Axis const& a1 = hist.axis1();
    Axis const& a2 = hist.axis2();
    if (a1.tau_ps != a2.tau_ps)
        throw std::invalid_argument("ridge_profile: axes have different bin sizes");

    // diagonal index k = b2 - b1 + (n1 - 1)
    std::size_t const n1 = a1.bins;
    std::size_t const n2 = a2.bins;
    std::vector<Count> sums(n1 + n2 - 1, 0);
    for (std::size_t b1 = 0; b1 < n1; ++b1)
        for (std::size_t b2 = 0; b2 < n2; ++b2)
            sums[b2 + n1 - 1 - b1] += hist.count(b1, b2);

    double const dt0 = a2.label_ns(0) - a1.label_ns(n1 - 1);
    double const norm = hist.normalization() ? static_cast<double>(hist.normalization()) : 1.0;
    std::vector<RidgePoint> out(sums.size());
    for (std::size_t k = 0; k < sums.size(); ++k) {
        out[k].dt_ns = dt0 + static_cast<double>(k) * a1.tau_ns();
        out[k].count = sums[k];
        out[k].probability = hist.factor() * static_cast<double>(sums[k]) / norm;
        out[k].sigma = hist.factor() * std::sqrt(static_cast<double>(sums[k])) / norm;
    }
    return out;
}

RidgeShape ridge_shape(std::span<RidgePoint const> ridge, std::span<RidgePoint const> background,
                       std::size_t smoothing)
{
    if (ridge.empty())
        throw std::invalid_argument("ridge_shape: empty profile");
    if (!background.empty() && background.size() != ridge.size())
        throw std::invalid_argument("ridge_shape: background has a different length");

    std::size_t const n = ridge.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = ridge[i].probability;
        if (!background.empty()) {
            if (std::abs(background[i].dt_ns - ridge[i].dt_ns) > 1e-6)
                throw std::invalid_argument("ridge_shape: background on a different dt grid");
            y[i] -= background[i].probability;
        }
    }
    if (smoothing > 1) {
        auto const w = static_cast<std::ptrdiff_t>(smoothing);
        std::vector<double> s(n, 0);
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
            double acc = 0;
            double norm = 0;
            for (std::ptrdiff_t k = -(w - 1); k <= w - 1; ++k) {
                auto j = i + k;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(n))
                    continue;
                double weight = static_cast<double>(w - std::abs(k));
                acc += weight * y[static_cast<std::size_t>(j)];
                norm += weight;
            }
            s[static_cast<std::size_t>(i)] = acc / norm;
        }
        y = std::move(s);
    }

    auto const peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    RidgeShape shape;
    shape.peak_dt_ns = ridge[peak].dt_ns;
    double const half = 0.5 * y[peak];
    if (!(y[peak] > 0))
        return shape;

    auto cross = [&](std::size_t inside, std::size_t outside) {
        double x0 = ridge[inside].dt_ns;
        double x1 = ridge[outside].dt_ns;
        return x0 + (y[inside] - half) * (x1 - x0) / (y[inside] - y[outside]);
    };
    std::optional<double> left;
    std::optional<double> right;
    for (std::size_t i = peak; i > 0; --i) {
        if (y[i - 1] <= half) {
            left = cross(i, i - 1);
            break;
        }
    }
    for (std::size_t i = peak; i + 1 < n; ++i) {
        if (y[i + 1] <= half) {
            right = cross(i, i + 1);
            break;
        }
    }
    if (left && right)
        shape.fwhm_ns = *right - *left;
    return shape;
}

}  // namespace paircorr
