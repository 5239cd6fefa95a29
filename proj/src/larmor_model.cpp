#include "paircorr/larmor_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

namespace paircorr {

double k_from_geometry(double length_mm, double gradient_gauss_per_cm, double lande_g)
{
    if (!std::isfinite(length_mm) || !std::isfinite(gradient_gauss_per_cm)
        || !std::isfinite(lande_g))
        throw std::invalid_argument("k_from_geometry: non-finite input");
    double const length_cm = length_mm * 0.1;
    return bohr_magneton_hz_per_gauss * lande_g * length_cm * gradient_gauss_per_cm;
}

//---------------------------------------------------------------------------//
// ZeemanScheme
//---------------------------------------------------------------------------//

std::vector<ZeemanChannel> ZeemanScheme::allowed_channels(int f_a, int f_b)
{
    std::vector<ZeemanChannel> result;
    for (int ma = -f_a; ma <= f_a; ++ma) {
        for (int mb = -f_b; mb <= f_b; ++mb) {
            if (std::abs(ma - mb) <= 2)
                result.emplace_back(ma, mb);
        }
    }
    return result;
}

ZeemanScheme ZeemanScheme::unpolarized()
{
    ZeemanScheme s;
    auto channels = allowed_channels(s.f_a, s.f_b);
    for (auto ch : channels)
        s.weights[ch] = 1.0 / static_cast<double>(channels.size());
    return s;
}

ZeemanScheme ZeemanScheme::clock_polarized()
{
    ZeemanScheme s;
    s.weights = {{{0, 0}, 1.0}};
    s.polarization = Polarization::ClockPolarized;
    return s;
}

void ZeemanScheme::validate() const
{
    if (f_a < 0 || f_b < 0)
        throw std::invalid_argument("Zeeman scheme: F must be >= 0");
    if (!(std::isfinite(g_a) && std::isfinite(g_b) && std::isfinite(g_ref)) || g_ref == 0)
        throw std::invalid_argument("Zeeman scheme: Lande factors must be finite, g_ref != 0");
    if (weights.empty())
        throw std::invalid_argument("Zeeman scheme: no channel weights");
    double total = 0;
    for (auto const& [ch, w] : weights) {
        auto [ma, mb] = ch;
        if (std::abs(ma) > f_a || std::abs(mb) > f_b || std::abs(ma - mb) > 2)
            throw std::invalid_argument("Zeeman scheme: channel (" + std::to_string(ma) + ","
                                        + std::to_string(mb) + ") violates selection rules");
        if (!(w >= 0) || !std::isfinite(w))
            throw std::invalid_argument("Zeeman scheme: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("Zeeman scheme: weights must sum to 1");
    if (polarization == Polarization::ClockPolarized) {
        for (auto const& [ch, w] : weights) {
            if (ch != ZeemanChannel{0, 0} && w != 0)
                throw std::invalid_argument("Zeeman scheme: clock polarization puts all weight on (0,0)");
        }
    }
}

//---------------------------------------------------------------------------//
// CoherenceModel
//---------------------------------------------------------------------------//

CoherenceModel::CoherenceModel(ZeemanScheme scheme, FieldInhomogeneity field,
                               std::optional<double> residual_decay_time_ns)
    : scheme_(std::move(scheme)), field_(field), residual_ns_(residual_decay_time_ns)
{
    scheme_.validate();
    if (!std::isfinite(field_.k_hz))
        throw std::invalid_argument("coherence model: K must be finite");
    if (residual_ns_ && !(*residual_ns_ > 0 && std::isfinite(*residual_ns_)))
        throw std::invalid_argument("coherence model: residual decay time must be > 0");

    for (auto const& [ch, w] : scheme_.weights) {
        double rate = std::abs(scheme_.relative_precession(ch));
        auto it = std::find_if(rate_weights_.begin(), rate_weights_.end(),
                               [rate](auto const& rw) { return rw.first == rate; });
        if (it == rate_weights_.end())
            rate_weights_.emplace_back(rate, w);
        else
            it->second += w;
    }
    std::sort(rate_weights_.begin(), rate_weights_.end());
}

double CoherenceModel::operator()(double storage_ns) const
{
    // phase spread across the sample is 2 pi mu K T; the linear profile
    // averages the precession phasor to sinc(pi mu K T)
    double const kt = std::abs(field_.k_hz) * storage_ns * 1e-9;
    double sum = 0;
    double total = 0;
    for (auto const& [rate, w] : rate_weights_) {
        double x = std::numbers::pi * rate * kt;
        double s = (x == 0) ? 1.0 : std::sin(x) / x;
        sum += w * (s * s);
        total += w;
    }
    double c = sum / total;
    if (residual_ns_) {
        double r = storage_ns / *residual_ns_;
        c *= std::exp(-r * r);
    }
    return c;
}

double coherence(CoherenceModel const& model, double storage_ns)
{
    if (!(storage_ns >= 0) || !std::isfinite(storage_ns))
        throw std::domain_error("coherence: storage time must be finite and >= 0");
    return model(storage_ns);
}

//---------------------------------------------------------------------------//
// Retrieval kernel
//---------------------------------------------------------------------------//

void PairKinetics::validate() const
{
    if (!(delta0_ns >= 0) || !std::isfinite(delta0_ns))
        throw std::invalid_argument("kinetics.delta0_ns: must be >= 0");
    if (!(retrieval_peak_ns > 0) || !std::isfinite(retrieval_peak_ns))
        throw std::invalid_argument("kinetics.retrieval_peak_ns: must be > 0");
    if (!(retrieval_fwhm_ns > 0) || !std::isfinite(retrieval_fwhm_ns))
        throw std::invalid_argument("kinetics.retrieval_fwhm_ns: must be > 0");
}

namespace {

// With u = x / mode the gamma density relative to its peak is
// exp(-(k-1) (u - 1 - ln u)); half maximum sits where u - 1 - ln u = ln2/(k-1).
double relative_width(double level)
{
    using boost::math::tools::eps_tolerance;
    using boost::math::tools::toms748_solve;
    auto phi = [level](double u) { return u - 1 - std::log(u) - level; };
    eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    auto [l0, l1] = toms748_solve(phi, std::exp(-level - 1), 1.0, tol, iters);
    iters = 200;
    auto [r0, r1] = toms748_solve(phi, 1.0, 2 + 2 * level, tol, iters);
    return 0.5 * (r0 + r1) - 0.5 * (l0 + l1);
}

}  // namespace

RetrievalKernel::RetrievalKernel(PairKinetics const& kinetics)
{
    kinetics.validate();
    using boost::math::tools::eps_tolerance;
    using boost::math::tools::toms748_solve;

    double const target = kinetics.retrieval_fwhm_ns / kinetics.retrieval_peak_ns;
    auto residual = [target](double level) { return relative_width(level) - target; };
    double lo = 1e-10;
    double hi = 1.0;
    while (residual(hi) < 0)
        hi *= 4;
    eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    auto [c0, c1] = toms748_solve(residual, lo, hi, tol, iters);
    double level = 0.5 * (c0 + c1);

    shape_ = 1 + std::numbers::ln2 / level;
    scale_ = kinetics.retrieval_peak_ns / (shape_ - 1);
    log_norm_ = -std::lgamma(shape_) - shape_ * std::log(scale_);
}

double RetrievalKernel::pdf(double delay_ns) const
{
    if (!(delay_ns > 0))
        return 0;
    return std::exp(log_norm_ + (shape_ - 1) * std::log(delay_ns) - delay_ns / scale_);
}

//---------------------------------------------------------------------------//
// Pair density
//---------------------------------------------------------------------------//

PairDensity::PairDensity(CoherenceModel model, PairKinetics const& kinetics,
                         TrialSchedule const& schedule)
    : model_(std::move(model)), kinetics_(kinetics), schedule_(schedule), kernel_(kinetics)
{
    schedule_.validate();
}

double PairDensity::retrieval_start_ns(double t1_ns) const
{
    return std::max(t1_ns + kinetics_.delta0_ns, schedule_.delta_t_ns);
}

double PairDensity::read_gate_end_ns() const
{
    return schedule_.delta_t_ns + std::min(schedule_.read_duration_ns, schedule_.window_ns);
}

double PairDensity::unweighted(double t1_ns, double t2_ns) const
{
    if (!(t1_ns >= 0 && t1_ns < schedule_.write_duration_ns))
        return 0;
    if (!(t2_ns >= read_gate_begin_ns() && t2_ns < read_gate_end_ns()))
        return 0;
    return kernel_.pdf(t2_ns - retrieval_start_ns(t1_ns)) / schedule_.write_duration_ns;
}

double PairDensity::operator()(double t1_ns, double t2_ns) const
{
    double f = unweighted(t1_ns, t2_ns);
    if (f == 0)
        return 0;
    return f * model_(t2_ns - t1_ns);
}

namespace {

// Midpoints and widths of cells of width step covering [begin, end).
std::vector<std::pair<double, double>> cells(double begin, double end, double step)
{
    std::vector<std::pair<double, double>> out;
    for (double lo = begin; lo < end;) {
        double hi = std::min(lo + step, end);
        out.emplace_back(0.5 * (lo + hi), hi - lo);
        lo = begin + step * static_cast<double>(out.size());
    }
    return out;
}

}  // namespace

double PairDensity::integrate(double step_ns) const
{
    if (!(step_ns > 0))
        throw std::invalid_argument("integrate: step must be > 0");
    auto c1 = cells(0, schedule_.write_duration_ns, step_ns);
    auto c2 = cells(read_gate_begin_ns(), read_gate_end_ns(), step_ns);
    double total = 0;
    for (auto [t1, w1] : c1) {
        double row = 0;
        for (auto [t2, w2] : c2)
            row += (*this)(t1, t2) * w2;
        total += row * w1;
    }
    return total;
}

double pair_density(CoherenceModel const& model, PairKinetics const& kinetics,
                    TrialSchedule const& schedule, double t1_ns, double t2_ns)
{
    return PairDensity(model, kinetics, schedule)(t1_ns, t2_ns);
}

std::vector<CurvePoint> pair_probability_curve(CoherenceModel const& model,
                                               PairKinetics const& kinetics,
                                               TrialSchedule schedule,
                                               std::span<double const> delta_t_ns, double step_ns)
{
    std::vector<CurvePoint> out;
    out.reserve(delta_t_ns.size());
    for (double dt : delta_t_ns) {
        if (!(dt >= 0))
            throw std::invalid_argument("delta_t must be >= 0");
        schedule.delta_t_ns = dt;
        out.push_back({dt, PairDensity(model, kinetics, schedule).integrate(step_ns)});
    }
    return out;
}

std::vector<CurvePoint> predict_g12(CoherenceModel const& model, PairKinetics const& kinetics,
                                    TrialSchedule const& schedule,
                                    std::span<double const> delta_t_ns, double scale)
{
    if (delta_t_ns.empty())
        throw std::invalid_argument("predict_g12: empty delta_t list");
    if (!(scale >= 0) || !std::isfinite(scale))
        throw std::invalid_argument("predict_g12: scale must be finite and >= 0");
    auto curve = pair_probability_curve(model, kinetics, schedule, delta_t_ns);
    for (auto& p : curve)
        p.value = 1 + scale * p.value;
    return curve;
}

//---------------------------------------------------------------------------//
// Decoherence time
//---------------------------------------------------------------------------//

DecoherenceFit fit_decoherence_time(std::span<CurvePoint const> curve, double baseline)
{
    if (curve.empty())
        throw std::invalid_argument("fit_decoherence_time: empty curve");
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (!std::isfinite(curve[i].x) || !std::isfinite(curve[i].value))
            throw std::invalid_argument("fit_decoherence_time: non-finite point");
        if (i > 0 && !(curve[i].x > curve[i - 1].x))
            throw std::invalid_argument("fit_decoherence_time: x must be strictly increasing");
    }

    DecoherenceFit fit;
    fit.range_end_ns = curve.back().x;

    std::size_t imax = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].value - baseline > curve[imax].value - baseline)
            imax = i;
    }
    double const peak = curve[imax].value - baseline;
    if (!(peak > 0))
        return fit;
    double const half = 0.5 * peak;
    for (std::size_t j = imax + 1; j < curve.size(); ++j) {
        double y1 = curve[j].value - baseline;
        if (y1 <= half) {
            double y0 = curve[j - 1].value - baseline;
            double x0 = curve[j - 1].x;
            double x1 = curve[j].x;
            fit.tau_d_ns = x0 + (half - y0) * (x1 - x0) / (y1 - y0);
            return fit;
        }
    }
    return fit;
}

}  // namespace paircorr
