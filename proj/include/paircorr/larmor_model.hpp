#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "paircorr/event_model.hpp"

namespace paircorr {

//! Bohr magneton over Planck constant in Hz per gauss (CODATA 2006, 13.996 246 04 GHz/T).
inline constexpr double bohr_magneton_hz_per_gauss = 1.399624604e6;

// K = mu_B g L b / h in Hz, with L in mm and b in G/cm.
double k_from_geometry(double length_mm, double gradient_gauss_per_cm, double lande_g);

enum class Polarization { Unpolarized, ClockPolarized };

//! Stored-coherence channel |F_a, m_a> <-> |F_b, m_b>.
using ZeemanChannel = std::pair<int, int>;

/*!
 * Ground-state Zeeman structure of the stored spin wave.
 *
 * Each channel (m_a, m_b) precesses at mu * K where
 * mu = (g_a m_a - g_b m_b) / g_ref. Defaults are Cs 6S_1/2 F=4 (g=+1/4) and
 * F=3 (g=-1/4), with g_ref = 1/4, so mu = m_a + m_b.
 */
struct ZeemanScheme {
    int f_a = 4;
    int f_b = 3;
    double g_a = 0.25;
    double g_b = -0.25;
    double g_ref = 0.25;
    std::map<ZeemanChannel, double> weights;
    Polarization polarization = Polarization::Unpolarized;

    // Uniform weight over every (m_a, m_b) with |m_a - m_b| <= 2.
    static ZeemanScheme unpolarized();
    // All weight on (0, 0).
    static ZeemanScheme clock_polarized();

    static std::vector<ZeemanChannel> allowed_channels(int f_a, int f_b);

    double relative_precession(ZeemanChannel ch) const
    {
        return (g_a * ch.first - g_b * ch.second) / g_ref;
    }

    // Throws std::invalid_argument on selection-rule or normalization violations.
    void validate() const;
};

struct FieldInhomogeneity {
    double k_hz = 1.1e6;  // linear gradient profile
};

class CoherenceModel {
  public:
    CoherenceModel() : CoherenceModel(ZeemanScheme::unpolarized(), {}) {}
    CoherenceModel(ZeemanScheme scheme, FieldInhomogeneity field,
                   std::optional<double> residual_decay_time_ns = std::nullopt);

    ZeemanScheme const& scheme() const { return scheme_; }
    FieldInhomogeneity const& field() const { return field_; }
    std::optional<double> residual_decay_time_ns() const { return residual_ns_; }

    //! C(T) = sum_ch w * sinc^2(pi mu K T) * exp(-(T/tau_res)^2), in [0, 1].
    double operator()(double storage_ns) const;

  private:
    ZeemanScheme scheme_;
    FieldInhomogeneity field_;
    std::optional<double> residual_ns_;
    // Weights merged by |mu|; sinc^2 is even in mu.
    std::vector<std::pair<double, double>> rate_weights_;
};

// Throws std::domain_error for negative or non-finite T.
double coherence(CoherenceModel const& model, double storage_ns);

//! Timing of the read-out relative to the write.
struct PairKinetics {
    double delta0_ns = 0.0;            // intrinsic Raman delay before retrieval can start
    double retrieval_peak_ns = 50.0;   // mode of the retrieval kernel
    double retrieval_fwhm_ns = 60.0;

    void validate() const;
};

/*!
 * Causal gamma-shaped retrieval kernel with a given peak and FWHM.
 *
 * The shape k is solved numerically on construction so that the density
 * has its maximum at the peak and falls to half maximum 'fwhm' apart.
 */
class RetrievalKernel {
  public:
    explicit RetrievalKernel(PairKinetics const& kinetics);

    double shape() const { return shape_; }
    double scale_ns() const { return scale_; }
    double mean_ns() const { return shape_ * scale_; }

    double pdf(double delay_ns) const;

  private:
    double shape_;
    double scale_;
    double log_norm_;
};

/*!
 * Joint density f(t1, t2) for a correlated pair on the common time axis.
 *
 * f = I_w(t1) g_ret(t2 - max(t1 + delta0, dt)) C(t2 - t1) where I_w is the
 * write envelope normalized to unit area. Zero unless t1 lies in the write
 * pulse and t2 lies in both the read pulse [dt, dt + read) and the field-2
 * detection window.
 */
class PairDensity {
  public:
    PairDensity(CoherenceModel model, PairKinetics const& kinetics, TrialSchedule const& schedule);

    CoherenceModel const& coherence() const { return model_; }
    RetrievalKernel const& kernel() const { return kernel_; }
    TrialSchedule const& schedule() const { return schedule_; }

    double retrieval_start_ns(double t1_ns) const;
    // [start, end) where a field-2 photon can be emitted and detected
    double read_gate_begin_ns() const { return schedule_.delta_t_ns; }
    double read_gate_end_ns() const;

    double operator()(double t1_ns, double t2_ns) const;
    // Same density with C(T) replaced by 1.
    double unweighted(double t1_ns, double t2_ns) const;

    //! Midpoint-rule integral of f over both windows on a step_ns grid.
    double integrate(double step_ns = 1.0) const;

  private:
    CoherenceModel model_;
    PairKinetics kinetics_;
    TrialSchedule schedule_;
    RetrievalKernel kernel_;
};

double pair_density(CoherenceModel const& model, PairKinetics const& kinetics,
                    TrialSchedule const& schedule, double t1_ns, double t2_ns);

struct CurvePoint {
    double x = 0;
    double value = 0;
};

// p~_{1,2}(dt): integrated pair density for each dt.
std::vector<CurvePoint> pair_probability_curve(CoherenceModel const& model,
                                               PairKinetics const& kinetics,
                                               TrialSchedule schedule,
                                               std::span<double const> delta_t_ns,
                                               double step_ns = 1.0);

//! g12_pred(dt) = 1 + scale * p~_{1,2}(dt). Throws for scale < 0 or empty list.
std::vector<CurvePoint> predict_g12(CoherenceModel const& model, PairKinetics const& kinetics,
                                    TrialSchedule const& schedule,
                                    std::span<double const> delta_t_ns, double scale);

struct DecoherenceFit {
    std::optional<double> tau_d_ns;  // empty when the curve never reaches half max
    double range_end_ns = 0;

    bool determined() const { return tau_d_ns.has_value(); }
};

/*!
 * Half-max decoherence time.
 *
 * Subtracts the baseline (1 for g12 curves, 0 for C(T)), locates the
 * maximum and returns the first x after it where the curve reaches half
 * the maximum, linearly interpolated. Points must be sorted by x.
 */
DecoherenceFit fit_decoherence_time(std::span<CurvePoint const> curve, double baseline);

}  // namespace paircorr
