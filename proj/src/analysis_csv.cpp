#include "paircorr/analysis_csv.hpp"

#include <ostream>

#include "paircorr/text_format.hpp"

namespace paircorr {

void write_histogram_csv(CoincidenceHistogram const& hist, std::ostream& os)
{
    bool const diagonal =
        hist.kind() == HistogramKind::Auto1 || hist.kind() == HistogramKind::Auto2;
    os << "t1_ns,t2_ns,probability,sigma\n";
    for (std::size_t b1 = 0; b1 < hist.axis1().bins; ++b1) {
        for (std::size_t b2 = 0; b2 < hist.axis2().bins; ++b2) {
            if (diagonal && b1 != b2)
                continue;
            os << format_sig6(hist.axis1().label_ns(b1)) << ',' << format_sig6(hist.axis2().label_ns(b2))
               << ',' << format_sig6(hist.probability(b1, b2)) << ','
               << format_sig6(hist.sigma(b1, b2)) << '\n';
        }
    }
}

void write_ratio_csv(RatioSurface const& surface, std::ostream& os)
{
    os << "t1_ns,t2_ns,R,sigma_R,defined\n";
    for (std::size_t b1 = 0; b1 < surface.axis1.bins; ++b1) {
        for (std::size_t b2 = 0; b2 < surface.axis2.bins; ++b2) {
            auto i = surface.index(b1, b2);
            os << format_sig6(surface.axis1.label_ns(b1)) << ','
               << format_sig6(surface.axis2.label_ns(b2)) << ',' << format_sig6(surface.r[i]) << ','
               << format_sig6(surface.sigma_r[i]) << ',' << (surface.defined[i] ? 1 : 0) << '\n';
        }
    }
}

void write_g12_csv(double delta_t_ns, G12Estimate const& est, std::ostream& os)
{
    os << "delta_t_ns,g12,sigma\n"
       << format_sig6(delta_t_ns) << ',' << format_sig6(est.g12) << ',' << format_sig6(est.sigma)
       << '\n';
}

void write_ridge_csv(std::span<RidgePoint const> ridge, std::ostream& os)
{
    os << "dt_ns,probability,sigma\n";
    for (auto const& p : ridge)
        os << format_sig6(p.dt_ns) << ',' << format_sig6(p.probability) << ','
           << format_sig6(p.sigma) << '\n';
}

void write_prediction_csv(std::span<CurvePoint const> curve, std::ostream& os)
{
    os << "delta_t_ns,g12_pred\n";
    for (auto const& p : curve)
        os << format_sig6(p.x) << ',' << format_sig6(p.value) << '\n';
}

}  // namespace paircorr
