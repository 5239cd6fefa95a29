#pragma once

#include <iosfwd>
#include <span>

#include "paircorr/coincidence.hpp"
#include "paircorr/larmor_model.hpp"

namespace paircorr {

// All floats are written with 6 significant digits; times on the common axis.

// "t1_ns,t2_ns,probability,sigma"; auto histograms emit their diagonal only.
void write_histogram_csv(CoincidenceHistogram const& hist, std::ostream& os);

// "t1_ns,t2_ns,R,sigma_R,defined"
void write_ratio_csv(RatioSurface const& surface, std::ostream& os);

// "delta_t_ns,g12,sigma"
void write_g12_csv(double delta_t_ns, G12Estimate const& est, std::ostream& os);

// "dt_ns,probability,sigma"
void write_ridge_csv(std::span<RidgePoint const> ridge, std::ostream& os);

// "delta_t_ns,g12_pred"
void write_prediction_csv(std::span<CurvePoint const> curve, std::ostream& os);

}  // namespace paircorr
