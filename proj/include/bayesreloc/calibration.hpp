#pragma once

// Converts raw uncertainty traces into comparable percentile scores by fitting
// a Gamma distribution per scene and per channel (translation, rotation).

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bayesreloc/mc_posterior.hpp"

namespace bayesreloc {

inline constexpr std::size_t kMinCalibrationPopulation = 8;

struct GammaModel {
    double shape = 1.0;  // k
    double scale = 1.0;  // theta

    double mean() const noexcept { return shape * scale; }
};

struct GammaFit {
    GammaModel model;
    double log_likelihood = 0.0;
    int iterations = 0;
    double ks_statistic = 0.0;  // one-sample KS distance of the population to the fit
};

// Maximum-likelihood fit: Newton iteration on ln k - psi(k) = s with
// s = ln(mean) - mean(ln x), started from the closed-form approximation.
// Throws NonPositiveValue, InsufficientPopulation, InsufficientVariance,
// NoConvergence.
GammaFit fit_gamma(std::span<const double> values);

// P(k, x / theta). Requires x >= 0.
double gamma_cdf(const GammaModel& model, double x);
double gamma_log_pdf(const GammaModel& model, double x);

// sup |F_empirical - F_model| over the sample.
double ks_statistic(std::span<const double> values, const GammaModel& model);

struct CalibrationModel {
    GammaFit trans;
    GammaFit rot;
    std::string source_scene;
    std::size_t population_size = 0;
};

struct ZScore {
    double trans_pct = 0.0;
    double rot_pct = 0.0;
    double combined = 0.0;  // (trans_pct + rot_pct) / 2; lower is more confident
};

struct TracePair {
    double trans_trace = 0.0;
    double rot_trace = 0.0;
};

CalibrationModel calibrate(std::span<const TracePair> scene_traces, const std::string& scene_id);

ZScore z_score(const CalibrationModel& model, const UncertaintyEstimate& estimate);
ZScore z_score(const CalibrationModel& model, double trans_trace, double rot_trace);

// JSON document tagged "bayesreloc-cal-v1".
std::string format_calibration(const CalibrationModel& model);
CalibrationModel parse_calibration(const std::string& text);

}  // namespace bayesreloc
