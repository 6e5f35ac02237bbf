#include "bayesreloc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "bayesreloc/error.hpp"
#include "bayesreloc/special_functions.hpp"

namespace bayesreloc {
namespace {

constexpr int kMaxNewtonIterations = 100;
constexpr double kRelativeStep = 1e-10;
constexpr double kMinLogGap = 1e-12;
constexpr const char* kCalibrationTag = "bayesreloc-cal-v1";

nlohmann::json fit_to_json(const GammaFit& fit) {
    return {{"shape", fit.model.shape},
            {"scale", fit.model.scale},
            {"log_likelihood", fit.log_likelihood},
            {"iterations", fit.iterations},
            {"ks_statistic", fit.ks_statistic}};
}

GammaFit fit_from_json(const nlohmann::json& j) {
    GammaFit fit;
    fit.model.shape = j.at("shape").get<double>();
    fit.model.scale = j.at("scale").get<double>();
    fit.log_likelihood = j.value("log_likelihood", 0.0);
    fit.iterations = j.value("iterations", 0);
    fit.ks_statistic = j.value("ks_statistic", 0.0);
    if (!(fit.model.shape > 0.0 && std::isfinite(fit.model.shape) && fit.model.scale > 0.0 &&
          std::isfinite(fit.model.scale))) {
        throw Error(ErrorKind::ParseError, "Gamma parameters must be finite and > 0");
    }
    return fit;
}

}  // namespace

GammaFit fit_gamma(std::span<const double> values) {
    if (values.size() < kMinCalibrationPopulation) {
        throw Error(ErrorKind::InsufficientPopulation,
                    "need at least " + std::to_string(kMinCalibrationPopulation) + " values, got " +
                        std::to_string(values.size()));
    }
    double sum = 0.0;
    double sum_log = 0.0;
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::NonPositiveValue, "Gamma fit requires finite values > 0");
        }
        sum += v;
        sum_log += std::log(v);
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    const double s = std::log(mean) - sum_log / n;
    if (!(s > kMinLogGap)) {
        throw Error(ErrorKind::InsufficientVariance, "values are (numerically) constant");
    }

    double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    int iter = 0;
    bool converged = false;
    while (iter < kMaxNewtonIterations) {
        ++iter;
        const double f = std::log(k) - digamma(k) - s;
        const double df = 1.0 / k - trigamma(k);
        double next = k - f / df;
        if (!(next > 0.0)) next = 0.5 * k;
        const double step = std::abs(next - k);
        k = next;
        if (step < kRelativeStep * k) {
            converged = true;
            break;
        }
    }
    if (!converged || !std::isfinite(k)) {
        throw Error(ErrorKind::NoConvergence, "Gamma shape Newton iteration did not converge");
    }

    GammaFit fit;
    fit.model = {k, mean / k};
    fit.iterations = iter;
    double ll = 0.0;
    for (double v : values) ll += gamma_log_pdf(fit.model, v);
    fit.log_likelihood = ll;
    fit.ks_statistic = ks_statistic(values, fit.model);
    return fit;
}

double gamma_cdf(const GammaModel& model, double x) {
    return regularized_gamma_p(model.shape, x / model.scale);
}

double gamma_log_pdf(const GammaModel& model, double x) {
    const double k = model.shape;
    const double theta = model.scale;
    return (k - 1.0) * std::log(x) - x / theta - k * std::log(theta) - std::lgamma(k);
}

double ks_statistic(std::span<const double> values, const GammaModel& model) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = gamma_cdf(model, sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

CalibrationModel calibrate(std::span<const TracePair> scene_traces, const std::string& scene_id) {
    std::vector<double> trans;
    std::vector<double> rot;
    trans.reserve(scene_traces.size());
    rot.reserve(scene_traces.size());
    for (const auto& t : scene_traces) {
        trans.push_back(t.trans_trace);
        rot.push_back(t.rot_trace);
    }
    CalibrationModel model;
    model.trans = fit_gamma(trans);
    model.rot = fit_gamma(rot);
    model.source_scene = scene_id;
    model.population_size = scene_traces.size();
    return model;
}

ZScore z_score(const CalibrationModel& model, double trans_trace, double rot_trace) {
    if (!(trans_trace >= 0.0) || !(rot_trace >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "uncertainty traces must be >= 0");
    }
    ZScore z;
    z.trans_pct = gamma_cdf(model.trans.model, trans_trace);
    z.rot_pct = gamma_cdf(model.rot.model, rot_trace);
    z.combined = (z.trans_pct + z.rot_pct) / 2.0;
    return z;
}

ZScore z_score(const CalibrationModel& model, const UncertaintyEstimate& estimate) {
    return z_score(model, estimate.trans_trace, estimate.rot_trace);
}

std::string format_calibration(const CalibrationModel& model) {
    nlohmann::json j = {{"format", kCalibrationTag},
                        {"scene_id", model.source_scene},
                        {"population_size", model.population_size},
                        {"translation", fit_to_json(model.trans)},
                        {"rotation", fit_to_json(model.rot)}};
    return j.dump(2) + "\n";
}

CalibrationModel parse_calibration(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", std::string()) != kCalibrationTag) {
            throw Error(ErrorKind::ParseError, std::string("missing format tag ") + kCalibrationTag);
        }
        CalibrationModel model;
        model.source_scene = j.at("scene_id").get<std::string>();
        model.population_size = j.at("population_size").get<std::size_t>();
        model.trans = fit_from_json(j.at("translation"));
        model.rot = fit_from_json(j.at("rotation"));
        if (model.population_size < kMinCalibrationPopulation) {
            throw Error(ErrorKind::ParseError, "calibration population below minimum");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("calibration file: ") + e.what());
    }
}

}  // namespace bayesreloc
