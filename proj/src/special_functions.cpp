#include "bayesreloc/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bayesreloc/error.hpp"

namespace bayesreloc {
namespace {

constexpr double kRecurrenceFloor = 6.0;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

double series_p(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(a * std::log(x) - x - std::lgamma(a));
}

double continued_fraction_q(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(a * std::log(x) - x - std::lgamma(a)) * h;
}

}  // namespace

double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, "digamma is defined here for finite x > 0");
    }
    double shift = 0.0;
    while (x < kRecurrenceFloor) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // -sum B_2n / (2n x^2n), n = 1..8
    const double tail =
        inv2 * (1.0 / 12 -
                inv2 * (1.0 / 120 -
                        inv2 * (1.0 / 252 -
                                inv2 * (1.0 / 240 -
                                        inv2 * (1.0 / 132 -
                                                inv2 * (691.0 / 32760 -
                                                        inv2 * (1.0 / 12 - inv2 * 3617.0 / 8160)))))));
    return shift + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw Error(ErrorKind::InvalidArgument, "trigamma is defined here for finite x > 0");
    }
    double shift = 0.0;
    while (x < kRecurrenceFloor) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_2n / x^(2n+1), n = 1..8
    const double tail =
        inv * inv2 *
        (1.0 / 6 -
         inv2 * (1.0 / 30 -
                 inv2 * (1.0 / 42 -
                         inv2 * (1.0 / 30 -
                                 inv2 * (5.0 / 66 -
                                         inv2 * (691.0 / 2730 - inv2 * (7.0 / 6 - inv2 * 3617.0 / 510)))))));
    return shift + inv + 0.5 * inv2 + tail;
}

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw Error(ErrorKind::InvalidArgument, "incomplete gamma requires shape a > 0");
    }
    if (std::isnan(x) || x < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "incomplete gamma requires x >= 0");
    }
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return std::min(1.0, series_p(a, x));
    return std::max(0.0, 1.0 - continued_fraction_q(a, x));
}

}  // namespace bayesreloc
