#pragma once

namespace bayesreloc {

// psi(x) for x > 0: upward recurrence to x >= 6, then the asymptotic series.
double digamma(double x);
// psi'(x) for x > 0, same scheme.
double trigamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0. Series for
// x < a + 1, Lentz continued fraction for Q otherwise.
double regularized_gamma_p(double a, double x);

}  // namespace bayesreloc
