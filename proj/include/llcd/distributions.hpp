/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#ifndef LLCD_DISTRIBUTIONS_HPP_
#define LLCD_DISTRIBUTIONS_HPP_

// Reference distributions for test thresholds. Quantiles are obtained by
// bisection on the CDF so they are reproducible to the last bit.

#include "llcd/core.hpp"

#include <cmath>
#include <limits>

namespace llcd::dist {

namespace detail {

inline constexpr int kMaxIter = 1000;
inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
inline double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            return h;
        }
    }
    throw NumericError("incomplete beta: continued fraction did not converge");
}

inline double gamma_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericError("incomplete gamma: series did not converge");
}

// Upper regularized gamma Q(a, x) by continued fraction.
inline double gamma_continued_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) {
            return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
        }
    }
    throw NumericError("incomplete gamma: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw NumericError("incomplete_beta: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Regularized lower incomplete gamma P(a, x).
inline double incomplete_gamma_lower(double a, double x) {
    if (a <= 0.0) throw NumericError("incomplete_gamma: shape must be positive");
    if (x <= 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_series(a, x);
    return 1.0 - detail::gamma_continued_fraction(a, x);
}

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
inline double incomplete_gamma_upper(double a, double x) {
    if (a <= 0.0) throw NumericError("incomplete_gamma: shape must be positive");
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_series(a, x);
    return detail::gamma_continued_fraction(a, x);
}

/// P(T > t) for Student t with `df` degrees of freedom (df may be fractional).
inline double student_t_sf(double t, double df) {
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t >= 0.0 ? tail : 1.0 - tail;
}

/// P(X > x) for chi-square with `df` degrees of freedom.
inline double chi_square_sf(double x, double df) { return incomplete_gamma_upper(0.5 * df, 0.5 * x); }

namespace detail {

// Smallest x in [lo, inf) with sf(x) <= alpha, for a decreasing survival function.
template <typename Sf>
double invert_survival(Sf sf, double alpha, double lo) {
    double hi = lo + 1.0;
    int grow = 0;
    while (sf(hi) > alpha) {
        lo = hi;
        hi = 2.0 * hi + 1.0;
        if (++grow > 200) throw NumericError("quantile: bracket expansion failed");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (sf(mid) > alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Upper-alpha quantile of Student t: P(T > q) = alpha.
inline double student_t_upper_quantile(double alpha, double df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw NumericError("student_t_upper_quantile: alpha must lie in (0,1)");
    if (!(df > 0.0)) throw NumericError("student_t_upper_quantile: df must be positive");
    if (alpha > 0.5) return -student_t_upper_quantile(1.0 - alpha, df);
    if (alpha == 0.5) return 0.0;
    return detail::invert_survival([df](double t) { return student_t_sf(t, df); }, alpha, 0.0);
}

/// Upper-alpha quantile of chi-square: P(X > q) = alpha.
inline double chi_square_upper_quantile(double alpha, double df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw NumericError("chi_square_upper_quantile: alpha must lie in (0,1)");
    if (!(df > 0.0)) throw NumericError("chi_square_upper_quantile: df must be positive");
    return detail::invert_survival([df](double x) { return chi_square_sf(x, df); }, alpha, 0.0);
}

}  // namespace llcd::dist

#endif  // LLCD_DISTRIBUTIONS_HPP_
