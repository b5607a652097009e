#pragma once

#include "nompcfar/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace nompcfar::detail {

inline constexpr double kQuadAbsTol = 1e-10;

/// Adaptive 61-point Gauss-Kronrod on [a, b].
template <class F>
double integrate(F&& f, double a, double b, const char* what) {
    if (!(b > a))
        return 0.0;
    double error = 0.0;
    double l1 = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-10, &error, &l1);
    if (!std::isfinite(value) || error > kQuadAbsTol + 1e-9 * std::fabs(value))
        throw NumericalFailure(std::string(what) + ": quadrature did not converge (error estimate " +
                               std::to_string(error) + ")");
    return value;
}

/// E[h(X)] for a distribution given by its density and quantiles; the range is
/// split at fixed quantiles so narrow densities are never missed. Tail mass
/// beyond the outermost breakpoints is below 1e-15.
template <class H, class Pdf, class LowerQ, class UpperQ>
double expectation(H&& h, Pdf&& pdf, LowerQ&& lower_quantile, UpperQ&& upper_quantile, const char* what) {
    constexpr std::array<double, 5> lower_p{1e-15, 1e-8, 1e-3, 0.05, 0.5};
    constexpr std::array<double, 4> upper_q{0.05, 1e-3, 1e-8, 1e-15};
    std::array<double, 9> pts{};
    for (std::size_t i = 0; i < lower_p.size(); ++i)
        pts[i] = lower_quantile(lower_p[i]);
    for (std::size_t i = 0; i < upper_q.size(); ++i)
        pts[lower_p.size() + i] = upper_quantile(upper_q[i]);
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    auto integrand = [&](double x) {
        const double w = pdf(x);
        return w == 0.0 ? 0.0 : h(x) * w;
    };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        total += integrate(integrand, pts[i], pts[i + 1], what);
    return total;
}

/// E[h(X)], X ~ Gamma(shape, scale).
template <class H>
double gamma_expectation(H&& h, double shape, double scale, const char* what) {
    using boost::math::gamma_p_derivative;
    using boost::math::gamma_p_inv;
    using boost::math::gamma_q_inv;
    return expectation(
        h, [&](double x) { return x <= 0.0 ? 0.0 : gamma_p_derivative(shape, x / scale) / scale; },
        [&](double p) { return scale * gamma_p_inv(shape, p); },
        [&](double q) { return scale * gamma_q_inv(shape, q); }, what);
}

/// E[h(X)], X = -ln V with V ~ Beta(a, b). Working in X keeps integrands of
/// the form V^alpha smooth at V -> 0 for any alpha.
template <class H>
double neg_log_beta_expectation(H&& h, double a, double b, const char* what) {
    using boost::math::ibeta_derivative;
    using boost::math::ibeta_inv;
    using boost::math::ibetac_inv;
    return expectation(
        h,
        [&](double x) {
            if (x <= 0.0)
                return 0.0;
            const double v = std::exp(-x);
            return v <= 0.0 ? 0.0 : ibeta_derivative(a, b, v) * v;
        },
        [&](double p) { return -std::log(ibetac_inv(a, b, p)); },
        [&](double q) { return -std::log(ibeta_inv(a, b, q)); }, what);
}

} // namespace nompcfar::detail
