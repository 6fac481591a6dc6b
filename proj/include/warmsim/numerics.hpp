#pragma once

#include "warmsim/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace warmsim {

inline constexpr double kQuadratureRelTol = 1e-9;
inline constexpr double kInversionTimeTol = 1e-10;
inline constexpr int kInversionBudget = 200;

namespace detail {

inline bool quadrature_converged(double value, double error, double l1, double rel_tol)
{
    return !(error > std::max(rel_tol * std::abs(value), 1e-15 * l1) && error > 1e-300);
}

} // namespace detail

/**
 * Adaptive Gauss-Kronrod (15/31) on a finite interval. Integrable endpoint
 * singularities (s^-0.5 near 0, square-root cusps) defeat it; those fall back
 * to tanh-sinh, which clusters nodes at the endpoints.
 */
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = kQuadratureRelTol, unsigned max_depth = 18)
{
    if (!(b > a))
        return 0.0;
    double error = 0.0;
    double l1 = 0.0;
    double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, max_depth, rel_tol * 0.1, &error, &l1);
    if (!std::isfinite(value) || !detail::quadrature_converged(value, error, l1, rel_tol)) {
        double ts_error = 0.0;
        double ts_l1 = 0.0;
        double ts_value = std::numeric_limits<double>::quiet_NaN();
        try {
            boost::math::quadrature::tanh_sinh<double> ts(15);
            ts_value = ts.integrate(f, a, b, rel_tol * 0.1, &ts_error, &ts_l1);
        } catch (const std::exception&) {
            // keep the Gauss-Kronrod diagnosis
        }
        if (std::isfinite(ts_value) && detail::quadrature_converged(ts_value, ts_error, ts_l1, rel_tol))
            return ts_value;
        if (std::isfinite(ts_value) && ts_error < error) {
            value = ts_value;
            error = ts_error;
        }
    }
    if (!std::isfinite(value))
        throw NumericFailure("quadrature produced a non-finite value on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    if (!detail::quadrature_converged(value, error, l1, rel_tol)) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "quadrature did not converge on [%.6g, %.6g]: value %.6g, error estimate %.3g",
                      a, b, value, error);
        throw NumericFailure(msg);
    }
    return value;
}

/**
 * Smallest u in [lo, hi] with cumulative(u) >= target, for nondecreasing
 * cumulative with derivative rate(u). Safeguarded Newton: a Newton step is
 * taken when it stays inside the bracket, bisection otherwise. Requires
 * cumulative(lo) < target <= cumulative(hi).
 */
template <class Cum, class Rate>
double invert_increasing(Cum&& cumulative, Rate&& rate, double target, double lo, double hi,
                         double time_tol = kInversionTimeTol, int budget = kInversionBudget)
{
    auto tol_at = [time_tol](double x) {
        return std::max(time_tol, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(x));
    };
    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < budget; ++iter) {
        const double value = cumulative(x) - target;
        if (value >= 0.0)
            hi = x;
        else
            lo = x;
        const double tol = tol_at(hi);
        if (hi - lo <= tol)
            return hi;
        const double slope = rate(x);
        double next = (slope > 0.0 && std::isfinite(slope)) ? x - value / slope : lo - 1.0;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        else if (std::abs(next - x) < 0.5 * tol)
            // Newton has stalled inside the tolerance; step across the root to close the bracket.
            next = value >= 0.0 ? std::max(x - 0.5 * tol, 0.5 * (lo + x)) : std::min(x + 0.5 * tol, 0.5 * (x + hi));
        x = next;
    }
    throw NumericFailure("hazard inversion exceeded its iteration budget");
}

} // namespace warmsim
