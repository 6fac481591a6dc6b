#pragma once

#include "warmsim/errors.hpp"
#include "warmsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace warmsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// lambda(s) = rate
struct ConstantRate
{
    double rate = 0.0;
};

/// lambda(s) = gamma / (1 + s); the lower-bound shape of the classical warm-standby condition.
struct HyperbolicRate
{
    double gamma = 1.0;
};

/// lambda(s) = (shape / scale) * (s / scale)^(shape - 1)
struct WeibullRate
{
    double shape = 1.0;
    double scale = 1.0;
};

/// Piecewise-constant rate: rates[i] on [breakpoints[i-1], breakpoints[i]).
struct PiecewiseRate
{
    std::vector<double> breakpoints;
    std::vector<double> rates;
};

/// Arbitrary rate function; cumulative values come from quadrature.
struct CustomRate
{
    std::function<double(double)> rate;
    std::vector<double> kinks; ///< points where the rate is not smooth
};

/**
 * The continuous part of a (generalized) intensity: a nonnegative rate map
 * s -> lambda(s) on s >= 0 together with its integral. Every built-in family
 * has a closed-form integral and inverse; CustomRate falls back to numerics.
 */
class RateMap
{
  public:
    using Family = std::variant<ConstantRate, HyperbolicRate, WeibullRate, PiecewiseRate, CustomRate>;

    RateMap() : family_(ConstantRate{0.0}) {}
    RateMap(ConstantRate f) : family_(f) { validate(); }
    RateMap(HyperbolicRate f) : family_(f) { validate(); }
    RateMap(WeibullRate f) : family_(f) { validate(); }
    RateMap(PiecewiseRate f) : family_(std::move(f)) { validate(); }
    RateMap(CustomRate f) : family_(std::move(f)) { validate(); }

    static RateMap zero() { return RateMap(ConstantRate{0.0}); }

    const Family& family() const noexcept { return family_; }

    bool is_zero() const
    {
        if (auto* c = std::get_if<ConstantRate>(&family_))
            return c->rate == 0.0;
        if (auto* p = std::get_if<PiecewiseRate>(&family_))
            return std::all_of(p->rates.begin(), p->rates.end(), [](double r) { return r == 0.0; });
        return false;
    }

    /// True when the rate is constant between kinks().
    bool is_piecewise_constant() const
    {
        return std::holds_alternative<ConstantRate>(family_) || std::holds_alternative<PiecewiseRate>(family_);
    }

    double rate(double s) const
    {
        return std::visit(
            [s](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantRate>) {
                    return f.rate;
                } else if constexpr (std::is_same_v<T, HyperbolicRate>) {
                    return f.gamma / (1.0 + s);
                } else if constexpr (std::is_same_v<T, WeibullRate>) {
                    if (s <= 0.0)
                        return f.shape < 1.0 ? kInf : (f.shape == 1.0 ? 1.0 / f.scale : 0.0);
                    return f.shape / f.scale * std::pow(s / f.scale, f.shape - 1.0);
                } else if constexpr (std::is_same_v<T, PiecewiseRate>) {
                    const auto it = std::upper_bound(f.breakpoints.begin(), f.breakpoints.end(), s);
                    return f.rates[static_cast<std::size_t>(it - f.breakpoints.begin())];
                } else {
                    const double r = f.rate(s);
                    if (!(r >= 0.0))
                        throw InvalidSpec("custom rate is negative or NaN at s = " + std::to_string(s));
                    return r;
                }
            },
            family_);
    }

    /// Integral of the rate over [a, b], 0 <= a <= b; +inf allowed for b.
    double integral(double a, double b) const
    {
        if (!(b > a))
            return 0.0;
        return std::visit(
            [this, a, b](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantRate>) {
                    return f.rate == 0.0 ? 0.0 : f.rate * (b - a);
                } else if constexpr (std::is_same_v<T, HyperbolicRate>) {
                    return f.gamma * std::log1p((b - a) / (1.0 + a));
                } else if constexpr (std::is_same_v<T, WeibullRate>) {
                    return std::pow(b / f.scale, f.shape) - std::pow(a / f.scale, f.shape);
                } else if constexpr (std::is_same_v<T, PiecewiseRate>) {
                    double total = 0.0;
                    double lo = a;
                    auto it = std::upper_bound(f.breakpoints.begin(), f.breakpoints.end(), a);
                    while (lo < b) {
                        const auto idx = static_cast<std::size_t>(it - f.breakpoints.begin());
                        const double hi = it == f.breakpoints.end() ? b : std::min(b, *it);
                        if (f.rates[idx] != 0.0)
                            total += f.rates[idx] * (hi - lo);
                        lo = hi;
                        if (it != f.breakpoints.end())
                            ++it;
                    }
                    return total;
                } else {
                    return integrate_custom(f, a, b);
                }
            },
            family_);
    }

    double cumulative(double s) const { return integral(0.0, s); }

    /**
     * Smallest s >= from with integral(from, s) >= h, or +inf if the rate
     * never accumulates h beyond `from`.
     */
    double inverse_from(double from, double h) const
    {
        if (h <= 0.0)
            return from;
        return std::visit(
            [this, from, h](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantRate>) {
                    return f.rate > 0.0 ? from + h / f.rate : kInf;
                } else if constexpr (std::is_same_v<T, HyperbolicRate>) {
                    return from + (1.0 + from) * std::expm1(h / f.gamma);
                } else if constexpr (std::is_same_v<T, WeibullRate>) {
                    const double base = std::pow(from / f.scale, f.shape) + h;
                    return f.scale * std::pow(base, 1.0 / f.shape);
                } else if constexpr (std::is_same_v<T, PiecewiseRate>) {
                    double lo = from;
                    double left = h;
                    auto it = std::upper_bound(f.breakpoints.begin(), f.breakpoints.end(), from);
                    for (;;) {
                        const auto idx = static_cast<std::size_t>(it - f.breakpoints.begin());
                        const double r = f.rates[idx];
                        if (it == f.breakpoints.end())
                            return r > 0.0 ? lo + left / r : kInf;
                        const double mass = r * (*it - lo);
                        if (mass >= left && r > 0.0)
                            return std::min(*it, lo + left / r);
                        left -= mass;
                        lo = *it;
                        ++it;
                    }
                } else {
                    return inverse_custom(from, h);
                }
            },
            family_);
    }

    /// Points in (0, inf) where the rate has a kink or jump.
    std::vector<double> kinks() const
    {
        if (auto* p = std::get_if<PiecewiseRate>(&family_))
            return p->breakpoints;
        if (auto* c = std::get_if<CustomRate>(&family_))
            return c->kinks;
        return {};
    }

    /// First kink strictly after s, or +inf.
    double next_kink_after(double s) const
    {
        const std::vector<double>* k = nullptr;
        if (auto* p = std::get_if<PiecewiseRate>(&family_))
            k = &p->breakpoints;
        else if (auto* c = std::get_if<CustomRate>(&family_))
            k = &c->kinks;
        if (!k)
            return kInf;
        const auto it = std::upper_bound(k->begin(), k->end(), s);
        return it == k->end() ? kInf : *it;
    }

    /**
     * Exponential decay rate of exp(-integral) in the far tail, i.e.
     * liminf integral(0, s) / s. Zero for polynomial tails.
     */
    double tail_rate() const
    {
        return std::visit(
            [](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantRate>)
                    return f.rate;
                else if constexpr (std::is_same_v<T, HyperbolicRate>)
                    return 0.0;
                else if constexpr (std::is_same_v<T, WeibullRate>)
                    return f.shape > 1.0 ? kInf : (f.shape == 1.0 ? 1.0 / f.scale : 0.0);
                else if constexpr (std::is_same_v<T, PiecewiseRate>)
                    return f.rates.back();
                else
                    return 0.0; // unknown: report the conservative value
            },
            family_);
    }

  private:
    void validate() const
    {
        std::visit(
            [](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, ConstantRate>) {
                    if (!(f.rate >= 0.0) || !std::isfinite(f.rate))
                        throw InvalidSpec("constant rate must be finite and >= 0");
                } else if constexpr (std::is_same_v<T, HyperbolicRate>) {
                    if (!(f.gamma > 0.0) || !std::isfinite(f.gamma))
                        throw InvalidSpec("hyperbolic gamma must be finite and > 0");
                } else if constexpr (std::is_same_v<T, WeibullRate>) {
                    if (!(f.shape > 0.0) || !(f.scale > 0.0) || !std::isfinite(f.shape) || !std::isfinite(f.scale))
                        throw InvalidSpec("weibull shape and scale must be finite and > 0");
                } else if constexpr (std::is_same_v<T, PiecewiseRate>) {
                    if (f.rates.size() != f.breakpoints.size() + 1)
                        throw InvalidSpec("piecewise rate needs exactly one more rate than breakpoints");
                    for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
                        if (!(f.breakpoints[i] > 0.0) || (i > 0 && !(f.breakpoints[i] > f.breakpoints[i - 1])))
                            throw InvalidSpec("piecewise breakpoints must be positive and strictly increasing");
                    }
                    for (double r : f.rates)
                        if (!(r >= 0.0) || !std::isfinite(r))
                            throw InvalidSpec("piecewise rates must be finite and >= 0");
                } else {
                    if (!f.rate)
                        throw InvalidSpec("custom rate function is empty");
                }
            },
            family_);
    }

    double integrate_custom(const CustomRate& f, double a, double b) const
    {
        if (std::isinf(b))
            throw NumericFailure("custom rate integral to infinity is not supported");
        std::vector<double> cuts{a};
        for (double k : f.kinks)
            if (k > a && k < b)
                cuts.push_back(k);
        cuts.push_back(b);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            total += integrate([this](double s) { return rate(s); }, cuts[i], cuts[i + 1]);
        return total;
    }

    double inverse_custom(double from, double h) const
    {
        // Expand a bracket geometrically, then bisect/Newton inside it.
        double hi = from + 1.0;
        double step = 1.0;
        while (integral(from, hi) < h) {
            step *= 2.0;
            hi = from + step;
            if (step > 1e12)
                return kInf;
        }
        return invert_increasing([&](double s) { return integral(from, s); }, [&](double s) { return rate(s); }, h,
                                 from, hi);
    }

    Family family_;
};

} // namespace warmsim
