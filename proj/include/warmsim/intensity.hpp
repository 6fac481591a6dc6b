#pragma once

#include "warmsim/errors.hpp"
#include "warmsim/numerics.hpp"
#include "warmsim/rate_map.hpp"
#include "warmsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace warmsim {

/// A delta term of the generalized intensity: survival is multiplied by exp(-weight) at `location`.
struct Atom
{
    double location = 0.0;
    double weight = 0.0;
};

/// A point mass expressed as the jump of the distribution function.
struct Jump
{
    double location = 0.0;
    double mass = 0.0;
};

/**
 * Lifetime distribution defined by a generalized intensity: a continuous
 * rate map plus weighted delta terms at the discontinuity points of F.
 *
 *   H(s) = integral_0^s lambda(v) dv + sum_{a_i <= s} w_i,   F(s) = 1 - exp(-H(s)).
 *
 * An optional support bound B forces F(B) = 1 (an infinite delta weight at B).
 * Instances are immutable after construction.
 */
class GeneralizedIntensity
{
  public:
    GeneralizedIntensity() = default;

    explicit GeneralizedIntensity(RateMap continuous, std::vector<Atom> atoms = {},
                                  std::optional<double> support_bound = std::nullopt)
        : continuous_(std::move(continuous)), atoms_(std::move(atoms)), support_bound_(support_bound)
    {
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            const auto& a = atoms_[i];
            if (!(a.location > 0.0) || !std::isfinite(a.location))
                throw InvalidSpec("atom locations must be finite and > 0");
            if (!(a.weight > 0.0) || !std::isfinite(a.weight))
                throw InvalidSpec("atom weights must be finite and > 0");
            if (i > 0 && !(a.location > atoms_[i - 1].location))
                throw InvalidSpec("atom locations must be strictly increasing");
        }
        if (support_bound_) {
            if (!(*support_bound_ >= 0.0) || !std::isfinite(*support_bound_))
                throw InvalidSpec("support bound must be finite and >= 0");
            if (!atoms_.empty() && atoms_.back().location >= *support_bound_)
                throw InvalidSpec("atoms must lie strictly before the support bound");
        }
    }

    /// Point mass 1 at `location` (a deterministic duration).
    static GeneralizedIntensity deterministic(double location)
    {
        return GeneralizedIntensity(RateMap::zero(), {}, location);
    }

    const RateMap& continuous() const noexcept { return continuous_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const std::optional<double>& support_bound() const noexcept { return support_bound_; }

    /// Right-continuous cumulative hazard H(s); +inf at and beyond the support bound.
    double cumulative_hazard(double s) const
    {
        if (s < 0.0)
            return 0.0;
        if (support_bound_ && s >= *support_bound_)
            return kInf;
        return continuous_.cumulative(s) + atom_weight_through(s, true);
    }

    /// Left limit H(s-).
    double cumulative_hazard_left(double s) const
    {
        if (s <= 0.0)
            return 0.0;
        if (support_bound_ && s > *support_bound_)
            return kInf;
        return continuous_.cumulative(s) + atom_weight_through(s, false);
    }

    double survival(double s) const { return std::exp(-cumulative_hazard(s)); }
    double survival_left(double s) const { return std::exp(-cumulative_hazard_left(s)); }

    /// F(s) = 1 - exp(-H(s)).
    double cdf(double s) const
    {
        if (s < 0.0)
            throw InvalidSpec("cdf evaluated at negative time");
        return -std::expm1(-cumulative_hazard(s));
    }

    double cdf_left(double s) const { return -std::expm1(-cumulative_hazard_left(s)); }

    /// Total continuous + atomic hazard reachable; infinite means total mass 1.
    bool is_proper() const
    {
        if (support_bound_)
            return true;
        return std::isinf(continuous_.integral(0.0, kInf));
    }

    /**
     * Smallest t with H(t) >= mark. This is the inverse-transform sample for
     * a standard exponential mark.
     */
    double quantile_from_mark(double mark) const
    {
        if (!(mark >= 0.0))
            throw InvalidSpec("exponential mark must be >= 0");
        if (mark == 0.0)
            return 0.0;
        double from = 0.0;
        double accumulated = 0.0;
        for (const auto& atom : atoms_) {
            const double piece = continuous_.integral(from, atom.location);
            if (accumulated + piece >= mark)
                return std::min(atom.location, continuous_.inverse_from(from, mark - accumulated));
            accumulated += piece;
            if (accumulated + atom.weight >= mark)
                return atom.location;
            accumulated += atom.weight;
            from = atom.location;
        }
        const double end = support_bound_ ? *support_bound_ : kInf;
        const double piece = continuous_.integral(from, end);
        if (accumulated + piece >= mark && piece > 0.0) {
            const double t = continuous_.inverse_from(from, mark - accumulated);
            return std::min(t, end);
        }
        if (support_bound_)
            return *support_bound_;
        throw MassDeficient("cumulative hazard saturates at " + std::to_string(accumulated + piece) +
                            " below the requested mark; distribution has mass deficit");
    }

    template <class Stream>
    double sample(Stream& rng) const
    {
        if (!is_proper())
            throw MassDeficient("cannot sample from a mass-deficient intensity");
        return quantile_from_mark(rng.exponential());
    }

    /// Points where the survival function is not smooth: atoms, kinks, support bound.
    std::vector<double> singular_points() const
    {
        std::vector<double> pts;
        for (const auto& a : atoms_)
            pts.push_back(a.location);
        for (double k : continuous_.kinks())
            pts.push_back(k);
        if (support_bound_)
            pts.push_back(*support_bound_);
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

  private:
    double atom_weight_through(double s, bool inclusive) const
    {
        double total = 0.0;
        for (const auto& a : atoms_) {
            if (a.location < s || (inclusive && a.location == s))
                total += a.weight;
            else
                break;
        }
        return total;
    }

    RateMap continuous_;
    std::vector<Atom> atoms_;
    std::optional<double> support_bound_;
};

/// F(s) of the generalized intensity.
inline double eval_cdf(const GeneralizedIntensity& gi, double s) { return gi.cdf(s); }

/**
 * Builds the generalized intensity whose d.f. has the given jumps on top of
 * `continuous`. Each weight is the survival ratio w_i = -ln(S(a_i+)/S(a_i-)),
 * so F rebuilt from H reproduces every jump mass exactly. A jump that
 * exhausts the remaining survival becomes the support bound.
 */
inline GeneralizedIntensity atoms_from_jumps(std::vector<Jump> jumps, RateMap continuous)
{
    std::sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.location < b.location; });
    std::vector<Atom> atoms;
    std::optional<double> bound;
    double atom_total = 0.0;
    for (std::size_t i = 0; i < jumps.size(); ++i) {
        const auto& j = jumps[i];
        if (bound)
            throw InvalidSpec("jump at " + std::to_string(j.location) + " lies beyond a jump that exhausts all mass");
        if (!(j.location > 0.0) || !std::isfinite(j.location))
            throw InvalidSpec("jump locations must be finite and > 0");
        if (i > 0 && !(j.location > jumps[i - 1].location))
            throw InvalidSpec("jump locations must be distinct");
        if (!(j.mass > 0.0))
            throw InvalidSpec("jump masses must be > 0");
        const double survival_before = std::exp(-(continuous.cumulative(j.location) + atom_total));
        const double ratio = j.mass / survival_before;
        if (ratio > 1.0 + 1e-12)
            throw InvalidSpec("jump mass " + std::to_string(j.mass) + " at " + std::to_string(j.location) +
                              " exceeds the remaining survival " + std::to_string(survival_before));
        if (ratio >= 1.0 - 1e-12) {
            bound = j.location;
            continue;
        }
        const double w = -std::log1p(-ratio);
        atoms.push_back({j.location, w});
        atom_total += w;
    }
    return GeneralizedIntensity(std::move(continuous), std::move(atoms), bound);
}

template <class Stream>
double sample(const GeneralizedIntensity& gi, Stream& rng)
{
    return gi.sample(rng);
}

namespace detail {

/**
 * Local power-law decay exponent of g far in the tail, measured between
 * 10x and 100x the point where the survival drops to 1e-6.
 */
template <class G>
double tail_exponent(const G& g, double reference)
{
    const double s1 = 10.0 * reference;
    const double s2 = 100.0 * reference;
    const double g1 = g(s1);
    const double g2 = g(s2);
    if (g2 <= 0.0 || g1 <= 0.0)
        return kInf; // below double resolution: faster than any power
    return -(std::log(g2) - std::log(g1)) / std::log(s2 / s1);
}

inline constexpr double kTailExponentMargin = 1.0 + 1e-3;

} // namespace detail

/**
 * Integral over [0, inf) of s^(k-1) * S(s) for k > 0, where S is the
 * survival of `gi`. Atoms split the integration range; the far tail beyond
 * the quadrature range is closed with the local power-law estimate.
 * Throws Divergent if the integrand does not decay faster than 1/s.
 */
inline double weighted_survival_integral(const GeneralizedIntensity& gi, double k)
{
    if (!(k > 0.0))
        throw InvalidSpec("moment order must be > 0");
    auto g = [&gi, k](double s) {
        const double surv = gi.survival(s);
        if (surv == 0.0)
            return 0.0;
        return (k == 1.0 ? 1.0 : std::pow(s, k - 1.0)) * surv;
    };

    double end = kInf;
    if (gi.support_bound()) {
        end = *gi.support_bound();
    } else {
        if (!gi.is_proper())
            throw Divergent("survival does not vanish (mass deficit): integral diverges");
        const double reference = std::max(gi.quantile_from_mark(std::log(1e6)), 1e-12);
        const double p = detail::tail_exponent(g, reference);
        if (!(p > detail::kTailExponentMargin))
            {
            std::ostringstream msg;
            msg << "integrand s^" << k - 1.0 << " S(s) decays like s^" << -p << "; integral diverges";
            throw Divergent(msg.str());
        }
        end = -1.0; // resolved below
    }

    std::vector<double> cuts{0.0};
    for (double p : gi.singular_points())
        if (p > 0.0 && (end < 0.0 || p < end))
            cuts.push_back(p);

    double total = 0.0;
    if (end >= 0.0) {
        cuts.push_back(end);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            total += integrate(g, cuts[i], cuts[i + 1]);
        return total;
    }

    // Unbounded support: integrate through the singular points, then march
    // over geometrically growing panels until the remainder is negligible.
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        total += integrate(g, cuts[i], cuts[i + 1]);
    double lo = cuts.back();
    double width = std::max(gi.quantile_from_mark(std::log(2.0)), 1e-6);
    width = std::max(width, 0.5 * lo);
    for (int panel = 0; panel < 400; ++panel) {
        const double hi = lo + width;
        const double piece = integrate(g, lo, hi);
        total += piece;
        lo = hi;
        width *= 2.0;
        if (piece <= 1e-10 * total) {
            const double p = detail::tail_exponent(g, lo / 10.0);
            if (std::isinf(p) || g(lo) == 0.0)
                return total;
            // Power-law tail: integral_lo^inf g ~ g(lo) * lo / (p - 1).
            if (p > detail::kTailExponentMargin) {
                const double rest = g(lo) * lo / (p - 1.0);
                if (rest <= 1e-10 * total)
                    return total + rest;
            }
        }
    }
    throw NumericFailure("survival tail integral did not settle");
}

/// E[xi^ell] = ell * integral s^(ell-1) S(s) ds; exact sums for purely atomic laws.
inline double moment(const GeneralizedIntensity& gi, double ell)
{
    if (!(ell > 0.0))
        throw InvalidSpec("moment order must be > 0");
    if (gi.continuous().is_zero()) {
        if (!gi.support_bound())
            throw Divergent("purely atomic intensity without support bound has a mass deficit");
        double survival = 1.0;
        double total = 0.0;
        for (const auto& a : gi.atoms()) {
            const double mass = survival * -std::expm1(-a.weight);
            total += mass * std::pow(a.location, ell);
            survival -= mass;
        }
        total += survival * std::pow(*gi.support_bound(), ell);
        return total;
    }
    return ell * weighted_survival_integral(gi, ell);
}

/// Moment vector C_j^(n)(ell): index [element][phase], phase 1 = work, 0 = repair.
struct MomentVector
{
    double entries[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double order = 1.0;

    double& at(int element, int phase) { return entries[element][phase]; }
    double at(int element, int phase) const { return entries[element][phase]; }
};

} // namespace warmsim
