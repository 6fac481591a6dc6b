#pragma once

#include "warmsim/envelope.hpp"
#include "warmsim/errors.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/state.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace warmsim {

/// Piecewise-constant factor of the other element's clock: factors[i] on [breakpoints[i-1], breakpoints[i]).
struct ModulatorCurve
{
    std::vector<double> breakpoints;
    std::vector<double> factors{1.0};

    ModulatorCurve() = default;
    explicit ModulatorCurve(double factor) : factors{factor} { validate(); }
    ModulatorCurve(std::vector<double> bps, std::vector<double> fs) : breakpoints(std::move(bps)), factors(std::move(fs))
    {
        validate();
    }

    void validate() const
    {
        if (factors.size() != breakpoints.size() + 1)
            throw InvalidSpec("modulator needs exactly one more factor than breakpoints");
        for (std::size_t i = 0; i < breakpoints.size(); ++i)
            if (!(breakpoints[i] > 0.0) || (i > 0 && !(breakpoints[i] > breakpoints[i - 1])))
                throw InvalidSpec("modulator breakpoints must be positive and strictly increasing");
        for (double f : factors)
            if (!(f > 0.0) || !std::isfinite(f))
                throw InvalidSpec("modulator factors must be finite and > 0");
    }

    double at(double other_clock) const
    {
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), other_clock);
        return factors[static_cast<std::size_t>(it - breakpoints.begin())];
    }

    bool is_constant() const { return breakpoints.empty(); }

    double min_factor() const { return *std::min_element(factors.begin(), factors.end()); }
    double max_factor() const { return *std::max_element(factors.begin(), factors.end()); }
};

/// Cross-element dependence of one hazard: one curve per phase of the other element.
struct Modulator
{
    std::array<ModulatorCurve, 4> by_other_phase{};

    const ModulatorCurve& curve(PhaseTag other) const { return by_other_phase[static_cast<std::size_t>(other)]; }
    ModulatorCurve& curve(PhaseTag other) { return by_other_phase[static_cast<std::size_t>(other)]; }

    double factor(PhaseTag other, double other_clock) const { return curve(other).at(other_clock); }

    bool depends_on_other_clock() const
    {
        return std::any_of(by_other_phase.begin(), by_other_phase.end(),
                           [](const ModulatorCurve& c) { return !c.is_constant(); });
    }
};

/**
 * Hazard of one (element, base status) slot:
 *   lambda(own clock s, other phase, other clock) = base(s) * modulator(other phase, other clock)
 * with own-clock atoms of `base` applied unmodulated.
 */
struct HazardSlot
{
    GeneralizedIntensity base;
    Modulator modulator;
    std::optional<EnvelopePair> envelope;

    double rate(double own_clock, PhaseTag other, double other_clock) const
    {
        const double r = base.continuous().rate(own_clock);
        return r == 0.0 ? 0.0 : r * modulator.factor(other, other_clock);
    }
};

/// Per-element, per-status hazards of the full-state process.
class IntensityField
{
  public:
    IntensityField() = default;

    /// slot(j, 1) is the failure hazard of element j, slot(j, 0) its repair hazard.
    HazardSlot& slot(int element, int status) { return slots_.at(static_cast<std::size_t>(element)).at(index(status)); }
    const HazardSlot& slot(int element, int status) const
    {
        return slots_.at(static_cast<std::size_t>(element)).at(index(status));
    }

    void set(int element, int status, HazardSlot s) { slot(element, status) = std::move(s); }

    /// Same slot for both elements; convenient for symmetric systems.
    static IntensityField symmetric(HazardSlot work, HazardSlot repair)
    {
        IntensityField f;
        for (int j = 0; j < 2; ++j) {
            f.set(j, 1, work);
            f.set(j, 0, repair);
        }
        return f;
    }

  private:
    static std::size_t index(int status)
    {
        if (status != 0 && status != 1)
            throw InvalidSpec("base status must be 0 (repair) or 1 (work)");
        return static_cast<std::size_t>(status);
    }

    std::array<std::array<HazardSlot, 2>, 2> slots_{};
};

/**
 * Bounded random delays between a status change and the new mode becoming
 * effective. Delay laws are clipped to the support bound B, so every draw is
 * <= B with probability 1. B = 0 (or no law) means instantaneous switching.
 */
class SwitchingPolicy
{
  public:
    SwitchingPolicy() = default;

    SwitchingPolicy(double bound, std::optional<GeneralizedIntensity> to_repair,
                    std::optional<GeneralizedIntensity> to_work)
        : bound_(bound)
    {
        if (!(bound >= 0.0) || !std::isfinite(bound))
            throw InvalidSpec("switching bound B must be finite and >= 0");
        to_repair_ = clip(std::move(to_repair));
        to_work_ = clip(std::move(to_work));
    }

    static SwitchingPolicy instantaneous() { return {}; }

    double bound() const noexcept { return bound_; }

    /// Delay law for entering `target` (SwitchingToRepair or SwitchingToWork); nullopt if instantaneous.
    const std::optional<GeneralizedIntensity>& law(PhaseTag target) const
    {
        return target == PhaseTag::SwitchingToRepair ? to_repair_ : to_work_;
    }

    bool has_delays() const noexcept { return to_repair_.has_value() || to_work_.has_value(); }

    /// Delay for a standard exponential mark; asserts the probability-one bound.
    double delay_from_mark(PhaseTag target, double mark) const
    {
        const auto& gi = law(target);
        if (!gi)
            return 0.0;
        const double d = gi->quantile_from_mark(mark);
        if (!(d >= 0.0 && d <= bound_))
            throw NumericFailure("switching delay " + std::to_string(d) + " violates the bound " +
                                 std::to_string(bound_));
        return d;
    }

    template <class Stream>
    double sample_delay(PhaseTag target, Stream& rng) const
    {
        if (!law(target))
            return 0.0;
        return delay_from_mark(target, rng.exponential());
    }

  private:
    std::optional<GeneralizedIntensity> clip(std::optional<GeneralizedIntensity> gi) const
    {
        if (!gi)
            return std::nullopt;
        if (bound_ == 0.0)
            return std::nullopt;
        const auto& sb = gi->support_bound();
        if (sb && *sb > bound_)
            throw InvalidSpec("switching delay support bound exceeds the switching bound B");
        const double b = sb ? *sb : bound_;
        return GeneralizedIntensity(gi->continuous(), gi->atoms(), b);
    }

    double bound_ = 0.0;
    std::optional<GeneralizedIntensity> to_repair_;
    std::optional<GeneralizedIntensity> to_work_;
};

} // namespace warmsim
