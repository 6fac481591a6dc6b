#pragma once

#include "warmsim/envelope.hpp"
#include "warmsim/field.hpp"
#include "warmsim/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace warmsim {

/// Evaluation grid for envelope checks: own elapsed times x other-element states.
struct StateGrid
{
    std::vector<double> own_clocks;
    std::vector<PhaseTag> other_phases{kAllPhases.begin(), kAllPhases.end()};
    std::vector<double> other_clocks{0.0};
};

/// 0, then 10 points per decade on [1e-3, 1e3].
inline std::vector<double> default_clock_grid()
{
    std::vector<double> g{0.0};
    for (int i = -30; i <= 30; ++i)
        g.push_back(std::pow(10.0, i / 10.0));
    return g;
}

/// Default grid for a slot: clock grid plus both sides of every singular point and modulator breakpoint.
inline StateGrid default_state_grid(const HazardSlot& slot, const EnvelopePair* env = nullptr)
{
    StateGrid grid;
    grid.own_clocks = default_clock_grid();
    auto add_around = [](std::vector<double>& v, double p) {
        v.push_back(p);
        v.push_back(p * (1.0 + 1e-9));
        if (p > 0.0)
            v.push_back(p * (1.0 - 1e-9));
    };
    for (double p : slot.base.singular_points())
        add_around(grid.own_clocks, p);
    if (env) {
        for (double p : env->phi.singular_points())
            add_around(grid.own_clocks, p);
        for (double p : env->q.singular_points())
            add_around(grid.own_clocks, p);
    }
    grid.other_clocks = {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0};
    for (const auto& curve : slot.modulator.by_other_phase)
        for (double b : curve.breakpoints)
            add_around(grid.other_clocks, b);
    for (auto* v : {&grid.own_clocks, &grid.other_clocks}) {
        std::sort(v->begin(), v->end());
        v->erase(std::unique(v->begin(), v->end()), v->end());
    }
    return grid;
}

struct EnvelopeViolation
{
    double s = 0.0;
    PhaseTag other_phase = PhaseTag::Working;
    double other_clock = 0.0;
    double lambda = 0.0;
    double phi = 0.0;
    double q = 0.0;
    std::string what;
};

struct ConditionAReport
{
    bool pass = true;
    std::size_t points_checked = 0;
    std::vector<EnvelopeViolation> violations;
};

namespace detail {

inline bool exceeds(double a, double b) { return a > b + 1e-12 * std::max(1.0, std::abs(b)); }

inline bool has_singular_mass(const GeneralizedIntensity& gi)
{
    return !gi.atoms().empty() || gi.support_bound().has_value();
}

} // namespace detail

/**
 * Pointwise envelope check phi(s) <= lambda(Z) <= Q(s), with s the slot's own
 * elapsed time and Z ranging over the grid's other-element states. When any
 * of the three carries atoms, the cumulative ordering
 * H_phi(s) <= H_lambda(s) <= H_Q(s) (equivalently G >= F >= Phi) is checked too.
 */
inline ConditionAReport check_condition_a(const HazardSlot& slot, const EnvelopePair& env, const StateGrid& grid)
{
    ConditionAReport report;
    const bool cumulative =
        detail::has_singular_mass(slot.base) || detail::has_singular_mass(env.phi) || detail::has_singular_mass(env.q);
    for (double s : grid.own_clocks) {
        const double phi = env.phi.continuous().rate(s);
        const double q = env.q.continuous().rate(s);
        if (detail::exceeds(phi, q))
            report.violations.push_back({s, PhaseTag::Working, 0.0, kInf, phi, q, "phi exceeds Q"});
        for (PhaseTag other : grid.other_phases) {
            for (double oc : grid.other_clocks) {
                ++report.points_checked;
                const double lambda = slot.rate(s, other, oc);
                if (detail::exceeds(phi, lambda))
                    report.violations.push_back({s, other, oc, lambda, phi, q, "lambda below phi"});
                if (detail::exceeds(lambda, q))
                    report.violations.push_back({s, other, oc, lambda, phi, q, "lambda above Q"});
                if (cumulative) {
                    const double m = slot.modulator.factor(other, oc);
                    const GeneralizedIntensity& b = slot.base;
                    double h = b.support_bound() && s >= *b.support_bound() ? kInf : 0.0;
                    if (h == 0.0) {
                        h = m * b.continuous().cumulative(s);
                        for (const auto& a : b.atoms())
                            if (a.location <= s)
                                h += a.weight;
                    }
                    const double h_phi = env.phi.cumulative_hazard(s);
                    const double h_q = env.q.cumulative_hazard(s);
                    if (detail::exceeds(h_phi, h))
                        report.violations.push_back({s, other, oc, lambda, phi, q, "cumulative hazard below phi's"});
                    if (detail::exceeds(h, h_q))
                        report.violations.push_back({s, other, oc, lambda, phi, q, "cumulative hazard above Q's"});
                }
            }
        }
    }
    report.pass = report.violations.empty();
    return report;
}

inline ConditionAReport check_condition_a(const IntensityField& field, int element, int status,
                                          const EnvelopePair& env, const StateGrid& grid)
{
    return check_condition_a(field.slot(element, status), env, grid);
}

struct ConditionBReport
{
    bool divergence_pass = false; ///< integral of phi grows without bound
    bool integral_pass = false;   ///< integral of x^(k-1) exp(-Phi-hazard) is finite
    double divergence_point = kInf; ///< first M where integral_0^M phi exceeded the threshold
    bool divergence_by_trend = false; ///< decided by non-shrinking growth rather than the threshold
    double integral_value = kInf;
    std::string detail;

    bool pass() const { return divergence_pass && integral_pass; }
};

inline constexpr double kDivergenceThreshold = 50.0;
inline constexpr double kDivergenceHorizon = 1e6;
inline constexpr double kDecadeGrowthRatio = 0.9;

/**
 * Clause (i): integral_0^M phi must exceed kDivergenceThreshold at some
 * M <= kDivergenceHorizon on the grid M = 10^0 .. 10^6, with a strictly
 * increasing trend up to that point. Slow (logarithmic) growth is caught by
 * the trend: if the per-decade increments of the last three decades do not
 * shrink (each at least kDecadeGrowthRatio times the previous one), the
 * integral is taken to grow without bound. A convergent integral has
 * increments that decay geometrically. This is a heuristic for "= infinity".
 * Clause (ii): integral_0^inf x^(k-1) exp(-integral_0^x phi) dx, finite iff the
 * integrand decays faster than 1/x in the far tail.
 */
inline ConditionBReport check_condition_b(const EnvelopePair& env,
                                          double threshold = kDivergenceThreshold,
                                          double horizon = kDivergenceHorizon)
{
    ConditionBReport report;
    double previous = -1.0;
    std::vector<double> increments;
    double last_m = 0.0;
    bool increasing = true;
    for (double m = 1.0; m <= horizon * (1.0 + 1e-12); m *= 10.0) {
        const double h = env.phi.cumulative_hazard(m);
        if (!(h > previous)) {
            increasing = false;
            break;
        }
        if (h > threshold) {
            report.divergence_pass = true;
            report.divergence_point = m;
            break;
        }
        if (previous >= 0.0)
            increments.push_back(h - previous);
        previous = h;
        last_m = m;
    }
    if (!report.divergence_pass && increasing && increments.size() >= 3) {
        const std::size_t n = increments.size();
        bool steady = true;
        for (std::size_t i = n - 2; i < n; ++i)
            steady = steady && increments[i] >= kDecadeGrowthRatio * increments[i - 1];
        if (steady) {
            report.divergence_pass = true;
            report.divergence_point = last_m;
            report.divergence_by_trend = true;
        }
    }
    try {
        report.integral_value = weighted_survival_integral(env.phi, static_cast<double>(env.k));
        report.integral_pass = std::isfinite(report.integral_value);
    } catch (const Error& e) {
        report.integral_pass = false;
        report.integral_value = kInf;
        report.detail = e.what();
    }
    return report;
}

struct ConditionCReport
{
    bool pass = false;
    double integral = 0.0;         ///< integral of Q over (-epsilon, epsilon)
    double largest_epsilon = 0.0;  ///< largest epsilon' <= epsilon with integral < 1
};

/// Q is extended by 0 on negatives, so the integral is H_Q(epsilon-).
inline ConditionCReport check_condition_c(const EnvelopePair& env)
{
    ConditionCReport report;
    report.integral = env.q.cumulative_hazard_left(env.epsilon);
    report.pass = report.integral < 1.0;
    if (report.pass) {
        report.largest_epsilon = env.epsilon;
    } else {
        const double t = env.q.quantile_from_mark(1.0);
        const double eps = env.q.cumulative_hazard_left(t) < 1.0 ? t : std::nextafter(t, 0.0);
        report.largest_epsilon = std::min(env.epsilon, eps);
    }
    return report;
}

struct ConditionDReport
{
    bool pass = true;
    std::size_t points_checked = 0;
    std::vector<double> violations;
};

/// phi(s) > 0 at every grid point s > T.
inline ConditionDReport check_condition_d(const EnvelopePair& env, const std::vector<double>& grid)
{
    ConditionDReport report;
    for (double s : grid) {
        if (!(s > env.t_delay))
            continue;
        ++report.points_checked;
        if (!(env.phi.continuous().rate(s) > 0.0))
            report.violations.push_back(s);
    }
    report.pass = report.violations.empty();
    return report;
}

/// C_j^(n)(ell) = integral s^ell dPhi_j^(n)(s) over the declared lower envelopes.
inline MomentVector moment_vector(const IntensityField& field, double ell)
{
    MomentVector v;
    v.order = ell;
    for (int j = 0; j < 2; ++j)
        for (int n = 0; n < 2; ++n) {
            const auto& env = field.slot(j, n).envelope;
            if (!env)
                throw InvalidSpec("slot (" + std::to_string(j + 1) + ", " + std::to_string(n) +
                                  ") has no declared envelope");
            v.at(j, n) = moment(env->phi, ell);
        }
    return v;
}

} // namespace warmsim
