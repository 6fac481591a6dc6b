#pragma once

#include "warmsim/errors.hpp"
#include "warmsim/field.hpp"
#include "warmsim/kernel.hpp"
#include "warmsim/rng.hpp"
#include "warmsim/state.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace warmsim {

// ---------------------------------------------------------------------------
// Joint kernel.
//
// Both copies share one exponential mark for the joint hazard
// max(R_a, R_b). At a joint event, both copies jump with probability
// min/max, otherwise only the copy with the larger rate jumps. The firing
// (phase, element) labels of jumping copies are drawn from a maximal coupling
// of their categorical laws; the residual parts are matched in the order
// (working before repair, element 1 before element 2) with a common uniform.
// Atoms use a common uniform and switching delays a common mark. Each copy
// on its own is a version of the process driven by `advance`.
// ---------------------------------------------------------------------------

struct JointStep
{
    SystemState a;
    SystemState b;
    std::optional<Event> event_a;
    std::optional<Event> event_b;
};

namespace detail {

inline bool same_hazard(const HazardSum& a, const HazardSum& b)
{
    if (a.n != b.n)
        return false;
    for (std::size_t i = 0; i < static_cast<std::size_t>(a.n); ++i)
        if (a.owner[i] != b.owner[i] || !(a.terms[i] == b.terms[i]))
            return false;
    return true;
}

struct JointSolve
{
    double hit = kInf;     ///< first advance where the joint hazard reaches the mark
    double consumed = 0.0; ///< joint hazard accumulated on [x, min(hit, hi)]
};

inline constexpr int kCrossingSamples = 48;

/**
 * max(R_a, R_b) on one segment. The segment is cut where R_a - R_b changes
 * sign (located by a quadratic-spaced scan and bisection); on each piece the
 * larger copy's closed-form integral and inverse apply.
 */
struct JointHazard
{
    const HazardSum& a;
    const HazardSum& b;
    bool same = same_hazard(a, b);

    double rate(double u) const { return std::max(a.rate(u), b.rate(u)); }

    bool single() const { return same || a.n == 0 || b.n == 0; }
    const HazardSum& sole() const { return a.n == 0 ? b : a; }

    double gap(double u) const { return a.rate(u) - b.rate(u); }

    std::vector<double> cuts(double x, double end) const
    {
        std::vector<double> out{x};
        double prev_u = x;
        double prev = gap(x);
        for (int k = 1; k <= kCrossingSamples; ++k) {
            const double f = static_cast<double>(k) / kCrossingSamples;
            const double u = k == kCrossingSamples ? end : x + (end - x) * f * f;
            const double g = gap(u);
            if (std::isnan(g))
                continue;
            if (!std::isnan(prev) && ((prev > 0.0 && g < 0.0) || (prev < 0.0 && g > 0.0))) {
                double lo = prev_u;
                double hi = u;
                const bool rising = g > 0.0;
                while (hi - lo > 1e-14 * (1.0 + std::abs(hi))) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm = gap(mid);
                    if ((gm > 0.0) == rising)
                        hi = mid;
                    else
                        lo = mid;
                }
                out.push_back(0.5 * (lo + hi));
            }
            prev_u = u;
            prev = g;
        }
        out.push_back(end);
        return out;
    }

    JointSolve solve(double x, double h, double hi) const
    {
        if (single()) {
            const HazardSum& s = sole();
            const double hit = s.inverse(x, h, hi);
            return {hit, std::isfinite(hit) ? h : (std::isfinite(hi) ? s.integral(x, hi) : kInf)};
        }
        if (h <= 0.0)
            return {x, 0.0};
        if (a.constant() && b.constant()) {
            const double r = std::max(a.rate(x), b.rate(x));
            const double hit = r > 0.0 ? x + h / r : kInf;
            if (hit <= hi)
                return {hit, h};
            return {kInf, r * (hi - x)};
        }
        // max >= either copy's rate, so neither copy's own root can be passed
        const double end = std::min({hi, a.inverse(x, h, hi), b.inverse(x, h, hi)});
        if (std::isinf(end))
            throw NumericFailure("joint hazard has no finite bracket (both copies mass-deficient)");
        const auto c = cuts(x, end);
        double rem = h;
        for (std::size_t i = 0; i + 1 < c.size(); ++i) {
            const double lo = c[i];
            const double up = c[i + 1];
            if (!(up > lo))
                continue;
            const double mid = 0.5 * (lo + up);
            const HazardSum& w = a.rate(mid) >= b.rate(mid) ? a : b;
            const double piece = w.integral(lo, up);
            if (piece >= rem) {
                const double hit = w.inverse(lo, rem, up);
                return {std::isfinite(hit) ? hit : up, h};
            }
            rem -= piece;
        }
        if (end < hi)
            return {end, h}; // the root sits at the bracket up to rounding
        return {kInf, h - rem};
    }
};

/// Label index: 0 (working, e1), 1 (working, e2), 2 (repair, e1), 3 (repair, e2).
using LabelLaw = std::array<double, 4>;

inline int label_element(int label) { return label % 2; }

/// Firing law of one copy at the event; `total` may be +inf when a rate blows up.
inline LabelLaw label_law(const SystemState& st, const HazardSum& h, double u, double u_back, double* total)
{
    std::array<double, 2> r{h.rate_of(0, u), h.rate_of(1, u)};
    if (!(r[0] + r[1] > 0.0))
        r = {h.rate_of(0, u_back), h.rate_of(1, u_back)};
    *total = r[0] + r[1];
    LabelLaw p{};
    for (int j = 0; j < 2; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const int phase_offset = st.phase[ju].tag == PhaseTag::Working ? 0 : 2;
        double w = 0.0;
        if (std::isinf(*total))
            w = std::isinf(r[ju]) ? (std::isinf(r[1 - ju]) ? 0.5 : 1.0) : 0.0;
        else if (*total > 0.0)
            w = r[ju] / *total;
        p[static_cast<std::size_t>(phase_offset + j)] += w;
    }
    return p;
}

/// Inverse-CDF pick over non-negative weights with total `mass` (> 0).
inline int pick_label(const LabelLaw& w, double mass, double v)
{
    double acc = 0.0;
    int last = -1;
    for (int i = 0; i < 4; ++i) {
        if (!(w[static_cast<std::size_t>(i)] > 0.0))
            continue;
        last = i;
        acc += w[static_cast<std::size_t>(i)];
        if (v * mass < acc)
            return i;
    }
    return last;
}

/// Labels of both copies from a maximal coupling of their laws.
inline std::array<int, 2> coupled_labels(const LabelLaw& pa, const LabelLaw& pb, double v)
{
    LabelLaw overlap{};
    double common = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        overlap[i] = std::min(pa[i], pb[i]);
        common += overlap[i];
    }
    if (v < common) {
        const int l = pick_label(overlap, common, v / common);
        return {l, l};
    }
    LabelLaw ra{};
    LabelLaw rb{};
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        ra[i] = std::max(0.0, pa[i] - overlap[i]);
        rb[i] = std::max(0.0, pb[i] - overlap[i]);
        ma += ra[i];
        mb += rb[i];
    }
    const double rest = (v - common) / std::max(1.0 - common, 1e-300);
    const int la = ma > 0.0 ? pick_label(ra, ma, rest) : pick_label(overlap, common, rest);
    const int lb = mb > 0.0 ? pick_label(rb, mb, rest) : pick_label(overlap, common, rest);
    return {la, lb};
}

/// Sequential atom decisions driven by one uniform.
struct UniformAtomDecision
{
    double v;

    bool operator()(double weight)
    {
        const double p = -std::expm1(-weight);
        if (v < p)
            return true;
        v = (v - p) / (1.0 - p);
        return false;
    }
};

} // namespace detail

/**
 * One step of the joint process: at least one copy transitions, or neither
 * does within `limit` (both are then advanced by `limit`). The copies must
 * share the wall time.
 */
template <class Stream>
JointStep joint_advance(const SystemState& a, const SystemState& b, const IntensityField& field,
                        const SwitchingPolicy& policy, Stream& rng, double limit = kInf)
{
    if (a.wall_time != b.wall_time)
        throw InvalidSpec("coupled copies must share the wall time");
    if (!(limit >= 0.0))
        throw InvalidSpec("advance limit must be >= 0");
    JointStep out{a, b, std::nullopt, std::nullopt};
    SystemState& ca = out.a;
    SystemState& cb = out.b;
    double remaining = rng.exponential();
    double left = limit;

    for (;;) {
        const std::array<detail::Outlook, 2> oa{detail::outlook(ca, 0, field), detail::outlook(ca, 1, field)};
        const std::array<detail::Outlook, 2> ob{detail::outlook(cb, 0, field), detail::outlook(cb, 1, field)};
        const double stop = std::min({oa[0].stop, oa[1].stop, ob[0].stop, ob[1].stop});
        double u = 0.0;
        for (;;) {
            const double seg_end =
                std::min({stop, left, detail::next_break(ca, 0, field, u), detail::next_break(ca, 1, field, u),
                          detail::next_break(cb, 0, field, u), detail::next_break(cb, 1, field, u)});
            const detail::HazardSum ha = detail::segment_hazard(ca, field, u, seg_end);
            const detail::HazardSum hb = detail::segment_hazard(cb, field, u, seg_end);
            const detail::JointHazard joint{ha, hb};
            const detail::JointSolve solved = joint.solve(u, remaining, seg_end);
            const double hit = solved.hit;
            if (std::isfinite(hit)) {
                const double back = std::max(u, hit - 1e-9 * (1.0 + hit));
                double ra = 0.0;
                double rb = 0.0;
                const auto pa = detail::label_law(ca, ha, hit, back, &ra);
                const auto pb = detail::label_law(cb, hb, hit, back, &rb);
                const double v_jump = rng.uniform();
                const double v_label = rng.uniform();
                const double delay_mark = rng.exponential();
                bool jump_a = false;
                bool jump_b = false;
                if (ra == rb || (std::isinf(ra) && std::isinf(rb))) {
                    jump_a = jump_b = true;
                } else if (std::isinf(ra) || std::isinf(rb)) {
                    (std::isinf(ra) ? jump_a : jump_b) = true;
                } else {
                    const double hi_rate = std::max(ra, rb);
                    const double lo_rate = std::min(ra, rb);
                    if (v_jump * hi_rate < lo_rate)
                        jump_a = jump_b = true;
                    else
                        (ra > rb ? jump_a : jump_b) = true;
                }
                detail::commit(ca, oa, hit);
                detail::commit(cb, ob, hit);
                if (jump_a && jump_b) {
                    const auto labels = detail::coupled_labels(pa, pb, v_label);
                    out.event_a = detail::fire(ca, detail::label_element(labels[0]), policy, delay_mark);
                    out.event_b = detail::fire(cb, detail::label_element(labels[1]), policy, delay_mark);
                } else if (jump_a) {
                    out.event_a = detail::fire(ca, detail::label_element(detail::pick_label(pa, 1.0, v_label)),
                                               policy, delay_mark);
                } else {
                    out.event_b = detail::fire(cb, detail::label_element(detail::pick_label(pb, 1.0, v_label)),
                                               policy, delay_mark);
                }
                return out;
            }
            if (std::isinf(seg_end))
                throw NumericFailure("no finite event for either coupled copy");
            remaining = std::max(0.0, remaining - solved.consumed);
            u = seg_end;
            if (u >= stop || u >= left)
                break;
        }
        const bool at_stop = u >= stop;
        detail::commit(ca, oa, u);
        detail::commit(cb, ob, u);
        left = std::max(0.0, left - u);
        if (!at_stop)
            return out;
        const double v_atom = rng.uniform();
        const auto ja = detail::resolve_due(ca, field, detail::UniformAtomDecision{v_atom});
        const auto jb = detail::resolve_due(cb, field, detail::UniformAtomDecision{v_atom});
        if (ja || jb) {
            const double delay_mark = rng.exponential();
            if (ja)
                out.event_a = detail::fire(ca, *ja, policy, delay_mark);
            if (jb)
                out.event_b = detail::fire(cb, *jb, policy, delay_mark);
            return out;
        }
    }
}

struct CouplingOutcome
{
    double tau = kInf;    ///< coupling time relative to the start; +inf when censored
    bool censored = true;
    double horizon = 0.0; ///< relative observation window
    std::uint64_t master_seed = 0;
    std::uint64_t replication = 0;
};

/**
 * Runs both copies jointly until their full states match (within
 * kCouplingClockTol) or the horizon passes. After a match the copies are
 * merged, so tau is the coupling epoch.
 */
template <class Stream>
CouplingOutcome run_coupled(const SystemState& init_a, const SystemState& init_b, const IntensityField& field,
                            const SwitchingPolicy& policy, double horizon, Stream& rng)
{
    init_a.validate(policy.bound());
    init_b.validate(policy.bound());
    if (!(horizon >= 0.0))
        throw InvalidSpec("coupling horizon must be >= 0");
    CouplingOutcome out;
    out.horizon = horizon;
    SystemState a = init_a;
    SystemState b = init_b;
    const double start = a.wall_time;
    b.wall_time = start;
    if (states_match(a, b)) {
        out.tau = 0.0;
        out.censored = false;
        return out;
    }
    const double end = start + horizon;
    for (;;) {
        JointStep step = joint_advance(a, b, field, policy, rng, std::max(0.0, end - a.wall_time));
        a = step.a;
        b = step.b;
        if (states_match(a, b)) {
            out.tau = a.wall_time - start;
            out.censored = false;
            return out;
        }
        if (!step.event_a && !step.event_b)
            return out;
    }
}

// ---------------------------------------------------------------------------
// Coupling-time tails as total-variation bounds.
// ---------------------------------------------------------------------------

inline constexpr double kConfidenceZ = 1.96;

/// b(t) = empirical P(tau > t) with binomial confidence radii.
struct TVCurve
{
    std::vector<double> times;
    std::vector<double> bound;
    std::vector<double> radius;
    std::size_t samples = 0;
    std::size_t censored = 0;
};

inline TVCurve tv_curve_from(const std::vector<CouplingOutcome>& outcomes, const std::vector<double>& times)
{
    TVCurve curve;
    curve.times = times;
    curve.samples = outcomes.size();
    std::vector<double> taus;
    taus.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        taus.push_back(o.censored ? kInf : o.tau);
        curve.censored += o.censored ? 1 : 0;
    }
    std::sort(taus.begin(), taus.end());
    const auto n = static_cast<double>(taus.size());
    for (double t : times) {
        const auto above = taus.end() - std::upper_bound(taus.begin(), taus.end(), t);
        const double b = n > 0.0 ? static_cast<double>(above) / n : 0.0;
        curve.bound.push_back(b);
        curve.radius.push_back(n > 0.0 ? kConfidenceZ * std::sqrt(b * (1.0 - b) / n) : 0.0);
    }
    return curve;
}

/**
 * Starting law of one copy: `state` itself, or the state reached after
 * running the process from it for `warm_up` time units (a draw from the law
 * of X_warm_up, close to stationary for long warm-ups).
 */
struct InitialLaw
{
    SystemState state;
    double warm_up = 0.0;
};

/**
 * Couples `replications` pairs (pair i uses substream (master_seed, i);
 * warm-ups of copy a, then copy b, draw from it first) and returns the
 * coupling-time tail on the grid. Censored pairs count as tau > horizon;
 * grid points beyond the horizon are rejected.
 */
inline TVCurve estimate_coupling_tail(const InitialLaw& law_a, const InitialLaw& law_b, const IntensityField& field,
                                      const SwitchingPolicy& policy, double horizon, std::size_t replications,
                                      const std::vector<double>& times, std::uint64_t master_seed,
                                      unsigned threads = 1, std::vector<CouplingOutcome>* outcomes_out = nullptr)
{
    if (replications < 1)
        throw InvalidSpec("coupling needs at least one replication");
    for (const auto* law : {&law_a, &law_b}) {
        law->state.validate(policy.bound());
        if (!(law->warm_up >= 0.0) || !std::isfinite(law->warm_up))
            throw InvalidSpec("warm-up must be finite and >= 0");
    }
    check_time_grid(times, 0.0);
    if (times.back() > horizon)
        throw InvalidSpec("coupling time grid extends beyond the horizon");
    std::vector<CouplingOutcome> outcomes(replications);
    for_each_replication(replications, threads, [&](std::size_t i) {
        RandomStream rng = RandomStream::substream(master_seed, i);
        auto start = [&](const InitialLaw& law) {
            if (law.warm_up == 0.0)
                return law.state;
            SystemState s = states_on_grid(law.state, field, policy, {law.state.wall_time + law.warm_up}, rng).front();
            s.wall_time = 0.0;
            return s;
        };
        SystemState a = start(law_a);
        a.wall_time = 0.0;
        SystemState b = start(law_b);
        outcomes[i] = run_coupled(a, b, field, policy, horizon, rng);
        outcomes[i].master_seed = master_seed;
        outcomes[i].replication = i;
    });
    TVCurve curve = tv_curve_from(outcomes, times);
    if (outcomes_out)
        *outcomes_out = std::move(outcomes);
    return curve;
}

inline TVCurve estimate_coupling_tail(const SystemState& init_a, const SystemState& init_b,
                                      const IntensityField& field, const SwitchingPolicy& policy, double horizon,
                                      std::size_t replications, const std::vector<double>& times,
                                      std::uint64_t master_seed, unsigned threads = 1,
                                      std::vector<CouplingOutcome>* outcomes_out = nullptr)
{
    return estimate_coupling_tail(InitialLaw{init_a}, InitialLaw{init_b}, field, policy, horizon, replications, times,
                                  master_seed, threads, outcomes_out);
}

// ---------------------------------------------------------------------------
// Binned total variation between two ensembles of states.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMinEnsembleSize = 1000;

/// Partition: phase pair x per-element clock bins cut at `clock_edges`.
struct BinningSpec
{
    std::vector<double> clock_edges{1.0};
};

inline std::size_t bin_index(const SystemState& s, const BinningSpec& spec)
{
    const std::size_t per_clock = spec.clock_edges.size() + 1;
    std::size_t idx = static_cast<std::size_t>(s.phase[0].tag) * 4 + static_cast<std::size_t>(s.phase[1].tag);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto it = std::upper_bound(spec.clock_edges.begin(), spec.clock_edges.end(), s.clock[j]);
        idx = idx * per_clock + static_cast<std::size_t>(it - spec.clock_edges.begin());
    }
    return idx;
}

/**
 * Half L1 distance between the binned empirical laws; a lower estimate of
 * the total-variation distance that refines with the partition.
 */
inline double marginal_tv(const std::vector<SystemState>& a, const std::vector<SystemState>& b,
                          const BinningSpec& spec = {})
{
    if (a.size() != b.size())
        throw InvalidSpec("marginal_tv needs ensembles of equal size");
    if (a.size() < kMinEnsembleSize)
        throw InvalidSpec("marginal_tv needs at least " + std::to_string(kMinEnsembleSize) + " states per ensemble");
    for (std::size_t i = 0; i < spec.clock_edges.size(); ++i)
        if (!(spec.clock_edges[i] > 0.0) || (i > 0 && !(spec.clock_edges[i] > spec.clock_edges[i - 1])))
            throw InvalidSpec("clock bin edges must be positive and strictly increasing");
    const std::size_t per_clock = spec.clock_edges.size() + 1;
    std::vector<double> diff(16 * per_clock * per_clock, 0.0);
    for (const auto& s : a)
        diff[bin_index(s, spec)] += 1.0;
    for (const auto& s : b)
        diff[bin_index(s, spec)] -= 1.0;
    double l1 = 0.0;
    for (double d : diff)
        l1 += std::abs(d);
    return 0.5 * l1 / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Envelope fits.
// ---------------------------------------------------------------------------

enum class EnvelopeForm
{
    Polynomial,  ///< K / t^ell
    Exponential, ///< K~ exp(-beta t)
};

inline std::string to_string(EnvelopeForm f) { return f == EnvelopeForm::Polynomial ? "polynomial" : "exponential"; }

struct FitWindow
{
    double from = 0.0;
    double to = kInf;
};

struct EnvelopeFit
{
    EnvelopeForm form = EnvelopeForm::Exponential;
    double constant = 0.0; ///< K or K~
    double rate = 0.0;     ///< ell or beta
    double rmse = 0.0;     ///< log-domain RMSE of the least-squares line
    double lift = 0.0;     ///< log-domain shift added so the envelope dominates the curve
    bool rate_capped = false;
    FitWindow window;
    std::size_t points = 0;

    double operator()(double t) const
    {
        return form == EnvelopeForm::Polynomial ? constant * std::pow(t, -rate) : constant * std::exp(-rate * t);
    }
};

inline constexpr std::size_t kMinFitPoints = 5;
inline constexpr double kNoiseFloorCount = 5.0;
inline constexpr double kRateCapFraction = 0.999;

/**
 * Least squares in the log domain, then the intercept is raised by the
 * smallest amount that makes the envelope dominate every fitted point.
 * Points with b(t) below 5 / samples are dropped as tail noise. When
 * `alpha` is given, an exponential rate is capped strictly below it.
 */
inline EnvelopeFit fit_envelope(const TVCurve& curve, EnvelopeForm form, FitWindow window = {},
                                std::optional<double> alpha = std::nullopt)
{
    const double floor = curve.samples > 0 ? kNoiseFloorCount / static_cast<double>(curve.samples) : 0.0;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double t = curve.times[i];
        const double b = curve.bound[i];
        if (t < window.from || t > window.to || !(b > 0.0) || b < floor)
            continue;
        if (form == EnvelopeForm::Polynomial && !(t > 0.0))
            continue;
        xs.push_back(form == EnvelopeForm::Polynomial ? std::log(t) : t);
        ys.push_back(std::log(b));
    }
    if (std::none_of(curve.bound.begin(), curve.bound.end(), [](double b) { return b > 0.0; }))
        throw FitRejected("the curve is identically 0 on the grid (every pair coupled before the first grid "
                          "time); there is no decay to fit");
    if (xs.size() < kMinFitPoints)
        throw FitRejected("only " + std::to_string(xs.size()) + " usable curve points in the fit window (need " +
                          std::to_string(kMinFitPoints) + ")");
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / n;
        my += ys[i] / n;
    }
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0))
        throw FitRejected("fit window has no spread in t");
    const double slope = sxy / sxx;
    if (!(slope < 0.0))
        throw FitRejected("curve does not decay on the fit window (slope " + std::to_string(slope) + ")");

    EnvelopeFit fit;
    fit.form = form;
    fit.window = window;
    fit.points = xs.size();
    fit.rate = -slope;
    if (alpha && form == EnvelopeForm::Exponential && fit.rate >= *alpha) {
        fit.rate = kRateCapFraction * *alpha;
        fit.rate_capped = true;
    }
    const double intercept = my + fit.rate * mx;
    double sse = 0.0;
    double lift = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (intercept - fit.rate * xs[i]);
        sse += r * r;
        lift = std::max(lift, r);
    }
    fit.rmse = std::sqrt(sse / n);
    fit.lift = lift;
    fit.constant = std::exp(intercept + lift);
    return fit;
}

} // namespace warmsim
