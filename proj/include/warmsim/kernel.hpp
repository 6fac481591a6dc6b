#pragma once

#include "warmsim/analysis.hpp"
#include "warmsim/errors.hpp"
#include "warmsim/field.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/numerics.hpp"
#include "warmsim/rng.hpp"
#include "warmsim/state.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace warmsim {

/// One status change of one element.
struct Event
{
    double wall_time = 0.0;
    int element = 0; ///< 0-based
    PhaseTag from = PhaseTag::Working;
    PhaseTag to = PhaseTag::Working;
    double clock_at_event = 0.0; ///< elapsed time in `from` when it ended
    double delay = 0.0;          ///< sampled switching delay when `to` is a switching phase

    bool operator==(const Event&) const = default;
};

struct Step
{
    SystemState state;
    std::optional<Event> event;
};

/// Phase entered after leaving `from`; `delayed` selects the switching sub-phase.
constexpr PhaseTag successor(PhaseTag from, bool delayed) noexcept
{
    switch (from) {
    case PhaseTag::Working:
        return delayed ? PhaseTag::SwitchingToRepair : PhaseTag::UnderRepair;
    case PhaseTag::SwitchingToRepair:
        return PhaseTag::UnderRepair;
    case PhaseTag::UnderRepair:
        return delayed ? PhaseTag::SwitchingToWork : PhaseTag::Working;
    case PhaseTag::SwitchingToWork:
        return PhaseTag::Working;
    }
    return from;
}

namespace detail {

/// factor * base(s0 + u) as a function of the advance u.
struct HazardTerm
{
    const RateMap* base = nullptr;
    double factor = 0.0;
    double s0 = 0.0;

    double rate(double u) const { return factor * base->rate(s0 + u); }
    double integral(double a, double b) const { return factor * base->integral(s0 + a, s0 + b); }
    bool operator==(const HazardTerm&) const = default;
};

/// Sum of at most two hazard terms, one per active element.
struct HazardSum
{
    std::array<HazardTerm, 2> terms{};
    std::array<int, 2> owner{-1, -1};
    int n = 0;

    void add(int element, HazardTerm t)
    {
        owner[static_cast<std::size_t>(n)] = element;
        terms[static_cast<std::size_t>(n)] = t;
        ++n;
    }

    double rate(double u) const
    {
        double r = 0.0;
        for (int i = 0; i < n; ++i)
            r += terms[static_cast<std::size_t>(i)].rate(u);
        return r;
    }

    double rate_of(int element, double u) const
    {
        for (int i = 0; i < n; ++i)
            if (owner[static_cast<std::size_t>(i)] == element)
                return terms[static_cast<std::size_t>(i)].rate(u);
        return 0.0;
    }

    double integral(double a, double b) const
    {
        double h = 0.0;
        for (int i = 0; i < n; ++i)
            h += terms[static_cast<std::size_t>(i)].integral(a, b);
        return h;
    }

    /// True when every term is constant on the current segment.
    bool constant() const
    {
        for (int i = 0; i < n; ++i)
            if (!terms[static_cast<std::size_t>(i)].base->is_piecewise_constant())
                return false;
        return true;
    }

    /**
     * Smallest u in [a, hi] with integral(a, u) >= h, or +inf when the
     * integral over [a, hi] stays below h. `hi` may be +inf.
     */
    double inverse(double a, double h, double hi) const
    {
        if (n == 0)
            return kInf;
        if (h <= 0.0)
            return a;
        if (n == 1) {
            const auto& t = terms[0];
            const double x = t.base->inverse_from(t.s0 + a, h / t.factor);
            if (std::isinf(x))
                return kInf;
            const double u = std::max(a, x - t.s0);
            return u <= hi ? u : kInf;
        }
        if (constant()) {
            const double r = rate(a);
            if (!(r > 0.0))
                return kInf;
            const double u = a + h / r;
            return u <= hi ? u : kInf;
        }
        // The joint root comes no later than either term's own root.
        double bracket = hi;
        for (int i = 0; i < n; ++i) {
            const auto& t = terms[static_cast<std::size_t>(i)];
            const double x = t.base->inverse_from(t.s0 + a, h / t.factor);
            if (std::isfinite(x))
                bracket = std::min(bracket, std::max(a, x - t.s0));
        }
        if (std::isinf(bracket)) {
            double step = 1.0;
            while (integral(a, a + step) < h) {
                step *= 2.0;
                if (step > 1e300)
                    return kInf;
            }
            bracket = a + step;
        } else if (integral(a, bracket) < h) {
            return kInf;
        }
        return invert_increasing([&](double u) { return integral(a, u); }, [&](double u) { return rate(u); }, h, a,
                                 bracket);
    }
};

enum class StopKind : std::uint8_t
{
    None,
    Expiry, ///< switching delay runs out
    Atom,   ///< own-clock atom of the active hazard
    Bound,  ///< own-clock support bound: certain transition
};

/// Next deterministic stop of one element, measured as an advance from the current state.
struct Outlook
{
    StopKind kind = StopKind::None;
    double stop = kInf;
    double location = 0.0; ///< own-clock location of the atom or bound
    double weight = 0.0;   ///< atom weight
};

inline const HazardSlot* active_slot(const SystemState& st, int j, const IntensityField& field)
{
    const auto status = base_status(st.phase[static_cast<std::size_t>(j)].tag);
    if (!status)
        return nullptr;
    return &field.slot(j, *status);
}

inline Outlook outlook(const SystemState& st, int j, const IntensityField& field)
{
    const auto ju = static_cast<std::size_t>(j);
    Outlook o;
    if (is_switching(st.phase[ju].tag)) {
        o.kind = StopKind::Expiry;
        o.stop = st.phase[ju].remaining_delay;
        return o;
    }
    const GeneralizedIntensity& gi = active_slot(st, j, field)->base;
    const double s = st.clock[ju];
    if (const auto& b = gi.support_bound()) {
        o.kind = StopKind::Bound;
        o.stop = std::max(*b - s, 0.0);
        o.location = std::max(*b, s);
    }
    const auto& atoms = gi.atoms();
    const auto it = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& a) {
        return a.location > s || (st.atom_due[ju] && a.location == s);
    });
    if (it != atoms.end() && it->location - s < o.stop) {
        o.kind = StopKind::Atom;
        o.stop = it->location - s;
        o.location = it->location;
        o.weight = it->weight;
    }
    return o;
}

/// Advance u (from the committed state) at which element j's hazard changes shape.
inline double next_break(const SystemState& st, int j, const IntensityField& field, double u)
{
    const HazardSlot* slot = active_slot(st, j, field);
    if (!slot)
        return kInf;
    const double own = st.clock[static_cast<std::size_t>(j)];
    const auto other = static_cast<std::size_t>(1 - j);
    const RateMap& base = slot->base.continuous();
    double k = base.next_kink_after(own + u);
    while (k - own <= u)
        k = base.next_kink_after(k);
    const auto& bps = slot->modulator.curve(st.phase[other].tag).breakpoints;
    auto it = std::upper_bound(bps.begin(), bps.end(), st.clock[other] + u);
    while (it != bps.end() && *it - st.clock[other] <= u)
        ++it;
    const double m = it == bps.end() ? kInf : *it - st.clock[other];
    return std::min(k - own, m);
}

/// Element firing at a continuous event, chosen in proportion to the instantaneous rates.
inline int attribute(const HazardSum& h, double r0, double r1, double pick)
{
    if (h.n == 1)
        return h.owner[0];
    if (std::isinf(r0) || std::isinf(r1)) {
        if (std::isinf(r0) && std::isinf(r1))
            return pick < 0.5 ? 0 : 1;
        return std::isinf(r0) ? 0 : 1;
    }
    if (!(r0 + r1 > 0.0))
        return h.owner[0];
    return pick * (r0 + r1) < r0 ? 0 : 1;
}

/// Hazard of the state's active elements on the segment [u0, u1), where modulator factors are constant.
inline HazardSum segment_hazard(const SystemState& st, const IntensityField& field, double u0, double u1)
{
    HazardSum sum;
    const double probe = std::isfinite(u1) ? 0.5 * (u0 + u1) : u0;
    for (int j = 0; j < 2; ++j) {
        const HazardSlot* slot = active_slot(st, j, field);
        if (!slot || slot->base.continuous().is_zero())
            continue;
        const auto other = static_cast<std::size_t>(1 - j);
        const double m = slot->modulator.factor(st.phase[other].tag, st.clock[other] + probe);
        sum.add(j, {&slot->base.continuous(), m, st.clock[static_cast<std::size_t>(j)]});
    }
    return sum;
}

/// Moves the state forward by u with no transition; elements whose stop falls at u are flagged.
inline void commit(SystemState& st, const std::array<Outlook, 2>& o, double u)
{
    st.wall_time += u;
    for (std::size_t j = 0; j < 2; ++j) {
        auto& ph = st.phase[j];
        if (is_switching(ph.tag)) {
            ph.remaining_delay = o[j].stop == u ? 0.0 : std::max(0.0, ph.remaining_delay - u);
            st.clock[j] += u;
        } else if (o[j].stop == u && (o[j].kind == StopKind::Atom || o[j].kind == StopKind::Bound)) {
            st.clock[j] = o[j].location;
            st.atom_due[j] = true;
        } else {
            st.clock[j] += u;
        }
    }
}

/// Applies the transition of element j at the current wall time.
inline Event fire(SystemState& st, int j, const SwitchingPolicy& policy, double delay_mark)
{
    const auto ju = static_cast<std::size_t>(j);
    Event ev;
    ev.wall_time = st.wall_time;
    ev.element = j;
    ev.from = st.phase[ju].tag;
    ev.clock_at_event = st.clock[ju];
    const bool entering_switch = ev.from == PhaseTag::Working || ev.from == PhaseTag::UnderRepair;
    const PhaseTag target = successor(ev.from, true);
    const bool delayed = entering_switch && policy.law(target).has_value();
    ev.to = successor(ev.from, delayed);
    if (delayed)
        ev.delay = policy.delay_from_mark(target, delay_mark);
    st.phase[ju] = {ev.to, ev.delay};
    st.clock[ju] = 0.0;
    st.atom_due[ju] = false;
    return ev;
}

/// What is due for element j at the current instant.
inline StopKind due(const SystemState& st, int j, const IntensityField& field, double* weight)
{
    const auto ju = static_cast<std::size_t>(j);
    if (is_switching(st.phase[ju].tag))
        return st.phase[ju].remaining_delay == 0.0 ? StopKind::Expiry : StopKind::None;
    if (!st.atom_due[ju])
        return StopKind::None;
    const GeneralizedIntensity& gi = active_slot(st, j, field)->base;
    if (gi.support_bound() && st.clock[ju] >= *gi.support_bound())
        return StopKind::Bound;
    for (const auto& a : gi.atoms())
        if (a.location == st.clock[ju]) {
            *weight = a.weight;
            return StopKind::Atom;
        }
    return StopKind::None;
}

/**
 * Resolves due items at the current instant, element 1 first. An atom fires
 * when `decide(weight)` says so; an atom that does not fire is cleared. The
 * first element that fires ends the resolution; the other keeps its flag.
 */
template <class Decide>
std::optional<int> resolve_due(SystemState& st, const IntensityField& field, Decide&& decide)
{
    for (int j = 0; j < 2; ++j) {
        double w = 0.0;
        switch (due(st, j, field, &w)) {
        case StopKind::Expiry:
        case StopKind::Bound:
            return j;
        case StopKind::Atom:
            if (decide(w))
                return j;
            st.atom_due[static_cast<std::size_t>(j)] = false;
            break;
        case StopKind::None:
            st.atom_due[static_cast<std::size_t>(j)] = false;
            break;
        }
    }
    return std::nullopt;
}

inline bool any_due(const SystemState& st, const IntensityField& field)
{
    double w = 0.0;
    return due(st, 0, field, &w) != StopKind::None || due(st, 1, field, &w) != StopKind::None;
}

} // namespace detail

/**
 * One transition of the full-state process, or none if nothing happens
 * within `limit` time units (the returned state is then advanced by `limit`).
 *
 * A single standard exponential mark E drives the step: the event is the
 * first advance u at which the competing cumulative hazard of both elements,
 * continuous parts plus own-clock atoms, reaches E. Switching-delay expiries
 * and support bounds are certain stops. Transitions exactly at `limit` are
 * included.
 */
template <class Stream>
Step advance(const SystemState& state, const IntensityField& field, const SwitchingPolicy& policy, Stream& rng,
             double limit = kInf)
{
    if (!(limit >= 0.0))
        throw InvalidSpec("advance limit must be >= 0");
    SystemState cur = state;
    double remaining = rng.exponential();
    double left = limit;

    for (;;) {
        const std::array<detail::Outlook, 2> o{detail::outlook(cur, 0, field), detail::outlook(cur, 1, field)};
        const double stop = std::min(o[0].stop, o[1].stop);
        double u = 0.0;
        for (;;) {
            const double seg_end = std::min({stop, left, detail::next_break(cur, 0, field, u),
                                             detail::next_break(cur, 1, field, u)});
            const detail::HazardSum h = detail::segment_hazard(cur, field, u, seg_end);
            const double hit = h.inverse(u, remaining, seg_end);
            if (std::isfinite(hit)) {
                double r0 = h.rate_of(0, hit);
                double r1 = h.rate_of(1, hit);
                if (!(r0 + r1 > 0.0) || !std::isfinite(r0 + r1)) {
                    const double back = std::max(u, hit - 1e-9 * (1.0 + hit));
                    r0 = h.rate_of(0, back);
                    r1 = h.rate_of(1, back);
                }
                const int j = detail::attribute(h, r0, r1, rng.uniform());
                detail::commit(cur, o, hit);
                const double mark = policy.has_delays() ? rng.exponential() : 0.0;
                const Event ev = detail::fire(cur, j, policy, mark);
                return {cur, ev};
            }
            if (std::isinf(seg_end))
                throw NumericFailure("no finite event: the field is mass-deficient from this state");
            remaining = std::max(0.0, remaining - h.integral(u, seg_end));
            u = seg_end;
            if (u >= stop || u >= left)
                break;
        }
        const bool at_stop = u >= stop;
        detail::commit(cur, o, u);
        left = std::max(0.0, left - u);
        if (at_stop) {
            auto j = detail::resolve_due(cur, field, [&remaining](double w) {
                if (remaining <= w)
                    return true;
                remaining -= w;
                return false;
            });
            if (j) {
                const double mark = policy.has_delays() ? rng.exponential() : 0.0;
                const Event ev = detail::fire(cur, *j, policy, mark);
                return {cur, ev};
            }
            continue;
        }
        return {cur, std::nullopt};
    }
}

/// Initial state, ordered events and horizon (absolute wall time).
struct Trajectory
{
    SystemState initial;
    std::vector<Event> events;
    double horizon = 0.0;
    SystemState final_state;
};

/**
 * Iterates advance until wall time reaches `horizon`, handing each event and
 * the post-event state to `visit`. Returns the state at the horizon.
 */
template <class Stream, class Visit>
SystemState simulate_visit(const SystemState& initial, const IntensityField& field, const SwitchingPolicy& policy,
                           double horizon, Stream& rng, Visit&& visit)
{
    initial.validate(policy.bound());
    if (!(horizon >= initial.wall_time))
        throw InvalidSpec("horizon lies before the initial wall time");
    SystemState st = initial;
    for (;;) {
        Step step = advance(st, field, policy, rng, horizon - st.wall_time);
        st = step.state;
        if (!step.event)
            break;
        visit(*step.event, st);
    }
    st.wall_time = horizon;
    return st;
}

template <class Stream>
Trajectory simulate(const SystemState& initial, const IntensityField& field, const SwitchingPolicy& policy,
                    double horizon, Stream& rng)
{
    Trajectory traj;
    traj.initial = initial;
    traj.horizon = horizon;
    traj.final_state = simulate_visit(initial, field, policy, horizon, rng,
                                      [&traj](const Event& ev, const SystemState&) { traj.events.push_back(ev); });
    return traj;
}

/// State at time t, replaying events with time <= t (right-continuous).
inline SystemState state_at(const Trajectory& traj, double t)
{
    const double t0 = traj.initial.wall_time;
    if (!(t >= t0 && t <= traj.horizon))
        throw InvalidSpec("state_at: t outside [start, horizon]");
    SystemState st = traj.initial;
    st.atom_due = {false, false};
    std::array<std::optional<double>, 2> entered{};
    for (const auto& ev : traj.events) {
        if (ev.wall_time > t)
            break;
        const auto j = static_cast<std::size_t>(ev.element);
        st.phase[j] = {ev.to, ev.delay};
        entered[j] = ev.wall_time;
    }
    for (std::size_t j = 0; j < 2; ++j) {
        const double elapsed = entered[j] ? t - *entered[j] : t - t0;
        st.clock[j] = entered[j] ? elapsed : traj.initial.clock[j] + elapsed;
        if (is_switching(st.phase[j].tag))
            st.phase[j].remaining_delay = std::max(0.0, st.phase[j].remaining_delay - elapsed);
    }
    st.wall_time = t;
    return st;
}

/// Time-weighted occupation of the status pairs (n1, n2), switching counted as 0, over [from, to].
class OccupationAccumulator
{
  public:
    OccupationAccumulator(const SystemState& initial, double from) : from_(from), last_(initial.wall_time)
    {
        tags_ = {initial.phase[0].tag, initial.phase[1].tag};
    }

    void on_event(const Event& ev)
    {
        credit(ev.wall_time);
        tags_[static_cast<std::size_t>(ev.element)] = ev.to;
    }

    /// Closes the window at `to` and returns the normalised occupation vector.
    Vector4 finish(double to)
    {
        credit(to);
        Vector4 v = time_;
        const double total = to - from_;
        for (auto& x : v)
            x = total > 0.0 ? x / total : 0.0;
        return v;
    }

  private:
    void credit(double until)
    {
        const double a = std::max(last_, from_);
        if (until > a) {
            const int n1 = tags_[0] == PhaseTag::Working ? 1 : 0;
            const int n2 = tags_[1] == PhaseTag::Working ? 1 : 0;
            time_[static_cast<std::size_t>(status_pair_index(n1, n2))] += until - a;
        }
        last_ = std::max(last_, until);
    }

    double from_;
    double last_;
    std::array<PhaseTag, 2> tags_{};
    Vector4 time_{};
};

inline Vector4 status_occupation(const Trajectory& traj, double burn_in)
{
    if (!(burn_in < traj.horizon))
        throw InvalidSpec("burn-in must lie before the horizon");
    OccupationAccumulator acc(traj.initial, burn_in);
    for (const auto& ev : traj.events)
        acc.on_event(ev);
    return acc.finish(traj.horizon);
}

/// Fraction of [burn_in, horizon] with at least one element Working.
inline double longrun_availability(const Trajectory& traj, double burn_in)
{
    const Vector4 occ = status_occupation(traj, burn_in);
    return 1.0 - occ[static_cast<std::size_t>(status_pair_index(0, 0))];
}

// ---------------------------------------------------------------------------
// Replications.
// ---------------------------------------------------------------------------

/**
 * Calls fn(i) for i in [0, n) on up to `threads` workers. Results must be
 * written to per-index slots by fn; the first exception (lowest index) is
 * rethrown after all workers stop.
 */
template <class Fn>
void for_each_replication(std::size_t n, unsigned threads, Fn&& fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(work);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
}

struct AvailabilityCurve
{
    std::vector<double> times;
    std::vector<double> estimate;
    std::vector<double> stderr_;
    std::size_t replications = 0;
};

/// State of one replication at each of the (ascending) times.
template <class Stream>
std::vector<SystemState> states_on_grid(const SystemState& initial, const IntensityField& field,
                                        const SwitchingPolicy& policy, const std::vector<double>& times, Stream& rng)
{
    std::vector<SystemState> out;
    out.reserve(times.size());
    SystemState st = initial;
    for (double t : times) {
        for (;;) {
            Step step = advance(st, field, policy, rng, std::max(0.0, t - st.wall_time));
            st = step.state;
            if (!step.event)
                break;
        }
        st.wall_time = t;
        out.push_back(st);
    }
    return out;
}

inline void check_time_grid(const std::vector<double>& times, double start)
{
    if (times.empty())
        throw InvalidSpec("time grid is empty");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= start) || !std::isfinite(times[i]))
            throw InvalidSpec("time grid points must be finite and >= the initial wall time");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw InvalidSpec("time grid must be strictly increasing");
    }
}

/**
 * Monte Carlo estimate of P{X_t in S_-0} on a time grid with binomial
 * standard errors. Replication i uses substream (master_seed, i).
 */
inline AvailabilityCurve transient_availability(const SystemState& initial, const IntensityField& field,
                                                const SwitchingPolicy& policy, const std::vector<double>& times,
                                                std::size_t replications, std::uint64_t master_seed,
                                                unsigned threads = 1)
{
    if (replications < 1)
        throw InvalidSpec("transient availability needs at least one replication");
    initial.validate(policy.bound());
    check_time_grid(times, initial.wall_time);
    std::vector<std::vector<char>> up(replications);
    for_each_replication(replications, threads, [&](std::size_t i) {
        RandomStream rng = RandomStream::substream(master_seed, i);
        const auto states = states_on_grid(initial, field, policy, times, rng);
        up[i].reserve(states.size());
        for (const auto& s : states)
            up[i].push_back(availability_indicator(s) ? 1 : 0);
    });
    AvailabilityCurve curve;
    curve.times = times;
    curve.replications = replications;
    const auto n = static_cast<double>(replications);
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::size_t count = 0;
        for (const auto& row : up)
            count += static_cast<std::size_t>(row[k]);
        const double p = static_cast<double>(count) / n;
        curve.estimate.push_back(p);
        curve.stderr_.push_back(std::sqrt(p * (1.0 - p) / n));
    }
    return curve;
}

/// Ensemble of states at time t; replication i uses substream (master_seed, i).
inline std::vector<SystemState> sample_states(const SystemState& initial, const IntensityField& field,
                                              const SwitchingPolicy& policy, double t, std::size_t replications,
                                              std::uint64_t master_seed, unsigned threads = 1)
{
    initial.validate(policy.bound());
    check_time_grid({t}, initial.wall_time);
    std::vector<SystemState> out(replications);
    for_each_replication(replications, threads, [&](std::size_t i) {
        RandomStream rng = RandomStream::substream(master_seed, i);
        out[i] = states_on_grid(initial, field, policy, {t}, rng).front();
    });
    return out;
}

/**
 * Generator of the status-pair chain when the field is in the exponential
 * regime: constant bases without atoms or bounds, modulators that depend on
 * the other element's status only, and no switching delays.
 */
inline CTMCSpec to_ctmc(const IntensityField& field, const SwitchingPolicy& policy)
{
    if (policy.has_delays())
        throw InvalidSpec("CTMC gate: switching delays must be absent");
    for (int j = 0; j < 2; ++j)
        for (int n = 0; n < 2; ++n) {
            const auto& slot = field.slot(j, n);
            if (!std::holds_alternative<ConstantRate>(slot.base.continuous().family()) || !slot.base.atoms().empty() ||
                slot.base.support_bound())
                throw InvalidSpec("CTMC gate: every base hazard must be a constant rate without atoms");
            for (PhaseTag p : {PhaseTag::Working, PhaseTag::UnderRepair})
                if (!slot.modulator.curve(p).is_constant())
                    throw InvalidSpec("CTMC gate: modulators must not depend on the other element's clock");
        }
    CTMCSpec::Matrix q{};
    for (int s = 0; s < 4; ++s) {
        const auto pair = kStatusPairs[static_cast<std::size_t>(s)];
        for (int j = 0; j < 2; ++j) {
            const int nj = pair[static_cast<std::size_t>(j)];
            const int no = pair[static_cast<std::size_t>(1 - j)];
            const auto& slot = field.slot(j, nj);
            const double rate = slot.base.continuous().rate(0.0) *
                                slot.modulator.factor(no == 1 ? PhaseTag::Working : PhaseTag::UnderRepair, 0.0);
            auto to = pair;
            to[static_cast<std::size_t>(j)] = 1 - nj;
            q[static_cast<std::size_t>(s)][static_cast<std::size_t>(status_pair_index(to[0], to[1]))] += rate;
        }
    }
    return CTMCSpec(q);
}

} // namespace warmsim
