#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "warmsim/analysis.hpp"
#include "warmsim/kernel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace warmsim;
using namespace fixture;
using Catch::Approx;

namespace {

constexpr PhaseTag W = PhaseTag::Working;
constexpr PhaseTag R = PhaseTag::UnderRepair;
constexpr PhaseTag SW = PhaseTag::SwitchingToWork;
constexpr PhaseTag SR = PhaseTag::SwitchingToRepair;

SwitchingPolicy bounded_delays(double bound)
{
    return SwitchingPolicy(bound, GeneralizedIntensity(ConstantRate{2.0 / bound}),
                           atoms_from_jumps({{0.5 * bound, 0.4}}, RateMap(ConstantRate{1.0 / bound})));
}

bool legal_cycle(const std::vector<Event>& events, const SystemState& initial, bool delays)
{
    std::array<PhaseTag, 2> tag{initial.phase[0].tag, initial.phase[1].tag};
    for (const auto& ev : events) {
        auto& t = tag[static_cast<std::size_t>(ev.element)];
        if (ev.from != t)
            return false;
        const PhaseTag expected = successor(t, delays);
        if (ev.to != expected)
            return false;
        t = ev.to;
    }
    return true;
}

} // namespace

TEST_CASE("competing constant hazards: event at the inverted mark", "[kernel][advance]")
{
    const auto field = constant_field(1.0, 1.0);
    ScriptedStream rng({std::numbers::ln2}, {0.25});
    const auto step = advance(both(W), field, SwitchingPolicy::instantaneous(), rng);
    REQUIRE(step.event);
    CHECK(step.event->wall_time == Approx(std::numbers::ln2 / 2.0).epsilon(1e-15));
    CHECK(step.event->element == 0);
    CHECK(step.event->to == R);
    CHECK(step.state.clock[0] == 0.0);
    CHECK(step.state.clock[1] == Approx(std::numbers::ln2 / 2.0));
}

TEST_CASE("competing constant hazards: each element fires half the time", "[kernel][advance]")
{
    const auto field = constant_field(1.0, 1.0);
    RandomStream rng(11);
    const int n = 100000;
    int first = 0;
    for (int i = 0; i < n; ++i)
        first += advance(both(W), field, SwitchingPolicy::instantaneous(), rng).event->element == 0;
    CHECK(std::abs(first / double(n) - 0.5) <= 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("deterministic failure at own clock 1 fires exactly at 1", "[kernel][advance]")
{
    IntensityField field = constant_field(0.0, 0.0);
    field.set(0, 1, slot(GeneralizedIntensity::deterministic(1.0)));
    RandomStream rng(3);
    const auto step = advance(both(W), field, SwitchingPolicy::instantaneous(), rng);
    REQUIRE(step.event);
    CHECK(step.event->wall_time == 1.0);
    CHECK(step.event->element == 0);
    CHECK(step.event->clock_at_event == 1.0);
}

TEST_CASE("hyperbolic competitors on a shared clock split 2:1", "[kernel][advance]")
{
    IntensityField field;
    field.set(0, 1, slot(GeneralizedIntensity(HyperbolicRate{2.0})));
    field.set(1, 1, slot(GeneralizedIntensity(HyperbolicRate{1.0})));
    field.set(0, 0, constant_slot(1.0));
    field.set(1, 0, constant_slot(1.0));
    RandomStream rng(17);
    const int n = 1000000;
    int first = 0;
    for (int i = 0; i < n; ++i)
        first += advance(both(W), field, SwitchingPolicy::instantaneous(), rng).event->element == 0;
    const double p = 2.0 / 3.0;
    CHECK(std::abs(first / double(n) - p) <= 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST_CASE("advance with nothing due inside the limit only moves the clocks", "[kernel][advance]")
{
    const auto field = constant_field(0.0, 0.0);
    RandomStream rng(1);
    const auto step = advance(make_state(W, 0.5, R, 1.0), field, SwitchingPolicy::instantaneous(), rng, 2.0);
    CHECK_FALSE(step.event);
    CHECK(step.state.clock[0] == 2.5);
    CHECK(step.state.clock[1] == 3.0);
    CHECK(step.state.wall_time == 2.0);
    CHECK_THROWS_AS(advance(both(W), field, SwitchingPolicy::instantaneous(), rng), NumericFailure);
}

TEST_CASE("event time distribution under a clock-dependent modulator", "[kernel][advance][modulator]")
{
    // Element 2 is frozen (zero hazard) in Working; element 1 fails at rate 0.5 while
    // element 2's clock is below 1 and at rate 2 afterwards.
    IntensityField field = constant_field(0.0, 0.0);
    HazardSlot work = constant_slot(1.0);
    work.modulator.curve(W) = ModulatorCurve({1.0}, {0.5, 2.0});
    field.set(0, 1, work);
    auto rate = [](double u) { return u < 1.0 ? 0.5 : 2.0; };
    RandomStream rng(23);
    std::vector<double> times;
    for (int i = 0; i < 100000; ++i)
        times.push_back(advance(both(W), field, SwitchingPolicy::instantaneous(), rng).event->wall_time);
    // oracle CDF on a grid, split at the modulator breakpoint
    auto cdf = [&](double s) {
        if (s <= 1.0)
            return oracle::cdf_by_grid(rate, s, 20000);
        const double h1 = -std::log1p(-oracle::cdf_by_grid(rate, 1.0, 20000));
        return 1.0 - std::exp(-(h1 + 2.0 * (s - 1.0)));
    };
    CHECK(oracle::cdf_by_grid(rate, 0.7, 20000) == Approx(1.0 - std::exp(-0.35)).epsilon(1e-9));
    CHECK(ks_statistic(times, cdf) < 1.5 * 1.36 / std::sqrt(100000.0));
}

TEST_CASE("atom on a continuous hazard fires with its jump mass", "[kernel][advance][atom]")
{
    // continuous rate 1 with an extra jump of mass 0.3 * S(1-) at own clock 1
    const double survival_before = std::exp(-1.0);
    const auto gi = atoms_from_jumps({{1.0, 0.3 * survival_before}}, RateMap(ConstantRate{1.0}));
    IntensityField field = constant_field(0.0, 0.0);
    field.set(0, 1, slot(gi));
    RandomStream rng(29);
    const int n = 200000;
    int at_one = 0;
    for (int i = 0; i < n; ++i)
        at_one += advance(both(W), field, SwitchingPolicy::instantaneous(), rng).event->wall_time == 1.0;
    const double p = 0.3 * survival_before;
    CHECK(std::abs(at_one / double(n) - p) <= 3.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST_CASE("simultaneous atoms: element 1 first, element 2 at the same instant", "[kernel][advance][atom]")
{
    IntensityField field = constant_field(0.0, 0.0);
    field.set(0, 1, slot(GeneralizedIntensity::deterministic(1.0)));
    field.set(1, 1, slot(GeneralizedIntensity::deterministic(1.0)));
    RandomStream rng(5);
    const auto traj = simulate(both(W), field, SwitchingPolicy::instantaneous(), 3.0, rng);
    REQUIRE(traj.events.size() == 2);
    CHECK(traj.events[0].element == 0);
    CHECK(traj.events[1].element == 1);
    CHECK(traj.events[0].wall_time == 1.0);
    CHECK(traj.events[1].wall_time == 1.0);
    CHECK(traj.events[1].clock_at_event == 1.0);
    CHECK(traj.final_state.phase[0].tag == R);
    CHECK(traj.final_state.phase[1].tag == R);
    CHECK(traj.final_state.clock[0] == 2.0);
}

TEST_CASE("simulate with horizon 0 returns no events", "[kernel][simulate]")
{
    RandomStream rng(1);
    const auto traj = simulate(both(W), constant_field(1.0, 1.0), SwitchingPolicy::instantaneous(), 0.0, rng);
    CHECK(traj.events.empty());
    CHECK(state_at(traj, 0.0) == both(W));
}

TEST_CASE("failure counts over working time estimate the configured rate", "[kernel][simulate]")
{
    const double lambda = 2.5;
    const auto field = constant_field(lambda, 4.0);
    RandomStream rng(31);
    const auto traj = simulate(both(W), field, SwitchingPolicy::instantaneous(), 1e4, rng);
    for (int j = 0; j < 2; ++j) {
        double working = 0.0;
        double entered = 0.0;
        bool up = true;
        int failures = 0;
        for (const auto& ev : traj.events) {
            if (ev.element != j)
                continue;
            if (ev.from == W) {
                working += ev.wall_time - entered;
                ++failures;
                up = false;
            } else {
                entered = ev.wall_time;
                up = true;
            }
        }
        if (up)
            working += traj.horizon - entered;
        CHECK(failures / working == Approx(lambda).epsilon(0.02));
    }
}

TEST_CASE("hyperbolic field with zero delays: positive gaps and legal alternation", "[kernel][simulate]")
{
    const auto field = IntensityField::symmetric(slot(GeneralizedIntensity(HyperbolicRate{3.0})), constant_slot(1.0));
    RandomStream rng(37);
    const Trajectory traj = simulate(both(W), field, SwitchingPolicy::instantaneous(), 1e4, rng);
    REQUIRE(traj.events.size() >= 10000);
    for (std::size_t i = 1; i < 10000; ++i)
        CHECK(traj.events[i].wall_time > traj.events[i - 1].wall_time);
    CHECK(legal_cycle(traj.events, traj.initial, false));
}

TEST_CASE("delays: legal cycle, bounded delays, clocks reset", "[kernel][simulate][switching]")
{
    const double bound = 0.4;
    const auto policy = bounded_delays(bound);
    const auto field = IntensityField::symmetric(slot(GeneralizedIntensity(HyperbolicRate{3.0})), constant_slot(1.0));
    RandomStream rng(41);
    std::vector<Event> events;
    bool reset_ok = true;
    double max_delay = 0.0;
    simulate_visit(both(W), field, policy, 5000.0, rng, [&](const Event& ev, const SystemState& st) {
        events.push_back(ev);
        reset_ok = reset_ok && st.clock[static_cast<std::size_t>(ev.element)] == 0.0;
        max_delay = std::max(max_delay, ev.delay);
        if (is_switching(ev.to))
            reset_ok = reset_ok && st.phase[static_cast<std::size_t>(ev.element)].remaining_delay == ev.delay;
    });
    CHECK(reset_ok);
    CHECK(max_delay <= bound);
    CHECK(max_delay > 0.0);
    CHECK(legal_cycle(events, both(W), true));
    for (std::size_t i = 1; i < events.size(); ++i)
        CHECK(events[i].wall_time >= events[i - 1].wall_time);
}

TEST_CASE("delay law without the bound set collapses to instantaneous switching", "[kernel][switching]")
{
    const SwitchingPolicy zero(0.0, GeneralizedIntensity(ConstantRate{1.0}), GeneralizedIntensity(ConstantRate{1.0}));
    CHECK_FALSE(zero.has_delays());
    RandomStream rng(2);
    const auto traj = simulate(both(W), constant_field(1.0, 1.0), zero, 100.0, rng);
    CHECK(legal_cycle(traj.events, traj.initial, false));
    CHECK_THROWS_AS(SwitchingPolicy(1.0, GeneralizedIntensity::deterministic(2.0), std::nullopt), InvalidSpec);
}

TEST_CASE("determinism: same seed, same events", "[kernel][simulate]")
{
    const auto field = IntensityField::symmetric(slot(GeneralizedIntensity(HyperbolicRate{3.0})), constant_slot(1.0));
    const auto policy = bounded_delays(0.3);
    RandomStream a(99);
    RandomStream b(99);
    const auto ta = simulate(both(W), field, policy, 500.0, a);
    const auto tb = simulate(both(W), field, policy, 500.0, b);
    CHECK(ta.events == tb.events);
    CHECK(ta.final_state == tb.final_state);
}

TEST_CASE("availability indicator", "[kernel][availability]")
{
    CHECK_FALSE(availability_indicator(make_state(R, 1.0, R, 2.0)));
    CHECK(availability_indicator(make_state(W, 1.0, R, 2.0)));
    SystemState s = make_state(SW, 0.0, R, 2.0);
    s.phase[0].remaining_delay = 0.3;
    CHECK_FALSE(availability_indicator(s));
}

TEST_CASE("state_at replays events right-continuously", "[kernel][state_at]")
{
    Trajectory traj;
    traj.initial = make_state(W, 0.5, R, 0.0);
    traj.horizon = 10.0;
    traj.events = {{2.0, 0, W, R, 2.5, 0.0}, {3.0, 1, R, SW, 3.0, 0.5}, {3.5, 1, SW, W, 0.5, 0.0}};
    CHECK(state_at(traj, 0.0) == traj.initial);
    const auto mid = state_at(traj, 1.0);
    CHECK(mid.clock[0] == 1.5);
    CHECK(mid.clock[1] == 1.0);
    const auto at = state_at(traj, 2.0);
    CHECK(at.phase[0].tag == R);
    CHECK(at.clock[0] == 0.0);
    CHECK(at.clock[1] == 2.0);
    const auto sw = state_at(traj, 3.2);
    CHECK(sw.phase[1].tag == SW);
    CHECK(sw.phase[1].remaining_delay == Approx(0.3));
    CHECK(sw.clock[1] == Approx(0.2));
    const auto late = state_at(traj, 9.0);
    CHECK(late.phase[1].tag == W);
    CHECK(late.clock[1] == 5.5);
    CHECK_THROWS_AS(state_at(traj, 10.5), InvalidSpec);
}

TEST_CASE("longrun availability on synthetic and simulated paths", "[kernel][availability]")
{
    RandomStream rng(1);
    const auto always = simulate(both(W), constant_field(0.0, 1.0), SwitchingPolicy::instantaneous(), 50.0, rng);
    CHECK(longrun_availability(always, 0.0) == 1.0);

    Trajectory alt;
    alt.initial = make_state(W, 0.0, R, 0.0);
    alt.horizon = 10.0;
    for (int i = 1; i < 10; ++i)
        alt.events.push_back({double(i), 0, i % 2 ? W : R, i % 2 ? R : W, 1.0, 0.0});
    CHECK(longrun_availability(alt, 0.0) == Approx(0.5).epsilon(1e-15));

    const auto field = constant_field(1.0, 1.0);
    const double oracle_value =
        1.0 - ctmc_stationary(to_ctmc(field, SwitchingPolicy::instantaneous()))[status_pair_index(0, 0)];
    CHECK(oracle_value == Approx(0.75).epsilon(1e-12));
    RandomStream long_rng(43);
    const auto traj = simulate(both(W), field, SwitchingPolicy::instantaneous(), 1e5, long_rng);
    CHECK(std::abs(longrun_availability(traj, 0.0) - oracle_value) <= 0.01);
}

TEST_CASE("status-pair occupation matches the CTMC stationary law", "[kernel][ctmc]")
{
    const auto field = constant_field({1.0, 2.0}, {1.5, 1.0});
    const auto pi = ctmc_stationary(to_ctmc(field, SwitchingPolicy::instantaneous()));
    RandomStream rng(47);
    const auto traj = simulate(both(W), field, SwitchingPolicy::instantaneous(), 1e5, rng);
    const auto occ = status_occupation(traj, 0.0);
    double tv = 0.0;
    for (int i = 0; i < 4; ++i)
        tv += 0.5 * std::abs(occ[i] - pi[i]);
    CHECK(tv <= 0.02);
}

TEST_CASE("CTMC gate rejects fields outside the exponential regime", "[kernel][ctmc]")
{
    auto field = constant_field(1.0, 1.0);
    field.set(0, 1, slot(GeneralizedIntensity(HyperbolicRate{2.0})));
    CHECK_THROWS_AS(to_ctmc(field, SwitchingPolicy::instantaneous()), InvalidSpec);
    CHECK_THROWS_AS(to_ctmc(constant_field(1.0, 1.0), bounded_delays(0.5)), InvalidSpec);
    auto clocked = constant_field(1.0, 1.0);
    clocked.slot(0, 0).modulator.curve(R) = ModulatorCurve({1.0}, {1.0, 2.0});
    CHECK_THROWS_AS(to_ctmc(clocked, SwitchingPolicy::instantaneous()), InvalidSpec);
}

TEST_CASE("faster joint repair lowers the both-failed probability", "[kernel][modulator]")
{
    auto base = constant_field(1.0, 1.0);
    auto boosted = base;
    for (int j = 0; j < 2; ++j)
        boosted.slot(j, 0).modulator.curve(R) = ModulatorCurve(3.0);
    const int reps = 20;
    std::vector<double> diff;
    for (int i = 0; i < reps; ++i) {
        RandomStream a = RandomStream::substream(7, static_cast<std::uint64_t>(i));
        RandomStream b = RandomStream::substream(7, static_cast<std::uint64_t>(i));
        const auto ta = simulate(both(W), base, SwitchingPolicy::instantaneous(), 2000.0, a);
        const auto tb = simulate(both(W), boosted, SwitchingPolicy::instantaneous(), 2000.0, b);
        diff.push_back(status_occupation(ta, 0.0)[3] - status_occupation(tb, 0.0)[3]);
    }
    double mean = 0.0;
    for (double d : diff)
        mean += d / reps;
    double var = 0.0;
    for (double d : diff)
        var += (d - mean) * (d - mean) / (reps - 1);
    CHECK(mean > 3.0 * std::sqrt(var / reps));
}

TEST_CASE("transient availability: exact endpoints and CTMC agreement", "[kernel][availability]")
{
    const auto field = constant_field(1.0, 1.0);
    const auto policy = SwitchingPolicy::instantaneous();
    const auto up = transient_availability(both(W), field, policy, {0.0}, 50, 1);
    CHECK(up.estimate[0] == 1.0);
    CHECK(up.stderr_[0] == 0.0);
    const auto down = transient_availability(both(R), field, policy, {0.0}, 50, 1);
    CHECK(down.estimate[0] == 0.0);

    const std::vector<double> grid{0.5, 1.0, 2.0, 5.0, 10.0};
    const auto curve = transient_availability(both(W), field, policy, grid, 10000, 2024, 2);
    const auto spec = to_ctmc(field, policy);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto p = ctmc_transient(spec, {1.0, 0.0, 0.0, 0.0}, grid[k]);
        const double exact = 1.0 - p[status_pair_index(0, 0)];
        CHECK(std::abs(curve.estimate[k] - exact) <= 3.0 * curve.stderr_[k]);
    }
}

TEST_CASE("replication results do not depend on the worker count", "[kernel][parallel]")
{
    const auto field = IntensityField::symmetric(slot(GeneralizedIntensity(HyperbolicRate{3.0})), constant_slot(1.0));
    const auto policy = bounded_delays(0.3);
    const auto one = sample_states(both(W), field, policy, 7.0, 200, 5, 1);
    const auto four = sample_states(both(W), field, policy, 7.0, 200, 5, 4);
    CHECK(one == four);
}
