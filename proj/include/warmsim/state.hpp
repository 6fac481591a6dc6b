#pragma once

#include "warmsim/errors.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace warmsim {

enum class PhaseTag : std::uint8_t
{
    Working = 0,
    UnderRepair = 1,
    SwitchingToWork = 2,
    SwitchingToRepair = 3,
};

inline constexpr std::array<PhaseTag, 4> kAllPhases{PhaseTag::Working, PhaseTag::UnderRepair,
                                                    PhaseTag::SwitchingToWork, PhaseTag::SwitchingToRepair};

constexpr std::string_view to_string(PhaseTag tag) noexcept
{
    switch (tag) {
    case PhaseTag::Working:
        return "working";
    case PhaseTag::UnderRepair:
        return "under_repair";
    case PhaseTag::SwitchingToWork:
        return "switching_to_work";
    case PhaseTag::SwitchingToRepair:
        return "switching_to_repair";
    }
    return "?";
}

inline std::optional<PhaseTag> parse_phase(std::string_view name) noexcept
{
    for (auto tag : kAllPhases)
        if (to_string(tag) == name)
            return tag;
    return std::nullopt;
}

constexpr bool is_switching(PhaseTag tag) noexcept
{
    return tag == PhaseTag::SwitchingToWork || tag == PhaseTag::SwitchingToRepair;
}

/// Base status n of the element: 1 while working, 0 while under repair; nullopt while switching.
constexpr std::optional<int> base_status(PhaseTag tag) noexcept
{
    if (tag == PhaseTag::Working)
        return 1;
    if (tag == PhaseTag::UnderRepair)
        return 0;
    return std::nullopt;
}

struct ElementPhase
{
    PhaseTag tag = PhaseTag::Working;
    double remaining_delay = 0.0; ///< only meaningful for switching tags

    bool operator==(const ElementPhase&) const = default;
};

/**
 * Full state of the two-element system: per-element phase and elapsed time
 * in that phase (the clock), plus the global wall time.
 *
 * `atom_due` marks an element whose clock sits exactly on one of its atoms
 * that has not been evaluated yet; it only arises when another element fired
 * at the same instant.
 */
struct SystemState
{
    std::array<ElementPhase, 2> phase{};
    std::array<double, 2> clock{0.0, 0.0};
    double wall_time = 0.0;
    std::array<bool, 2> atom_due{false, false};

    bool operator==(const SystemState&) const = default;

    void validate(double switching_bound = std::numeric_limits<double>::infinity()) const
    {
        for (int j = 0; j < 2; ++j) {
            if (!(clock[j] >= 0.0) || !std::isfinite(clock[j]))
                throw InvalidSpec("element " + std::to_string(j + 1) + " clock must be finite and >= 0");
            if (is_switching(phase[j].tag)) {
                if (!(phase[j].remaining_delay >= 0.0) || phase[j].remaining_delay > switching_bound)
                    throw InvalidSpec("element " + std::to_string(j + 1) +
                                      " remaining switching delay must lie in [0, B]");
            } else if (phase[j].remaining_delay != 0.0) {
                throw InvalidSpec("element " + std::to_string(j + 1) + " carries a delay outside a switching phase");
            }
        }
        if (!(wall_time >= 0.0))
            throw InvalidSpec("wall time must be >= 0");
    }
};

inline SystemState make_state(PhaseTag first, double clock1, PhaseTag second, double clock2)
{
    SystemState s;
    s.phase[0].tag = first;
    s.phase[1].tag = second;
    s.clock = {clock1, clock2};
    return s;
}

/// True iff at least one element is Working; switching elements are not operating.
constexpr bool availability_indicator(const SystemState& state) noexcept
{
    return state.phase[0].tag == PhaseTag::Working || state.phase[1].tag == PhaseTag::Working;
}

inline constexpr double kCouplingClockTol = 1e-9;

/// Same phase tags and flags, clocks and remaining delays equal within `tol`.
inline bool states_match(const SystemState& a, const SystemState& b, double tol = kCouplingClockTol)
{
    for (int j = 0; j < 2; ++j) {
        if (a.phase[j].tag != b.phase[j].tag || a.atom_due[j] != b.atom_due[j])
            return false;
        if (std::abs(a.clock[j] - b.clock[j]) > tol)
            return false;
        if (std::abs(a.phase[j].remaining_delay - b.phase[j].remaining_delay) > tol)
            return false;
    }
    return true;
}

} // namespace warmsim
