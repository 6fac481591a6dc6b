#pragma once

#include "warmsim/field.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/state.hpp"

#include <deque>
#include <stdexcept>

namespace fixture {

using namespace warmsim;

inline HazardSlot slot(GeneralizedIntensity gi) { return HazardSlot{std::move(gi), {}, std::nullopt}; }

inline HazardSlot constant_slot(double rate) { return slot(GeneralizedIntensity(ConstantRate{rate})); }

/// Both elements: failure rate lambda, repair rate mu, no modulation.
inline IntensityField constant_field(double lambda, double mu)
{
    return IntensityField::symmetric(constant_slot(lambda), constant_slot(mu));
}

/// Per-element constant rates.
inline IntensityField constant_field(std::array<double, 2> lambda, std::array<double, 2> mu)
{
    IntensityField f;
    for (int j = 0; j < 2; ++j) {
        f.set(j, 1, constant_slot(lambda[static_cast<std::size_t>(j)]));
        f.set(j, 0, constant_slot(mu[static_cast<std::size_t>(j)]));
    }
    return f;
}

inline SystemState both(PhaseTag tag) { return make_state(tag, 0.0, tag, 0.0); }

/// Stream returning scripted exponential marks and uniforms, then failing loudly.
class ScriptedStream
{
  public:
    ScriptedStream(std::deque<double> exponentials, std::deque<double> uniforms)
        : exp_(std::move(exponentials)), uni_(std::move(uniforms))
    {
    }

    double exponential() { return take(exp_); }
    double uniform() { return take(uni_); }

  private:
    static double take(std::deque<double>& q)
    {
        if (q.empty())
            throw std::logic_error("scripted stream exhausted");
        const double v = q.front();
        q.pop_front();
        return v;
    }

    std::deque<double> exp_;
    std::deque<double> uni_;
};

} // namespace fixture
