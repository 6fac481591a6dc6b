#pragma once

#include "warmsim/errors.hpp"
#include "warmsim/intensity.hpp"

#include <string>

namespace warmsim {

/**
 * Lower/upper hazard envelopes phi <= lambda <= Q for one (element, phase)
 * slot, with the moment order k, the neighbourhood radius epsilon of the
 * small-mass-near-zero condition and the positivity delay T.
 *
 * phi and Q are themselves generalized intensities; their induced d.f.'s are
 * Phi (dominated lifetime) and G (dominating lifetime).
 */
struct EnvelopePair
{
    GeneralizedIntensity phi;
    GeneralizedIntensity q;
    int k = 2;
    double epsilon = 0.1;
    double t_delay = 0.0;

    EnvelopePair() = default;

    EnvelopePair(GeneralizedIntensity phi_, GeneralizedIntensity q_, int k_, double epsilon_, double t_delay_)
        : phi(std::move(phi_)), q(std::move(q_)), k(k_), epsilon(epsilon_), t_delay(t_delay_)
    {
        if (k < 2)
            throw InvalidSpec("envelope moment order k must be >= 2, got " + std::to_string(k));
        if (!(epsilon > 0.0))
            throw InvalidSpec("envelope epsilon must be > 0");
        if (!(t_delay >= 0.0))
            throw InvalidSpec("envelope delay T must be >= 0");
    }
};

} // namespace warmsim
