#pragma once

#include "warmsim/analysis.hpp"
#include "warmsim/conditions.hpp"
#include "warmsim/coupling.hpp"
#include "warmsim/envelope.hpp"
#include "warmsim/errors.hpp"
#include "warmsim/field.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/kernel.hpp"
#include "warmsim/rate_map.hpp"
#include "warmsim/rng.hpp"
#include "warmsim/state.hpp"
