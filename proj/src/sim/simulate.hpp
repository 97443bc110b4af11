#pragma once

#include "sim/config.hpp"
#include "sim/field_sequence.hpp"
#include "sim/lbm.hpp"
#include "sim/linear_toy.hpp"
#include "sim/spectral_systems.hpp"

namespace lapis::sim {

/// Dispatches on cfg.system.
FieldSequence simulate(const SimConfig& cfg);

}  // namespace lapis::sim
