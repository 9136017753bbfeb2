#pragma once

// Umbrella header.

#include "guc/colorsets.hpp"
#include "guc/decouple.hpp"
#include "guc/io.hpp"
#include "guc/rng.hpp"
#include "guc/sequence.hpp"
#include "guc/symplectic.hpp"
#include "guc/synth.hpp"
