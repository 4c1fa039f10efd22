#pragma once

// Umbrella header for the header-only resonance library.

#include "resonance/core.hpp"
#include "resonance/operator_space.hpp"
#include "resonance/laurent.hpp"
#include "resonance/resonance_structure.hpp"
#include "resonance/eigenpath.hpp"
#include "resonance/projection_decomposition.hpp"
#include "resonance/spectral_flow.hpp"
#include "resonance/tangency.hpp"
#include "resonance/io.hpp"
#include "resonance/scenario.hpp"
