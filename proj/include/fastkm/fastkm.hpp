#pragma once

#include "fastkm/csv.hpp"
#include "fastkm/diagnostics.hpp"
#include "fastkm/experiments.hpp"
#include "fastkm/operators.hpp"
#include "fastkm/rng.hpp"
#include "fastkm/schedule.hpp"
#include "fastkm/schemes.hpp"
#include "fastkm/trace.hpp"
#include "fastkm/vec.hpp"

namespace fastkm {
inline constexpr const char* kVersion = "0.1.0";
}
