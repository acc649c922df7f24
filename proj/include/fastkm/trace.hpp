#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fastkm/vec.hpp"

namespace fastkm {

/// Per-iteration record of one solver run. Row k always carries the norms
/// below; iterates and residual vectors are retained only when the run was
/// started with keep_vectors (diagnostics need them, long large-dimension
/// runs do not).
///
/// residual[k] is computed from the very operator evaluation the scheme
/// performed at step k. For the extrapolated-gradient scheme the evaluation
/// point of step k is y_k, so residual[k] = ||(Id-T)(y_k)|| there.
struct Trace {
  std::vector<double> residual;          // ||x_k - T(x_k)||
  std::vector<double> velocity;          // ||x_k - x_{k-1}||, 0 at k = 0
  std::vector<double> k_times_residual;  // k * residual[k]

  std::vector<Vector> iterates;          // x_k, kept when requested
  std::vector<Vector> residual_vectors;  // x_k - T(x_k), kept when requested

  std::optional<std::size_t> terminated_at;  // index where the stop rule fired
  std::size_t wall_iterations = 0;           // last recorded index
  std::size_t eval_count = 0;                // operator evaluations performed
  std::size_t dim = 0;
  Vector final_iterate;

  std::size_t rows() const { return residual.size(); }
  bool has_vectors() const { return !iterates.empty(); }
};

}  // namespace fastkm
