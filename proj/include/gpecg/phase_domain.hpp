#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gpecg {

/// Sparse time-to-phase map of one beat. Row k of the implied 0/1 matrix has
/// its single 1 in column index_map[k]; g[j] counts the rows pointing at time
/// sample j, so the Gramian is diag(g). Indices are 0-based.
struct PhaseTransform {
  std::size_t n_time = 0;
  std::size_t n_phase = 0;
  std::vector<std::size_t> index_map;  // length n_phase, non-decreasing, 0 .. n_time-1
  std::vector<std::size_t> g;          // length n_time, sums to n_phase
};

/// Equidistant knots over the beat: index_map[k] = floor(k (n_time-1) / (n_phase-1)).
/// The last knot lands exactly on the last time sample. Requires
/// n_phase >= n_time >= 2 so every g[j] >= 1.
PhaseTransform build_transform(std::size_t n_time, std::size_t n_phase);

/// Gathers phase sample k from time sample index_map[k].
std::vector<double> to_phase(std::span<const double> x, const PhaseTransform& tf);

/// Per-time-sample mean of the phase samples mapped to it (the left inverse
/// of to_phase). Exact on outputs of to_phase.
std::vector<double> to_time(std::span<const double> phase, const PhaseTransform& tf);

/// Sum of the phase samples mapped to each time sample (transpose product).
std::vector<double> scatter_sum(std::span<const double> phase, const PhaseTransform& tf);

/// Record-wide phase length: ceil(max(1.2 * longest, longest + 1)).
std::size_t default_phase_length(std::size_t longest_beat);

}  // namespace gpecg
