#include "gpecg/phase_domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gpecg/signal_io.hpp"

namespace gpecg {

PhaseTransform build_transform(std::size_t n_time, std::size_t n_phase) {
  if (n_time < 2) throw Error("phase transform: beat must have at least 2 samples");
  if (n_phase < n_time) {
    throw Error("phase transform: phase length " + std::to_string(n_phase) + " shorter than beat length " +
                std::to_string(n_time) + " (Gramian would be singular)");
  }
  PhaseTransform tf;
  tf.n_time = n_time;
  tf.n_phase = n_phase;
  tf.index_map.resize(n_phase);
  tf.g.assign(n_time, 0);
  for (std::size_t k = 0; k < n_phase; ++k) {
    const std::size_t j = k * (n_time - 1) / (n_phase - 1);
    tf.index_map[k] = j;
    ++tf.g[j];
  }
  return tf;
}

std::vector<double> to_phase(std::span<const double> x, const PhaseTransform& tf) {
  if (x.size() != tf.n_time) {
    throw Error("to_phase: beat has " + std::to_string(x.size()) + " samples, transform expects " +
                std::to_string(tf.n_time));
  }
  std::vector<double> out(tf.n_phase);
  for (std::size_t k = 0; k < tf.n_phase; ++k) out[k] = x[tf.index_map[k]];
  return out;
}

std::vector<double> to_time(std::span<const double> phase, const PhaseTransform& tf) {
  if (phase.size() != tf.n_phase) {
    throw Error("to_time: phase beat has " + std::to_string(phase.size()) + " samples, transform expects " +
                std::to_string(tf.n_phase));
  }
  if (std::find(tf.g.begin(), tf.g.end(), std::size_t{0}) != tf.g.end()) {
    throw Error("to_time: singular Gramian");
  }
  // running mean: identical inputs reproduce themselves bit-for-bit
  std::vector<double> out(tf.n_time, 0.0);
  std::vector<std::size_t> seen(tf.n_time, 0);
  for (std::size_t k = 0; k < tf.n_phase; ++k) {
    const auto j = tf.index_map[k];
    const auto c = ++seen[j];
    out[j] = c == 1 ? phase[k] : out[j] + (phase[k] - out[j]) / static_cast<double>(c);
  }
  return out;
}

std::vector<double> scatter_sum(std::span<const double> phase, const PhaseTransform& tf) {
  if (phase.size() != tf.n_phase) throw Error("scatter_sum: length mismatch");
  std::vector<double> out(tf.n_time, 0.0);
  for (std::size_t k = 0; k < tf.n_phase; ++k) out[tf.index_map[k]] += phase[k];
  return out;
}

std::size_t default_phase_length(std::size_t longest_beat) {
  const auto scaled = static_cast<std::size_t>(std::ceil(1.2 * static_cast<double>(longest_beat) - 1e-9));
  return std::max(scaled, longest_beat + 1);
}

}  // namespace gpecg
