#pragma once

#include <span>
#include <vector>

namespace gpecg {

enum class FilterMode { kLowpass, kHighpassBySubtraction };

struct FilterSpec {
  double cutoff_hz = 0.0;
  double fs = 0.0;
  FilterMode mode = FilterMode::kLowpass;

  void validate() const;
};

/// Zero-phase first-order Butterworth (bilinear) lowpass run forward and
/// backward. Magnitude response is |H(f)|^2 of the single-pass filter. Input is
/// odd-reflected by three time constants at each end before filtering. The
/// forward-backward and backward-forward passes are averaged so the result is
/// exactly reversal-symmetric.
///
/// With kHighpassBySubtraction the result is x - lowpass(x).
std::vector<double> lowpass_zero_phase(std::span<const double> x, const FilterSpec& spec);

/// Squared single-pass magnitude of the first-order bilinear lowpass at `f_hz`.
double zero_phase_gain(double f_hz, double cutoff_hz, double fs);

inline constexpr double kBaselineCutoffHz = 5.0;
inline constexpr double kBandLimitCutoffHz = 80.0;

/// lowpass_80(x - lowpass_5(x)).
std::vector<double> remove_baseline_wander(std::span<const double> x, double fs);

}  // namespace gpecg
