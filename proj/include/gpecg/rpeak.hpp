#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gpecg {

/// Parameters of the modified Pan-Tompkins detector.
struct DetectorConfig {
  double band_low_hz = 5.0;
  double band_high_hz = 25.0;
  double saturation_scale = 8.0;  // kappa, in robust standard deviations
  double window_ms = 100.0;       // sqrt-moving-average window
  double threshold_fraction = 0.5;
  double refractory_ms = 200.0;
  double running_max_ms = 2000.0;  // half-width of the window the threshold is relative to
  double refine_ms = 50.0;

  void validate() const;
};

struct RPeakList {
  std::vector<std::size_t> indices;
  bool low_confidence = false;
};

RPeakList detect_r_peaks(std::span<const double> x, double fs, const DetectorConfig& cfg = {});

struct Beat {
  std::size_t start = 0;
  std::size_t r_peak = 0;
  std::size_t end = 0;  // inclusive

  std::size_t length() const { return end - start + 1; }
};

struct BeatSegmentation {
  std::vector<Beat> beats;
};

/// Splits at floor((r_i + r_{i+1}) / 2). The outer beats mirror the adjacent
/// inner half-width, clipped to [0, n_samples - 1].
BeatSegmentation segment_beats(std::span<const std::size_t> peaks, std::size_t n_samples);

}  // namespace gpecg
