#include "gpecg/rpeak.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "gpecg/preprocessing.hpp"
#include "gpecg/signal_io.hpp"

namespace gpecg {

namespace {

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

// MAD-based standard deviation; falls back to the sample standard deviation
// when more than half the samples sit exactly on the median.
double robust_std(std::span<const double> v) {
  std::vector<double> tmp(v.begin(), v.end());
  const double med = median_of(tmp);
  for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = std::abs(v[i] - med);
  const double mad = median_of(std::move(tmp)) / 0.6745;
  if (mad > 0.0) return mad;
  double mean = 0.0;
  for (double s : v) mean += s;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double s : v) ss += (s - mean) * (s - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::size_t ms_to_samples(double ms, double fs) {
  return static_cast<std::size_t>(std::lround(ms * fs / 1000.0));
}

// Centered moving maximum with half-width `half`.
std::vector<double> running_max(std::span<const double> v, std::size_t half) {
  const std::size_t n = v.size();
  std::vector<double> out(n);
  std::deque<std::size_t> q;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + half);
    for (; next <= hi; ++next) {
      while (!q.empty() && v[q.back()] <= v[next]) q.pop_back();
      q.push_back(next);
    }
    const std::size_t lo = i >= half ? i - half : 0;
    while (q.front() < lo) q.pop_front();
    out[i] = v[q.front()];
  }
  return out;
}

}  // namespace

void DetectorConfig::validate() const {
  if (!(band_low_hz > 0.0) || !(band_high_hz > band_low_hz)) {
    throw Error("detector: bandpass corners must be positive and ordered");
  }
  if (!(saturation_scale > 0.0) || !(window_ms > 0.0) || !(threshold_fraction > 0.0) ||
      !(refractory_ms > 0.0) || !(running_max_ms > 0.0) || !(refine_ms >= 0.0)) {
    throw Error("detector: parameters must be positive");
  }
}

RPeakList detect_r_peaks(std::span<const double> x, double fs, const DetectorConfig& cfg) {
  cfg.validate();
  if (!(fs > 0.0)) throw Error("detector: sampling frequency must be positive");
  if (static_cast<double>(x.size()) < 2.0 * fs) throw Error("detector: record shorter than 2 s");

  const auto hp = lowpass_zero_phase(x, {cfg.band_low_hz, fs, FilterMode::kHighpassBySubtraction});
  const auto bp = lowpass_zero_phase(hp, {cfg.band_high_hz, fs, FilterMode::kLowpass});

  const double sigma = robust_std(bp);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return {{}, true};

  const std::size_t n = x.size();
  const double sat = sigma * cfg.saturation_scale;
  std::vector<double> csum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = sat * std::tanh(bp[i] / sat);
    csum[i + 1] = csum[i] + y * y;
  }

  const std::size_t half_win = std::max<std::size_t>(1, ms_to_samples(cfg.window_ms, fs)) / 2;
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half_win ? i - half_win : 0;
    const std::size_t hi = std::min(n - 1, i + half_win);
    env[i] = std::sqrt(std::max(0.0, (csum[hi + 1] - csum[lo]) / static_cast<double>(hi - lo + 1)));
  }
  const auto local_max = running_max(env, ms_to_samples(cfg.running_max_ms, fs));

  const std::size_t refine = ms_to_samples(cfg.refine_ms, fs);
  std::vector<std::size_t> candidates;
  std::size_t i = 0;
  while (i < n) {
    if (!(env[i] > cfg.threshold_fraction * local_max[i])) {
      ++i;
      continue;
    }
    std::size_t top = i;
    for (; i < n && env[i] > cfg.threshold_fraction * local_max[i]; ++i) {
      if (env[i] > env[top]) top = i;
    }
    const std::size_t lo = top >= refine ? top - refine : 0;
    const std::size_t hi = std::min(n - 1, top + refine);
    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k) {
      if (std::abs(bp[k]) > std::abs(bp[best])) best = k;
    }
    candidates.push_back(best);
  }
  std::sort(candidates.begin(), candidates.end());

  const std::size_t refractory = std::max<std::size_t>(1, ms_to_samples(cfg.refractory_ms, fs));
  RPeakList out;
  for (const auto c : candidates) {
    if (!out.indices.empty() && c - out.indices.back() < refractory) {
      if (std::abs(bp[c]) > std::abs(bp[out.indices.back()])) out.indices.back() = c;
      continue;
    }
    out.indices.push_back(c);
  }
  out.low_confidence = out.indices.empty();
  return out;
}

BeatSegmentation segment_beats(std::span<const std::size_t> peaks, std::size_t n_samples) {
  if (peaks.size() < 2) throw Error("segmentation needs at least 2 R-peaks");
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (peaks[i] >= n_samples) throw Error("R-peak index outside the record");
    if (i > 0 && peaks[i] < peaks[i - 1] + 2) {
      throw Error("R-peaks must be strictly increasing and at least 2 samples apart");
    }
  }

  std::vector<std::size_t> bounds(peaks.size() - 1);
  for (std::size_t i = 0; i + 1 < peaks.size(); ++i) bounds[i] = (peaks[i] + peaks[i + 1]) / 2;

  BeatSegmentation seg;
  seg.beats.resize(peaks.size());
  const std::size_t r_first = peaks.front();
  const std::size_t half_first = bounds.front() - r_first;
  seg.beats.front() = {r_first >= half_first ? r_first - half_first : 0, r_first, bounds.front() - 1};
  for (std::size_t i = 1; i + 1 < peaks.size(); ++i) {
    seg.beats[i] = {bounds[i - 1], peaks[i], bounds[i] - 1};
  }
  const std::size_t r_last = peaks.back();
  seg.beats.back() = {bounds.back(), r_last, std::min(n_samples - 1, r_last + (r_last - bounds.back()))};
  return seg;
}

}  // namespace gpecg
