#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gpecg {

/// Orthogonal wavelet filter bank. dec_lo is the analysis lowpass; the other
/// three filters follow from it by the quadrature-mirror relations.
struct Wavelet {
  std::string name;
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;

  std::size_t length() const { return dec_lo.size(); }
};

/// "sym5" or "haar".
Wavelet wavelet_by_name(const std::string& name);

enum class ThresholdRule { kSure, kHybridSure, kUniversal };

struct WaveletSpec {
  std::string wavelet = "sym5";
  std::size_t levels = 4;
  ThresholdRule rule = ThresholdRule::kHybridSure;
};

/// approx holds the deepest approximation; details[0] is level 1 (finest).
struct DwtCoeffs {
  std::vector<double> approx;
  std::vector<std::vector<double>> details;
};

/// One analysis step with half-sample symmetric extension. Output length is
/// floor((n + F - 1) / 2) for both bands.
void dwt_step(std::span<const double> x, const Wavelet& w, std::vector<double>& approx, std::vector<double>& detail);

/// One synthesis step; returns 2 * len - F + 2 samples.
std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail, const Wavelet& w);

DwtCoeffs dwt(std::span<const double> x, const WaveletSpec& spec);

std::vector<double> idwt(const DwtCoeffs& coeffs, const WaveletSpec& spec, std::size_t target_len);

/// SURE(t) = n - 2 #{|d_i| <= t} + sum min(d_i, t)^2 evaluated on d / sigma
/// over t in {0} and {|d_i| / sigma}; smallest minimiser wins. Returns t * sigma.
double sure_threshold(std::span<const double> d, double sigma);

/// sigma * sqrt(2 ln n).
double universal_threshold(std::size_t n, double sigma);

/// SURE with the sparse-level fallback: the universal threshold is used when
/// (sum (d_i/sigma)^2 - n) / n < (log2 n)^1.5 / sqrt(n), and otherwise the
/// smaller of the SURE and universal thresholds.
double hybrid_sure_threshold(std::span<const double> d, double sigma);

void soft_threshold(std::span<double> v, double threshold);

/// Multilevel denoiser: noise sigma from the level-1 detail
/// (median |d1| / 0.6745) rescales every level's threshold; the approximation
/// is kept.
std::vector<double> denoise_wavelet(std::span<const double> x, const WaveletSpec& spec = {});

}  // namespace gpecg
