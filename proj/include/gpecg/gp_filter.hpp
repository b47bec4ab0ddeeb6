#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gpecg/phase_domain.hpp"
#include "gpecg/rpeak.hpp"
#include "gpecg/signal_io.hpp"

namespace gpecg {

/// Phase-domain Gaussian model learned from the beats of a record. Sample
/// statistics use population (1/B) normalisation.
struct PhaseGpModel {
  std::vector<double> mu;      // sample mean
  std::vector<double> k_diag;  // sample variance per phase sample
  std::optional<Eigen::MatrixXd> k_full;
  std::size_t beat_count = 0;
  std::optional<double> noise_var;  // mV^2

  std::size_t n_phase() const { return mu.size(); }
};

PhaseGpModel fit_phase_model(std::span<const std::vector<double>> beats,
                             std::span<const PhaseTransform> transforms, bool want_full = false);

/// Linear-interpolated percentile of `v`, 0 <= p <= 1.
double percentile(std::span<const double> v, double p);

enum class NoiseEstimator {
  /// p-th percentile of the phase sample variance.
  kPercentile,
  /// Same percentile divided by the p-quantile of chi^2(B-1)/B, the sampling
  /// distribution of a noise-only phase variance, which removes the downward
  /// bias of a low percentile.
  kCalibratedPercentile,
};

/// Noise variance from the low end of the phase-domain sample variance: on
/// isoelectric phase samples the clean-signal variance is close to zero and
/// what remains is the noise.
PhaseGpModel estimate_noise_variance(PhaseGpModel model, double p = 0.05,
                                     NoiseEstimator estimator = NoiseEstimator::kPercentile);

struct BeatPosterior {
  std::vector<double> s_hat;
  std::vector<double> prior_mean;
  std::vector<double> gain;
  std::vector<double> post_var;
  /// Set when some sample had zero measurement variance but deviated from the prior.
  bool degenerate = false;
};

/// O(N) posterior with diagonal phase covariance. Per time sample j with
/// phase group G_j of size g_j:
///   prior  = mean(mu[G_j])
///   k_x    = sum(k[G_j]) / g_j^2
///   k_s    = max(0, sum(k[G_j] - v) / g_j^2)
///   s_hat  = prior + (k_s / k_x) (x - prior)
BeatPosterior filter_beat_diagonal(std::span<const double> x, const PhaseTransform& tf, const PhaseGpModel& model);

/// How the phase-domain noise covariance enters the clean-signal covariance.
enum class NoiseForm {
  kPhaseGramian,  // v * Theta Theta^T, which maps to v * I in time
  kDiagonal,      // v * I in phase (diagonal of Theta Theta^T), maps to v / g in time
};

struct FullFilterOptions {
  std::optional<double> ridge;  // default 1e-8 * trace(K_x) / N
  NoiseForm noise_form = NoiseForm::kPhaseGramian;
  std::size_t max_beat_length = 2000;
};

/// Dense posterior using the full phase covariance:
///   K_x = Psi K Psi^T + ridge I,  K_s = PSD(Psi (K - v Theta Theta^T) Psi^T)
///   s_hat = mu_s + K_s K_x^-1 (x - mu_s),  post_var = diag(K_s - K_s K_x^-1 K_s)
BeatPosterior filter_beat_full(std::span<const double> x, const PhaseTransform& tf, const PhaseGpModel& model,
                               const FullFilterOptions& opts = {});

struct FilterOptions {
  std::optional<std::size_t> phase_bins;
  std::optional<double> noise_var;
  double noise_percentile = 0.05;
  NoiseEstimator noise_estimator = NoiseEstimator::kCalibratedPercentile;
  bool full_covariance = false;
  FullFilterOptions full;
  /// Run baseline-wander removal first. Off when the input is already preprocessed.
  bool preprocess = true;
  DetectorConfig detector;
  /// Externally supplied R-peaks; skips detection.
  std::optional<std::vector<std::size_t>> r_peaks;
  /// Fit the model only on beats lying inside [first, second); filter all beats.
  std::optional<std::pair<std::size_t, std::size_t>> fit_range;
};

struct FilterDiagnostics {
  std::size_t beat_count = 0;  // beats used to fit the model
  std::size_t n_phase = 0;
  double noise_var = 0.0;
  bool noise_var_estimated = false;
  bool detection_low_confidence = false;
  std::vector<std::size_t> r_peaks;
  BeatSegmentation segmentation;
  std::vector<std::size_t> degenerate_beats;
};

struct FilterResult {
  std::vector<double> posterior;  // posterior-mean filter output
  std::vector<double> prior;      // prior-mean filter output
  std::vector<double> variance;   // posterior variance; NaN on samples outside all beats
  FilterDiagnostics diagnostics;
};

/// Full pipeline on one signal: baseline removal, R-peak detection, beat
/// segmentation, model fit, noise estimate, per-beat filtering. Samples
/// outside every beat pass through unchanged.
FilterResult filter_signal(std::span<const double> x, double fs, const FilterOptions& opts = {});

FilterResult filter_record(const EcgRecord& record, std::size_t lead, const FilterOptions& opts = {});

}  // namespace gpecg
