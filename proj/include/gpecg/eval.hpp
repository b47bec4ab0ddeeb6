#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gpecg/gp_filter.hpp"
#include "gpecg/signal_io.hpp"
#include "gpecg/wavelet.hpp"

namespace gpecg {

// ---------------------------------------------------------------------------
// Noise and SNR

struct NoisySignal {
  std::vector<double> x;
  double noise_var = 0.0;
};

/// x = s + n, n ~ N(0, v) with v = mean(s^2) / 10^(snr_db / 10). Deterministic in `seed`.
NoisySignal add_white_noise(std::span<const double> s, double snr_db, std::uint64_t seed);

inline constexpr double kSnrCapDb = 120.0;

/// 10 log10(sum s^2 / sum (y - s)^2), capped at kSnrCapDb.
double snr_db(std::span<const double> s, std::span<const double> y);

// ---------------------------------------------------------------------------
// Synthetic ECG

/// One Gaussian wave of the beat template. Centre and width are fractions of
/// the local RR interval, measured from the R-peak.
struct GaussianWave {
  double amplitude_mv;
  double centre;
  double width;
};

struct SynthSpec {
  double fs = 250.0;
  double duration_s = 30.0;
  double heart_rate_bpm = 60.0;
  double rr_jitter = 0.0;         // relative std of RR intervals
  double rr_correlation = 0.9;    // lag-1 autocorrelation of the RR series (AR(1))
  double amplitude_jitter = 0.0;  // relative std of per-beat amplitude
  std::vector<GaussianWave> waves = default_template();

  static std::vector<GaussianWave> default_template();
  void validate() const;
};

struct SyntheticEcg {
  EcgRecord record;             // single lead, identical to `clean`
  std::vector<double> clean;
  std::vector<std::size_t> r_peaks;
};

SyntheticEcg synthesize_ecg(const SynthSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiments

inline constexpr const char* kMethodGpPosterior = "gp-posterior";
inline constexpr const char* kMethodGpPrior = "gp-prior";
inline constexpr const char* kMethodWavelet = "wavelet";

struct ExperimentConfig {
  std::vector<double> levels_db = {-5, 0, 5, 10, 15, 20, 25, 30};
  std::size_t repetitions = 5;
  std::uint64_t seed = 42;
  std::vector<std::string> methods = {kMethodGpPosterior, kMethodGpPrior, kMethodWavelet};
  std::vector<std::size_t> leads = {0};
  std::optional<std::size_t> phase_bins;
  std::optional<double> noise_var;
  WaveletSpec wavelet;
  std::size_t threads = 1;

  void validate() const;
};

/// Seed of one (record, lead, level, repetition) task, derived from the master
/// seed only so results do not depend on scheduling.
std::uint64_t task_seed(std::uint64_t master, std::size_t record, std::size_t lead, std::size_t level,
                        std::size_t repetition);

/// Per task: baseline-wander removal of the clean lead, noise injection at the
/// level, every method on the noisy signal, SNR against the preprocessed clean
/// lead. Failed tasks are reported in `skipped`.
ReportDocument run_experiment(std::span<const EcgRecord> records, const ExperimentConfig& cfg);

/// Mean and population std of improvement per (method, level), in config order.
std::vector<LevelAggregate> aggregate(std::span<const SnrResult> rows, std::span<const std::string> methods,
                                      std::span<const double> levels_db);

}  // namespace gpecg
