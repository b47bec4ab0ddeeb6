#include "gpecg/gp_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "gpecg/preprocessing.hpp"

namespace gpecg {

PhaseGpModel fit_phase_model(std::span<const std::vector<double>> beats, std::span<const PhaseTransform> transforms,
                             bool want_full) {
  if (beats.size() != transforms.size()) throw Error("fit: beats and transforms are not aligned");
  if (beats.size() < 2) throw Error("fit: need at least 2 beats, got " + std::to_string(beats.size()));
  const std::size_t n_phase = transforms.front().n_phase;
  for (const auto& tf : transforms) {
    if (tf.n_phase != n_phase) throw Error("fit: transforms disagree on the phase length");
  }

  const std::size_t b = beats.size();
  Eigen::MatrixXd phase(n_phase, b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto xi = to_phase(beats[i], transforms[i]);
    phase.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(xi.data(), xi.size());
  }
  const Eigen::VectorXd mean = phase.rowwise().mean();
  phase.colwise() -= mean;

  PhaseGpModel model;
  model.beat_count = b;
  model.mu.assign(mean.data(), mean.data() + n_phase);
  model.k_diag.resize(n_phase);
  for (std::size_t k = 0; k < n_phase; ++k) {
    model.k_diag[k] = phase.row(static_cast<Eigen::Index>(k)).squaredNorm() / static_cast<double>(b);
  }
  if (want_full) {
    Eigen::MatrixXd cov = (phase * phase.transpose()) / static_cast<double>(b);
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal() = Eigen::Map<const Eigen::VectorXd>(model.k_diag.data(), n_phase);
    model.k_full = std::move(cov);
  }
  return model;
}

double percentile(std::span<const double> v, double p) {
  if (v.empty()) throw Error("percentile of an empty vector");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("percentile fraction outside [0, 1]");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return s[lo];
  return s[lo] + frac * (s[hi] - s[lo]);
}

PhaseGpModel estimate_noise_variance(PhaseGpModel model, double p, NoiseEstimator estimator) {
  if (model.k_diag.empty()) throw Error("noise estimate: model is empty");
  if (!(p > 0.0 && p < 1.0)) throw Error("noise estimate: percentile must lie in (0, 1)");
  double v = std::max(0.0, percentile(model.k_diag, p));
  if (estimator == NoiseEstimator::kCalibratedPercentile) {
    if (model.beat_count < 2) throw Error("noise estimate: calibration needs at least 2 beats");
    const auto b = static_cast<double>(model.beat_count);
    const boost::math::chi_squared dist(b - 1.0);
    v *= b / boost::math::quantile(dist, p);
  }
  model.noise_var = v;
  return model;
}

namespace {

void check_beat(std::span<const double> x, const PhaseTransform& tf, const PhaseGpModel& model) {
  if (!model.noise_var) throw Error("filter: noise variance not set");
  if (tf.n_phase != model.n_phase()) throw Error("filter: transform and model disagree on the phase length");
  if (x.size() != tf.n_time) throw Error("filter: beat length does not match the transform");
}

}  // namespace

BeatPosterior filter_beat_diagonal(std::span<const double> x, const PhaseTransform& tf, const PhaseGpModel& model) {
  check_beat(x, tf, model);
  const double vn = *model.noise_var;
  const std::size_t n = tf.n_time;

  std::vector<double> k_sum(n, 0.0);
  std::vector<double> ks_sum(n, 0.0);
  for (std::size_t k = 0; k < tf.n_phase; ++k) {
    const auto j = tf.index_map[k];
    k_sum[j] += model.k_diag[k];
    ks_sum[j] += model.k_diag[k] - vn;
  }

  BeatPosterior post;
  post.prior_mean = to_time(model.mu, tf);
  post.s_hat.resize(n);
  post.gain.resize(n);
  post.post_var.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double g2 = static_cast<double>(tf.g[j]) * static_cast<double>(tf.g[j]);
    const double kx = k_sum[j] / g2;
    const double ks = std::max(0.0, ks_sum[j] / g2);
    double gain = 0.0;
    if (kx > 0.0) {
      gain = std::clamp(ks / kx, 0.0, 1.0);
    } else if (x[j] != post.prior_mean[j]) {
      post.degenerate = true;
    }
    post.gain[j] = gain;
    post.s_hat[j] = post.prior_mean[j] + gain * (x[j] - post.prior_mean[j]);
    post.post_var[j] = ks * (1.0 - gain);
  }
  return post;
}

namespace {

// Psi A Psi^T for a phase-domain matrix A: block means over index groups.
Eigen::MatrixXd project_to_time(const Eigen::MatrixXd& a, const PhaseTransform& tf) {
  const auto n = static_cast<Eigen::Index>(tf.n_time);
  const auto t = static_cast<Eigen::Index>(tf.n_phase);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, t);
  for (Eigen::Index k = 0; k < t; ++k) rows.row(static_cast<Eigen::Index>(tf.index_map[k])) += a.row(k);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < t; ++k) out.col(static_cast<Eigen::Index>(tf.index_map[k])) += rows.col(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out(i, j) /= static_cast<double>(tf.g[i]) * static_cast<double>(tf.g[j]);
    }
  }
  return out;
}

}  // namespace

BeatPosterior filter_beat_full(std::span<const double> x, const PhaseTransform& tf, const PhaseGpModel& model,
                               const FullFilterOptions& opts) {
  check_beat(x, tf, model);
  if (!model.k_full) throw Error("full filter: model has no full covariance");
  if (tf.n_time > opts.max_beat_length) {
    throw Error("full filter: beat of " + std::to_string(tf.n_time) + " samples exceeds the cap of " +
                std::to_string(opts.max_beat_length));
  }
  const double vn = *model.noise_var;
  const auto n = static_cast<Eigen::Index>(tf.n_time);

  Eigen::MatrixXd kx = project_to_time(*model.k_full, tf);
  Eigen::MatrixXd ks = kx;
  if (opts.noise_form == NoiseForm::kPhaseGramian) {
    // Psi Theta Theta^T Psi^T = I because Psi Theta = I
    ks.diagonal().array() -= vn;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) ks(j, j) -= vn / static_cast<double>(tf.g[j]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ks);
  if (eig.info() != Eigen::Success) throw Error("full filter: eigen-decomposition failed");
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    ks = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    ks = 0.5 * (ks + ks.transpose());
  }

  const double ridge = opts.ridge.value_or(1e-8 * kx.trace() / static_cast<double>(n));
  if (ridge < 0.0) throw Error("full filter: ridge must be non-negative");
  kx.diagonal().array() += ridge;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(kx);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-13)) {
    throw Error("full filter: measurement covariance is numerically singular");
  }

  BeatPosterior post;
  post.prior_mean = to_time(model.mu, tf);
  Eigen::VectorXd resid(n);
  for (Eigen::Index j = 0; j < n; ++j) resid(j) = x[static_cast<std::size_t>(j)] - post.prior_mean[static_cast<std::size_t>(j)];
  const Eigen::VectorXd update = ks * ldlt.solve(resid);
  const Eigen::MatrixXd kx_inv_ks = ldlt.solve(ks);

  post.s_hat.resize(tf.n_time);
  post.gain.resize(tf.n_time);
  post.post_var.resize(tf.n_time);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto u = static_cast<std::size_t>(j);
    post.s_hat[u] = post.prior_mean[u] + update(j);
    post.gain[u] = kx_inv_ks(j, j);
    post.post_var[u] = std::max(0.0, ks(j, j) - ks.row(j).dot(kx_inv_ks.col(j)));
  }
  return post;
}

FilterResult filter_signal(std::span<const double> x, double fs, const FilterOptions& opts) {
  FilterResult res;
  const std::vector<double> pre = opts.preprocess ? remove_baseline_wander(x, fs) : std::vector<double>(x.begin(), x.end());
  const std::size_t n = pre.size();
  auto& diag = res.diagnostics;

  if (opts.r_peaks) {
    diag.r_peaks = *opts.r_peaks;
  } else {
    auto det = detect_r_peaks(pre, fs, opts.detector);
    diag.r_peaks = std::move(det.indices);
    diag.detection_low_confidence = det.low_confidence;
  }
  if (diag.r_peaks.size() < 2) {
    throw Error("filter: need at least 2 beats, found " + std::to_string(diag.r_peaks.size()));
  }
  diag.segmentation = segment_beats(diag.r_peaks, n);

  std::vector<const Beat*> usable;
  std::size_t longest = 0;
  for (const auto& beat : diag.segmentation.beats) {
    if (beat.length() < 2) continue;
    usable.push_back(&beat);
    longest = std::max(longest, beat.length());
  }
  if (usable.size() < 2) throw Error("filter: fewer than 2 usable beats");

  const std::size_t n_phase = opts.phase_bins.value_or(default_phase_length(longest));
  if (n_phase < longest) {
    throw Error("filter: phase length " + std::to_string(n_phase) + " is shorter than the longest beat (" +
                std::to_string(longest) + " samples)");
  }
  diag.n_phase = n_phase;

  std::map<std::size_t, PhaseTransform> cache;
  auto transform_for = [&](std::size_t len) -> const PhaseTransform& {
    auto it = cache.find(len);
    if (it == cache.end()) it = cache.emplace(len, build_transform(len, n_phase)).first;
    return it->second;
  };
  auto slice = [&](const Beat& b) {
    return std::vector<double>(pre.begin() + static_cast<std::ptrdiff_t>(b.start),
                               pre.begin() + static_cast<std::ptrdiff_t>(b.end + 1));
  };

  std::vector<std::vector<double>> fit_beats;
  std::vector<PhaseTransform> fit_tfs;
  for (const auto* b : usable) {
    if (opts.fit_range && (b->start < opts.fit_range->first || b->end >= opts.fit_range->second)) continue;
    fit_beats.push_back(slice(*b));
    fit_tfs.push_back(transform_for(b->length()));
  }
  auto model = fit_phase_model(fit_beats, fit_tfs, opts.full_covariance);
  diag.beat_count = model.beat_count;
  if (opts.noise_var) {
    if (*opts.noise_var < 0.0) throw Error("filter: noise variance must be non-negative");
    model.noise_var = *opts.noise_var;
  } else {
    model = estimate_noise_variance(std::move(model), opts.noise_percentile, opts.noise_estimator);
    diag.noise_var_estimated = true;
  }
  diag.noise_var = *model.noise_var;

  res.posterior = pre;
  res.prior = pre;
  res.variance.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t bi = 0; bi < usable.size(); ++bi) {
    const auto& b = *usable[bi];
    const auto xi = slice(b);
    const auto& tf = transform_for(b.length());
    const auto post = opts.full_covariance ? filter_beat_full(xi, tf, model, opts.full)
                                           : filter_beat_diagonal(xi, tf, model);
    if (post.degenerate) diag.degenerate_beats.push_back(bi);
    std::copy(post.s_hat.begin(), post.s_hat.end(), res.posterior.begin() + static_cast<std::ptrdiff_t>(b.start));
    std::copy(post.prior_mean.begin(), post.prior_mean.end(), res.prior.begin() + static_cast<std::ptrdiff_t>(b.start));
    std::copy(post.post_var.begin(), post.post_var.end(), res.variance.begin() + static_cast<std::ptrdiff_t>(b.start));
  }
  return res;
}

FilterResult filter_record(const EcgRecord& record, std::size_t lead, const FilterOptions& opts) {
  record.validate();
  if (lead >= record.n_leads()) {
    throw Error("lead " + std::to_string(lead) + " out of range (record has " + std::to_string(record.n_leads()) + ")");
  }
  return filter_signal(record.leads[lead], record.fs, opts);
}

}  // namespace gpecg
