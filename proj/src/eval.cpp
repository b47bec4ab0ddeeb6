#include "gpecg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iterator>
#include <cmath>
#include <random>
#include <thread>

#include "gpecg/preprocessing.hpp"

namespace gpecg {

NoisySignal add_white_noise(std::span<const double> s, double snr_db_level, std::uint64_t seed) {
  if (s.empty()) throw Error("noise injection: empty signal");
  if (!std::isfinite(snr_db_level)) throw Error("noise injection: SNR level must be finite");
  double power = 0.0;
  for (double v : s) power += v * v;
  power /= static_cast<double>(s.size());
  if (!(power > 0.0)) throw Error("noise injection: clean signal has zero power");

  NoisySignal out;
  out.noise_var = power / std::pow(10.0, snr_db_level / 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(out.noise_var));
  out.x.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out.x[i] = s[i] + normal(rng);
  return out;
}

double snr_db(std::span<const double> s, std::span<const double> y) {
  if (s.size() != y.size()) throw Error("snr: length mismatch");
  double sig = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sig += s[i] * s[i];
    err += (y[i] - s[i]) * (y[i] - s[i]);
  }
  if (!(sig > 0.0)) throw Error("snr: reference has zero energy");
  if (err == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(sig / err));
}

// ---------------------------------------------------------------------------

std::vector<GaussianWave> SynthSpec::default_template() {
  // P, Q, R, S, T at 60 bpm: centres and widths are seconds per second of RR
  return {
      {0.15, -0.20, 0.025},
      {-0.12, -0.035, 0.010},
      {1.00, 0.0, 0.012},
      {-0.25, 0.035, 0.010},
      {0.30, 0.30, 0.060},
  };
}

void SynthSpec::validate() const {
  if (!(fs > 0.0) || !(heart_rate_bpm > 0.0)) throw Error("synth: fs and heart rate must be positive");
  if (!(rr_jitter >= 0.0) || !(amplitude_jitter >= 0.0)) throw Error("synth: jitter must be non-negative");
  if (!(rr_correlation > -1.0 && rr_correlation < 1.0)) throw Error("synth: RR correlation must lie in (-1, 1)");
  if (waves.empty()) throw Error("synth: template has no waves");
  for (const auto& w : waves) {
    if (!(w.width > 0.0)) throw Error("synth: wave widths must be positive");
  }
  if (duration_s < 2.0 * 60.0 / heart_rate_bpm) throw Error("synth: duration shorter than 2 beats");
}

SyntheticEcg synthesize_ecg(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double rr0 = 60.0 / spec.heart_rate_bpm * spec.fs;  // samples
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));

  SyntheticEcg out;
  std::vector<double> amplitude;
  double t = 0.5 * rr0;
  double rr_state = normal(rng);
  const double innovation = std::sqrt(1.0 - spec.rr_correlation * spec.rr_correlation);
  while (std::llround(t) < static_cast<long long>(n)) {
    out.r_peaks.push_back(static_cast<std::size_t>(std::llround(t)));
    const double a = 1.0 + spec.amplitude_jitter * normal(rng);
    amplitude.push_back(std::max(0.1, a));
    const double rr = rr0 * std::clamp(1.0 + spec.rr_jitter * rr_state, 0.5, 1.5);
    rr_state = spec.rr_correlation * rr_state + innovation * normal(rng);
    t += rr;
  }

  out.clean.assign(n, 0.0);
  const std::size_t beats = out.r_peaks.size();
  for (std::size_t k = 0; k < beats; ++k) {
    const auto r = static_cast<double>(out.r_peaks[k]);
    double rr = rr0;
    if (beats > 1) {
      const double prev = k > 0 ? r - static_cast<double>(out.r_peaks[k - 1]) : static_cast<double>(out.r_peaks[1]) - r;
      const double next = k + 1 < beats ? static_cast<double>(out.r_peaks[k + 1]) - r : prev;
      rr = 0.5 * (prev + next);
    }
    for (const auto& w : spec.waves) {
      const double centre = r + w.centre * rr;
      const double width = w.width * rr;
      const double lo = std::max(0.0, std::floor(centre - 6.0 * width));
      const double hi = std::min(static_cast<double>(n - 1), std::ceil(centre + 6.0 * width));
      for (auto i = static_cast<std::size_t>(lo); static_cast<double>(i) <= hi; ++i) {
        const double z = (static_cast<double>(i) - centre) / width;
        out.clean[i] += amplitude[k] * w.amplitude_mv * std::exp(-0.5 * z * z);
      }
    }
  }

  out.record.name = "synth-" + std::to_string(seed);
  out.record.fs = spec.fs;
  out.record.leads = {out.clean};
  return out;
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw Error("experiment: repetitions must be at least 1");
  if (levels_db.empty()) throw Error("experiment: no SNR levels");
  for (double l : levels_db) {
    if (!std::isfinite(l)) throw Error("experiment: SNR levels must be finite");
  }
  if (methods.empty()) throw Error("experiment: no methods");
  for (const auto& m : methods) {
    if (m != kMethodGpPosterior && m != kMethodGpPrior && m != kMethodWavelet) {
      throw Error("experiment: unknown method '" + m + "'");
    }
  }
  if (leads.empty()) throw Error("experiment: no leads selected");
}

std::uint64_t task_seed(std::uint64_t master, std::size_t record, std::size_t lead, std::size_t level,
                        std::size_t repetition) {
  // splitmix64 over the task key
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master);
  for (std::uint64_t part : {std::uint64_t{record}, std::uint64_t{lead}, std::uint64_t{level},
                             std::uint64_t{repetition}}) {
    h = mix(h ^ part);
  }
  return h;
}

std::vector<LevelAggregate> aggregate(std::span<const SnrResult> rows, std::span<const std::string> methods,
                                      std::span<const double> levels_db) {
  std::vector<LevelAggregate> out;
  for (const auto& m : methods) {
    for (double level : levels_db) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.method == m && r.level_db == level) v.push_back(r.improvement_db);
      }
      if (v.empty()) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out.push_back({m, level, v.size(), mean, std::sqrt(ss / static_cast<double>(v.size()))});
    }
  }
  return out;
}

namespace {

struct Task {
  std::size_t record;
  std::size_t lead;
  std::size_t level;
  std::size_t repetition;
};

struct TaskOutput {
  std::vector<SnrResult> rows;
  std::vector<SkippedTask> skipped;
};

bool wants(const ExperimentConfig& cfg, const char* method) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), method) != cfg.methods.end();
}

}  // namespace

ReportDocument run_experiment(std::span<const EcgRecord> records, const ExperimentConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw Error("experiment: no records");

  ReportDocument report;
  auto& c = report.config;
  c.levels_db = cfg.levels_db;
  c.repetitions = cfg.repetitions;
  c.seed = cfg.seed;
  c.methods = cfg.methods;
  c.leads = cfg.leads;
  for (const auto& r : records) c.records.push_back(r.name);
  c.extra["wavelet"] = cfg.wavelet.wavelet;
  c.extra["wavelet_levels"] = std::to_string(cfg.wavelet.levels);
  c.extra["std_normalisation"] = "population";
  if (!cfg.noise_var) c.extra["noise_estimator"] = "chi2-calibrated percentile, p = 0.05";
  if (cfg.phase_bins) c.extra["phase_bins"] = std::to_string(*cfg.phase_bins);
  if (cfg.noise_var) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", *cfg.noise_var);
    c.extra["noise_var"] = buf;
  }

  // clean references, one per (record, lead)
  std::vector<std::vector<std::vector<double>>> clean(records.size());
  std::vector<std::vector<std::string>> clean_error(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    clean[r].resize(cfg.leads.size());
    clean_error[r].resize(cfg.leads.size());
    for (std::size_t li = 0; li < cfg.leads.size(); ++li) {
      try {
        records[r].validate();
        const auto lead = cfg.leads[li];
        if (lead >= records[r].n_leads()) throw Error("lead " + std::to_string(lead) + " not present");
        clean[r][li] = remove_baseline_wander(records[r].leads[lead], records[r].fs);
      } catch (const std::exception& e) {
        clean_error[r][li] = e.what();
      }
    }
  }

  std::vector<Task> tasks;
  for (std::size_t r = 0; r < records.size(); ++r)
    for (std::size_t li = 0; li < cfg.leads.size(); ++li)
      for (std::size_t l = 0; l < cfg.levels_db.size(); ++l)
        for (std::size_t k = 0; k < cfg.repetitions; ++k) tasks.push_back({r, li, l, k});

  auto run_task = [&](const Task& t) {
    TaskOutput out;
    const auto& rec = records[t.record];
    const double level = cfg.levels_db[t.level];
    const std::size_t lead = cfg.leads[t.lead];
    auto skip = [&](const std::string& why) {
      out.skipped.push_back({rec.name, lead, level, t.repetition, why});
    };
    if (!clean_error[t.record][t.lead].empty()) {
      skip(clean_error[t.record][t.lead]);
      return out;
    }
    const auto& s = clean[t.record][t.lead];
    NoisySignal noisy;
    double in_snr = 0.0;
    try {
      noisy = add_white_noise(s, level, task_seed(cfg.seed, t.record, lead, t.level, t.repetition));
      in_snr = snr_db(s, noisy.x);
    } catch (const std::exception& e) {
      skip(e.what());
      return out;
    }
    auto row = [&](const std::string& method, std::span<const double> y) {
      SnrResult r;
      r.record = rec.name;
      r.lead = lead;
      r.level_db = level;
      r.repetition = t.repetition;
      r.method = method;
      r.input_snr_db = in_snr;
      r.output_snr_db = snr_db(s, y);
      r.improvement_db = r.output_snr_db - r.input_snr_db;
      r.metrics["noise_var_true"] = noisy.noise_var;
      return r;
    };

    std::optional<FilterResult> gp;
    if (wants(cfg, kMethodGpPosterior) || wants(cfg, kMethodGpPrior)) {
      FilterOptions opts;
      opts.preprocess = false;
      opts.phase_bins = cfg.phase_bins;
      opts.noise_var = cfg.noise_var;
      try {
        gp = filter_signal(noisy.x, rec.fs, opts);
      } catch (const std::exception& e) {
        skip(std::string("gp: ") + e.what());
      }
    }
    for (const auto& m : cfg.methods) {
      if (m == kMethodWavelet) {
        try {
          out.rows.push_back(row(m, denoise_wavelet(noisy.x, cfg.wavelet)));
        } catch (const std::exception& e) {
          skip(std::string("wavelet: ") + e.what());
        }
      } else if (gp) {
        auto r = row(m, m == kMethodGpPosterior ? gp->posterior : gp->prior);
        r.metrics["noise_var_est"] = gp->diagnostics.noise_var;
        r.metrics["beats"] = static_cast<double>(gp->diagnostics.beat_count);
        out.rows.push_back(std::move(r));
      }
    }
    return out;
  };

  std::vector<TaskOutput> results(tasks.size());
  const std::size_t n_threads = std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(1, tasks.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) results[i] = run_task(tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) results[i] = run_task(tasks[i]);
      });
    }
  }

  for (auto& r : results) {
    std::move(r.rows.begin(), r.rows.end(), std::back_inserter(report.rows));
    std::move(r.skipped.begin(), r.skipped.end(), std::back_inserter(report.skipped));
  }
  report.aggregates = aggregate(report.rows, cfg.methods, cfg.levels_db);
  return report;
}

}  // namespace gpecg
