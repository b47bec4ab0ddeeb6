// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gpecg/eval.hpp"
#include "gpecg/gp_filter.hpp"
#include "gpecg/phase_domain.hpp"
#include "gpecg/preprocessing.hpp"
#include "gpecg/rpeak.hpp"
#include "gpecg/signal_io.hpp"
#include "gpecg/wavelet.hpp"
#include "support/testkit.hpp"

using namespace gpecg;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome phase_round_trip() {
  Outcome out;
  testkit::Gen gen(1001);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = gen.index(2, 2000);
    const auto t = n + gen.index(0, 2 * n);
    const auto tf = build_transform(n, t);
    const auto x = gen.normals(n);
    if (to_time(to_phase(x, tf), tf) != x) out.fail("round trip not exact at N=" + std::to_string(n));

    std::vector<std::size_t> g(n, 0);
    for (std::size_t k = 0; k < t; ++k) {
      const std::size_t expect = k * (n - 1) / (t - 1);
      if (tf.index_map[k] != expect) out.fail("index map differs from floor(k(N-1)/(T-1))");
      ++g[tf.index_map[k]];
    }
    if (g != tf.g) out.fail("g is not the column count of Theta");
    if (std::any_of(g.begin(), g.end(), [](std::size_t c) { return c == 0; })) out.fail("empty Gramian entry");
    // Theta^T Theta x = diag(g) x
    const auto back = scatter_sum(to_phase(x, tf), tf);
    for (std::size_t j = 0; j < n; ++j) {
      const double want = static_cast<double>(g[j]) * x[j];
      if (std::abs(back[j] - want) > 1e-12 * std::abs(want)) out.fail("Theta^T Theta x differs from diag(g) x");
    }
  }
  out.detail = out.pass ? "200 random (N, T) pairs, N up to 2000" : out.detail;
  return out;
}

Outcome diagonal_filter_oracle() {
  Outcome out;
  testkit::Gen gen(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = gen.index(2, 16);
    const auto t = n + gen.index(0, 24);
    const auto tf = build_transform(n, t);
    const double v = gen.uniform(0.0, 2.0);
    const auto m = testkit::random_diagonal_model(gen, t, v);
    const auto x = gen.normals(n, 2.0);
    const auto post = filter_beat_diagonal(x, tf, m);
    const Eigen::MatrixXd k = testkit::as_vector(m.k_diag).asDiagonal();
    const auto ref = testkit::dense_posterior(x, tf, testkit::as_vector(m.mu), k,
                                              v * Eigen::MatrixXd::Identity(k.rows(), k.cols()));
    worst = std::max({worst, testkit::max_rel_diff(post.s_hat, ref.s_hat), testkit::max_rel_diff(post.post_var, ref.post_var)});
  }
  if (worst > 1e-9) out.fail("max relative deviation " + fmt("%.3g", worst));
  else out.detail = "100 instances, max relative deviation " + fmt("%.2g", worst);
  return out;
}

Outcome limit_behaviour() {
  Outcome out;
  testkit::Gen gen(1003);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = gen.index(2, 40);
    const auto tf = build_transform(n, n + gen.index(0, 30));
    auto m = testkit::random_diagonal_model(gen, tf.n_phase, 0.0);
    const auto x = gen.normals(n, 2.0);

    const auto exact = filter_beat_diagonal(x, tf, m);
    if (testkit::max_abs_diff(exact.s_hat, x) > 1e-12) out.fail("v = 0 does not reproduce the input");

    m.noise_var = *std::max_element(m.k_diag.begin(), m.k_diag.end()) * gen.uniform(1.0, 3.0);
    const auto smooth = filter_beat_diagonal(x, tf, m);
    if (smooth.s_hat != smooth.prior_mean) out.fail("v >= max k does not return the prior mean");

    m.noise_var = gen.uniform(0.0, 3.0);
    for (double g : filter_beat_diagonal(x, tf, m).gain) {
      if (!(g >= 0.0 && g <= 1.0)) out.fail("gain outside [0, 1]");
    }
  }
  if (out.pass) out.detail = "1000 random models";
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic suite shared by criteria 4-6 and 8.

constexpr std::size_t kSuiteSeeds = 5;

SynthSpec suite_spec() {
  SynthSpec spec;
  spec.fs = 250.0;
  spec.duration_s = 60.0;
  spec.heart_rate_bpm = 60.0;
  spec.rr_jitter = 0.05;
  spec.amplitude_jitter = 0.10;
  return spec;
}

std::vector<SyntheticEcg> suite_records() {
  std::vector<SyntheticEcg> out;
  for (std::size_t s = 1; s <= kSuiteSeeds; ++s) out.push_back(synthesize_ecg(suite_spec(), s));
  return out;
}

struct SweepResult {
  ReportDocument report;
  double seconds = 0.0;
};

SweepResult run_sweep(const std::vector<SyntheticEcg>& suite) {
  std::vector<EcgRecord> records;
  for (const auto& e : suite) records.push_back(e.record);
  ExperimentConfig cfg;
  cfg.levels_db = {-5, 0, 5, 10, 15, 20, 25, 30};
  cfg.repetitions = 1;
  cfg.seed = 2024;
  cfg.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto t0 = std::chrono::steady_clock::now();
  SweepResult out;
  out.report = run_experiment(records, cfg);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double mean_of(const ReportDocument& r, const std::string& method, double level) {
  for (const auto& a : r.aggregates) {
    if (a.method == method && a.level_db == level) return a.mean_improvement_db;
  }
  return std::nan("");
}

Outcome snr_improvement(const SweepResult& sweep) {
  Outcome out;
  const auto& r = sweep.report;
  if (!r.skipped.empty()) out.fail(std::to_string(r.skipped.size()) + " tasks skipped: " + r.skipped[0].reason);
  std::ostringstream table;
  for (double level : r.config.levels_db) {
    const double gp = mean_of(r, kMethodGpPosterior, level);
    const double wv = mean_of(r, kMethodWavelet, level);
    table << ' ' << level << ":" << fmt("%.2f", gp) << "/" << fmt("%.2f", wv);
    if (!(gp > 0.0)) out.fail("posterior improvement " + fmt("%.2f", gp) + " dB at " + fmt("%g", level) + " dB");
    if (level == 0.0 && !(gp >= 5.0)) out.fail("posterior improvement " + fmt("%.2f", gp) + " dB < 5 dB at 0 dB");
    if (level <= 15.0 && !(gp > wv)) {
      out.fail("posterior " + fmt("%.2f", gp) + " dB <= wavelet " + fmt("%.2f", wv) + " dB at " + fmt("%g", level) + " dB");
    }
  }
  if (sweep.seconds >= 120.0) out.fail("runtime " + fmt("%.1f", sweep.seconds) + " s");
  const std::string summary = "gp/wavelet dB at each level:" + table.str() + " (" + fmt("%.1f", sweep.seconds) + " s)";
  out.detail = out.pass ? summary : out.detail + "; " + summary;
  return out;
}

Outcome posterior_vs_prior(const SweepResult& sweep) {
  Outcome out;
  std::ostringstream table;
  for (double level : {-5.0, 0.0, 5.0, 10.0}) {
    const double post = mean_of(sweep.report, kMethodGpPosterior, level);
    const double prior = mean_of(sweep.report, kMethodGpPrior, level);
    table << ' ' << level << ":" << fmt("%.2f", post) << "/" << fmt("%.2f", prior);
    if (!(post >= prior)) out.fail("posterior below prior at " + fmt("%g", level) + " dB");
  }
  const std::string summary = "posterior/prior dB:" + table.str();
  out.detail = out.pass ? summary : out.detail + "; " + summary;
  return out;
}

Outcome noise_estimate(const SweepResult& sweep) {
  Outcome out;
  double lo = 1e300, hi = 0.0;
  std::size_t checked = 0;
  for (const auto& row : sweep.report.rows) {
    if (row.method != kMethodGpPosterior) continue;
    if (row.level_db != 0.0 && row.level_db != 5.0 && row.level_db != 10.0) continue;
    const double ratio = row.metrics.at("noise_var_est") / row.metrics.at("noise_var_true");
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    ++checked;
  }
  if (checked != 3 * kSuiteSeeds) out.fail("expected " + std::to_string(3 * kSuiteSeeds) + " rows, got " + std::to_string(checked));
  if (!(lo >= 0.5 && hi <= 2.0)) out.fail("estimate/true ratio outside [0.5, 2]");
  out.detail = (out.pass ? "" : out.detail + "; ") + "estimate/true in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]";
  return out;
}

Outcome wavelet_baseline() {
  Outcome out;
  testkit::Gen gen(1007);
  double worst_pr = 0.0;
  for (const char* name : {"sym5", "haar"}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto levels = gen.index(1, 5);
      const auto n = gen.index(std::size_t{1} << levels, 3000);
      const WaveletSpec spec{name, levels, ThresholdRule::kHybridSure};
      const auto x = gen.normals(n, gen.uniform(0.01, 100.0));
      double scale = 1.0;
      for (double e : x) scale = std::max(scale, std::abs(e));
      worst_pr = std::max(worst_pr, testkit::max_abs_diff(idwt(dwt(x, spec), spec, n), x) / scale);
    }
  }
  if (worst_pr > 1e-10) out.fail("reconstruction error " + fmt("%.3g", worst_pr));

  for (int trial = 0; trial < 100; ++trial) {
    const auto n = gen.index(1, 500);
    auto d = gen.normals(n, gen.uniform(0.1, 3.0));
    for (std::size_t k = 0; k < n / 8; ++k) d[gen.index(0, n - 1)] += gen.normal(15.0);
    const double sigma = gen.uniform(0.2, 2.0);
    const double got = sure_threshold(d, sigma), want = testkit::brute_force_sure(d, sigma);
    if (std::abs(got - want) > 1e-12 * std::max(1.0, want)) out.fail("SURE differs from brute force");
  }

  std::ifstream in(std::string(GPECG_TEST_DATA_DIR) + "/wavelet_golden.txt");
  std::vector<double> x, expected;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double a = 0.0, b = 0.0;
    ss >> a >> b;
    x.push_back(a);
    expected.push_back(b);
  }
  double golden = std::nan("");
  if (x.size() != 64) {
    out.fail("golden file missing or malformed");
  } else {
    golden = testkit::max_abs_diff(denoise_wavelet(x), expected);
    if (!(golden <= 1e-6)) out.fail("golden deviation " + fmt("%.3g", golden));
  }
  if (out.pass) {
    out.detail = "reconstruction " + fmt("%.2g", worst_pr) + ", SURE parity on 100 vectors, golden " + fmt("%.2g", golden);
  }
  return out;
}

Outcome rpeak_detection(const std::vector<SyntheticEcg>& suite) {
  Outcome out;
  const auto spec = suite_spec();
  const auto tol = static_cast<std::size_t>(std::lround(0.050 * spec.fs));
  std::size_t truth = 0, hits = 0, false_pos = 0;
  for (std::size_t s = 0; s < suite.size(); ++s) {
    const auto pre = remove_baseline_wander(suite[s].clean, spec.fs);
    const auto noisy = add_white_noise(pre, 10.0, 5000 + s);
    const auto det = detect_r_peaks(noisy.x, spec.fs).indices;
    truth += suite[s].r_peaks.size();
    hits += testkit::count_matched(suite[s].r_peaks, det, tol);
    false_pos += det.size() - testkit::count_matched(det, suite[s].r_peaks, tol);
  }
  const double sens = static_cast<double>(hits) / static_cast<double>(truth);
  if (sens < 0.99) out.fail("sensitivity " + fmt("%.4f", sens));
  if (false_pos > 0) out.fail(std::to_string(false_pos) + " false positives");
  out.detail = (out.pass ? "" : out.detail + "; ") + "sensitivity " + fmt("%.4f", sens) + " over " + std::to_string(truth) +
               " beats, " + std::to_string(false_pos) + " false positives";
  return out;
}

Outcome determinism() {
  Outcome out;
  const std::string dir = GPECG_ACCEPTANCE_WORK_DIR;
  const std::string cli = GPECG_CLI_PATH;
  const std::string args = " bench --input synth --synth-duration 60 --levels -5:5:30 --reps 2 --seed 99";
  std::vector<std::string> files;
  for (const char* tag : {"a1", "b1", "c4", "d8"}) {
    const std::string threads = std::string(tag).substr(1);
    for (const char* ext : {".json", ".csv"}) {
      const std::string path = dir + "/determinism_" + tag + ext;
      const std::string cmd = "\"" + cli + "\"" + args + " --threads " + threads + " --out \"" + path + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) out.fail("bench exited nonzero: " + cmd);
      files.push_back(path);
    }
  }
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  for (std::size_t i = 2; i < files.size(); ++i) {
    const auto a = slurp(files[i % 2]), b = slurp(files[i]);
    if (a.empty() || a != b) out.fail(files[i] + " differs from " + files[i % 2]);
  }
  if (out.pass) out.detail = "JSON and CSV reports identical over 4 runs with 1, 1, 4 and 8 threads";
  return out;
}

Outcome io_identity() {
  Outcome out;
  for (std::uint32_t v = 0; v < (1u << 24); ++v) {
    const auto b0 = static_cast<std::uint8_t>(v & 0xff);
    const auto b1 = static_cast<std::uint8_t>((v >> 8) & 0xff);
    const auto b2 = static_cast<std::uint8_t>((v >> 16) & 0xff);
    const auto s = unpack_212_pair(b0, b1, b2);
    if (s[0] < -2048 || s[0] > 2047 || s[1] < -2048 || s[1] > 2047) {
      out.fail("decoded sample outside 12 bits");
      break;
    }
    if (pack_212_pair(s[0], s[1]) != std::array<std::uint8_t, 3>{b0, b1, b2}) {
      out.fail("decode/encode mismatch at 0x" + std::to_string(v));
      break;
    }
  }
  testkit::Gen gen(1010);
  for (int trial = 0; trial < 100; ++trial) {
    EcgRecord rec;
    rec.name = "r";
    rec.fs = 250.0;
    rec.leads.assign(gen.index(1, 4), {});
    const auto n = gen.index(1, 400);
    const double scale = std::pow(10.0, gen.uniform(-6.0, 4.0));
    for (auto& lead : rec.leads) lead = gen.normals(n, scale);
    if (read_csv_record(write_csv_record(rec), rec.fs).leads != rec.leads) out.fail("CSV round trip not exact");
  }
  if (out.pass) out.detail = "2^24 packed triples, 100 random CSV records";
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run, double limit_s = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && secs >= limit_s) o.fail("runtime " + fmt("%.2f", secs) + " s exceeds " + fmt("%g", limit_s) + " s");
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %2d %-26s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "phase round-trip", phase_round_trip, 5.0);
  report(2, "diagonal filter oracle", diagonal_filter_oracle, 5.0);
  report(3, "limit behaviour", limit_behaviour);

  std::vector<SyntheticEcg> suite;
  SweepResult sweep;
  bool sweep_ok = true;
  std::string sweep_error;
  try {
    suite = suite_records();
    sweep = run_sweep(suite);
  } catch (const std::exception& e) {
    sweep_ok = false;
    sweep_error = e.what();
  }
  auto guarded = [&](const std::function<Outcome()>& f) {
    return [&, f]() {
      if (!sweep_ok) {
        Outcome o;
        o.fail("synthetic sweep failed: " + sweep_error);
        return o;
      }
      return f();
    };
  };
  report(4, "SNR improvement", guarded([&] { return snr_improvement(sweep); }));
  report(5, "posterior vs prior", guarded([&] { return posterior_vs_prior(sweep); }));
  report(6, "noise-variance estimate", guarded([&] { return noise_estimate(sweep); }));
  report(7, "wavelet baseline", wavelet_baseline);
  report(8, "R-peak detection", guarded([&] { return rpeak_detection(suite); }));
  report(9, "end-to-end determinism", determinism);
  report(10, "I/O identities", io_identity);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
