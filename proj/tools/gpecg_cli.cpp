// gpecg: phase-domain GP ECG denoiser, wavelet benchmark and SNR sweeps.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gpecg/eval.hpp"
#include "gpecg/gp_filter.hpp"
#include "gpecg/preprocessing.hpp"
#include "gpecg/signal_io.hpp"
#include "gpecg/wavelet.hpp"

namespace fs = std::filesystem;
using namespace gpecg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw Error("not a number: '" + s + "'");
  return v;
}

/// "-5:5:30" (start:step:stop, inclusive) or a comma list "0,10,20".
std::vector<double> parse_levels(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t pos; (pos = spec.find(':', start)) != std::string::npos; start = pos + 1) {
      parts.push_back(spec.substr(start, pos - start));
    }
    parts.push_back(spec.substr(start));
    if (parts.size() != 3) throw Error("levels must look like start:step:stop");
    const double first = parse_number(parts[0]);
    const double step = parse_number(parts[1]);
    const double last = parse_number(parts[2]);
    if (!(step > 0.0) || last < first) throw Error("levels: need step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(first + static_cast<double>(i) * step);
    return out;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto pos = std::min(spec.find(',', start), spec.size());
    out.push_back(parse_number(spec.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::vector<std::size_t> read_peak_list(const std::string& path) {
  std::vector<std::size_t> peaks;
  const auto text = read_text_file(path);
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find_first_of(",\n\r \t", start);
    if (end == std::string::npos) end = text.size();
    if (end > start) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + end, v);
      if (ec != std::errc{} || ptr != text.data() + end) {
        throw Error("peak list: invalid index '" + text.substr(start, end - start) + "'");
      }
      peaks.push_back(v);
    }
    start = end + 1;
  }
  return peaks;
}

struct InputOptions {
  std::string path;
  std::string format = "auto";
  double fs = 250.0;
  bool csv_header = false;
};

EcgRecord load_input(const InputOptions& in) {
  std::string format = in.format;
  if (format == "auto") {
    const auto ext = fs::path(in.path).extension().string();
    format = (ext == ".csv" || ext == ".txt") ? "csv" : "wfdb";
  }
  if (format == "csv") return load_csv_record(in.path, in.fs, in.csv_header);
  if (format == "wfdb") return load_wfdb_record(in.path);
  throw Error("unknown input format '" + format + "' (wfdb or csv)");
}

WaveletSpec wavelet_spec(const std::string& name, std::size_t levels) {
  WaveletSpec spec;
  spec.wavelet = name;
  spec.levels = levels;
  wavelet_by_name(name);  // validates the name
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-domain Gaussian-process ECG denoiser"};
  app.require_subcommand(1);

  // denoise ------------------------------------------------------------------
  auto* denoise = app.add_subcommand("denoise", "Filter one lead of a record");
  InputOptions d_in;
  std::size_t d_lead = 0;
  std::string d_method = kMethodGpPosterior;
  std::optional<std::size_t> d_phase_bins;
  std::optional<double> d_noise_var;
  double d_percentile = 0.05;
  bool d_raw_percentile = false;
  bool d_full = false;
  std::optional<double> d_ridge;
  bool d_no_preprocess = false;
  std::string d_peaks;
  std::string d_out;
  std::string d_wavelet = "sym5";
  std::size_t d_wavelet_levels = 4;
  denoise->add_option("--input", d_in.path, "Record: WFDB base path (.hea) or CSV file")->required();
  denoise->add_option("--format", d_in.format, "wfdb | csv | auto")->check(CLI::IsMember({"wfdb", "csv", "auto"}));
  denoise->add_option("--fs", d_in.fs, "Sampling frequency for CSV input (Hz)");
  denoise->add_flag("--csv-header", d_in.csv_header, "CSV input has a header row");
  denoise->add_option("--lead", d_lead, "Lead index");
  denoise->add_option("--method", d_method, "gp-posterior | gp-prior | wavelet")
      ->check(CLI::IsMember({kMethodGpPosterior, kMethodGpPrior, kMethodWavelet}));
  denoise->add_option("--phase-bins", d_phase_bins, "Phase-domain length (default 1.2 x longest beat)");
  denoise->add_option("--noise-var", d_noise_var, "Noise variance in mV^2 (default: estimated)");
  denoise->add_option("--noise-percentile", d_percentile, "Percentile of the phase variance used as noise");
  denoise->add_flag("--raw-percentile", d_raw_percentile,
                    "Use the percentile as is, without the chi-square small-sample correction");
  denoise->add_flag("--full", d_full, "Use the full phase covariance (dense, per-beat O(N^3))");
  denoise->add_option("--ridge", d_ridge, "Ridge added to the measurement covariance in --full mode");
  denoise->add_flag("--no-preprocess", d_no_preprocess, "Skip baseline-wander removal");
  denoise->add_option("--peaks", d_peaks, "CSV/whitespace list of R-peak sample indices (skips detection)");
  denoise->add_option("--wavelet", d_wavelet, "Wavelet for --method wavelet");
  denoise->add_option("--levels", d_wavelet_levels, "Decomposition levels for --method wavelet");
  denoise->add_option("--out", d_out, "Output CSV (input,filtered,variance)")->required();

  // bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "SNR-improvement sweep");
  InputOptions b_in;
  std::string b_levels = "-5:5:30";
  std::size_t b_reps = 5;
  std::uint64_t b_seed = 42;
  std::string b_methods = "gp-posterior,gp-prior,wavelet";
  std::vector<std::size_t> b_leads = {0};
  std::optional<std::size_t> b_phase_bins;
  std::optional<double> b_noise_var;
  std::size_t b_threads = 1;
  std::string b_out;
  std::string b_wavelet = "sym5";
  std::size_t b_wavelet_levels = 4;
  SynthSpec b_synth;
  b_synth.duration_s = 60.0;
  b_synth.rr_jitter = 0.05;
  b_synth.amplitude_jitter = 0.10;
  std::uint64_t b_synth_seed = 1;
  bench->add_option("--input", b_in.path, "Directory of records (.hea / .csv), a single record, or 'synth'")
      ->required();
  bench->add_option("--format", b_in.format, "wfdb | csv | auto")->check(CLI::IsMember({"wfdb", "csv", "auto"}));
  bench->add_option("--fs", b_in.fs, "Sampling frequency for CSV input (Hz)");
  bench->add_flag("--csv-header", b_in.csv_header, "CSV inputs have a header row");
  bench->add_option("--levels", b_levels, "SNR levels in dB: start:step:stop or comma list");
  bench->add_option("--reps", b_reps, "Noise repetitions per level");
  bench->add_option("--seed", b_seed, "Master seed");
  bench->add_option("--methods", b_methods, "Comma list of gp-posterior, gp-prior, wavelet");
  bench->add_option("--leads", b_leads, "Lead indices")->delimiter(',');
  bench->add_option("--phase-bins", b_phase_bins, "Phase-domain length override");
  bench->add_option("--noise-var", b_noise_var, "Noise variance override for the GP filter");
  bench->add_option("--threads", b_threads, "Worker threads (results do not depend on this)");
  bench->add_option("--wavelet", b_wavelet, "Benchmark wavelet");
  bench->add_option("--wavelet-levels", b_wavelet_levels, "Benchmark decomposition levels");
  bench->add_option("--synth-bpm", b_synth.heart_rate_bpm, "Synthetic input: heart rate");
  bench->add_option("--synth-duration", b_synth.duration_s, "Synthetic input: duration (s)");
  bench->add_option("--synth-rr-jitter", b_synth.rr_jitter, "Synthetic input: relative RR jitter");
  bench->add_option("--synth-rr-correlation", b_synth.rr_correlation, "Synthetic input: lag-1 RR autocorrelation");
  bench->add_option("--synth-amp-jitter", b_synth.amplitude_jitter, "Synthetic input: relative amplitude jitter");
  bench->add_option("--synth-seed", b_synth_seed, "Synthetic input: generator seed");
  bench->add_option("--out", b_out, "Report path; .csv selects CSV, anything else JSON")->required();

  // synth --------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic single-lead ECG");
  SynthSpec s_spec;
  std::uint64_t s_seed = 1;
  std::string s_out;
  std::string s_truth;
  synth->add_option("--bpm", s_spec.heart_rate_bpm, "Heart rate");
  synth->add_option("--duration", s_spec.duration_s, "Duration (s)");
  synth->add_option("--fs", s_spec.fs, "Sampling frequency (Hz)");
  synth->add_option("--rr-jitter", s_spec.rr_jitter, "Relative RR-interval jitter");
  synth->add_option("--rr-correlation", s_spec.rr_correlation, "Lag-1 autocorrelation of the RR series");
  synth->add_option("--amp-jitter", s_spec.amplitude_jitter, "Relative per-beat amplitude jitter");
  synth->add_option("--seed", s_seed, "Generator seed");
  synth->add_option("--out", s_out, "Output CSV")->required();
  synth->add_option("--truth", s_truth, "Optional CSV of true R-peak indices");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*denoise) {
      const auto rec = load_input(d_in);
      for (const auto& w : rec.warnings) std::cerr << "warning: " << w << '\n';
      if (d_lead >= rec.n_leads()) throw Error("lead " + std::to_string(d_lead) + " not present");
      std::vector<double> input = rec.leads[d_lead];
      std::vector<double> filtered;
      std::vector<double> variance;
      if (d_method == kMethodWavelet) {
        if (!d_no_preprocess) input = remove_baseline_wander(input, rec.fs);
        filtered = denoise_wavelet(input, wavelet_spec(d_wavelet, d_wavelet_levels));
        variance.assign(filtered.size(), std::nan(""));
      } else {
        FilterOptions opts;
        opts.phase_bins = d_phase_bins;
        opts.noise_var = d_noise_var;
        opts.noise_percentile = d_percentile;
        if (d_raw_percentile) opts.noise_estimator = NoiseEstimator::kPercentile;
        opts.full_covariance = d_full;
        opts.full.ridge = d_ridge;
        opts.preprocess = false;
        if (!d_no_preprocess) input = remove_baseline_wander(input, rec.fs);
        if (!d_peaks.empty()) opts.r_peaks = read_peak_list(d_peaks);
        auto res = filter_signal(input, rec.fs, opts);
        const auto& dg = res.diagnostics;
        std::cerr << "beats=" << dg.beat_count << " phase_bins=" << dg.n_phase << " noise_var=" << dg.noise_var
                  << (dg.noise_var_estimated ? " (estimated)" : "") << '\n';
        if (!dg.degenerate_beats.empty()) {
          std::cerr << "warning: " << dg.degenerate_beats.size() << " beat(s) with degenerate variance\n";
        }
        filtered = d_method == kMethodGpPrior ? std::move(res.prior) : std::move(res.posterior);
        variance = std::move(res.variance);
      }
      std::string out = "input,filtered,variance\n";
      for (std::size_t i = 0; i < input.size(); ++i) {
        out += fmt(input[i]) + ',' + fmt(filtered[i]) + ',' + fmt(variance[i]) + '\n';
      }
      write_text_file(d_out, out);
      return kExitOk;
    }

    if (*bench) {
      std::vector<EcgRecord> records;
      std::vector<std::string> load_errors;
      if (b_in.path == "synth") {
        records.push_back(synthesize_ecg(b_synth, b_synth_seed).record);
      } else if (fs::is_directory(b_in.path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(b_in.path)) {
          const auto ext = e.path().extension().string();
          if (ext == ".hea" || ext == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          try {
            InputOptions one = b_in;
            one.path = f.string();
            one.format = f.extension() == ".csv" ? "csv" : "wfdb";
            records.push_back(load_input(one));
          } catch (const std::exception& e) {
            load_errors.push_back(f.string() + ": " + e.what());
          }
        }
      } else {
        records.push_back(load_input(b_in));
      }
      for (const auto& e : load_errors) std::cerr << "skipped " << e << '\n';
      if (records.empty()) throw Error("no readable records in '" + b_in.path + "'");

      ExperimentConfig cfg;
      cfg.levels_db = parse_levels(b_levels);
      cfg.repetitions = b_reps;
      cfg.seed = b_seed;
      cfg.methods.clear();
      {
        std::size_t start = 0;
        while (start <= b_methods.size()) {
          const auto pos = std::min(b_methods.find(',', start), b_methods.size());
          if (pos > start) cfg.methods.push_back(b_methods.substr(start, pos - start));
          start = pos + 1;
        }
      }
      cfg.leads = b_leads;
      cfg.phase_bins = b_phase_bins;
      cfg.noise_var = b_noise_var;
      cfg.threads = b_threads;
      cfg.wavelet = wavelet_spec(b_wavelet, b_wavelet_levels);

      const auto report = run_experiment(records, cfg);
      const bool csv = fs::path(b_out).extension() == ".csv";
      write_text_file(b_out, write_report(report, csv ? ReportFormat::kCsv : ReportFormat::kJson));
      for (const auto& a : report.aggregates) {
        std::cerr << a.method << " @ " << a.level_db << " dB: " << a.mean_improvement_db << " +/- "
                  << a.std_improvement_db << " dB (n=" << a.count << ")\n";
      }
      for (const auto& s : report.skipped) {
        std::cerr << "skipped " << s.record << " lead " << s.lead << " @ " << s.level_db << " dB rep "
                  << s.repetition << ": " << s.reason << '\n';
      }
      return (report.skipped.empty() && load_errors.empty()) ? kExitOk : kExitPartial;
    }

    if (*synth) {
      const auto syn = synthesize_ecg(s_spec, s_seed);
      write_text_file(s_out, write_csv_record(syn.record));
      if (!s_truth.empty()) {
        std::string t;
        for (auto p : syn.r_peaks) t += std::to_string(p) + '\n';
        write_text_file(s_truth, t);
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFatal;
  }
  return kExitOk;
}
