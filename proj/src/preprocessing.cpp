#include "gpecg/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gpecg/signal_io.hpp"

namespace gpecg {

namespace {

struct FirstOrder {
  double b0;  // b1 == b0
  double a1;
};

FirstOrder design(double cutoff_hz, double fs) {
  const double k = std::tan(std::numbers::pi * cutoff_hz / fs);
  return {k / (1.0 + k), (k - 1.0) / (k + 1.0)};
}

// Transposed direct form II, initial state set to the steady state of a step
// at the first sample so a constant input passes unchanged.
void run_forward(std::vector<double>& v, const FirstOrder& f) {
  if (v.empty()) return;
  double z = (1.0 - f.b0) * v.front();
  for (auto& s : v) {
    const double x = s;
    const double y = f.b0 * x + z;
    z = f.b0 * x - f.a1 * y;
    s = y;
  }
}

void run_backward(std::vector<double>& v, const FirstOrder& f) {
  std::reverse(v.begin(), v.end());
  run_forward(v, f);
  std::reverse(v.begin(), v.end());
}

}  // namespace

void FilterSpec::validate() const {
  if (!(fs > 0.0)) throw Error("filter: sampling frequency must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0)) {
    throw Error("filter: cutoff " + std::to_string(cutoff_hz) + " Hz outside (0, fs/2)");
  }
}

double zero_phase_gain(double f_hz, double cutoff_hz, double fs) {
  const double r = std::tan(std::numbers::pi * f_hz / fs) / std::tan(std::numbers::pi * cutoff_hz / fs);
  return 1.0 / (1.0 + r * r);
}

std::vector<double> lowpass_zero_phase(std::span<const double> x, const FilterSpec& spec) {
  spec.validate();
  if (x.size() < 4) throw Error("filter: input too short (need at least 4 samples)");

  const auto f = design(spec.cutoff_hz, spec.fs);
  const double pole = std::abs(f.a1);
  const double tau = pole > 0.0 ? -1.0 / std::log(pole) : 0.0;
  const std::size_t n = x.size();
  const auto pad = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(3.0 * tau)) + 1);

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[pad - 1 - i] = 2.0 * x.front() - x[i + 1];
    ext[pad + n + i] = 2.0 * x.back() - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

  auto fb = ext;
  run_forward(fb, f);
  run_backward(fb, f);
  auto bf = std::move(ext);
  run_backward(bf, f);
  run_forward(bf, f);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = 0.5 * (fb[pad + i] + bf[pad + i]);
    out[i] = spec.mode == FilterMode::kLowpass ? lp : x[i] - lp;
  }
  return out;
}

std::vector<double> remove_baseline_wander(std::span<const double> x, double fs) {
  if (!(fs > 2.0 * kBandLimitCutoffHz)) {
    throw Error("baseline removal needs fs > " + std::to_string(2.0 * kBandLimitCutoffHz) + " Hz");
  }
  const auto hp = lowpass_zero_phase(x, {kBaselineCutoffHz, fs, FilterMode::kHighpassBySubtraction});
  return lowpass_zero_phase(hp, {kBandLimitCutoffHz, fs, FilterMode::kLowpass});
}

}  // namespace gpecg
