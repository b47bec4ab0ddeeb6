#include "gpecg/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpecg/signal_io.hpp"

namespace gpecg {

namespace {

// Symlet-5 analysis lowpass (Daubechies' least-asymmetric family, 5 vanishing moments).
constexpr double kSym5[] = {
    0.027333068345077982, 0.029519490925774643,  -0.039134249302383094, 0.1993975339773936,
    0.7234076904024206,   0.6339789634582119,    0.01660210576452232,   -0.17532808990845047,
    -0.021101834024758855, 0.019538882735286728,
};

Wavelet from_lowpass(std::string name, std::vector<double> lo) {
  Wavelet w;
  w.name = std::move(name);
  const std::size_t f = lo.size();
  w.dec_hi.resize(f);
  for (std::size_t k = 0; k < f; ++k) {
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    w.dec_hi[k] = sign * lo[f - 1 - k];
  }
  w.rec_lo.assign(lo.rbegin(), lo.rend());
  w.rec_hi.assign(w.dec_hi.rbegin(), w.dec_hi.rend());
  w.dec_lo = std::move(lo);
  return w;
}

// Half-sample symmetric extension: x[-1] = x[0], x[n] = x[n-1], periodic in 2n.
std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  const auto u = static_cast<std::size_t>(i);
  return u < n ? u : 2 * n - 1 - u;
}

double median_abs(std::span<const double> v) {
  std::vector<double> a(v.size());
  std::transform(v.begin(), v.end(), a.begin(), [](double s) { return std::abs(s); });
  const auto mid = a.size() / 2;
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid), a.end());
  double m = a[mid];
  if (a.size() % 2 == 0) m = 0.5 * (m + *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

}  // namespace

Wavelet wavelet_by_name(const std::string& name) {
  if (name == "sym5") return from_lowpass(name, {std::begin(kSym5), std::end(kSym5)});
  if (name == "haar") return from_lowpass(name, {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0});
  throw Error("unknown wavelet '" + name + "' (supported: sym5, haar)");
}

void dwt_step(std::span<const double> x, const Wavelet& w, std::vector<double>& approx, std::vector<double>& detail) {
  const std::size_t n = x.size();
  const std::size_t f = w.length();
  if (n == 0) throw Error("dwt: empty input");
  const std::size_t m = (n + f - 1) / 2;
  approx.assign(m, 0.0);
  detail.assign(m, 0.0);
  for (std::size_t o = 0; o < m; ++o) {
    const auto centre = static_cast<std::ptrdiff_t>(2 * o + 1);
    double a = 0.0;
    double d = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double s = x[mirror(centre - static_cast<std::ptrdiff_t>(j), n)];
      a += w.dec_lo[j] * s;
      d += w.dec_hi[j] * s;
    }
    approx[o] = a;
    detail[o] = d;
  }
}

std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> detail, const Wavelet& w) {
  if (approx.size() != detail.size()) throw Error("idwt: approximation and detail lengths differ");
  const std::size_t m = approx.size();
  const std::size_t f = w.length();
  if (2 * m + 2 <= f) throw Error("idwt: too few coefficients for the filter length");
  const std::size_t len = 2 * m + 2 - f;
  // valid part of the full upsampled convolution, offset by F - 2
  std::vector<double> full(2 * m + f - 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < f; ++j) full[2 * k + j] += approx[k] * w.rec_lo[j] + detail[k] * w.rec_hi[j];
  }
  return {full.begin() + static_cast<std::ptrdiff_t>(f - 2),
          full.begin() + static_cast<std::ptrdiff_t>(f - 2 + len)};
}

DwtCoeffs dwt(std::span<const double> x, const WaveletSpec& spec) {
  if (spec.levels < 1) throw Error("dwt: levels must be at least 1");
  if (x.size() < (std::size_t{1} << spec.levels)) {
    throw Error("dwt: signal of " + std::to_string(x.size()) + " samples too short for " +
                std::to_string(spec.levels) + " levels");
  }
  const auto w = wavelet_by_name(spec.wavelet);
  DwtCoeffs c;
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t level = 0; level < spec.levels; ++level) {
    std::vector<double> a;
    std::vector<double> d;
    dwt_step(current, w, a, d);
    c.details.push_back(std::move(d));
    current = std::move(a);
  }
  c.approx = std::move(current);
  return c;
}

std::vector<double> idwt(const DwtCoeffs& coeffs, const WaveletSpec& spec, std::size_t target_len) {
  const auto w = wavelet_by_name(spec.wavelet);
  if (coeffs.details.empty()) throw Error("idwt: no detail levels");
  std::vector<double> a = coeffs.approx;
  for (std::size_t level = coeffs.details.size(); level-- > 0;) {
    const auto& d = coeffs.details[level];
    if (a.size() == d.size() + 1) a.pop_back();
    if (a.size() != d.size()) {
      throw Error("idwt: shape mismatch at level " + std::to_string(level + 1));
    }
    a = idwt_step(a, d, w);
  }
  if (a.size() < target_len) throw Error("idwt: reconstruction shorter than target length");
  a.resize(target_len);
  return a;
}

double sure_threshold(std::span<const double> d, double sigma) {
  if (!(sigma > 0.0)) throw Error("SURE: sigma must be positive");
  if (d.empty()) throw Error("SURE: empty coefficient vector");
  const std::size_t n = d.size();
  std::vector<double> sq(n);
  std::transform(d.begin(), d.end(), sq.begin(), [sigma](double v) { return (v / sigma) * (v / sigma); });
  std::sort(sq.begin(), sq.end());

  // t = 0: every nonzero coefficient contributes 0, zeros count as "<= t"
  const auto zeros = static_cast<double>(std::count(sq.begin(), sq.end(), 0.0));
  double best_risk = static_cast<double>(n) - 2.0 * zeros;
  double best_t2 = 0.0;
  double cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += sq[k];
    // ties: the count must include every coefficient equal to this one
    if (k + 1 < n && sq[k + 1] == sq[k]) continue;
    const auto below = static_cast<double>(k + 1);
    const double risk = static_cast<double>(n) - 2.0 * below + cum + static_cast<double>(n - k - 1) * sq[k];
    if (risk < best_risk) {
      best_risk = risk;
      best_t2 = sq[k];
    }
  }
  return std::sqrt(best_t2) * sigma;
}

double universal_threshold(std::size_t n, double sigma) {
  if (n == 0) throw Error("universal threshold: n must be positive");
  return sigma * std::sqrt(2.0 * std::log(static_cast<double>(n)));
}

double hybrid_sure_threshold(std::span<const double> d, double sigma) {
  if (!(sigma > 0.0)) throw Error("SURE: sigma must be positive");
  if (d.empty()) throw Error("SURE: empty coefficient vector");
  const auto n = static_cast<double>(d.size());
  double energy = 0.0;
  for (double v : d) energy += (v / sigma) * (v / sigma);
  const double eta = (energy - n) / n;
  const double crit = std::pow(std::log2(n), 1.5) / std::sqrt(n);
  const double universal = universal_threshold(d.size(), sigma);
  if (eta < crit) return universal;
  return std::min(sure_threshold(d, sigma), universal);
}

void soft_threshold(std::span<double> v, double threshold) {
  for (auto& s : v) {
    const double mag = std::abs(s) - threshold;
    s = mag > 0.0 ? std::copysign(mag, s) : 0.0;
  }
}

std::vector<double> denoise_wavelet(std::span<const double> x, const WaveletSpec& spec) {
  auto coeffs = dwt(x, spec);
  const double sigma = median_abs(coeffs.details.front()) / 0.6745;
  if (!(sigma > 0.0)) return idwt(coeffs, spec, x.size());
  for (auto& d : coeffs.details) {
    double thr = 0.0;
    switch (spec.rule) {
      case ThresholdRule::kSure: thr = sure_threshold(d, sigma); break;
      case ThresholdRule::kHybridSure: thr = hybrid_sure_threshold(d, sigma); break;
      case ThresholdRule::kUniversal: thr = universal_threshold(d.size(), sigma); break;
    }
    soft_threshold(d, thr);
  }
  return idwt(coeffs, spec, x.size());
}

}  // namespace gpecg
