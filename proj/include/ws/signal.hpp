#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ws::signal {

inline constexpr double kPi = 3.14159265358979323846;

// A uniformly sampled real-valued sequence.
struct Series {
  std::vector<double> values;
  double sampling_rate = 20.0;

  Series() = default;
  Series(std::vector<double> v, double rate) : values(std::move(v)), sampling_rate(rate) {
    validate();
  }

  void validate() const {
    if (values.empty()) throw std::invalid_argument("Series: empty");
    if (!(sampling_rate > 0.0)) throw std::invalid_argument("Series: sampling_rate must be > 0");
    for (double x : values) {
      if (!std::isfinite(x)) throw std::invalid_argument("Series: non-finite value");
    }
  }

  size_t size() const { return values.size(); }
};

struct PeakParams {
  double threshold = 0.5;  // fraction of the normalized amplitude, in [0,1]
  int min_distance = 1;    // samples, >= 1

  void validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw std::invalid_argument("PeakParams: threshold must be in [0,1]");
    }
    if (min_distance < 1) {
      throw std::invalid_argument("PeakParams: min_distance must be >= 1");
    }
  }
};

namespace detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double base = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    for (size_t i = 0; i < n; i += len) {
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> w = std::polar(1.0, base * static_cast<double>(j));
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    for (auto& z : a) z /= static_cast<double>(n);
  }
}

// In-place DFT for any length; power-of-two sizes go through the radix-2
// kernel, everything else through the Bluestein chirp-z transform.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n <= 1) return;
  if (is_pow2(n)) {
    fft_pow2(a, inverse);
    return;
  }
  size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<std::complex<double>> chirp(n), fa(m), fb(m);
  for (size_t k = 0; k < n; ++k) {
    const uint64_t k2 = (static_cast<uint64_t>(k) * k) % (2 * n);
    const double ang = (inverse ? 1.0 : -1.0) * kPi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = std::polar(1.0, ang);
  }
  for (size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
  fft_pow2(fa, false);
  fft_pow2(fb, false);
  for (size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  fft_pow2(fa, true);
  for (size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
  if (inverse) {
    for (auto& z : a) z /= static_cast<double>(n);
  }
}

}  // namespace detail

// Element-wise Euclidean magnitude of three axes.
inline Series magnitude(const Series& x, const Series& y, const Series& z) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw std::invalid_argument("magnitude: axis lengths differ");
  }
  if (x.sampling_rate != y.sampling_rate || x.sampling_rate != z.sampling_rate) {
    throw std::invalid_argument("magnitude: sampling rates differ");
  }
  Series out;
  out.sampling_rate = x.sampling_rate;
  out.values.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out.values[i] = std::sqrt(x.values[i] * x.values[i] + y.values[i] * y.values[i] +
                              z.values[i] * z.values[i]);
  }
  return out;
}

// Brick-wall smoothing: forward DFT, zero every bin whose frequency lies
// strictly above the cutoff (DC always kept), inverse DFT. Output length
// equals input length; the ~1e-16 imaginary residue is discarded.
inline Series fourier_lowpass(const Series& s, double cutoff_hz) {
  if (!(cutoff_hz > 0.0)) {
    throw std::invalid_argument("fourier_lowpass: cutoff must be > 0");
  }
  if (cutoff_hz > s.sampling_rate / 2.0 * (1.0 + 1e-12)) {
    throw std::invalid_argument("fourier_lowpass: cutoff above Nyquist");
  }
  const size_t n = s.values.size();
  std::vector<std::complex<double>> spec(n);
  for (size_t i = 0; i < n; ++i) spec[i] = s.values[i];
  detail::fft(spec, false);
  for (size_t k = 1; k < n; ++k) {
    const size_t kk = std::min(k, n - k);
    const double freq = static_cast<double>(kk) * s.sampling_rate / static_cast<double>(n);
    if (freq > cutoff_hz * (1.0 + 1e-12)) spec[k] = 0.0;
  }
  detail::fft(spec, true);
  Series out;
  out.sampling_rate = s.sampling_rate;
  out.values.resize(n);
  for (size_t i = 0; i < n; ++i) out.values[i] = spec[i].real();
  return out;
}

// Peak picking with the PeakUtils `indexes` contract: normalize the
// threshold as thres*(max-min)+min, take strict local maxima above that
// level, then resolve min-distance conflicts greedily from the highest
// peak down (equal heights: lower index first), suppressing candidates
// within min_distance of a kept peak. Indices are returned ascending.
inline std::vector<int> detect_peaks(const Series& s, const PeakParams& p) {
  p.validate();
  const auto& v = s.values;
  const int n = static_cast<int>(v.size());
  if (n < 3) return {};
  const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  const double level = p.threshold * (*mx_it - *mn_it) + *mn_it;
  std::vector<int> cand;
  for (int i = 1; i + 1 < n; ++i) {
    if (v[i - 1] < v[i] && v[i] > v[i + 1] && v[i] > level) cand.push_back(i);
  }
  if (cand.size() <= 1) return cand;
  std::vector<int> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (v[cand[a]] != v[cand[b]]) return v[cand[a]] > v[cand[b]];
    return cand[a] < cand[b];
  });
  std::vector<bool> suppressed(cand.size(), false);
  std::vector<int> kept;
  for (int oi : order) {
    if (suppressed[oi]) continue;
    kept.push_back(cand[oi]);
    for (size_t j = 0; j < cand.size(); ++j) {
      if (!suppressed[j] && std::abs(cand[j] - cand[oi]) <= p.min_distance && j != static_cast<size_t>(oi)) {
        suppressed[j] = true;
      }
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace ws::signal
