#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/fft.hpp"
#include "ssqlab/signal_model.hpp"
#include "ssqlab/windows_wavelets.hpp"

namespace ssq {

enum class TfrKind { stft, cwt };

inline const char* to_string(TfrKind k) { return k == TfrKind::stft ? "stft" : "cwt"; }

/// Complex time-frequency plane, values[bin][frame]. The frequency axis is increasing.
struct TFRPlane {
  TfrKind kind = TfrKind::stft;
  Grid2<cplx> values;
  std::vector<double> time_axis_s;
  std::vector<double> freq_axis_hz;
  std::optional<std::vector<double>> scale_axis;  // CWT only, aligned with freq_axis_hz
  double sample_rate_hz = 1.0;
  bool is_real = false;
  /// Integration measure of one row: Δf in Hz (STFT) or Δln a (CWT).
  double row_measure = 1.0;
  std::size_t hop_samples = 1;
  /// Per-row count of columns at each edge affected by the signal boundary.
  std::vector<std::size_t> boundary_cols;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t rows() const noexcept { return values.rows(); }
  [[nodiscard]] std::size_t cols() const noexcept { return values.cols(); }

  [[nodiscard]] std::size_t max_boundary_cols() const {
    std::size_t b = 0;
    for (auto v : boundary_cols) b = std::max(b, v);
    return b;
  }
};

struct StftParams {
  WindowSpec window;
  std::size_t hop_samples = 1;
  /// 0 selects the next power of two ≥ 4× the window length.
  std::size_t fft_length = 0;

  [[nodiscard]] std::size_t resolved_fft_length() const {
    return fft_length != 0 ? fft_length : next_pow2(4 * window.length_samples);
  }

  void validate() const {
    window.validate();
    require(hop_samples >= 1, "hop must be at least 1 sample");
    const std::size_t p = resolved_fft_length();
    require(p >= window.length_samples, "fft length must be at least the window length");
    require((p & (p - 1)) == 0, "fft length must be a power of two");
  }
};

struct CwtParams {
  MorseWaveletSpec wavelet;
  std::size_t voices_per_octave = 32;
  double scale_min = 0.0;
  double scale_max = 0.0;

  void validate() const {
    wavelet.validate();
    require(voices_per_octave >= 1, "voices per octave must be positive");
    require(scale_min > 0 && scale_min < scale_max, "scale grid needs 0 < scale_min < scale_max");
  }

  /// Geometric grid from scale_max downward with ratio 2^(-1/voices).
  [[nodiscard]] std::vector<double> scales() const {
    std::vector<double> out;
    const double v = static_cast<double>(voices_per_octave);
    for (std::size_t i = 0;; ++i) {
      const double a = scale_max * std::exp2(-static_cast<double>(i) / v);
      if (a < scale_min * (1.0 - 1e-12)) break;
      out.push_back(a);
    }
    return out;
  }

  [[nodiscard]] double center_frequency_hz(double scale, double fs) const {
    return wavelet.peak_omega() * fs / (kTwoPi * scale);
  }
};

/// Geometric scale grid with center frequencies from 4·fs/n (about four periods
/// per record) toward 0.45·fs, anchored at the low end.
inline CwtParams default_scale_grid(double fs, std::size_t n, CwtParams partial = {}) {
  require(n >= 16, "default scale grid needs at least 16 samples");
  require(fs > 0, "sample rate must be positive");
  partial.wavelet.validate();
  require(partial.voices_per_octave >= 1, "voices per octave must be positive");
  const double f_lo = 4.0 * fs / static_cast<double>(n);
  const double f_hi = 0.45 * fs;
  const double v = static_cast<double>(partial.voices_per_octave);
  const auto count = static_cast<std::size_t>(std::ceil(v * std::log2(f_hi / f_lo) - 1e-9));
  partial.scale_max = partial.wavelet.peak_omega() * fs / (kTwoPi * f_lo);
  partial.scale_min = partial.scale_max * std::exp2(-static_cast<double>(count - 1) / v);
  return partial;
}

/// A plane and its exact time-derivative companion, computed together.
struct TfrPair {
  TFRPlane plane;
  TFRPlane derivative;
};

namespace detail {

inline void check_signal(const SampledSignal& x) {
  require(!x.samples.empty(), "signal is empty");
  x.validate();
}

inline TFRPlane stft_skeleton(const SampledSignal& x, const StftParams& p, std::size_t frames) {
  const std::size_t fft_len = p.resolved_fft_length();
  const double fs = x.sample_rate_hz;
  TFRPlane t;
  t.kind = TfrKind::stft;
  t.sample_rate_hz = fs;
  t.is_real = x.is_real;
  t.hop_samples = p.hop_samples;
  t.row_measure = fs / static_cast<double>(fft_len);
  const std::size_t rows = x.is_real ? fft_len / 2 + 1 : fft_len;
  t.values = Grid2<cplx>(rows, frames);
  t.freq_axis_hz.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double k = x.is_real ? static_cast<double>(r)
                               : static_cast<double>(r) - static_cast<double>(fft_len / 2);
    t.freq_axis_hz[r] = k * fs / static_cast<double>(fft_len);
  }
  t.time_axis_s.resize(frames);
  for (std::size_t m = 0; m < frames; ++m) t.time_axis_s[m] = x.time_at(m * p.hop_samples);
  const std::size_t edge = (2 * p.window.length_samples + p.hop_samples - 1) / p.hop_samples;
  t.boundary_cols.assign(rows, std::min(edge, frames));
  return t;
}

}  // namespace detail

/// Short-time Fourier transform and its time derivative.
///
/// Frame m is centered at sample c = m·hop and the window covers lags
/// τ ∈ [-L/2, L/2). With the window-centered phase convention
///   S[f][m] = Σ_τ x[c+τ] h[τ] exp(-j2π f τ / fs),
/// the continuous-time derivative is ∂_t S = j2πf·S − S^{h'}, where S^{h'} is
/// the same transform taken with the derivative window. Samples outside the
/// record are zero. Real input yields the one-sided bins [0, fs/2]; complex
/// input yields all bins ordered from -fs/2 upward.
inline TfrPair stft_with_derivative(const SampledSignal& x, const StftParams& p, std::size_t workers = 0) {
  detail::check_signal(x);
  p.validate();
  const std::size_t len = p.window.length_samples;
  require(len <= x.size(), "window longer than signal");
  const std::size_t n = x.size();
  const std::size_t fft_len = p.resolved_fft_length();
  const std::size_t frames = (n - 1) / p.hop_samples + 1;
  const DiscreteWindow w = dpss_window(p.window, x.sample_rate_hz);

  TfrPair out{detail::stft_skeleton(x, p, frames), detail::stft_skeleton(x, p, frames)};
  const std::size_t rows = out.plane.rows();
  const std::size_t half = len / 2;

  parallel_for(
      frames,
      [&](std::size_t m) {
        std::vector<cplx> buf(fft_len), dbuf(fft_len), spec(fft_len), dspec(fft_len);
        const auto center = static_cast<std::ptrdiff_t>(m * p.hop_samples);
        for (std::size_t j = 0; j < len; ++j) {
          const std::ptrdiff_t tau = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(half);
          const std::ptrdiff_t idx = center + tau;
          if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(n)) continue;
          const std::size_t slot = static_cast<std::size_t>((tau % static_cast<std::ptrdiff_t>(fft_len) +
                                                             static_cast<std::ptrdiff_t>(fft_len)) %
                                                            static_cast<std::ptrdiff_t>(fft_len));
          buf[slot] += x.samples[static_cast<std::size_t>(idx)] * w.taps[j];
          dbuf[slot] += x.samples[static_cast<std::size_t>(idx)] * w.derivative_taps[j];
        }
        fft::transform(buf, spec, fft::Direction::forward);
        fft::transform(dbuf, dspec, fft::Direction::forward);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::size_t k = x.is_real ? r : (r + fft_len / 2) % fft_len;
          const double f = out.plane.freq_axis_hz[r];
          out.plane.values(r, m) = spec[k];
          out.derivative.values(r, m) = cplx{0.0, kTwoPi * f} * spec[k] - dspec[k];
        }
      },
      workers);
  return out;
}

inline TFRPlane stft(const SampledSignal& x, const StftParams& p, std::size_t workers = 0) {
  return stft_with_derivative(x, p, workers).plane;
}

inline TFRPlane stft_time_derivative(const SampledSignal& x, const StftParams& p, std::size_t workers = 0) {
  return stft_with_derivative(x, p, workers).derivative;
}

/// Continuous wavelet transform by per-scale spectral filtering of the whole
/// record (periodic boundary): W_a = IFFT(X(ξ)·ψ̂(a·ξ)), and the exact time
/// derivative IFFT(X(ξ)·ψ̂(a·ξ)·iξ·fs). Rows are ordered by increasing center
/// frequency ω_p·fs/(2πa); scales whose center frequency exceeds Nyquist are
/// dropped with a warning.
inline TfrPair cwt_with_derivative(const SampledSignal& x, const CwtParams& p, std::size_t workers = 0) {
  detail::check_signal(x);
  p.validate();
  require(x.size() >= 2, "CWT needs at least 2 samples");
  const std::size_t n = x.size();
  const double fs = x.sample_rate_hz;

  std::vector<double> scales;
  std::size_t dropped = 0;
  for (double a : p.scales()) {
    if (p.center_frequency_hz(a, fs) > fs / 2.0)
      ++dropped;
    else
      scales.push_back(a);
  }
  require(!scales.empty(), "scale grid has no scale below Nyquist");

  TFRPlane base;
  base.kind = TfrKind::cwt;
  base.sample_rate_hz = fs;
  base.is_real = x.is_real;
  base.hop_samples = 1;
  base.row_measure = std::log(2.0) / static_cast<double>(p.voices_per_octave);
  base.values = Grid2<cplx>(scales.size(), n);
  base.scale_axis = scales;
  base.freq_axis_hz.resize(scales.size());
  base.boundary_cols.resize(scales.size());
  for (std::size_t r = 0; r < scales.size(); ++r) {
    base.freq_axis_hz[r] = p.center_frequency_hz(scales[r], fs);
    base.boundary_cols[r] =
        std::min(n, static_cast<std::size_t>(std::ceil(2.0 * p.wavelet.duration_samples(scales[r]))));
  }
  base.time_axis_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) base.time_axis_s[i] = x.time_at(i);
  if (dropped > 0) {
    std::ostringstream msg;
    msg << "dropped " << dropped << " scales with center frequency above Nyquist";
    base.warnings.push_back(msg.str());
  }

  TfrPair out{base, base};
  const auto spectrum = fft::forward(x.samples);
  std::vector<double> xi(n);
  for (std::size_t k = 0; k < n; ++k) xi[k] = kTwoPi * fft::bin_frequency(k, n);

  parallel_for(
      scales.size(),
      [&](std::size_t r) {
        std::vector<cplx> filt(n), dfilt(n), res(n);
        const double a = scales[r];
        for (std::size_t k = 0; k < n; ++k) {
          const double psi = gmw_freq_response(p.wavelet, a * xi[k]);
          filt[k] = spectrum[k] * psi;
          dfilt[k] = filt[k] * cplx{0.0, xi[k] * fs};
        }
        const double inv = 1.0 / static_cast<double>(n);
        fft::transform(filt, res, fft::Direction::backward);
        auto row = out.plane.values.row(r);
        for (std::size_t i = 0; i < n; ++i) row[i] = res[i] * inv;
        fft::transform(dfilt, res, fft::Direction::backward);
        auto drow = out.derivative.values.row(r);
        for (std::size_t i = 0; i < n; ++i) drow[i] = res[i] * inv;
      },
      workers);
  return out;
}

inline TFRPlane cwt(const SampledSignal& x, const CwtParams& p, std::size_t workers = 0) {
  return cwt_with_derivative(x, p, workers).plane;
}

inline TFRPlane cwt_time_derivative(const SampledSignal& x, const CwtParams& p, std::size_t workers = 0) {
  return cwt_with_derivative(x, p, workers).derivative;
}

}  // namespace ssq
