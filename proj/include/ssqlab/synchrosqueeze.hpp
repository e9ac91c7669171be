#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/linear_tfr.hpp"

namespace ssq {

/// Energy threshold γ, either absolute or a fraction of the plane's max |coefficient|.
struct Threshold {
  double value = 1e-8;
  bool relative = true;

  static Threshold rel(double v) { return {v, true}; }
  static Threshold abs(double v) { return {v, false}; }

  [[nodiscard]] double resolve(double max_magnitude) const {
    return relative ? value * max_magnitude : value;
  }
};

/// Instantaneous-frequency estimate per coefficient and the mask of usable entries.
struct PhaseMap {
  Grid2<double> omega_hat_hz;
  Grid2<std::uint8_t> valid_mask;
  double threshold = 0.0;
  std::size_t valid_count = 0;
};

/// ω̂ = Re[∂_t T / (2πi T)] where |T| > γ. Entries at or below γ, non-finite
/// estimates and estimates outside [0, fs/2] are masked out. For a two-sided
/// STFT the estimate is wrapped into [-fs/2, fs/2) first.
inline PhaseMap phase_transform(const TFRPlane& plane, const TFRPlane& dplane, Threshold gamma) {
  require(plane.kind == dplane.kind, "phase transform: plane kinds differ");
  require(plane.rows() == dplane.rows() && plane.cols() == dplane.cols(),
          "phase transform: plane shapes differ");
  require(gamma.value >= 0 && std::isfinite(gamma.value), "threshold must be non-negative");
  const std::size_t rows = plane.rows();
  const std::size_t cols = plane.cols();
  const double fs = plane.sample_rate_hz;
  const bool wrap = plane.kind == TfrKind::stft && !plane.is_real;

  double max_mag = 0.0;
  for (const auto& v : plane.values.data()) max_mag = std::max(max_mag, std::abs(v));
  PhaseMap pm;
  pm.threshold = gamma.resolve(max_mag);
  pm.omega_hat_hz = Grid2<double>(rows, cols, 0.0);
  pm.valid_mask = Grid2<std::uint8_t>(rows, cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const cplx v = plane.values(r, c);
      if (!(std::abs(v) > pm.threshold)) continue;
      double w = (dplane.values(r, c) / (cplx{0.0, kTwoPi} * v)).real();
      if (!std::isfinite(w)) continue;
      if (wrap) w -= fs * std::floor(w / fs + 0.5);
      pm.omega_hat_hz(r, c) = w;
      if (w < 0.0 || w > fs / 2.0) continue;
      pm.valid_mask(r, c) = 1;
      ++pm.valid_count;
    }
  }
  return pm;
}

enum class Kernel { hard, gaussian };
enum class BinSpacing { linear, logarithmic };

inline const char* to_string(Kernel k) { return k == Kernel::hard ? "hard" : "gaussian"; }
inline const char* to_string(BinSpacing s) { return s == BinSpacing::linear ? "linear" : "log"; }

/// Synchrosqueezing options. Unset fields take branch defaults when resolved
/// against a source plane (see resolve_sst_params).
struct SSTParams {
  Threshold gamma_threshold = Threshold::rel(1e-8);
  std::optional<std::pair<double, double>> freq_range;
  double epsilon_width = 0.0;
  Kernel kernel = Kernel::hard;
  std::size_t n_out_bins = 0;
  std::optional<BinSpacing> spacing;
};

/// Branch defaults: STFT squeezes onto [0, fs/2] with fft_length/2+1 linear bins
/// (the one-sided STFT grid); CWT squeezes onto log bins matching the scale
/// center frequencies.
inline SSTParams resolve_sst_params(const TFRPlane& plane, SSTParams p) {
  const double fs = plane.sample_rate_hz;
  if (plane.kind == TfrKind::stft) {
    const std::size_t fft_len = plane.is_real ? 2 * (plane.rows() - 1) : plane.rows();
    if (!p.freq_range) p.freq_range = std::make_pair(0.0, fs / 2.0);
    if (p.n_out_bins == 0) p.n_out_bins = fft_len / 2 + 1;
    if (!p.spacing) p.spacing = BinSpacing::linear;
  } else {
    if (!p.freq_range) p.freq_range = std::make_pair(plane.freq_axis_hz.front(), plane.freq_axis_hz.back());
    if (p.n_out_bins == 0) p.n_out_bins = plane.rows();
    if (!p.spacing) p.spacing = BinSpacing::logarithmic;
  }
  const auto [lo, hi] = *p.freq_range;
  require(lo < hi, "frequency range must satisfy f_lo < f_hi");
  require(hi <= fs / 2.0 * (1.0 + 1e-12), "frequency range exceeds Nyquist");
  require(lo >= 0.0, "frequency range must be non-negative");
  require(p.gamma_threshold.value >= 0, "threshold must be non-negative");
  require(p.n_out_bins >= 2, "need at least two output bins");
  require(p.epsilon_width >= 0 && std::isfinite(p.epsilon_width), "epsilon must be non-negative");
  require((p.epsilon_width == 0.0) == (p.kernel == Kernel::hard),
          "epsilon must be zero exactly when the kernel is hard");
  require(*p.spacing == BinSpacing::linear || lo > 0.0, "log spacing needs f_lo > 0");
  return p;
}

/// Output bin grid (η axis) with nearest-bin lookup.
class EtaGrid {
 public:
  EtaGrid(double lo, double hi, std::size_t n, BinSpacing spacing)
      : lo_(lo), hi_(hi), n_(n), spacing_(spacing) {
    if (spacing_ == BinSpacing::linear) {
      step_ = (hi - lo) / static_cast<double>(n - 1);
    } else {
      step_ = std::log(hi / lo) / static_cast<double>(n - 1);
    }
  }

  [[nodiscard]] std::vector<double> centers() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = center(i);
    return out;
  }

  [[nodiscard]] double center(std::size_t i) const {
    const double k = static_cast<double>(i);
    return spacing_ == BinSpacing::linear ? lo_ + k * step_ : lo_ * std::exp(k * step_);
  }

  [[nodiscard]] bool contains(double f) const { return f >= lo_ && f <= hi_; }

  /// Continuous bin coordinate of frequency f.
  [[nodiscard]] double coordinate(double f) const {
    return spacing_ == BinSpacing::linear ? (f - lo_) / step_ : std::log(f / lo_) / step_;
  }

  [[nodiscard]] std::size_t nearest(double f) const {
    const double k = std::round(coordinate(std::max(f, lo_)));
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n_ - 1)));
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }

 private:
  double lo_;
  double hi_;
  std::size_t n_;
  BinSpacing spacing_;
  double step_;
};

enum class SstKind { sst_stft, sst_cwt };

inline const char* to_string(SstKind k) { return k == SstKind::sst_stft ? "sst-stft" : "sst-cwt"; }

/// Synchrosqueezed plane values[η bin][frame] with provenance.
struct SSTPlane {
  SstKind kind = SstKind::sst_stft;
  Grid2<cplx> values;
  std::vector<double> eta_axis_hz;
  std::vector<double> time_axis_s;
  SSTParams params;  // resolved
  double sample_rate_hz = 1.0;
  bool is_real = false;
  std::size_t hop_samples = 1;
  std::size_t boundary_cols = 0;
  /// Source transform settings (the one matching `kind` is meaningful).
  StftParams stft_source;
  CwtParams cwt_source;

  std::size_t deposited_count = 0;
  std::size_t dropped_count = 0;
  /// Σ|c·measure| over deposited coefficients, and the same sum taken over the
  /// source entries that passed the mask and the frequency range.
  double deposited_magnitude = 0.0;
  double source_magnitude = 0.0;
  std::vector<std::string> diagnostics;

  [[nodiscard]] std::size_t rows() const noexcept { return values.rows(); }
  [[nodiscard]] std::size_t cols() const noexcept { return values.cols(); }
  [[nodiscard]] BinSpacing spacing() const { return params.spacing.value_or(BinSpacing::linear); }
  [[nodiscard]] EtaGrid grid() const {
    return {params.freq_range->first, params.freq_range->second, params.n_out_bins, spacing()};
  }
};

/// Reassigns every masked-in coefficient (times its row measure) to the output
/// bin(s) at its ω̂: the nearest bin for the hard kernel, or a Gaussian profile
/// of width ε truncated at 4ε and renormalized to unit mass. Coefficients whose
/// ω̂ falls outside the frequency range are dropped. Work is split by frame so
/// the result does not depend on the worker count.
inline SSTPlane synchrosqueeze(const TFRPlane& plane, const PhaseMap& pm, const SSTParams& params,
                               std::size_t workers = 0) {
  require(pm.omega_hat_hz.rows() == plane.rows() && pm.omega_hat_hz.cols() == plane.cols(),
          "phase map does not match plane");
  const SSTParams p = resolve_sst_params(plane, params);
  const EtaGrid grid(p.freq_range->first, p.freq_range->second, p.n_out_bins, *p.spacing);
  const std::size_t rows = plane.rows();
  const std::size_t cols = plane.cols();
  const double measure = plane.row_measure;

  SSTPlane out;
  out.kind = plane.kind == TfrKind::stft ? SstKind::sst_stft : SstKind::sst_cwt;
  out.values = Grid2<cplx>(p.n_out_bins, cols);
  out.eta_axis_hz = grid.centers();
  out.time_axis_s = plane.time_axis_s;
  out.params = p;
  out.sample_rate_hz = plane.sample_rate_hz;
  out.is_real = plane.is_real;
  out.hop_samples = plane.hop_samples;
  out.boundary_cols = plane.max_boundary_cols();

  std::vector<std::size_t> deposited(cols, 0);
  std::vector<double> dep_mag(cols, 0.0);
  std::vector<double> src_mag(cols, 0.0);
  const double eps = p.epsilon_width;

  parallel_for(
      cols,
      [&](std::size_t c) {
        std::vector<double> weights;
        for (std::size_t r = 0; r < rows; ++r) {
          if (!pm.valid_mask(r, c)) continue;
          const double w = pm.omega_hat_hz(r, c);
          if (!grid.contains(w)) continue;
          const cplx value = plane.values(r, c) * measure;
          src_mag[c] += std::abs(value);
          ++deposited[c];
          if (p.kernel == Kernel::hard) {
            out.values(grid.nearest(w), c) += value;
            dep_mag[c] += std::abs(value);
            continue;
          }
          // Gaussian profile over bins whose centers lie within 4ε of ω̂.
          const double lo_coord = grid.coordinate(std::max(w - 4 * eps, 1e-300));
          const double hi_coord = grid.coordinate(w + 4 * eps);
          const auto first = static_cast<std::size_t>(std::clamp(std::ceil(lo_coord), 0.0, static_cast<double>(grid.size())));
          const auto last = static_cast<std::size_t>(std::clamp(std::floor(hi_coord) + 1.0, 0.0, static_cast<double>(grid.size())));
          weights.clear();
          double total = 0.0;
          for (std::size_t b = first; b < last; ++b) {
            const double z = (grid.center(b) - w) / eps;
            const double g = std::abs(z) <= 4.0 ? std::exp(-0.5 * z * z) : 0.0;
            weights.push_back(g);
            total += g;
          }
          if (!(total > 0.0)) {
            out.values(grid.nearest(w), c) += value;
            dep_mag[c] += std::abs(value);
            continue;
          }
          for (std::size_t b = first; b < last; ++b) {
            const cplx part = value * (weights[b - first] / total);
            out.values(b, c) += part;
            dep_mag[c] += std::abs(part);
          }
        }
      },
      workers);

  for (std::size_t c = 0; c < cols; ++c) {
    out.deposited_count += deposited[c];
    out.deposited_magnitude += dep_mag[c];
    out.source_magnitude += src_mag[c];
  }
  out.dropped_count = rows * cols - out.deposited_count;
  if (out.deposited_count == 0) out.diagnostics.push_back("no coefficient passed the threshold and range");
  return out;
}

/// Forward STFT, derivative STFT, phase transform and squeezing in one call.
inline SSTPlane sst_stft(const SampledSignal& x, const StftParams& sp, const SSTParams& p = {},
                         std::size_t workers = 0) {
  const auto pair = stft_with_derivative(x, sp, workers);
  const auto pm = phase_transform(pair.plane, pair.derivative, p.gamma_threshold);
  SSTPlane s = synchrosqueeze(pair.plane, pm, p, workers);
  s.stft_source = sp;
  return s;
}

inline SSTPlane sst_cwt(const SampledSignal& x, const CwtParams& cp, const SSTParams& p = {},
                        std::size_t workers = 0) {
  const auto pair = cwt_with_derivative(x, cp, workers);
  const auto pm = phase_transform(pair.plane, pair.derivative, p.gamma_threshold);
  SSTPlane s = synchrosqueeze(pair.plane, pm, p, workers);
  s.cwt_source = cp;
  return s;
}

}  // namespace ssq
