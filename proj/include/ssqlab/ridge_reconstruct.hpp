#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/synchrosqueeze.hpp"
#include "ssqlab/windows_wavelets.hpp"

namespace ssq {

/// Per-frame frequency track through an SST plane.
struct Ridge {
  std::vector<std::size_t> bin_track;
  std::vector<double> freq_track_hz;
  double energy = 0.0;
};

struct RidgeParams {
  std::size_t count = 1;
  /// Jump cost per squared bin, in units of the mean per-frame plane magnitude.
  double penalty = 2.0;
  std::size_t max_jump = 16;
  /// Half-width of the band cleared around each found ridge; 0 selects the
  /// branch default reconstruction width (8 bins STFT, 4 log-bins CWT).
  std::size_t band_bins = 0;
  /// Passes whose ridge energy falls below this fraction of the first ridge stop the search.
  double min_relative_energy = 1e-2;
};

struct RidgeResult {
  std::vector<Ridge> ridges;
  std::vector<std::string> diagnostics;
};

inline std::size_t default_band_bins(SstKind kind) { return kind == SstKind::sst_stft ? 8 : 4; }

namespace detail {

// Maximizes Σ_m score[b_m][m] − pen·Σ_m (b_{m+1} − b_m)² with |b_{m+1} − b_m| ≤ max_jump.
inline std::vector<std::size_t> best_track(const Grid2<double>& score, double pen, std::size_t max_jump) {
  const std::size_t bins = score.rows();
  const std::size_t frames = score.cols();
  const auto jump = static_cast<std::ptrdiff_t>(max_jump);
  std::vector<double> acc(bins), next(bins);
  Grid2<std::int32_t> back(frames, bins, 0);
  for (std::size_t b = 0; b < bins; ++b) acc[b] = score(b, 0);
  for (std::size_t m = 1; m < frames; ++m) {
    for (std::size_t b = 0; b < bins; ++b) {
      double best = acc[b];
      std::ptrdiff_t best_j = 0;
      for (std::ptrdiff_t mag = 1; mag <= jump; ++mag) {
        const double cost = pen * static_cast<double>(mag * mag);
        for (std::ptrdiff_t j : {-mag, mag}) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(b) + j;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(bins)) continue;
          const double cand = acc[static_cast<std::size_t>(src)] - cost;
          if (cand > best) {
            best = cand;
            best_j = j;
          }
        }
      }
      next[b] = best + score(b, m);
      back(m, b) = static_cast<std::int32_t>(best_j);
    }
    std::swap(acc, next);
  }
  std::size_t end = 0;
  for (std::size_t b = 1; b < bins; ++b)
    if (acc[b] > acc[end]) end = b;
  std::vector<std::size_t> track(frames);
  track[frames - 1] = end;
  for (std::size_t m = frames - 1; m > 0; --m) {
    const auto prev = static_cast<std::ptrdiff_t>(track[m]) + back(m, track[m]);
    track[m - 1] = static_cast<std::size_t>(prev);
  }
  return track;
}

}  // namespace detail

/// Iterative penalized dynamic programming: each pass finds the best-scoring
/// track on the remaining plane, then clears ±band bins around it. Ridges come
/// out in order of discovery, which is descending energy for separated modes.
inline RidgeResult extract_ridges(const SSTPlane& s, const RidgeParams& p) {
  require(p.count >= 1, "ridge count must be at least 1");
  require(p.count <= s.rows(), "ridge count exceeds the number of output bins");
  require(p.penalty >= 0 && std::isfinite(p.penalty), "ridge penalty must be non-negative");
  RidgeResult result;
  const std::size_t bins = s.rows();
  const std::size_t frames = s.cols();
  if (frames == 0) {
    result.diagnostics.push_back("plane has no frames");
    return result;
  }
  Grid2<double> score(bins, frames);
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    for (std::size_t m = 0; m < frames; ++m) {
      score(b, m) = std::abs(s.values(b, m));
      total += score(b, m);
    }
  if (!(total > 0.0)) {
    result.diagnostics.push_back("plane is all zero; no ridges");
    return result;
  }
  const double pen = p.penalty * total / static_cast<double>(frames);
  const std::size_t band = p.band_bins != 0 ? p.band_bins : default_band_bins(s.kind);

  for (std::size_t pass = 0; pass < p.count; ++pass) {
    auto track = detail::best_track(score, pen, p.max_jump);
    Ridge r;
    r.bin_track = track;
    r.freq_track_hz.resize(frames);
    for (std::size_t m = 0; m < frames; ++m) {
      r.freq_track_hz[m] = s.eta_axis_hz[track[m]];
      r.energy += score(track[m], m);
    }
    const double floor_energy = result.ridges.empty() ? 0.0 : p.min_relative_energy * result.ridges.front().energy;
    if (!(r.energy > 0.0) || r.energy < floor_energy) {
      std::ostringstream msg;
      msg << "found " << result.ridges.size() << " of " << p.count
          << " requested ridges; remaining content below the energy floor";
      result.diagnostics.push_back(msg.str());
      break;
    }
    for (std::size_t m = 0; m < frames; ++m) {
      const std::size_t lo = track[m] >= band ? track[m] - band : 0;
      const std::size_t hi = std::min(bins - 1, track[m] + band);
      for (std::size_t b = lo; b <= hi; ++b) score(b, m) = 0.0;
    }
    result.ridges.push_back(std::move(r));
  }
  return result;
}

/// Reconstructed mode on the plane's frame grid.
struct ModeEstimate {
  std::vector<cplx> samples;
  std::vector<double> time_axis_s;
  std::size_t component_index = 0;
  std::size_t band_halfwidth_bins = 0;
};

/// Normalizer of STFT-domain reconstruction for the implemented convention:
/// summing S·Δf over all bins gives fs·h[0]·x at the frame center.
inline double stft_reconstruction_constant(const DiscreteWindow& w, double sample_rate_hz) {
  return sample_rate_hz * w.center_tap();
}

namespace detail {

inline ModeEstimate band_sum(const SSTPlane& s, const Ridge& r, std::size_t d_bins, double normalizer,
                             std::size_t component_index) {
  require(d_bins >= 1, "band half-width must be at least 1 bin");
  require(r.bin_track.size() == s.cols(), "ridge length does not match the plane");
  require(normalizer > 0 && std::isfinite(normalizer), "reconstruction constant must be positive");
  const double scale = (s.is_real ? 2.0 : 1.0) / normalizer;
  ModeEstimate out;
  out.samples.resize(s.cols());
  out.time_axis_s = s.time_axis_s;
  out.component_index = component_index;
  out.band_halfwidth_bins = d_bins;
  for (std::size_t m = 0; m < s.cols(); ++m) {
    const std::size_t center = r.bin_track[m];
    require(center < s.rows(), "ridge bin outside the plane");
    const std::size_t lo = center >= d_bins ? center - d_bins : 0;
    const std::size_t hi = std::min(s.rows() - 1, center + d_bins);
    cplx acc{};
    for (std::size_t b = lo; b <= hi; ++b) acc += s.values(b, m);
    out.samples[m] = acc * scale;
  }
  return out;
}

}  // namespace detail

/// Mode from an SST-STFT plane: band sum around the ridge divided by fs·h[0]
/// (doubled for real input).
inline ModeEstimate reconstruct_mode_stft(const SSTPlane& s, const Ridge& r, std::size_t d_bins,
                                          const DiscreteWindow& w, std::size_t component_index = 0) {
  require(s.kind == SstKind::sst_stft, "reconstruct_mode_stft needs an sst-stft plane");
  return detail::band_sum(s, r, d_bins, stft_reconstruction_constant(w, s.sample_rate_hz), component_index);
}

/// Mode from an SST-CWT plane: band sum around the ridge divided by C_ψ
/// (doubled for real input).
inline ModeEstimate reconstruct_mode_cwt(const SSTPlane& s, const Ridge& r, std::size_t d_bins, double c_psi,
                                         std::size_t component_index = 0) {
  require(s.kind == SstKind::sst_cwt, "reconstruct_mode_cwt needs an sst-cwt plane");
  return detail::band_sum(s, r, d_bins, c_psi, component_index);
}

/// Reconstructs a mode with the normalizer implied by the plane's recorded source settings.
inline ModeEstimate reconstruct_mode(const SSTPlane& s, const Ridge& r, std::size_t d_bins,
                                     std::size_t component_index = 0) {
  if (s.kind == SstKind::sst_stft)
    return reconstruct_mode_stft(s, r, d_bins, dpss_window(s.stft_source.window, s.sample_rate_hz),
                                 component_index);
  return reconstruct_mode_cwt(s, r, d_bins, cwt_reconstruction_constant(s.cwt_source.wavelet), component_index);
}

}  // namespace ssq
