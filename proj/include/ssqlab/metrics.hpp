#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/linear_tfr.hpp"
#include "ssqlab/ridge_reconstruct.hpp"
#include "ssqlab/synchrosqueeze.hpp"

namespace ssq {

/// Rényi entropy (bits) of p = |V|²/Σ|V|². Lower means more concentrated.
inline double renyi_entropy(const Grid2<cplx>& values, double order = 3.0) {
  require(order > 0 && order != 1.0, "Renyi order must be positive and different from 1");
  double total = 0.0;
  for (const auto& v : values.data()) total += std::norm(v);
  require(total > 0.0, "Renyi entropy of an all-zero plane is undefined");
  double acc = 0.0;
  for (const auto& v : values.data()) {
    const double prob = std::norm(v) / total;
    if (prob > 0.0) acc += std::pow(prob, order);
  }
  return std::max(0.0, std::log2(acc) / (1.0 - order));
}

inline double renyi_entropy(const TFRPlane& plane, double order = 3.0) { return renyi_entropy(plane.values, order); }
inline double renyi_entropy(const SSTPlane& plane, double order = 3.0) { return renyi_entropy(plane.values, order); }

namespace detail {
inline std::size_t nearest_index(std::span<const double> axis, double f) {
  auto it = std::lower_bound(axis.begin(), axis.end(), f);
  if (it == axis.begin()) return 0;
  if (it == axis.end()) return axis.size() - 1;
  const auto hi = static_cast<std::size_t>(it - axis.begin());
  return (f - axis[hi - 1] <= axis[hi] - f) ? hi - 1 : hi;
}
}  // namespace detail

/// Fraction of total |V| lying within ±halfwidth bins of any track.
/// Tracks are given per column, in Hz, and mapped to their nearest axis bin.
inline double ridge_energy_fraction(const Grid2<cplx>& values, std::span<const double> freq_axis_hz,
                                    const std::vector<std::vector<double>>& tracks_hz,
                                    std::size_t halfwidth_bins, std::size_t first_col = 0,
                                    std::size_t last_col = static_cast<std::size_t>(-1)) {
  require(!tracks_hz.empty(), "ridge energy fraction needs at least one track");
  require(freq_axis_hz.size() == values.rows(), "axis does not match the plane");
  last_col = std::min(last_col, values.cols());
  require(first_col < last_col, "empty column range");
  for (const auto& t : tracks_hz) require(t.size() == values.cols(), "track length does not match the plane");
  double total = 0.0;
  double inside = 0.0;
  std::vector<std::uint8_t> hit(values.rows());
  for (std::size_t c = first_col; c < last_col; ++c) {
    std::fill(hit.begin(), hit.end(), 0);
    for (const auto& t : tracks_hz) {
      const std::size_t b = detail::nearest_index(freq_axis_hz, t[c]);
      const std::size_t lo = b >= halfwidth_bins ? b - halfwidth_bins : 0;
      const std::size_t hi = std::min(values.rows() - 1, b + halfwidth_bins);
      for (std::size_t r = lo; r <= hi; ++r) hit[r] = 1;
    }
    for (std::size_t r = 0; r < values.rows(); ++r) {
      const double m = std::abs(values(r, c));
      total += m;
      if (hit[r]) inside += m;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

inline double ridge_energy_fraction(const TFRPlane& p, const std::vector<std::vector<double>>& tracks,
                                    std::size_t halfwidth_bins) {
  return ridge_energy_fraction(p.values, p.freq_axis_hz, tracks, halfwidth_bins);
}

inline double ridge_energy_fraction(const SSTPlane& p, const std::vector<std::vector<double>>& tracks,
                                    std::size_t halfwidth_bins) {
  return ridge_energy_fraction(p.values, p.eta_axis_hz, tracks, halfwidth_bins);
}

/// Bounds [begin, end) of the centered interior fraction of n samples.
inline std::pair<std::size_t, std::size_t> interior_range(std::size_t n, double interior_fraction) {
  require(interior_fraction > 0 && interior_fraction <= 1, "interior fraction must lie in (0, 1]");
  const auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(n) * interior_fraction));
  const std::size_t begin = (n - keep) / 2;
  return {begin, begin + keep};
}

/// ‖est − truth‖₂ / ‖truth‖₂ over the centered interior fraction.
inline double relative_l2_error(std::span<const cplx> estimate, std::span<const cplx> truth,
                                double interior_fraction = 1.0) {
  require(estimate.size() == truth.size(), "estimate and truth lengths differ");
  require(!truth.empty(), "empty signals");
  const auto [begin, end] = interior_range(truth.size(), interior_fraction);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    num += std::norm(estimate[i] - truth[i]);
    den += std::norm(truth[i]);
  }
  require(den > 0.0, "truth has zero norm on the interior");
  return std::sqrt(num / den);
}

inline double relative_l2_error(const ModeEstimate& estimate, std::span<const cplx> truth,
                                double interior_fraction = 1.0) {
  return relative_l2_error(estimate.samples, truth, interior_fraction);
}

struct ConcentrationReport {
  double renyi_entropy_bits = 0.0;
  double ridge_energy_fraction = 0.0;
  std::map<std::string, std::string> params;
};

template <typename Plane>
ConcentrationReport concentration_report(const Plane& plane, const std::vector<std::vector<double>>& tracks,
                                         std::size_t halfwidth_bins, double order = 3.0) {
  ConcentrationReport rep;
  rep.renyi_entropy_bits = renyi_entropy(plane, order);
  rep.ridge_energy_fraction = ridge_energy_fraction(plane, tracks, halfwidth_bins);
  rep.params["renyi_order"] = std::to_string(order);
  rep.params["halfwidth_bins"] = std::to_string(halfwidth_bins);
  return rep;
}

/// key=value lines, keys sorted.
inline void write_report(std::ostream& os, const std::map<std::string, double>& values) {
  for (const auto& [k, v] : values) os << k << '=' << std::setprecision(10) << v << '\n';
}

/// Two-column CSV (metric,value).
inline void write_report_csv(std::ostream& os, const std::map<std::string, double>& values) {
  os << "metric,value\n";
  for (const auto& [k, v] : values) os << k << ',' << std::setprecision(17) << v << '\n';
}

}  // namespace ssq
