#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ssqlab/metrics.hpp"
#include "ssqlab/synchrosqueeze.hpp"

using namespace ssq;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::size_t argmax_row(const Grid2<cplx>& v, std::size_t col) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < v.rows(); ++r)
    if (std::abs(v(r, col)) > std::abs(v(best, col))) best = r;
  return best;
}

std::size_t nearest(const std::vector<double>& axis, double f) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < axis.size(); ++r)
    if (std::abs(axis[r] - f) < std::abs(axis[best] - f)) best = r;
  return best;
}

// Fraction of |T| within ±1 bin of the row nearest f over [first, last).
double band_fraction(const Grid2<cplx>& v, const std::vector<double>& axis, double f, std::size_t first,
                     std::size_t last) {
  const std::size_t b = nearest(axis, f);
  double in = 0.0, total = 0.0;
  for (std::size_t c = first; c < last; ++c)
    for (std::size_t r = 0; r < v.rows(); ++r) {
      const double m = std::abs(v(r, c));
      total += m;
      if (r + 1 >= b && r <= b + 1) in += m;
    }
  return in / total;
}

}  // namespace

TEST_CASE("phase transform masks zeros without producing NaN", "[sst]") {
  const auto x = make_complex_signal(std::vector<cplx>(256), 100.0);
  const auto pair = stft_with_derivative(x, StftParams{});
  const auto pm = phase_transform(pair.plane, pair.derivative, Threshold::abs(0.0));
  REQUIRE(pm.valid_count == 0);
  for (double w : pm.omega_hat_hz.data()) REQUIRE(std::isfinite(w));
  const auto s = synchrosqueeze(pair.plane, pm, {});
  for (const auto& v : s.values.data()) REQUIRE(v == cplx{});
  REQUIRE_FALSE(s.diagnostics.empty());
}

TEST_CASE("phase transform rejects mismatched inputs", "[sst]") {
  const auto x = synthesize_mcs(single_tone_spec(20.0, 2.0, 100.0));
  StftParams sp;
  const auto a = stft_with_derivative(x, sp);
  sp.hop_samples = 2;
  const auto b = stft_with_derivative(x, sp);
  REQUIRE_THROWS_AS(phase_transform(a.plane, b.derivative, {}), ValidationError);
  const auto w = cwt_with_derivative(x, default_scale_grid(100.0, x.size()));
  REQUIRE_THROWS_AS(phase_transform(a.plane, w.derivative, {}), ValidationError);
}

TEST_CASE("threshold above the maximum drops everything", "[sst]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 4;
  const auto pair = stft_with_derivative(x, sp);
  const auto pm = phase_transform(pair.plane, pair.derivative, Threshold::rel(1.5));
  const auto s = synchrosqueeze(pair.plane, pm, {});
  REQUIRE(s.deposited_count == 0);
  REQUIRE(s.dropped_count == pair.plane.rows() * pair.plane.cols());
  for (const auto& v : s.values.data()) REQUIRE(v == cplx{});
}

TEST_CASE("tone: masked-in estimates sit on the tone frequency", "[sst]") {
  const double fs = 205.0;
  const auto x = synthesize_mcs(single_tone_spec(50.0, 10.0, fs));
  const auto pair = stft_with_derivative(x, StftParams{});
  const std::size_t edge = pair.plane.max_boundary_cols();

  SECTION("ridge-adjacent bins at the default threshold") {
    const auto pm = phase_transform(pair.plane, pair.derivative, {});
    const std::size_t b = nearest(pair.plane.freq_axis_hz, 50.0);
    for (std::size_t m = edge; m + edge < pair.plane.cols(); ++m)
      for (std::size_t r = b - 2; r <= b + 2; ++r) {
        REQUIRE(pm.valid_mask(r, m));
        REQUIRE_THAT(pm.omega_hat_hz(r, m), WithinAbs(50.0, 0.1));
      }
  }
  SECTION("every masked-in entry once the threshold clears the far sidelobes") {
    // Far from the tone the coefficients are 1e-6 of the peak and their phase
    // carries FFT rounding, so "all entries" only holds above that floor.
    const auto pm = phase_transform(pair.plane, pair.derivative, Threshold::rel(1e-2));
    REQUIRE(pm.valid_count > 0);
    for (std::size_t m = edge; m + edge < pair.plane.cols(); ++m)
      for (std::size_t r = 0; r < pair.plane.rows(); ++r)
        if (pm.valid_mask(r, m)) REQUIRE_THAT(pm.omega_hat_hz(r, m), WithinAbs(50.0, 0.1));
  }
  SECTION("CWT branch") {
    const auto c = cwt_with_derivative(x, default_scale_grid(fs, x.size()));
    const auto pm = phase_transform(c.plane, c.derivative, Threshold::rel(1e-2));
    std::size_t checked = 0;
    for (std::size_t r = 0; r < c.plane.rows(); ++r) {
      const std::size_t e = c.plane.boundary_cols[r];
      for (std::size_t m = e; m + e < c.plane.cols(); ++m)
        if (pm.valid_mask(r, m)) {
          REQUIRE_THAT(pm.omega_hat_hz(r, m), WithinAbs(50.0, 0.1));
          ++checked;
        }
    }
    REQUIRE(checked > 1000);
  }
}

TEST_CASE("linear chirp: estimate at the ridge bin follows the IF", "[sst]") {
  const double fs = 205.0;
  const oracle::PolyPhase chirp{{0.0, 65.0, 1.75}};  // IF 65 + 3.5 t
  const auto x = oracle::sample_phase(chirp, 2050, fs);
  const auto pair = stft_with_derivative(x, StftParams{});
  const auto pm = phase_transform(pair.plane, pair.derivative, {});
  const std::size_t edge = pair.plane.max_boundary_cols();
  for (std::size_t m = edge; m + edge < pair.plane.cols(); ++m) {
    const std::size_t r = argmax_row(pair.plane.values, m);
    REQUIRE(pm.valid_mask(r, m));
    REQUIRE_THAT(pm.omega_hat_hz(r, m), WithinAbs(chirp.frequency(pair.plane.time_axis_s[m]), 0.5));
  }
}

TEST_CASE("tone concentration: SST versus STFT within one bin", "[sst]") {
  const auto x = synthesize_mcs(single_tone_spec(50.0, 10.0, 205.0));
  const auto pair = stft_with_derivative(x, StftParams{});
  const auto s = synchrosqueeze(pair.plane, phase_transform(pair.plane, pair.derivative, {}), {});
  const std::size_t edge = s.boundary_cols;
  REQUIRE(band_fraction(s.values, s.eta_axis_hz, 50.0, edge, s.cols() - edge) >= 0.99);
  REQUIRE(band_fraction(pair.plane.values, pair.plane.freq_axis_hz, 50.0, edge, s.cols() - edge) < 0.6);
}

TEST_CASE("hard kernel conserves every frame's complex sum", "[sst]") {
  // Independent of the plane's own bookkeeping: per frame, the squeezed column
  // must add up to the masked-in, in-range source coefficients times the measure.
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    const bool use_cwt = trial % 2 == 1;
    const auto x = make_complex_signal(oracle::random_complex(300 + rng() % 400, rng()), 100.0);
    StftParams sp;
    sp.hop_samples = 1 + rng() % 3;
    const auto pair = use_cwt ? cwt_with_derivative(x, default_scale_grid(100.0, x.size()))
                              : stft_with_derivative(x, sp);
    const auto pm = phase_transform(pair.plane, pair.derivative, Threshold::rel(1e-3));
    const auto s = synchrosqueeze(pair.plane, pm, {});
    const auto grid = s.grid();
    double worst = 0.0, scale = 0.0, mag = 0.0;
    for (std::size_t c = 0; c < s.cols(); ++c) {
      cplx expect{}, got{};
      for (std::size_t r = 0; r < pair.plane.rows(); ++r)
        if (pm.valid_mask(r, c) && grid.contains(pm.omega_hat_hz(r, c))) {
          expect += pair.plane.values(r, c) * pair.plane.row_measure;
          mag += std::abs(pair.plane.values(r, c) * pair.plane.row_measure);
        }
      for (std::size_t b = 0; b < s.rows(); ++b) got += s.values(b, c);
      worst = std::max(worst, std::abs(got - expect));
      scale = std::max(scale, std::abs(expect));
    }
    REQUIRE(worst <= 1e-12 * std::max(scale, 1.0));
    REQUIRE_THAT(s.deposited_magnitude, WithinRel(mag, 1e-9));
    REQUIRE_THAT(s.source_magnitude, WithinRel(mag, 1e-9));
  }
}

TEST_CASE("raising the threshold never deposits more", "[sst]") {
  const auto x = add_awgn(synthesize_mcs(preset("paper-3comp")), 5.0, 3);
  StftParams sp;
  sp.hop_samples = 2;
  const auto pair = stft_with_derivative(x, sp);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double g : {0.0, 1e-8, 1e-4, 1e-2, 0.05, 0.1, 0.3, 0.6, 0.9}) {
    const auto s = synchrosqueeze(pair.plane, phase_transform(pair.plane, pair.derivative, Threshold::rel(g)), {});
    REQUIRE(s.deposited_count <= prev);
    REQUIRE(s.deposited_count + s.dropped_count == pair.plane.rows() * pair.plane.cols());
    prev = s.deposited_count;
  }
}

TEST_CASE("squeezed planes do not depend on the worker count", "[sst]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 2;
  SSTParams gauss;
  gauss.kernel = Kernel::gaussian;
  gauss.epsilon_width = 0.8;
  REQUIRE(sst_stft(x, sp, {}, 1).values == sst_stft(x, sp, {}, 4).values);
  REQUIRE(sst_stft(x, sp, gauss, 1).values == sst_stft(x, sp, gauss, 3).values);
  const auto cp = default_scale_grid(205.0, x.size());
  REQUIRE(sst_cwt(x, cp, {}, 1).values == sst_cwt(x, cp, {}, 4).values);
}

TEST_CASE("narrow Gaussian kernel converges to the hard kernel", "[sst]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 2;
  const auto pair = stft_with_derivative(x, sp);
  const auto pm = phase_transform(pair.plane, pair.derivative, {});
  const auto hard = synchrosqueeze(pair.plane, pm, {});
  const double bin = hard.eta_axis_hz[1] - hard.eta_axis_hz[0];

  SSTParams g;
  g.kernel = Kernel::gaussian;
  g.epsilon_width = bin / 100.0;
  const auto narrow = synchrosqueeze(pair.plane, pm, g);
  double diff = 0.0, total = 0.0;
  for (std::size_t i = 0; i < hard.values.size(); ++i) {
    diff += std::abs(hard.values.data()[i] - narrow.values.data()[i]);
    total += std::abs(hard.values.data()[i]);
  }
  REQUIRE(diff <= 1e-6 * total);

  // A wide kernel spreads mass but keeps each deposit's total.
  g.epsilon_width = 2.0 * bin;
  const auto wide = synchrosqueeze(pair.plane, pm, g);
  REQUIRE_THAT(wide.deposited_magnitude, WithinRel(wide.source_magnitude, 1e-9));
  REQUIRE(renyi_entropy(wide) > renyi_entropy(hard));
}

TEST_CASE("squeezing reduces Renyi entropy on the preset", "[sst]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 1;
  const auto a = stft_with_derivative(x, sp);
  const auto sa = synchrosqueeze(a.plane, phase_transform(a.plane, a.derivative, {}), {});
  REQUIRE(renyi_entropy(sa) < renyi_entropy(a.plane));
  const auto b = cwt_with_derivative(x, default_scale_grid(205.0, x.size()));
  const auto sb = synchrosqueeze(b.plane, phase_transform(b.plane, b.derivative, {}), {});
  REQUIRE(renyi_entropy(sb) < renyi_entropy(b.plane));
}

TEST_CASE("branch defaults for the output grid", "[sst]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 8;
  const auto s = sst_stft(x, sp);
  REQUIRE(s.kind == SstKind::sst_stft);
  REQUIRE(s.rows() == sp.resolved_fft_length() / 2 + 1);
  REQUIRE(s.eta_axis_hz.front() == 0.0);
  REQUIRE_THAT(s.eta_axis_hz.back(), WithinRel(102.5, 1e-12));
  REQUIRE(s.spacing() == BinSpacing::linear);

  const auto cp = default_scale_grid(205.0, x.size());
  const auto w = cwt(x, cp);
  const auto sc = sst_cwt(x, cp);
  REQUIRE(sc.kind == SstKind::sst_cwt);
  REQUIRE(sc.spacing() == BinSpacing::logarithmic);
  REQUIRE(sc.rows() == w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) REQUIRE_THAT(sc.eta_axis_hz[r], WithinRel(w.freq_axis_hz[r], 1e-9));
  for (std::size_t r = 1; r < sc.rows(); ++r) REQUIRE(sc.eta_axis_hz[r] > sc.eta_axis_hz[r - 1]);
}

TEST_CASE("squeezing a zero signal gives a zero plane", "[sst]") {
  const auto x = make_complex_signal(std::vector<cplx>(512), 205.0);
  const auto a = sst_stft(x, StftParams{});
  const auto b = sst_cwt(x, default_scale_grid(205.0, 512));
  for (const auto& v : a.values.data()) REQUIRE(v == cplx{});
  for (const auto& v : b.values.data()) REQUIRE(v == cplx{});
}

TEST_CASE("SST parameter validation", "[sst]") {
  const auto x = synthesize_mcs(single_tone_spec(20.0, 2.0, 100.0));
  const auto pair = stft_with_derivative(x, StftParams{});
  SSTParams p;
  p.epsilon_width = 0.5;  // hard kernel with ε > 0
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
  p = {};
  p.kernel = Kernel::gaussian;  // gaussian with ε = 0
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
  p = {};
  p.freq_range = std::make_pair(10.0, 60.0);  // above Nyquist
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
  p.freq_range = std::make_pair(30.0, 10.0);
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
  p.freq_range = std::make_pair(0.0, 40.0);
  p.spacing = BinSpacing::logarithmic;
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
  p = {};
  p.n_out_bins = 1;
  REQUIRE_THROWS_AS(resolve_sst_params(pair.plane, p), ValidationError);
}

TEST_CASE("out-of-range estimates are dropped and counted", "[sst]") {
  const auto x = synthesize_mcs(single_tone_spec(30.0, 4.0, 100.0));
  const auto pair = stft_with_derivative(x, StftParams{});
  const auto pm = phase_transform(pair.plane, pair.derivative, {});
  SSTParams p;
  p.freq_range = std::make_pair(35.0, 50.0);
  p.n_out_bins = 31;
  const auto s = synchrosqueeze(pair.plane, pm, p);
  const auto full = synchrosqueeze(pair.plane, pm, {});
  REQUIRE(s.dropped_count > full.dropped_count);
  REQUIRE(s.source_magnitude < 0.01 * full.source_magnitude);
  REQUIRE(s.eta_axis_hz.front() == 35.0);
  REQUIRE(s.eta_axis_hz.back() == 50.0);
}
