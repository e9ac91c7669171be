#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssqlab/common.hpp"

namespace ssq {

/// Uniformly sampled time series. Real signals carry a zero imaginary part.
struct SampledSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 1.0;
  double start_time_s = 0.0;
  bool is_real = false;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] double time_at(std::size_t n) const noexcept {
    return start_time_s + static_cast<double>(n) / sample_rate_hz;
  }

  void validate() const {
    require(sample_rate_hz > 0 && std::isfinite(sample_rate_hz), "sample rate must be positive");
    require(!samples.empty(), "signal must contain at least one sample");
    if (is_real) {
      for (std::size_t n = 0; n < samples.size(); ++n)
        require(samples[n].imag() == 0.0,
                "real signal has nonzero imaginary part at sample " + std::to_string(n));
    }
  }
};

inline SampledSignal make_real_signal(std::span<const double> values, double fs) {
  SampledSignal s;
  s.samples.assign(values.begin(), values.end());
  s.sample_rate_hz = fs;
  s.is_real = true;
  return s;
}

inline SampledSignal make_complex_signal(std::vector<cplx> values, double fs) {
  SampledSignal s;
  s.samples = std::move(values);
  s.sample_rate_hz = fs;
  return s;
}

/// c[0] + c[1] t + c[2] t^2 + ...
struct Polynomial {
  std::vector<double> coeffs;

  [[nodiscard]] double operator()(double t) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * t + *it;
    return acc;
  }

  [[nodiscard]] Polynomial derivative() const {
    Polynomial d;
    for (std::size_t i = 1; i < coeffs.size(); ++i)
      d.coeffs.push_back(static_cast<double>(i) * coeffs[i]);
    return d;
  }
};

/// One mode A(t)·exp(j2π φ(t)); the phase is in cycles so φ'(t) is in Hz.
struct ComponentSpec {
  Polynomial amplitude{{1.0}};
  Polynomial phase_cycles;
};

struct MCSSpec {
  std::vector<ComponentSpec> components;
  double duration_s = 10.0;
  double sample_rate_hz = 205.0;

  [[nodiscard]] std::size_t sample_count() const {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  }
  [[nodiscard]] double time_at(std::size_t n) const noexcept {
    return static_cast<double>(n) / sample_rate_hz;
  }

  /// Checks every component on the sample grid: 0 < IF < fs/2 and A ≥ 0.
  void validate() const {
    require(!components.empty(), "MCS spec needs at least one component");
    require(duration_s > 0 && std::isfinite(duration_s), "duration must be positive");
    require(sample_rate_hz > 0 && std::isfinite(sample_rate_hz), "sample rate must be positive");
    require(sample_count() >= 1, "duration shorter than one sample");
    const double nyquist = sample_rate_hz / 2.0;
    const std::size_t n = sample_count();
    for (std::size_t k = 0; k < components.size(); ++k) {
      const auto inst_freq = components[k].phase_cycles.derivative();
      for (std::size_t i = 0; i < n; ++i) {
        const double t = time_at(i);
        const double f = inst_freq(t);
        const double a = components[k].amplitude(t);
        if (!(f > 0.0 && f < nyquist)) {
          std::ostringstream msg;
          msg << "component " << k << " instantaneous frequency " << f << " Hz at t=" << t
              << " s is outside (0, " << nyquist << ") Hz";
          throw ValidationError(msg.str());
        }
        if (!(a >= 0.0)) {
          std::ostringstream msg;
          msg << "component " << k << " amplitude " << a << " at t=" << t << " s is negative";
          throw ValidationError(msg.str());
        }
      }
    }
  }
};

namespace detail {
// exp(j2π φ) with the integer part of φ removed first to keep precision for long records.
inline cplx unit_phasor(double cycles) {
  const double frac = cycles - std::floor(cycles);
  return std::polar(1.0, kTwoPi * frac);
}
}  // namespace detail

/// Evaluates component k exactly at arbitrary times (used to align ground truth to frame grids).
inline std::vector<cplx> component_at_times(const MCSSpec& spec, std::size_t k,
                                            std::span<const double> times) {
  require(k < spec.components.size(), "component index out of range");
  const auto& c = spec.components[k];
  std::vector<cplx> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(c.amplitude(t) * detail::unit_phasor(c.phase_cycles(t)));
  return out;
}

/// Ground-truth component k on the sample grid.
inline SampledSignal synthesize_component(const MCSSpec& spec, std::size_t k) {
  spec.validate();
  require(k < spec.components.size(), "component index out of range");
  std::vector<double> times(spec.sample_count());
  for (std::size_t n = 0; n < times.size(); ++n) times[n] = spec.time_at(n);
  return make_complex_signal(component_at_times(spec, k, times), spec.sample_rate_hz);
}

/// x[n] = Σ_k A_k(t_n) exp(j2π φ_k(t_n)), t_n = n / fs.
inline SampledSignal synthesize_mcs(const MCSSpec& spec) {
  spec.validate();
  const std::size_t n = spec.sample_count();
  std::vector<cplx> x(n, cplx{0.0, 0.0});
  for (const auto& c : spec.components) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = spec.time_at(i);
      x[i] += c.amplitude(t) * detail::unit_phasor(c.phase_cycles(t));
    }
  }
  return make_complex_signal(std::move(x), spec.sample_rate_hz);
}

/// Instantaneous frequency (Hz) of each component on the sample grid.
inline std::vector<std::vector<double>> true_if_tracks(const MCSSpec& spec) {
  const std::size_t n = spec.sample_count();
  std::vector<std::vector<double>> tracks;
  for (const auto& c : spec.components) {
    const auto d = c.phase_cycles.derivative();
    std::vector<double> track(n);
    for (std::size_t i = 0; i < n; ++i) track[i] = d(spec.time_at(i));
    tracks.push_back(std::move(track));
  }
  return tracks;
}

inline MCSSpec single_tone_spec(double freq_hz, double duration_s, double fs, double amplitude = 1.0) {
  MCSSpec spec;
  spec.components.push_back({Polynomial{{amplitude}}, Polynomial{{0.0, freq_hz}}});
  spec.duration_s = duration_s;
  spec.sample_rate_hz = fs;
  return spec;
}

/// Built-in presets. "paper-3comp": two polynomial-IF modes and one linear chirp,
/// 10 s at 205 Hz, unit amplitudes, IF tracks 10+0.12t², 40+0.15t², 70+1.5t Hz.
inline MCSSpec preset(std::string_view name) {
  if (name == "paper-3comp") {
    MCSSpec spec;
    spec.duration_s = 10.0;
    spec.sample_rate_hz = 205.0;
    spec.components = {
        {Polynomial{{1.0}}, Polynomial{{0.0, 10.0, 0.0, 0.04}}},
        {Polynomial{{1.0}}, Polynomial{{0.0, 40.0, 0.0, 0.05}}},
        {Polynomial{{1.0}}, Polynomial{{0.0, 70.0, 0.75}}},
    };
    return spec;
  }
  throw ValidationError("unknown preset '" + std::string(name) + "'");
}

/// Adds white Gaussian noise at the requested SNR (dB). Complex signals get
/// circular complex noise, real signals real noise. snr_db = +inf returns x unchanged.
inline SampledSignal add_awgn(const SampledSignal& x, double snr_db, std::uint64_t seed) {
  require(!x.samples.empty(), "add_awgn: empty signal");
  if (std::isinf(snr_db) && snr_db > 0) return x;
  require(std::isfinite(snr_db), "add_awgn: snr must be finite or +inf");
  double power = 0.0;
  for (const auto& v : x.samples) power += std::norm(v);
  power /= static_cast<double>(x.size());
  const double noise_power = power / std::pow(10.0, snr_db / 10.0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledSignal out = x;
  if (x.is_real) {
    const double sigma = std::sqrt(noise_power);
    for (auto& v : out.samples) v += sigma * normal(rng);
  } else {
    const double sigma = std::sqrt(noise_power / 2.0);
    for (auto& v : out.samples) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cplx{sigma * re, sigma * im};
    }
  }
  return out;
}

}  // namespace ssq
