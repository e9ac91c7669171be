#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/fft.hpp"

namespace ssq {

enum class WindowKind { slepian };

/// Slepian window request; NW is the time-half-bandwidth product.
struct WindowSpec {
  std::size_t length_samples = 32;
  double time_half_bandwidth = 4.0;
  WindowKind kind = WindowKind::slepian;

  void validate() const {
    require(length_samples >= 2, "window length must be at least 2");
    require(time_half_bandwidth > 0 &&
                time_half_bandwidth < static_cast<double>(length_samples) / 2.0,
            "time-half-bandwidth must lie in (0, length/2)");
  }
};

/// Sampled analysis window plus its time derivative in 1/s.
struct DiscreteWindow {
  std::vector<double> taps;
  std::vector<double> derivative_taps;
  double l2_norm_sq = 0.0;
  /// Fraction of energy inside |f| < NW/L (DPSS eigenvalue); 0 when not computed.
  double concentration = 0.0;
  double sample_rate_hz = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return taps.size(); }
  /// Tap at lag zero of a window spanning lags [-L/2, L/2).
  [[nodiscard]] double center_tap() const noexcept { return taps[taps.size() / 2]; }
};

namespace detail {

// Symmetric tridiagonal matrix whose top eigenvector is the order-0 DPSS.
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;  // off[i] couples i and i+1
};

inline Tridiagonal dpss_tridiagonal(std::size_t length, double half_bandwidth) {
  const double w = half_bandwidth / static_cast<double>(length);
  const double c = std::cos(kTwoPi * w);
  const auto n = static_cast<double>(length);
  Tridiagonal t;
  t.diag.resize(length);
  t.off.resize(length - 1);
  for (std::size_t i = 0; i < length; ++i) {
    const double a = (n - 1.0 - 2.0 * static_cast<double>(i)) / 2.0;
    t.diag[i] = a * a * c;
  }
  for (std::size_t i = 0; i + 1 < length; ++i) {
    const auto k = static_cast<double>(i + 1);
    t.off[i] = k * (n - k) / 2.0;
  }
  return t;
}

// Number of eigenvalues strictly below x (Sturm sequence of the LDL^T pivots).
inline std::size_t sturm_count(const Tridiagonal& t, double x) {
  std::size_t count = 0;
  double d = 1.0;
  const double tiny = std::numeric_limits<double>::min();
  for (std::size_t i = 0; i < t.diag.size(); ++i) {
    const double b2 = i == 0 ? 0.0 : t.off[i - 1] * t.off[i - 1];
    d = (t.diag[i] - x) - (i == 0 ? 0.0 : b2 / d);
    if (d == 0.0) d = -tiny;
    if (d < 0.0) ++count;
  }
  return count;
}

inline double largest_eigenvalue(const Tridiagonal& t) {
  double lo = std::numeric_limits<double>::max();
  double hi = std::numeric_limits<double>::lowest();
  const std::size_t n = t.diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = (i > 0 ? std::abs(t.off[i - 1]) : 0.0) + (i + 1 < n ? std::abs(t.off[i]) : 0.0);
    lo = std::min(lo, t.diag[i] - r);
    hi = std::max(hi, t.diag[i] + r);
  }
  for (int iter = 0; iter < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(t, mid) >= n)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Solves (T - sigma I) y = rhs by elimination without pivoting; callers keep
// sigma above the spectrum so the system is negative definite.
inline std::vector<double> shifted_solve(const Tridiagonal& t, double sigma, std::vector<double> rhs) {
  const std::size_t n = t.diag.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = t.diag[i] - sigma;
  for (std::size_t i = 1; i < n; ++i) {
    const double m = t.off[i - 1] / d[i - 1];
    d[i] -= m * t.off[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - t.off[i] * rhs[i + 1]) / d[i];
  return rhs;
}

inline void normalize_l2(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double inv = 1.0 / std::sqrt(s);
  for (double& x : v) x *= inv;
}

// h^T K h for the sinc kernel K_ij = sin(2πW(i-j)) / (π(i-j)), accumulated by lag.
inline double sinc_concentration(const std::vector<double>& h, double w) {
  const std::size_t n = h.size();
  double total = 0.0;
  for (std::size_t lag = 0; lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += h[i] * h[i + lag];
    const double k = lag == 0 ? 2.0 * w : std::sin(kTwoPi * w * static_cast<double>(lag)) / (kPi * static_cast<double>(lag));
    total += (lag == 0 ? 1.0 : 2.0) * k * acc;
  }
  return total;
}

}  // namespace detail

/// d/dt of the window in 1/s by spectral differentiation of the zero-padded taps
/// (pad to the next power of two ≥ 4·L, Nyquist bin dropped).
inline std::vector<double> window_derivative(std::span<const double> taps, double sample_rate_hz) {
  require(taps.size() >= 2, "window derivative needs at least 2 taps");
  require(sample_rate_hz > 0, "sample rate must be positive");
  const std::size_t len = taps.size();
  const std::size_t padded = next_pow2(4 * len);
  const std::size_t offset = (padded - len) / 2;
  std::vector<cplx> buf(padded, cplx{});
  for (std::size_t i = 0; i < len; ++i) buf[offset + i] = taps[i];
  auto spec = fft::forward(buf);
  for (std::size_t k = 0; k < padded; ++k) {
    if (2 * k == padded) {
      spec[k] = 0.0;
      continue;
    }
    spec[k] *= cplx{0.0, kTwoPi * fft::bin_frequency(k, padded) * sample_rate_hz};
  }
  auto d = fft::inverse(spec);
  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) out[i] = d[offset + i].real();
  return out;
}

inline std::vector<double> window_derivative(const DiscreteWindow& w, double sample_rate_hz) {
  return window_derivative(w.taps, sample_rate_hz);
}

/// Wraps arbitrary taps (no normalization) together with their derivative.
inline DiscreteWindow make_window(std::vector<double> taps, double sample_rate_hz = 1.0) {
  DiscreteWindow w;
  w.derivative_taps = window_derivative(taps, sample_rate_hz);
  w.l2_norm_sq = 0.0;
  for (double t : taps) w.l2_norm_sq += t * t;
  w.taps = std::move(taps);
  w.sample_rate_hz = sample_rate_hz;
  return w;
}

/// Order-0 discrete prolate spheroidal sequence, unit L2 norm, center tap positive.
inline DiscreteWindow dpss_window(const WindowSpec& spec, double sample_rate_hz = 1.0) {
  spec.validate();
  const std::size_t len = spec.length_samples;
  const auto tri = detail::dpss_tridiagonal(len, spec.time_half_bandwidth);
  const double lambda = detail::largest_eigenvalue(tri);

  double scale = 0.0;
  for (double d : tri.diag) scale = std::max(scale, std::abs(d));
  for (double o : tri.off) scale = std::max(scale, std::abs(o));
  const double sigma = lambda + 1e-10 * scale;

  std::vector<double> v(len, 1.0);
  detail::normalize_l2(v);
  for (int iter = 0; iter < 4; ++iter) {
    v = detail::shifted_solve(tri, sigma, std::move(v));
    detail::normalize_l2(v);
  }
  // The order-0 sequence is even; fold out the rounding asymmetry of the sweep.
  std::vector<double> taps(len);
  for (std::size_t i = 0; i < len; ++i) taps[i] = 0.5 * (v[i] + v[len - 1 - i]);
  detail::normalize_l2(taps);
  if (taps[len / 2] < 0)
    for (double& t : taps) t = -t;

  DiscreteWindow w = make_window(std::move(taps), sample_rate_hz);
  w.concentration = detail::sinc_concentration(w.taps, spec.time_half_bandwidth / static_cast<double>(len));
  return w;
}

/// Generalized Morse wavelet parameters (γ symmetry, β decay).
struct MorseWaveletSpec {
  double gamma_symmetry = 3.0;
  double beta_decay = 60.0;

  [[nodiscard]] double peak_omega() const { return std::pow(beta_decay / gamma_symmetry, 1.0 / gamma_symmetry); }

  void validate() const {
    require(gamma_symmetry > 0 && std::isfinite(gamma_symmetry), "GMW gamma must be positive");
    require(beta_decay > 0 && std::isfinite(beta_decay), "GMW beta must be positive");
  }

  /// Rough time-domain footprint in samples at scale a: about sqrt(βγ)/π periods.
  [[nodiscard]] double duration_samples(double scale) const {
    return 2.0 * std::sqrt(beta_decay * gamma_symmetry) * scale / peak_omega();
  }
};

/// ψ̂(ω) = 2 (ω/ω_p)^β exp(β/γ (1 - (ω/ω_p)^γ)) for ω > 0, else 0. Peak value 2 at ω_p.
inline double gmw_freq_response(const MorseWaveletSpec& spec, double omega) {
  if (!(omega > 0.0)) return 0.0;
  const double u = omega / spec.peak_omega();
  const double r = spec.beta_decay / spec.gamma_symmetry;
  return 2.0 * std::exp(spec.beta_decay * std::log(u) + r * (1.0 - std::pow(u, spec.gamma_symmetry)));
}

/// ∫₀^∞ f(ω)/ω dω for a response peaked near `peak`, integrated in s = ln(ω/peak)
/// with adaptive Gauss–Kronrod on both half lines.
template <typename Response>
double log_frequency_integral(Response&& response, double peak, double rel_tol = 1e-13,
                              double* error_estimate = nullptr) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double s) {
    const double omega = peak * std::exp(s);
    return std::isfinite(omega) ? static_cast<double>(response(omega)) : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  double err_lo = 0.0;
  double err_hi = 0.0;
  const double lo = gauss_kronrod<double, 61>::integrate(integrand, -inf, 0.0, 20, rel_tol, &err_lo);
  const double hi = gauss_kronrod<double, 61>::integrate(integrand, 0.0, inf, 20, rel_tol, &err_hi);
  if (error_estimate != nullptr) *error_estimate = err_lo * std::abs(lo) + err_hi * std::abs(hi);
  return lo + hi;
}

/// C_ψ = ∫₀^∞ ψ̂(ω)/ω dω, the normalizer of CWT-domain mode reconstruction.
inline double cwt_reconstruction_constant(const MorseWaveletSpec& spec, double rel_tol = 1e-13) {
  spec.validate();
  const double c = log_frequency_integral([&](double w) { return gmw_freq_response(spec, w); },
                                          spec.peak_omega(), rel_tol);
  if (!(std::isfinite(c) && c > 0)) throw std::runtime_error("wavelet reconstruction constant diverged");
  return c;
}

}  // namespace ssq
