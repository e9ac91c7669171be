#pragma once

// Thin FFTW wrapper. Plans are created once per (size, direction) under a
// mutex with FFTW_UNALIGNED, then executed through the thread-safe new-array
// interface, so the same plan (and therefore the same codelets and rounding)
// is used regardless of which thread or buffer runs it.

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "ssqlab/common.hpp"

namespace ssq::fft {

enum class Direction { forward, backward };

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, Direction dir) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, dir);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<fftw_complex> in(n), out(n);
    int sign = dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in.data(), out.data(), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw std::runtime_error("fftw plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, Direction>, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalized DFT of `in` into `out` (same length). Backward is not scaled by 1/n.
inline void transform(std::span<const cplx> in, std::span<cplx> out, Direction dir) {
  if (in.size() != out.size()) throw std::invalid_argument("fft: size mismatch");
  if (in.empty()) return;
  fftw_plan plan = detail::PlanCache::instance().get(in.size(), dir);
  // fftw_execute_dft takes non-const input; out-of-place plans do not modify it.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, src, dst);
}

inline std::vector<cplx> forward(std::span<const cplx> in) {
  std::vector<cplx> out(in.size());
  transform(in, out, Direction::forward);
  return out;
}

/// Inverse DFT including the 1/n factor.
inline std::vector<cplx> inverse(std::span<const cplx> in) {
  std::vector<cplx> out(in.size());
  transform(in, out, Direction::backward);
  const double scale = 1.0 / static_cast<double>(in.size());
  for (auto& v : out) v *= scale;
  return out;
}

/// Signed frequency of DFT bin k in cycles/sample, in [-1/2, 1/2).
inline double bin_frequency(std::size_t k, std::size_t n) {
  auto kk = static_cast<double>(k);
  auto nn = static_cast<double>(n);
  return (2 * k < n ? kk : kk - nn) / nn;
}

}  // namespace ssq::fft
