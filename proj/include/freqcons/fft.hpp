#pragma once

// Mixed-radix complex FFT for arbitrary lengths.
//
// Lengths whose prime factors are all <= kMaxDirectRadix run through a
// recursive decimation-in-time Cooley-Tukey pass (radix-2 butterflies are
// specialised, every other prime uses a generic O(p^2) butterfly). Lengths
// with a larger prime factor go through Bluestein's chirp-z algorithm on a
// power-of-two convolution.
//
// Both directions are unnormalised: forward uses e^{-i...}, inverse e^{+i...}.

#include <complex>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "freqcons/errors.hpp"

namespace freqcons::fft {

inline constexpr std::size_t kMaxDirectRadix = 61;

/// exp(-2*pi*i*k/n) with exact values at multiples of a quarter turn and
/// octant folding for the rest.
template <std::floating_point T>
std::complex<T> unit_root(std::uint64_t k, std::uint64_t n) {
  k %= n;
  // angle = (pi/2) * (q + r/n) with q = quarter index.
  const std::uint64_t scaled = 4 * k;
  const std::uint64_t q = scaled / n;
  const std::uint64_t r = scaled % n;
  T c;
  T s;
  if (r == 0) {
    c = 1;
    s = 0;
  } else if (2 * r <= n) {
    const T a = std::numbers::pi_v<T> / 2 * static_cast<T>(r) / static_cast<T>(n);
    c = std::cos(a);
    s = std::sin(a);
  } else {
    const T a = std::numbers::pi_v<T> / 2 * static_cast<T>(n - r) / static_cast<T>(n);
    c = std::sin(a);
    s = std::cos(a);
  }
  // Rotate (c, s) by q quarter turns.
  for (std::uint64_t i = 0; i < q; ++i) {
    const T t = c;
    c = -s;
    s = t;
  }
  return {c, -s};
}

template <std::floating_point T>
class BasicPlan {
 public:
  using complex_type = std::complex<T>;

  explicit BasicPlan(std::size_t n) : n_(n) {
    if (n == 0) {
      throw InvalidInput("FFT length must be positive");
    }
    twiddles_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      twiddles_[k] = unit_root<T>(k, n);
    }
    std::size_t rest = n;
    bool needs_chirp = false;
    for (std::size_t p = 2; rest > 1;) {
      if (p * p > rest) {
        p = rest;
      }
      if (rest % p == 0) {
        factors_.push_back(p);
        if (p > kMaxDirectRadix) {
          needs_chirp = true;
        }
        rest /= p;
      } else {
        ++p;
      }
    }
    if (needs_chirp) {
      init_chirp();
    }
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<complex_type> data) const { run(data); }

  void inverse(std::span<complex_type> data) const {
    for (auto& v : data) v = std::conj(v);
    run(data);
    for (auto& v : data) v = std::conj(v);
  }

 private:
  void run(std::span<complex_type> data) const {
    if (data.size() != n_) {
      throw InvalidInput("FFT buffer length " + std::to_string(data.size()) +
                         " does not match plan length " + std::to_string(n_));
    }
    if (n_ == 1) {
      return;
    }
    if (chirp_) {
      run_chirp(data);
      return;
    }
    std::vector<complex_type> input(data.begin(), data.end());
    std::vector<complex_type> scratch;
    work(data.data(), input.data(), 1, 0, scratch);
  }

  // Writes the DFT of in[0], in[stride], ... (n_/stride samples) into out.
  void work(complex_type* out, const complex_type* in, std::size_t stride, std::size_t stage,
            std::vector<complex_type>& scratch) const {
    const std::size_t p = factors_[stage];
    const std::size_t m = n_ / (stride * p);
    if (m == 1) {
      for (std::size_t j = 0; j < p; ++j) {
        out[j] = in[j * stride];
      }
    } else {
      for (std::size_t j = 0; j < p; ++j) {
        work(out + j * m, in + j * stride, stride * p, stage + 1, scratch);
      }
    }
    if (p == 2) {
      butterfly2(out, stride, m);
    } else {
      butterfly_generic(out, stride, p, m, scratch);
    }
  }

  void butterfly2(complex_type* out, std::size_t stride, std::size_t m) const {
    for (std::size_t k = 0; k < m; ++k) {
      const complex_type t = out[k + m] * twiddles_[k * stride];
      out[k + m] = out[k] - t;
      out[k] += t;
    }
  }

  void butterfly_generic(complex_type* out, std::size_t stride, std::size_t p, std::size_t m,
                         std::vector<complex_type>& scratch) const {
    scratch.resize(p);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t q = 0; q < p; ++q) {
        scratch[q] = out[k + q * m];
      }
      for (std::size_t q1 = 0; q1 < p; ++q1) {
        const std::size_t idx = k + q1 * m;
        const std::size_t step = (stride * idx) % n_;
        std::size_t tw = 0;
        complex_type acc = scratch[0];
        for (std::size_t q = 1; q < p; ++q) {
          tw += step;
          if (tw >= n_) tw -= n_;
          acc += scratch[q] * twiddles_[tw];
        }
        out[idx] = acc;
      }
    }
  }

  struct Chirp {
    std::size_t padded = 0;
    std::vector<complex_type> weights;         // exp(-i*pi*k^2/n)
    std::vector<complex_type> kernel_spectrum;  // FFT of the conjugate chirp
    std::unique_ptr<BasicPlan> plan;
  };

  void init_chirp() {
    auto chirp = std::make_shared<Chirp>();
    std::size_t padded = 1;
    while (padded < 2 * n_ - 1) padded <<= 1;
    chirp->padded = padded;
    chirp->plan = std::make_unique<BasicPlan>(padded);
    chirp->weights.resize(n_);
    const std::uint64_t period = 2 * static_cast<std::uint64_t>(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::uint64_t kk = (static_cast<std::uint64_t>(k) * k) % period;
      chirp->weights[k] = unit_root<T>(kk, period);
    }
    chirp->kernel_spectrum.assign(padded, complex_type{});
    for (std::size_t k = 0; k < n_; ++k) {
      const complex_type v = std::conj(chirp->weights[k]);
      chirp->kernel_spectrum[k] = v;
      if (k != 0) chirp->kernel_spectrum[padded - k] = v;
    }
    chirp->plan->forward(chirp->kernel_spectrum);
    chirp_ = std::move(chirp);
  }

  void run_chirp(std::span<complex_type> data) const {
    const Chirp& c = *chirp_;
    std::vector<complex_type> buf(c.padded, complex_type{});
    for (std::size_t k = 0; k < n_; ++k) {
      buf[k] = data[k] * c.weights[k];
    }
    c.plan->forward(buf);
    for (std::size_t k = 0; k < c.padded; ++k) {
      buf[k] *= c.kernel_spectrum[k];
    }
    c.plan->inverse(buf);
    const T scale = T(1) / static_cast<T>(c.padded);
    for (std::size_t k = 0; k < n_; ++k) {
      data[k] = buf[k] * scale * c.weights[k];
    }
  }

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<complex_type> twiddles_;
  std::shared_ptr<const Chirp> chirp_;
};

using Plan = BasicPlan<double>;

/// Per-thread plan cache; plans are immutable once built.
template <std::floating_point T = double>
const BasicPlan<T>& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<BasicPlan<T>>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, std::make_unique<BasicPlan<T>>(n)).first;
  }
  return *it->second;
}

}  // namespace freqcons::fft
