#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "freqcons/errors.hpp"
#include "freqcons/fft.hpp"
#include "freqcons/grid.hpp"

namespace freqcons {

using ComplexGrid = Grid<std::complex<double>>;

/// Below this amplitude a frequency entry has no defined phase; it reads as 0.
inline constexpr double kPhaseAmplitudeFloor = 1e-12;

/// 2-D spectrum F(u,v) = R(u,v) + i I(u,v) plus its index layout.
struct Spectrum {
  ComplexGrid values;
  Layout layout = Layout::Unshifted;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
  const std::complex<double>& operator()(std::size_t u, std::size_t v) const noexcept {
    return values(u, v);
  }
};

namespace detail {

template <bool Inverse>
void transform_2d(ComplexGrid& grid) {
  const std::size_t rows = grid.rows();
  const std::size_t cols = grid.cols();
  const auto& row_plan = fft::plan_for(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if constexpr (Inverse) {
      row_plan.inverse(grid.row(r));
    } else {
      row_plan.forward(grid.row(r));
    }
  }
  if (rows == 1) return;
  const auto& col_plan = fft::plan_for(rows);
  std::vector<std::complex<double>> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = grid(r, c);
    if constexpr (Inverse) {
      col_plan.inverse(column);
    } else {
      col_plan.forward(column);
    }
    for (std::size_t r = 0; r < rows; ++r) grid(r, c) = column[r];
  }
}

}  // namespace detail

/// Unnormalised forward 2-D DFT of a complex grid.
inline ComplexGrid fft2(ComplexGrid grid) {
  detail::transform_2d<false>(grid);
  return grid;
}

/// Inverse 2-D DFT of a complex grid, including the 1/(MN) factor.
inline ComplexGrid ifft2(ComplexGrid grid) {
  detail::transform_2d<true>(grid);
  const double scale = 1.0 / static_cast<double>(grid.size());
  for (auto& v : grid.values()) v *= scale;
  return grid;
}

/// Forces F(u,v) = conj(F(-u,-v)) exactly, which a real input guarantees
/// mathematically. Self-conjugate bins become exactly real, so their phase
/// is exactly 0 or pi instead of flickering around the branch cut.
inline void enforce_hermitian(ComplexGrid& grid) {
  const std::size_t rows = grid.rows();
  const std::size_t cols = grid.cols();
  for (std::size_t u = 0; u < rows; ++u) {
    const std::size_t nu = (rows - u) % rows;
    for (std::size_t v = 0; v < cols; ++v) {
      const std::size_t nv = (cols - v) % cols;
      const std::size_t here = u * cols + v;
      const std::size_t mirror = nu * cols + nv;
      if (mirror < here) continue;
      const auto avg = 0.5 * (grid[here] + std::conj(grid[mirror]));
      grid[here] = avg;
      grid[mirror] = std::conj(avg);
    }
  }
}

/// F(u,v) = sum_x sum_y f(x,y) exp(-i 2 pi (ux/M + vy/N)), no normalisation.
inline Spectrum dft2(const FrameGrid& frame) {
  if (frame.rows() == 0 || frame.cols() == 0) {
    throw InvalidInput("dft2: frame has a zero dimension");
  }
  ComplexGrid grid(frame.rows(), frame.cols());
  for (std::size_t i = 0; i < frame.size(); ++i) grid[i] = frame[i];
  detail::transform_2d<false>(grid);
  enforce_hermitian(grid);
  return {std::move(grid), Layout::Unshifted};
}

/// Real part of the inverse transform; the imaginary residue is dropped.
inline FrameGrid idft2(const Spectrum& spectrum) {
  if (spectrum.layout != Layout::Unshifted) {
    throw InvalidState("idft2 expects an unshifted spectrum");
  }
  if (spectrum.rows() == 0 || spectrum.cols() == 0) {
    throw InvalidInput("idft2: spectrum has a zero dimension");
  }
  const ComplexGrid back = ifft2(spectrum.values);
  FrameGrid out(back.rows(), back.cols());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = back[i].real();
  return out;
}

inline double amplitude_of(const std::complex<double>& z) noexcept { return std::abs(z); }

/// Four-quadrant angle in (-pi, pi]; 0 when |z| < kPhaseAmplitudeFloor.
inline double phase_of(const std::complex<double>& z) noexcept {
  if (std::abs(z) < kPhaseAmplitudeFloor) return 0.0;
  return std::atan2(z.imag(), z.real());
}

inline RealGrid amplitude(const Spectrum& spectrum) {
  RealGrid out(spectrum.rows(), spectrum.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = amplitude_of(spectrum.values[i]);
  return out;
}

inline RealGrid phase(const Spectrum& spectrum) {
  RealGrid out(spectrum.rows(), spectrum.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = phase_of(spectrum.values[i]);
  return out;
}

/// Cyclic roll that moves index (0,0) to (floor(M/2), floor(N/2)).
template <typename T>
Grid<T> shift_grid(const Grid<T>& grid) {
  Grid<T> out(grid.rows(), grid.cols());
  const std::size_t dr = grid.rows() / 2;
  const std::size_t dc = grid.cols() / 2;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    const std::size_t rr = (r + dr) % grid.rows();
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      out(rr, (c + dc) % grid.cols()) = grid(r, c);
    }
  }
  return out;
}

inline Spectrum shift_spectrum(const Spectrum& spectrum) {
  if (spectrum.layout == Layout::Shifted) {
    throw InvalidState("spectrum is already shifted");
  }
  return {shift_grid(spectrum.values), Layout::Shifted};
}

/// Real 2-D FFT: the first floor(N/2)+1 columns of the full spectrum.
inline ComplexGrid rfft2(const RealGrid& input) {
  ComplexGrid grid(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.size(); ++i) grid[i] = input[i];
  detail::transform_2d<false>(grid);
  const std::size_t half = input.cols() / 2 + 1;
  ComplexGrid out(input.rows(), half);
  for (std::size_t r = 0; r < input.rows(); ++r) {
    for (std::size_t c = 0; c < half; ++c) out(r, c) = grid(r, c);
  }
  return out;
}

/// Inverse of rfft2 for an output width `cols`. Missing columns come from
/// conjugate symmetry and the real part of the inverse is kept, which gives
/// the same result as a c2r transform for inputs that are not exactly
/// symmetric.
inline RealGrid irfft2(const ComplexGrid& half_spectrum, std::size_t cols) {
  const std::size_t rows = half_spectrum.rows();
  if (cols == 0 || half_spectrum.cols() != cols / 2 + 1) {
    throw InvalidInput("irfft2: half spectrum has " + std::to_string(half_spectrum.cols()) +
                       " columns, width " + std::to_string(cols) + " needs " + std::to_string(cols / 2 + 1));
  }
  ComplexGrid full(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < half_spectrum.cols(); ++c) full(r, c) = half_spectrum(r, c);
    for (std::size_t c = half_spectrum.cols(); c < cols; ++c) {
      full(r, c) = std::conj(half_spectrum((rows - r) % rows, cols - c));
    }
  }
  detail::transform_2d<true>(full);
  const double scale = 1.0 / static_cast<double>(full.size());
  RealGrid out(rows, cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full[i].real() * scale;
  return out;
}

/// log(1 + a) elementwise.
inline RealGrid log_amplitude(const RealGrid& amplitudes) {
  RealGrid out(amplitudes.rows(), amplitudes.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (amplitudes[i] < 0.0) {
      throw InvalidInput("log_amplitude: negative entry at index " + std::to_string(i));
    }
    out[i] = std::log1p(amplitudes[i]);
  }
  return out;
}

}  // namespace freqcons
