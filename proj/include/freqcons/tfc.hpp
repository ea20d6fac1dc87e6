#pragma once

// Temporal Frequency Change between adjacent frames: the per-frequency
// absolute change of the amplitude spectrum (TAC) and of the phase spectrum
// (TPC), and their means over a whole clip.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "freqcons/binary_io.hpp"
#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"
#include "freqcons/image_io.hpp"
#include "freqcons/parallel.hpp"
#include "freqcons/spectral.hpp"

namespace freqcons {

/// How a phase difference is measured. Raw is the literal |p1 - p0| in
/// [0, 2pi); Wrapped is the angular distance in [0, pi].
enum class PhaseMode { Raw, Wrapped };

inline const char* to_string(PhaseMode mode) noexcept {
  return mode == PhaseMode::Raw ? "raw" : "wrapped";
}

inline PhaseMode parse_phase_mode(const std::string& text) {
  if (text == "raw") return PhaseMode::Raw;
  if (text == "wrapped") return PhaseMode::Wrapped;
  throw InvalidInput("phase mode must be 'raw' or 'wrapped', got '" + text + "'");
}

inline double phase_distance(double p1, double p0, PhaseMode mode) noexcept {
  const double d = std::abs(p1 - p0);
  if (mode == PhaseMode::Raw) return d;
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

struct TfcPair {
  RealGrid tac;
  RealGrid tpc;
  Layout layout = Layout::Unshifted;
};

/// Amplitude and phase spectra of every channel of one frame.
struct FrameSpectra {
  std::vector<RealGrid> amplitude;
  std::vector<RealGrid> phase;
};

inline FrameSpectra frame_spectra(const Frame& frame) {
  FrameSpectra out;
  for (const auto& ch : frame.channels()) {
    const Spectrum s = dft2(ch);
    out.amplitude.push_back(freqcons::amplitude(s));
    out.phase.push_back(freqcons::phase(s));
  }
  return out;
}

/// Channel-averaged TAC/TPC from precomputed spectra.
inline TfcPair tfc_from_spectra(const FrameSpectra& prev, const FrameSpectra& curr, PhaseMode mode) {
  const std::size_t channels = curr.amplitude.size();
  const auto& shape = curr.amplitude.front();
  TfcPair out{RealGrid(shape.rows(), shape.cols(), 0.0), RealGrid(shape.rows(), shape.cols(), 0.0),
              Layout::Unshifted};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
      out.tac[i] += std::abs(curr.amplitude[c][i] - prev.amplitude[c][i]);
      out.tpc[i] += phase_distance(curr.phase[c][i], prev.phase[c][i], mode);
    }
  }
  if (channels > 1) {
    const double inv = 1.0 / static_cast<double>(channels);
    for (auto& v : out.tac.values()) v *= inv;
    for (auto& v : out.tpc.values()) v *= inv;
  }
  return out;
}

inline TfcPair tfc_pair(const Frame& prev, const Frame& curr, PhaseMode mode = PhaseMode::Wrapped) {
  require_same_shape(prev, curr, "tfc_pair");
  return tfc_from_spectra(frame_spectra(prev), frame_spectra(curr), mode);
}

/// An ordered clip of at least two frames of identical shape.
class VideoSequence {
 public:
  explicit VideoSequence(std::vector<Frame> frames, double frame_rate = 0.0)
      : frames_(std::move(frames)), frame_rate_(frame_rate) {
    if (frames_.size() < 2) {
      throw InvalidInput("a video sequence needs at least 2 frames, got " + std::to_string(frames_.size()));
    }
    for (std::size_t t = 1; t < frames_.size(); ++t) {
      if (!frames_[t].same_shape(frames_.front())) {
        throw InvalidInput("frame " + std::to_string(t) + " differs in shape from frame 0");
      }
    }
  }

  std::size_t length() const noexcept { return frames_.size(); }
  std::size_t transitions() const noexcept { return frames_.size() - 1; }
  const Frame& frame(std::size_t t) const { return frames_.at(t); }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  double frame_rate() const noexcept { return frame_rate_; }

 private:
  std::vector<Frame> frames_;
  double frame_rate_;
};

struct MeanTfc {
  RealGrid mean_tac;
  RealGrid mean_tpc;
};

/// Per-transition TFC grids, index t-1 holding the change into frame t.
inline std::vector<TfcPair> tfc_sequence(const VideoSequence& video, PhaseMode mode, std::size_t threads = 1) {
  std::vector<FrameSpectra> spectra(video.length());
  parallel_for(video.length(), threads, [&](std::size_t t) { spectra[t] = frame_spectra(video.frame(t)); });
  std::vector<TfcPair> pairs(video.transitions());
  parallel_for(pairs.size(), threads,
               [&](std::size_t i) { pairs[i] = tfc_from_spectra(spectra[i], spectra[i + 1], mode); });
  return pairs;
}

/// Mean over all T-1 transitions, accumulated in index order.
inline MeanTfc mean_tfc(const VideoSequence& video, PhaseMode mode = PhaseMode::Wrapped,
                        std::size_t threads = 1) {
  const auto pairs = tfc_sequence(video, mode, threads);
  MeanTfc out{RealGrid(video.frame(0).rows(), video.frame(0).cols(), 0.0),
              RealGrid(video.frame(0).rows(), video.frame(0).cols(), 0.0)};
  for (const auto& p : pairs) {
    for (std::size_t i = 0; i < out.mean_tac.size(); ++i) {
      out.mean_tac[i] += p.tac[i];
      out.mean_tpc[i] += p.tpc[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (auto& v : out.mean_tac.values()) v *= inv;
  for (auto& v : out.mean_tpc.values()) v *= inv;
  return out;
}

struct BandEnergy {
  double low = 0.0;
  double high = 0.0;
  double total() const noexcept { return low + high; }
};

/// Distance of an unshifted index from DC after centring, in index units.
inline double radial_distance(std::size_t u, std::size_t v, std::size_t rows, std::size_t cols) noexcept {
  const double du = static_cast<double>((u + rows / 2) % rows) - static_cast<double>(rows / 2);
  const double dv = static_cast<double>((v + cols / 2) % cols) - static_cast<double>(cols / 2);
  return std::hypot(du, dv);
}

/// Splits the sum of an unshifted grid into a low band (radial distance from
/// DC at most fraction * R_max, R_max being the largest distance on the grid)
/// and the remaining high band.
inline BandEnergy band_energy(const RealGrid& grid, double band_fraction) {
  if (!(band_fraction > 0.0 && band_fraction <= 1.0)) {
    throw InvalidInput("band fraction must lie in (0, 1], got " + std::to_string(band_fraction));
  }
  const std::size_t rows = grid.rows();
  const std::size_t cols = grid.cols();
  const double r_max = std::hypot(static_cast<double>(rows / 2), static_cast<double>(cols / 2));
  const double cutoff = band_fraction * r_max;
  BandEnergy out;
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      if (radial_distance(u, v, rows, cols) <= cutoff) {
        out.low += grid(u, v);
      } else {
        out.high += grid(u, v);
      }
    }
  }
  return out;
}

/// 8-bit rendering: unshifted grids are centred, optional log(1+x), then
/// per-image min-max scaling to 0..255. A constant grid renders as all zeros.
inline io::Image8 render_heatmap(const RealGrid& grid, Layout layout, bool log_scale) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < 0.0) {
      throw InvalidInput("heatmap values must be finite and nonnegative (index " + std::to_string(i) + ")");
    }
  }
  RealGrid view = layout == Layout::Unshifted ? shift_grid(grid) : grid;
  if (log_scale) view = log_amplitude(view);
  const auto [lo_it, hi_it] = std::minmax_element(view.values().begin(), view.values().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  io::Image8 img{grid.cols(), grid.rows(), 1, std::vector<std::uint8_t>(grid.size(), 0)};
  if (hi > lo) {
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < view.size(); ++i) {
      img.pixels[i] = static_cast<std::uint8_t>(std::lround((view[i] - lo) * scale));
    }
  }
  return img;
}

inline void export_heatmap(const RealGrid& grid, Layout layout, const std::filesystem::path& path,
                           bool log_scale) {
  io::write_image(path, render_heatmap(grid, layout, log_scale));
}

// Raw grid dump: "TFCG", u32 rows, u32 cols, u32 layout, then rows*cols
// little-endian float64 values, row-major.

inline io::Bytes encode_grid_dump(const RealGrid& grid, Layout layout) {
  io::ByteWriter w;
  w.bytes("TFCG");
  w.u32(static_cast<std::uint32_t>(grid.rows()));
  w.u32(static_cast<std::uint32_t>(grid.cols()));
  w.u32(static_cast<std::uint32_t>(layout));
  for (double v : grid.values()) w.f64(v);
  return w.take();
}

struct GridDump {
  RealGrid grid;
  Layout layout = Layout::Unshifted;
};

inline GridDump decode_grid_dump(const io::Bytes& bytes, const std::string& context = "TFCG") {
  io::ByteReader r(bytes, context);
  r.expect_magic("TFCG");
  const std::size_t dims_at = r.offset();
  const std::uint32_t rows = r.u32("rows");
  const std::uint32_t cols = r.u32("cols");
  const std::size_t layout_at = r.offset();
  const std::uint32_t layout = r.u32("layout");
  if (rows == 0 || cols == 0) r.fail("zero grid dimension", dims_at);
  if (layout > 1) r.fail("unknown layout code " + std::to_string(layout), layout_at);
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (count > r.remaining() / 8) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, dimensions need " +
               std::to_string(count * 8),
           r.offset());
  }
  std::vector<double> values(count);
  for (auto& v : values) v = r.f64("value");
  r.expect_end();
  return {RealGrid(rows, cols, std::move(values)), static_cast<Layout>(layout)};
}

inline void write_grid_dump(const std::filesystem::path& path, const RealGrid& grid, Layout layout) {
  io::write_file(path, encode_grid_dump(grid, layout));
}

inline GridDump read_grid_dump(const std::filesystem::path& path) {
  return decode_grid_dump(io::read_file(path), path.string());
}

}  // namespace freqcons
