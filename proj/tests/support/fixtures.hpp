#pragma once

// Seeded frame-sequence fixtures written as PNG directories.

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "freqcons/image_io.hpp"
#include "support/oracles.hpp"

namespace freqcons::fixtures {

namespace fs = std::filesystem;

inline std::string frame_name(std::size_t index) {
  std::string n = std::to_string(index);
  return "frame_" + std::string(4 - std::min<std::size_t>(4, n.size()), '0') + n + ".png";
}

inline void write_sequence(const fs::path& dir, const std::vector<Frame>& frames) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < frames.size(); ++t) io::save_frame(dir / frame_name(t + 1), frames[t]);
}

inline Frame rgb(const FrameGrid& r, const FrameGrid& g, const FrameGrid& b) { return Frame({r, g, b}); }

/// Smooth seeded texture in [0.1, 0.9], periodic on the grid.
inline FrameGrid texture(oracle::Rng& rng, std::size_t rows, std::size_t cols) {
  FrameGrid g(rows, cols, 0.5);
  for (int k = 0; k < 6; ++k) {
    const double fu = rng.integer(0, 3);
    const double fv = rng.integer(0, 3);
    const double ph = rng.uniform(0, 2 * std::numbers::pi);
    const double amp = rng.uniform(0.02, 0.07);
    for (std::size_t y = 0; y < rows; ++y)
      for (std::size_t x = 0; x < cols; ++x)
        g(y, x) += amp * std::cos(2 * std::numbers::pi * (fu * y / rows + fv * x / cols) + ph);
  }
  for (auto& v : g.values()) v = std::clamp(v, 0.1, 0.9);
  return g;
}

/// Cyclic translation: out(y, x) = in(y - dy, x - dx).
inline FrameGrid roll(const FrameGrid& in, long dx, long dy) {
  const long M = static_cast<long>(in.rows());
  const long N = static_cast<long>(in.cols());
  FrameGrid out(in.rows(), in.cols());
  for (long y = 0; y < M; ++y)
    for (long x = 0; x < N; ++x)
      out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          in(static_cast<std::size_t>(((y - dy) % M + M) % M), static_cast<std::size_t>(((x - dx) % N + N) % N));
  return out;
}

/// Three identical textured RGB frames, 24x32.
inline std::vector<Frame> static_clip() {
  oracle::Rng rng(11);
  const auto r = texture(rng, 24, 32);
  const auto g = texture(rng, 24, 32);
  const auto b = texture(rng, 24, 32);
  return std::vector<Frame>(3, rgb(r, g, b));
}

/// An 8x8 orange square on a dark background moving 2 px right per frame;
/// 8 RGB frames of 32x32. `jitter` adds a vertical wobble and a tint change.
inline std::vector<Frame> moving_square(bool jitter) {
  static constexpr int kWobble[] = {0, 1, 0, -1, 0, 1, 0, -1};
  std::vector<Frame> frames;
  for (int t = 0; t < 8; ++t) {
    FrameGrid r(32, 32, 0.1), g(32, 32, 0.1), b(32, 32, 0.15);
    const int x0 = 4 + 2 * t;
    const int y0 = 12 + (jitter ? kWobble[t] : 0);
    const double red = jitter && t % 2 == 1 ? 0.8 : 0.9;
    for (int y = y0; y < y0 + 8; ++y)
      for (int x = x0; x < x0 + 8; ++x) {
        r(y, x) = red;
        g(y, x) = 0.6;
        b(y, x) = 0.2;
      }
    frames.push_back(rgb(r, g, b));
  }
  return frames;
}

/// A texture translating one pixel right per frame (6 RGB frames, 32x32);
/// with `noisy`, i.i.d. N(0, 0.05^2) noise is added per pixel and channel.
inline std::vector<Frame> textured_translation(bool noisy, std::size_t frames = 6, std::size_t size = 32,
                                               std::uint64_t noise_seed = 77) {
  oracle::Rng rng(23);
  const auto r = texture(rng, size, size);
  const auto g = texture(rng, size, size);
  const auto b = texture(rng, size, size);
  oracle::Rng noise(noise_seed);
  std::vector<Frame> out;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<FrameGrid> chans{roll(r, static_cast<long>(t), 0), roll(g, static_cast<long>(t), 0),
                                 roll(b, static_cast<long>(t), 0)};
    if (noisy) {
      for (auto& c : chans)
        for (auto& v : c.values()) v = std::clamp(v + 0.05 * noise.normal(), 0.0, 1.0);
    }
    out.push_back(Frame(chans));
  }
  return out;
}

struct FixtureSet {
  std::string name;
  std::vector<Frame> ref;
  std::vector<Frame> syn;
};

inline std::vector<FixtureSet> golden_fixtures() {
  return {{"static_clip", static_clip(), static_clip()},
          {"moving_square", moving_square(false), moving_square(true)},
          {"noisy_synthetic", textured_translation(false), textured_translation(true)}};
}

}  // namespace freqcons::fixtures
