#pragma once

// Fast Fourier Convolution block, inference only.
//
// The input channels are split into a local part X^l and a global part X^g
// and recombined as
//
//   Y^l = f_l(X^l) + f_{g->l}(X^g)
//   Y^g = f_g(X^g) + f_{l->g}(X^l)
//
// where f_l, f_{g->l}, f_{l->g} are 3x3 zero-padded convolutions and f_g is
// the spectral transform: 1x1 conv, real 2-D FFT, 1x1 conv over the stacked
// real/imaginary channels, inverse real FFT, 1x1 conv.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freqcons/binary_io.hpp"
#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"
#include "freqcons/parallel.hpp"
#include "freqcons/spectral.hpp"

namespace freqcons::ffc {

/// C x H x W real values, channel-major. A zero channel count is allowed for
/// the empty half of a split.
class FeatureTensor {
 public:
  FeatureTensor() = default;

  FeatureTensor(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {
    check_dims();
  }

  FeatureTensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> values)
      : c_(channels), h_(height), w_(width), data_(std::move(values)) {
    check_dims();
    if (data_.size() != c_ * h_ * w_) {
      throw InvalidInput("tensor expects " + std::to_string(c_ * h_ * w_) + " values, got " +
                         std::to_string(data_.size()));
    }
  }

  std::size_t channels() const noexcept { return c_; }
  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t plane() const noexcept { return h_ * w_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept { return data_[(c * h_ + y) * w_ + x]; }
  double operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * h_ + y) * w_ + x];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() & noexcept { return data_; }
  std::span<const double> values() const& noexcept { return data_; }
  std::span<const double> values() && = delete;

  std::span<double> channel(std::size_t c) noexcept { return {data_.data() + c * plane(), plane()}; }
  std::span<const double> channel(std::size_t c) const noexcept { return {data_.data() + c * plane(), plane()}; }

  RealGrid channel_grid(std::size_t c) const {
    const auto ch = channel(c);
    return RealGrid(h_, w_, std::vector<double>(ch.begin(), ch.end()));
  }

  bool same_shape(const FeatureTensor& o) const noexcept { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  std::string shape_string() const {
    return std::to_string(c_) + "x" + std::to_string(h_) + "x" + std::to_string(w_);
  }

  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

 private:
  void check_dims() const {
    if (h_ == 0 || w_ == 0) {
      throw InvalidInput("tensor height and width must be positive, got " + shape_string());
    }
  }

  std::size_t c_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(const FeatureTensor& t) noexcept {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

/// Number of global channels: round(ratio * C) with halves rounded up.
inline std::size_t global_channels(std::size_t channels, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvalidInput("global ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  return std::min(channels, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(channels) + 0.5)));
}

inline FeatureTensor slice_channels(const FeatureTensor& x, std::size_t first, std::size_t count) {
  FeatureTensor out(count, x.height(), x.width());
  std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(first * x.plane()), count * x.plane(),
              out.values().begin());
  return out;
}

/// Local part first, global part last.
inline std::pair<FeatureTensor, FeatureTensor> split_channels(const FeatureTensor& x, double ratio) {
  const std::size_t g = global_channels(x.channels(), ratio);
  const std::size_t l = x.channels() - g;
  return {slice_channels(x, 0, l), slice_channels(x, l, g)};
}

inline FeatureTensor concat_channels(const FeatureTensor& a, const FeatureTensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidInput("concat: spatial sizes differ (" + a.shape_string() + " vs " + b.shape_string() + ")");
  }
  std::vector<double> values(a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  return FeatureTensor(a.channels() + b.channels(), a.height(), a.width(), std::move(values));
}

/// Square-kernel convolution with zero padding k/2 and a per-output bias.
/// weight is [out][in][k][k] row-major.
struct Conv2d {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t k = 1;
  std::vector<double> weight;
  std::vector<double> bias;

  static Conv2d zeros(std::size_t out, std::size_t in, std::size_t k) {
    return {out, in, k, std::vector<double>(out * in * k * k, 0.0), std::vector<double>(out, 0.0)};
  }

  /// Passes channel i through to output i (requires out == in).
  static Conv2d identity(std::size_t channels, std::size_t k) {
    Conv2d c = zeros(channels, channels, k);
    for (std::size_t i = 0; i < channels; ++i) c.w(i, i, k / 2, k / 2) = 1.0;
    return c;
  }

  double& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) noexcept {
    return weight[((o * in + i) * k + ky) * k + kx];
  }
  double w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const noexcept {
    return weight[((o * in + i) * k + ky) * k + kx];
  }

  FeatureTensor apply(const FeatureTensor& x, std::size_t stride, std::size_t threads) const {
    if (x.channels() != in) {
      throw InvalidInput("conv expects " + std::to_string(in) + " input channels, got " +
                         std::to_string(x.channels()));
    }
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(x.height());
    const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(x.width());
    const std::size_t ho = (x.height() + 2 * (k / 2) - k) / stride + 1;
    const std::size_t wo = (x.width() + 2 * (k / 2) - k) / stride + 1;
    FeatureTensor y(out, ho, wo);
    parallel_for(out, threads, [&](std::size_t o) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          double acc = bias[o];
          for (std::size_t i = 0; i < in; ++i) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
              if (sy < 0 || sy >= H) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                if (sx < 0 || sx >= W) continue;
                acc += w(o, i, ky, kx) * x(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
              }
            }
          }
          y(o, oy, ox) = acc;
        }
      }
    });
    return y;
  }
};

/// Per-channel y = scale * x + shift with stored statistics folded in.
struct Affine {
  std::vector<double> scale;
  std::vector<double> shift;

  static Affine identity(std::size_t channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
  }

  void apply(FeatureTensor& x) const {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      for (double& v : x.channel(c)) v = scale[c] * v + shift[c];
    }
  }
};

inline void relu(FeatureTensor& x) noexcept {
  for (double& v : x.values()) v = std::max(v, 0.0);
}

struct BlockFlags {
  bool activation = false;
  bool normalization = false;
  bool residual = false;

  std::uint32_t bits() const noexcept {
    return static_cast<std::uint32_t>(activation) | static_cast<std::uint32_t>(normalization) << 1 |
           static_cast<std::uint32_t>(residual) << 2;
  }

  static BlockFlags from_bits(std::uint32_t b) { return {(b & 1u) != 0, (b & 2u) != 0, (b & 4u) != 0}; }
};

/// f_g. `hidden` channels between the pre and post 1x1 convolutions; the
/// frequency-domain convolution acts on 2*hidden channels where channel 2c
/// holds Re and 2c+1 holds Im of hidden channel c.
struct SpectralWeights {
  Conv2d pre;
  Affine pre_norm;
  Conv2d fu;
  Affine fu_norm;
  Conv2d post;

  std::size_t hidden() const noexcept { return pre.out; }

  static SpectralWeights zeros(std::size_t in, std::size_t out, std::size_t hidden) {
    return {Conv2d::zeros(hidden, in, 1), Affine::identity(hidden), Conv2d::zeros(2 * hidden, 2 * hidden, 1),
            Affine::identity(2 * hidden), Conv2d::zeros(out, hidden, 1)};
  }

  static SpectralWeights identity(std::size_t channels) {
    return {Conv2d::identity(channels, 1), Affine::identity(channels), Conv2d::identity(2 * channels, 1),
            Affine::identity(2 * channels), Conv2d::identity(channels, 1)};
  }
};

inline FeatureTensor spectral_transform(const FeatureTensor& xg, const SpectralWeights& sw, BlockFlags flags,
                                        std::size_t threads = 1) {
  FeatureTensor h = sw.pre.apply(xg, 1, threads);
  if (flags.normalization) sw.pre_norm.apply(h);
  if (flags.activation) relu(h);

  const std::size_t H = xg.height();
  const std::size_t W = xg.width();
  const std::size_t half = W / 2 + 1;
  const std::size_t hidden = h.channels();
  FeatureTensor stacked(2 * hidden, H, half);
  parallel_for(hidden, threads, [&](std::size_t c) {
    const ComplexGrid spec = rfft2(h.channel_grid(c));
    for (std::size_t i = 0; i < spec.size(); ++i) {
      stacked.channel(2 * c)[i] = spec[i].real();
      stacked.channel(2 * c + 1)[i] = spec[i].imag();
    }
  });

  FeatureTensor freq = sw.fu.apply(stacked, 1, threads);
  if (flags.normalization) sw.fu_norm.apply(freq);
  if (flags.activation) relu(freq);

  FeatureTensor back(hidden, H, W);
  parallel_for(hidden, threads, [&](std::size_t c) {
    ComplexGrid spec(H, half);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      spec[i] = {freq.channel(2 * c)[i], freq.channel(2 * c + 1)[i]};
    }
    const RealGrid spatial = irfft2(spec, W);
    std::copy(spatial.values().begin(), spatial.values().end(), back.channel(c).begin());
  });
  return sw.post.apply(back, 1, threads);
}

enum class BlockKind : std::uint32_t { Same = 0, Down = 1, Up = 2 };

inline const char* to_string(BlockKind kind) noexcept {
  switch (kind) {
    case BlockKind::Down:
      return "down";
    case BlockKind::Up:
      return "up";
    default:
      return "same";
  }
}

/// One FFC block. Branch operators exist only when both of their endpoint
/// channel groups are nonempty.
struct FfcBlock {
  BlockKind kind = BlockKind::Same;
  double global_ratio = 0.5;
  BlockFlags flags;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::optional<Conv2d> l2l;
  std::optional<Conv2d> g2l;
  std::optional<Conv2d> l2g;
  std::optional<SpectralWeights> g2g;
  Affine norm_l;
  Affine norm_g;

  std::size_t in_global() const { return global_channels(in_channels, global_ratio); }
  std::size_t in_local() const { return in_channels - in_global(); }
  std::size_t out_global() const { return global_channels(out_channels, global_ratio); }
  std::size_t out_local() const { return out_channels - out_global(); }

  /// All operators present with zero weights and identity normalisation.
  static FfcBlock zeros(std::size_t in, std::size_t out, double ratio, std::size_t hidden = 0) {
    FfcBlock b;
    b.global_ratio = ratio;
    b.in_channels = in;
    b.out_channels = out;
    const std::size_t il = b.in_local(), ig = b.in_global(), ol = b.out_local(), og = b.out_global();
    if (il && ol) b.l2l = Conv2d::zeros(ol, il, 3);
    if (ig && ol) b.g2l = Conv2d::zeros(ol, ig, 3);
    if (il && og) b.l2g = Conv2d::zeros(og, il, 3);
    if (ig && og) b.g2g = SpectralWeights::zeros(ig, og, hidden ? hidden : og);
    b.norm_l = Affine::identity(ol);
    b.norm_g = Affine::identity(og);
    return b;
  }

  /// Output equals input: centre-tap local kernel, identity spectral path.
  static FfcBlock identity(std::size_t channels, double ratio) {
    FfcBlock b = zeros(channels, channels, ratio);
    if (b.l2l) b.l2l = Conv2d::identity(b.in_local(), 3);
    if (b.g2g) b.g2g = SpectralWeights::identity(b.in_global());
    return b;
  }

  void validate(std::size_t index) const;
};

namespace detail {

[[noreturn]] inline void block_error(std::size_t index, const std::string& message) {
  throw InvalidInput("block " + std::to_string(index) + ": " + message);
}

inline void check_conv(std::size_t index, const char* name, const std::optional<Conv2d>& conv, std::size_t out,
                       std::size_t in, std::size_t k) {
  const bool wanted = out > 0 && in > 0;
  if (wanted != conv.has_value()) {
    block_error(index, std::string(name) + (wanted ? " is missing" : " must be absent for an empty branch"));
  }
  if (!conv) return;
  if (conv->out != out || conv->in != in || conv->k != k || conv->weight.size() != out * in * k * k ||
      conv->bias.size() != out) {
    block_error(index, std::string(name) + " expected " + std::to_string(out) + "x" + std::to_string(in) + "x" +
                           std::to_string(k) + "x" + std::to_string(k) + ", got " + std::to_string(conv->out) +
                           "x" + std::to_string(conv->in) + "x" + std::to_string(conv->k) + "x" +
                           std::to_string(conv->k));
  }
}

inline void check_conv(std::size_t index, const char* name, const Conv2d& conv, std::size_t out, std::size_t in,
                       std::size_t k) {
  check_conv(index, name, std::optional<Conv2d>(conv), out, in, k);
}

inline void check_affine(std::size_t index, const char* name, const Affine& a, std::size_t channels) {
  if (a.scale.size() != channels || a.shift.size() != channels) {
    block_error(index, std::string(name) + " expects " + std::to_string(channels) + " channels");
  }
}

}  // namespace detail

inline void FfcBlock::validate(std::size_t index) const {
  if (!(global_ratio >= 0.0 && global_ratio <= 1.0)) {
    detail::block_error(index, "global ratio " + std::to_string(global_ratio) + " outside [0, 1]");
  }
  if (in_channels == 0 || out_channels == 0) detail::block_error(index, "channel counts must be positive");
  if (flags.residual && (kind != BlockKind::Same || in_channels != out_channels)) {
    detail::block_error(index, "residual needs a same-size block with equal channel counts");
  }
  detail::check_conv(index, "l2l", l2l, out_local(), in_local(), 3);
  detail::check_conv(index, "g2l", g2l, out_local(), in_global(), 3);
  detail::check_conv(index, "l2g", l2g, out_global(), in_local(), 3);
  const bool wanted = in_global() > 0 && out_global() > 0;
  if (wanted != g2g.has_value()) {
    detail::block_error(index, wanted ? "g2g is missing" : "g2g must be absent for an empty branch");
  }
  if (g2g) {
    const std::size_t hd = g2g->hidden();
    if (hd == 0) detail::block_error(index, "g2g hidden width must be positive");
    detail::check_conv(index, "g2g.pre", g2g->pre, hd, in_global(), 1);
    detail::check_affine(index, "g2g.pre_norm", g2g->pre_norm, hd);
    detail::check_conv(index, "g2g.fu", g2g->fu, 2 * hd, 2 * hd, 1);
    detail::check_affine(index, "g2g.fu_norm", g2g->fu_norm, 2 * hd);
    detail::check_conv(index, "g2g.post", g2g->post, out_global(), hd, 1);
  }
  detail::check_affine(index, "norm_l", norm_l, out_local());
  detail::check_affine(index, "norm_g", norm_g, out_global());
}

inline FeatureTensor upsample_nearest2(const FeatureTensor& x) {
  FeatureTensor out(x.channels(), 2 * x.height(), 2 * x.width());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t xx = 0; xx < out.width(); ++xx) out(c, y, xx) = x(c, y / 2, xx / 2);
    }
  }
  return out;
}

inline FeatureTensor avg_pool2(const FeatureTensor& x) {
  FeatureTensor out(x.channels(), x.height() / 2, x.width() / 2);
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t xx = 0; xx < out.width(); ++xx) {
        out(c, y, xx) = 0.25 * (x(c, 2 * y, 2 * xx) + x(c, 2 * y, 2 * xx + 1) + x(c, 2 * y + 1, 2 * xx) +
                                x(c, 2 * y + 1, 2 * xx + 1));
      }
    }
  }
  return out;
}

inline void add_into(FeatureTensor& acc, const FeatureTensor& term) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
}

/// One block. Down blocks use stride-2 convolutions and 2x2 average pooling
/// before the spectral transform; up blocks upsample 2x (nearest) first.
inline FeatureTensor ffc_forward(const FeatureTensor& input, const FfcBlock& block, std::size_t threads = 1,
                                 std::size_t index = 0) {
  block.validate(index);
  if (input.channels() != block.in_channels) {
    detail::block_error(index, "expects " + std::to_string(block.in_channels) + " input channels, got " +
                                   std::to_string(input.channels()));
  }
  if (!all_finite(input)) detail::block_error(index, "input holds non-finite values");
  if (block.kind == BlockKind::Down && (input.height() % 2 != 0 || input.width() % 2 != 0)) {
    detail::block_error(index, "down block needs even height and width, got " + input.shape_string());
  }
  const FeatureTensor x = block.kind == BlockKind::Up ? upsample_nearest2(input) : input;
  const std::size_t stride = block.kind == BlockKind::Down ? 2 : 1;
  const std::size_t ho = block.kind == BlockKind::Down ? x.height() / 2 : x.height();
  const std::size_t wo = block.kind == BlockKind::Down ? x.width() / 2 : x.width();

  const auto [xl, xg] = split_channels(x, block.global_ratio);
  FeatureTensor yl(block.out_local(), ho, wo);
  FeatureTensor yg(block.out_global(), ho, wo);
  if (block.l2l) add_into(yl, block.l2l->apply(xl, stride, threads));
  if (block.g2l) add_into(yl, block.g2l->apply(xg, stride, threads));
  if (block.l2g) add_into(yg, block.l2g->apply(xl, stride, threads));
  if (block.g2g) {
    const FeatureTensor g_in = block.kind == BlockKind::Down ? avg_pool2(xg) : xg;
    add_into(yg, spectral_transform(g_in, *block.g2g, block.flags, threads));
  }
  if (block.flags.normalization) {
    block.norm_l.apply(yl);
    block.norm_g.apply(yg);
  }
  if (block.flags.activation) {
    relu(yl);
    relu(yg);
  }
  FeatureTensor y = concat_channels(yl, yg);
  if (block.flags.residual) add_into(y, input);
  if (!all_finite(y)) throw NumericalError("block " + std::to_string(index) + ": output holds non-finite values");
  return y;
}

struct Model {
  std::vector<FfcBlock> blocks;

  void validate() const {
    if (blocks.empty()) throw InvalidInput("model has no blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].validate(i);
      if (i > 0 && blocks[i].in_channels != blocks[i - 1].out_channels) {
        detail::block_error(i, "expects " + std::to_string(blocks[i].in_channels) + " input channels, block " +
                                   std::to_string(i - 1) + " produces " + std::to_string(blocks[i - 1].out_channels));
      }
    }
  }
};

/// Runs the blocks in order. `trace` sees (block index, output) after each.
inline FeatureTensor run_model(const FeatureTensor& input, const Model& model, std::size_t threads = 1,
                               const std::function<void(std::size_t, const FeatureTensor&)>& trace = {}) {
  model.validate();
  FeatureTensor x = input;
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    x = ffc_forward(x, model.blocks[i], threads, i);
    if (trace) trace(i, x);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Files. Both formats are little-endian with float32 payloads.
//
// Weight file: "FFCW", u32 version, u32 tensor count, then per tensor
//   u32 name length, name bytes, u32 rank, rank x u32 dims, float32 values.
// Tensor file: "FFCT", u32 rank, rank x u32 dims, float32 values.

inline constexpr std::uint32_t kWeightFileVersion = 1;
inline constexpr std::uint32_t kMaxRank = 8;
inline constexpr std::uint32_t kMaxNameLength = 4096;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Name-ordered so encoding is independent of insertion order.
using TensorTable = std::map<std::string, NamedTensor>;

namespace detail {

inline std::uint32_t read_rank(io::ByteReader& r, std::uint32_t lo, std::uint32_t hi) {
  const std::size_t at = r.offset();
  const std::uint32_t rank = r.u32("rank");
  if (rank < lo || rank > hi) {
    r.fail("rank " + std::to_string(rank) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", at);
  }
  return rank;
}

inline std::vector<std::uint32_t> read_dims(io::ByteReader& r, std::uint32_t rank, std::size_t& count) {
  std::vector<std::uint32_t> dims(rank);
  count = 1;
  for (auto& d : dims) {
    const std::size_t at = r.offset();
    d = r.u32("dimension");
    if (d == 0) r.fail("zero dimension", at);
    if (count > r.remaining() / d) r.fail("dimensions exceed the file size", at);
    count *= d;
  }
  if (count > r.remaining() / 4) {
    r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, dimensions need " +
               std::to_string(count * 4),
           r.offset());
  }
  return dims;
}

}  // namespace detail

inline io::Bytes encode_weight_file(const TensorTable& table) {
  io::ByteWriter w;
  w.bytes("FFCW");
  w.u32(kWeightFileVersion);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (float v : t.values) w.f32(v);
  }
  return w.take();
}

inline TensorTable decode_weight_file(const io::Bytes& bytes, const std::string& context = "FFCW") {
  io::ByteReader r(bytes, context);
  r.expect_magic("FFCW");
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kWeightFileVersion) r.fail("unsupported version " + std::to_string(version), version_at);
  const std::uint32_t count = r.u32("tensor count");
  TensorTable table;
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::size_t entry_at = r.offset();
    const std::uint32_t len = r.u32("name length");
    if (len == 0 || len > kMaxNameLength) r.fail("bad tensor name length " + std::to_string(len), entry_at);
    NamedTensor t;
    t.name = r.bytes(len, "tensor name");
    std::size_t values = 0;
    t.dims = detail::read_dims(r, detail::read_rank(r, 1, kMaxRank), values);
    t.values.resize(values);
    for (auto& v : t.values) v = r.f32("tensor value");
    if (table.contains(t.name)) r.fail("duplicate tensor '" + io::ByteReader::printable(t.name) + "'", entry_at);
    table.emplace(t.name, std::move(t));
  }
  r.expect_end();
  return table;
}

inline io::Bytes encode_tensor_file(const FeatureTensor& t) {
  io::ByteWriter w;
  w.bytes("FFCT");
  w.u32(3);
  w.u32(static_cast<std::uint32_t>(t.channels()));
  w.u32(static_cast<std::uint32_t>(t.height()));
  w.u32(static_cast<std::uint32_t>(t.width()));
  for (double v : t.values()) w.f32(static_cast<float>(v));
  return w.take();
}

/// Rank 3 is C x H x W; rank 2 is read as a single-channel H x W tensor.
inline FeatureTensor decode_tensor_file(const io::Bytes& bytes, const std::string& context = "FFCT") {
  io::ByteReader r(bytes, context);
  r.expect_magic("FFCT");
  std::size_t count = 0;
  const auto dims = detail::read_dims(r, detail::read_rank(r, 2, 3), count);
  std::vector<double> values(count);
  const std::size_t payload_at = r.offset();
  for (auto& v : values) {
    v = r.f32("tensor value");
  }
  if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    r.fail("tensor holds non-finite values", payload_at);
  }
  r.expect_end();
  if (dims.size() == 2) return FeatureTensor(1, dims[0], dims[1], std::move(values));
  return FeatureTensor(dims[0], dims[1], dims[2], std::move(values));
}

inline void write_tensor_file(const std::filesystem::path& path, const FeatureTensor& t) {
  io::write_file(path, encode_tensor_file(t));
}

inline FeatureTensor read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor_file(io::read_file(path), path.string());
}

// Model <-> tensor table. Names per block i:
//   block{i}.kind [1]            0 same, 1 down, 2 up
//   block{i}.global_ratio [1]
//   block{i}.flags [1]           bit 0 activation, bit 1 normalisation, bit 2 residual
//   block{i}.channels [2]        in, out
//   block{i}.{l2l,g2l,l2g}.weight [out, in, 3, 3] and .bias [out]
//   block{i}.g2g.{pre,fu,post}.weight [out, in, 1, 1] and .bias [out]
//   block{i}.g2g.{pre_norm,fu_norm}.{scale,shift} [channels]
//   block{i}.{norm_l,norm_g}.{scale,shift} [channels]
// plus model.blocks [1].

namespace detail {

inline std::vector<float> to_f32(const std::vector<double>& v) { return {v.begin(), v.end()}; }

inline void put(TensorTable& t, std::string name, std::vector<std::uint32_t> dims, std::vector<float> values) {
  NamedTensor nt{name, std::move(dims), std::move(values)};
  t.emplace(std::move(name), std::move(nt));
}

inline void put_conv(TensorTable& t, const std::string& prefix, const Conv2d& c) {
  const auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  put(t, prefix + ".weight", {u(c.out), u(c.in), u(c.k), u(c.k)}, to_f32(c.weight));
  put(t, prefix + ".bias", {u(c.out)}, to_f32(c.bias));
}

inline void put_affine(TensorTable& t, const std::string& prefix, const Affine& a) {
  const auto n = static_cast<std::uint32_t>(a.scale.size());
  if (n == 0) return;
  put(t, prefix + ".scale", {n}, to_f32(a.scale));
  put(t, prefix + ".shift", {n}, to_f32(a.shift));
}

class TableReader {
 public:
  explicit TableReader(const TensorTable& table) : table_(table) {}

  const NamedTensor* find(const std::string& name) {
    const auto it = table_.find(name);
    if (it == table_.end()) return nullptr;
    used_.push_back(name);
    return &it->second;
  }

  const NamedTensor& get(std::size_t block, const std::string& name) {
    const NamedTensor* t = find(name);
    if (!t) block_error(block, "missing tensor '" + name + "'");
    return *t;
  }

  double scalar(std::size_t block, const std::string& name) {
    const auto& t = get(block, name);
    if (t.values.size() != 1) block_error(block, "tensor '" + name + "' must hold one value");
    return t.values[0];
  }

  std::vector<double> vec(std::size_t block, const std::string& name, std::size_t n) {
    const auto& t = get(block, name);
    if (t.dims.size() != 1 || t.dims[0] != n) {
      block_error(block, "tensor '" + name + "' expected shape [" + std::to_string(n) + "]");
    }
    return {t.values.begin(), t.values.end()};
  }

  Conv2d conv(std::size_t block, const std::string& prefix, std::size_t out, std::size_t in, std::size_t k) {
    const auto& w = get(block, prefix + ".weight");
    const std::vector<std::uint32_t> want{static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in),
                                          static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k)};
    if (w.dims != want) {
      std::string got;
      for (auto d : w.dims) got += (got.empty() ? "" : ",") + std::to_string(d);
      block_error(block, "tensor '" + prefix + ".weight' expected shape [" + std::to_string(out) + "," +
                             std::to_string(in) + "," + std::to_string(k) + "," + std::to_string(k) + "], got [" +
                             got + "]");
    }
    return {out, in, k, {w.values.begin(), w.values.end()}, vec(block, prefix + ".bias", out)};
  }

  Affine affine(std::size_t block, const std::string& prefix, std::size_t n) {
    if (n == 0) return {};
    return {vec(block, prefix + ".scale", n), vec(block, prefix + ".shift", n)};
  }

  void require_all_used() const {
    for (const auto& [name, t] : table_) {
      if (std::find(used_.begin(), used_.end(), name) == used_.end()) {
        throw InvalidInput("unexpected tensor '" + name + "' in weight file");
      }
    }
  }

 private:
  const TensorTable& table_;
  std::vector<std::string> used_;
};

inline std::size_t to_count(std::size_t block, const std::string& name, double v) {
  if (!(v >= 0.0 && v == std::floor(v) && v < 1e9)) {
    block_error(block, "tensor '" + name + "' must hold a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline TensorTable model_to_table(const Model& model) {
  model.validate();
  TensorTable t;
  detail::put(t, "model.blocks", {1}, {static_cast<float>(model.blocks.size())});
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    const auto& b = model.blocks[i];
    const std::string p = "block" + std::to_string(i);
    detail::put(t, p + ".kind", {1}, {static_cast<float>(b.kind)});
    detail::put(t, p + ".global_ratio", {1}, {static_cast<float>(b.global_ratio)});
    detail::put(t, p + ".flags", {1}, {static_cast<float>(b.flags.bits())});
    detail::put(t, p + ".channels", {2}, {static_cast<float>(b.in_channels), static_cast<float>(b.out_channels)});
    if (b.l2l) detail::put_conv(t, p + ".l2l", *b.l2l);
    if (b.g2l) detail::put_conv(t, p + ".g2l", *b.g2l);
    if (b.l2g) detail::put_conv(t, p + ".l2g", *b.l2g);
    if (b.g2g) {
      detail::put_conv(t, p + ".g2g.pre", b.g2g->pre);
      detail::put_affine(t, p + ".g2g.pre_norm", b.g2g->pre_norm);
      detail::put_conv(t, p + ".g2g.fu", b.g2g->fu);
      detail::put_affine(t, p + ".g2g.fu_norm", b.g2g->fu_norm);
      detail::put_conv(t, p + ".g2g.post", b.g2g->post);
    }
    detail::put_affine(t, p + ".norm_l", b.norm_l);
    detail::put_affine(t, p + ".norm_g", b.norm_g);
  }
  return t;
}

inline Model model_from_table(const TensorTable& table) {
  detail::TableReader r(table);
  const NamedTensor* count_t = r.find("model.blocks");
  if (!count_t || count_t->values.size() != 1) throw InvalidInput("weight file lacks a 'model.blocks' entry");
  const std::size_t count = detail::to_count(0, "model.blocks", count_t->values[0]);
  Model model;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string p = "block" + std::to_string(i);
    FfcBlock b;
    const std::size_t kind = detail::to_count(i, p + ".kind", r.scalar(i, p + ".kind"));
    if (kind > 2) detail::block_error(i, "unknown block kind " + std::to_string(kind));
    b.kind = static_cast<BlockKind>(kind);
    b.global_ratio = r.scalar(i, p + ".global_ratio");
    if (!(b.global_ratio >= 0.0 && b.global_ratio <= 1.0)) {
      detail::block_error(i, "global ratio " + std::to_string(b.global_ratio) + " outside [0, 1]");
    }
    const std::size_t bits = detail::to_count(i, p + ".flags", r.scalar(i, p + ".flags"));
    if (bits > 7) detail::block_error(i, "unknown flag bits " + std::to_string(bits));
    b.flags = BlockFlags::from_bits(static_cast<std::uint32_t>(bits));
    const auto ch = r.vec(i, p + ".channels", 2);
    b.in_channels = detail::to_count(i, p + ".channels", ch[0]);
    b.out_channels = detail::to_count(i, p + ".channels", ch[1]);
    if (b.in_channels == 0 || b.out_channels == 0) detail::block_error(i, "channel counts must be positive");
    const std::size_t il = b.in_local(), ig = b.in_global(), ol = b.out_local(), og = b.out_global();
    if (il && ol) b.l2l = r.conv(i, p + ".l2l", ol, il, 3);
    if (ig && ol) b.g2l = r.conv(i, p + ".g2l", ol, ig, 3);
    if (il && og) b.l2g = r.conv(i, p + ".l2g", og, il, 3);
    if (ig && og) {
      const auto& pre = r.get(i, p + ".g2g.pre.weight");
      if (pre.dims.size() != 4 || pre.dims[0] == 0) {
        detail::block_error(i, "tensor '" + p + ".g2g.pre.weight' must have shape [hidden," + std::to_string(ig) +
                                   ",1,1]");
      }
      const std::size_t hd = pre.dims[0];
      SpectralWeights sw;
      sw.pre = r.conv(i, p + ".g2g.pre", hd, ig, 1);
      sw.pre_norm = r.affine(i, p + ".g2g.pre_norm", hd);
      sw.fu = r.conv(i, p + ".g2g.fu", 2 * hd, 2 * hd, 1);
      sw.fu_norm = r.affine(i, p + ".g2g.fu_norm", 2 * hd);
      sw.post = r.conv(i, p + ".g2g.post", og, hd, 1);
      b.g2g = std::move(sw);
    }
    b.norm_l = r.affine(i, p + ".norm_l", ol);
    b.norm_g = r.affine(i, p + ".norm_g", og);
    model.blocks.push_back(std::move(b));
  }
  r.require_all_used();
  model.validate();
  return model;
}

inline void save_model(const std::filesystem::path& path, const Model& model) {
  io::write_file(path, encode_weight_file(model_to_table(model)));
}

inline Model load_model(const std::filesystem::path& path) {
  return model_from_table(decode_weight_file(io::read_file(path), path.string()));
}

}  // namespace freqcons::ffc
