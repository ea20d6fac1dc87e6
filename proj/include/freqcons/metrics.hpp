#pragma once

// Video evaluation: warping-error temporal consistency (TCM), PSNR and SSIM,
// Middlebury .flo I/O and a phase-correlation translation estimator.
//
// Flow convention: a flow (dx, dy) at pixel (x, y) points from the current
// frame into the previous one, so warp(prev, flow)(x, y) samples prev at
// (x + dx, y + dy). x is the column and y the row.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "freqcons/binary_io.hpp"
#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"
#include "freqcons/parallel.hpp"
#include "freqcons/spectral.hpp"
#include "freqcons/tfc.hpp"

namespace freqcons {

struct FlowField {
  RealGrid dx;
  RealGrid dy;

  FlowField() = default;
  FlowField(std::size_t rows, std::size_t cols, double fx = 0.0, double fy = 0.0)
      : dx(rows, cols, fx), dy(rows, cols, fy) {}
  FlowField(RealGrid x, RealGrid y) : dx(std::move(x)), dy(std::move(y)) {
    if (!dx.same_shape(dy)) throw InvalidInput("flow components differ in size");
  }

  std::size_t rows() const noexcept { return dx.rows(); }
  std::size_t cols() const noexcept { return dx.cols(); }
  bool finite() const noexcept { return all_finite(dx) && all_finite(dy); }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

namespace detail {

inline void require_flow_matches(const Frame& frame, const FlowField& flow) {
  if (flow.rows() != frame.rows() || flow.cols() != frame.cols()) {
    throw InvalidInput("flow is " + std::to_string(flow.rows()) + "x" + std::to_string(flow.cols()) +
                       ", frame is " + std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()));
  }
  if (!flow.finite()) throw InvalidInput("flow holds non-finite values");
}

}  // namespace detail

/// Backward bilinear warp; sample positions are clamped to the frame.
inline Frame warp(const Frame& frame, const FlowField& flow) {
  detail::require_flow_matches(frame, flow);
  const std::size_t M = frame.rows();
  const std::size_t N = frame.cols();
  const double max_x = static_cast<double>(N - 1);
  const double max_y = static_cast<double>(M - 1);
  std::vector<FrameGrid> out;
  for (const auto& ch : frame.channels()) {
    FrameGrid g(M, N);
    for (std::size_t y = 0; y < M; ++y) {
      for (std::size_t x = 0; x < N; ++x) {
        const double sx = std::clamp(static_cast<double>(x) + flow.dx(y, x), 0.0, max_x);
        const double sy = std::clamp(static_cast<double>(y) + flow.dy(y, x), 0.0, max_y);
        const auto x0 = static_cast<std::size_t>(std::floor(sx));
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t x1 = std::min(x0 + 1, N - 1);
        const std::size_t y1 = std::min(y0 + 1, M - 1);
        const double fx = sx - static_cast<double>(x0);
        const double fy = sy - static_cast<double>(y0);
        const double top = (1.0 - fx) * ch(y0, x0) + fx * ch(y0, x1);
        const double bottom = (1.0 - fx) * ch(y1, x0) + fx * ch(y1, x1);
        g(y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
    out.push_back(std::move(g));
  }
  return Frame(std::move(out));
}

/// Sum of squared differences over all pixels and channels.
inline double squared_error(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "squared_error");
  double sum = 0.0;
  for (std::size_t c = 0; c < a.channel_count(); ++c) {
    for (std::size_t i = 0; i < a.channel(c).size(); ++i) {
      const double d = a.channel(c)[i] - b.channel(c)[i];
      sum += d * d;
    }
  }
  return sum;
}

inline constexpr double kWarpErrorFloor = 1e-12;

/// exp(-|E_R / E_S - 1|); both errors below the floor give 1, a vanishing
/// synthetic error alone gives 0.
inline double tcm_from_errors(double e_ref, double e_syn) {
  if (e_syn < kWarpErrorFloor) return e_ref < kWarpErrorFloor ? 1.0 : 0.0;
  return std::exp(-std::abs(e_ref / e_syn - 1.0));
}

struct TcmTerms {
  double e_ref = 0.0;
  double e_syn = 0.0;
  double tcm = 1.0;
};

inline TcmTerms tcm_terms(const Frame& ref_prev, const Frame& ref_curr, const Frame& syn_prev, const Frame& syn_curr,
                          const FlowField& flow) {
  require_same_shape(ref_prev, ref_curr, "tcm");
  require_same_shape(ref_prev, syn_prev, "tcm");
  require_same_shape(ref_prev, syn_curr, "tcm");
  TcmTerms t;
  t.e_ref = squared_error(ref_curr, warp(ref_prev, flow));
  t.e_syn = squared_error(syn_curr, warp(syn_prev, flow));
  t.tcm = tcm_from_errors(t.e_ref, t.e_syn);
  return t;
}

inline double tcm(const Frame& ref_prev, const Frame& ref_curr, const Frame& syn_prev, const Frame& syn_curr,
                  const FlowField& flow) {
  return tcm_terms(ref_prev, ref_curr, syn_prev, syn_curr, flow).tcm;
}

/// Signed representative of index k modulo n, in (-n/2, n/2].
inline long wrap_signed(std::size_t k, std::size_t n) noexcept {
  const long v = static_cast<long>(k);
  return 2 * k > n ? v - static_cast<long>(n) : v;
}

/// Global integer translation by phase correlation on luma. Returns the
/// constant flow d with curr(p) = prev(p + d) for a cyclic shift. Constant
/// frames give zero flow.
inline FlowField estimate_flow_translation(const Frame& prev, const Frame& curr) {
  require_same_shape(prev, curr, "estimate_flow_translation");
  const FrameGrid a = to_luma(prev);
  const FrameGrid b = to_luma(curr);
  const std::size_t M = a.rows();
  const std::size_t N = a.cols();
  const auto flat = [](const FrameGrid& g) {
    const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
    return *hi - *lo < 1e-12;
  };
  if (flat(a) || flat(b)) return FlowField(M, N);

  ComplexGrid fa(M, N);
  ComplexGrid fb(M, N);
  for (std::size_t i = 0; i < a.size(); ++i) {
    fa[i] = a[i];
    fb[i] = b[i];
  }
  fa = fft2(std::move(fa));
  fb = fft2(std::move(fb));
  ComplexGrid cross(M, N);
  for (std::size_t i = 0; i < cross.size(); ++i) {
    const auto z = fa[i] * std::conj(fb[i]);
    const double mag = std::abs(z);
    cross[i] = mag < 1e-12 ? std::complex<double>{} : z / mag;
  }
  const ComplexGrid corr = ifft2(std::move(cross));
  std::size_t best = 0;
  for (std::size_t i = 1; i < corr.size(); ++i) {
    if (corr[i].real() > corr[best].real()) best = i;
  }
  const double dy = static_cast<double>(wrap_signed(best / N, M));
  const double dx = static_cast<double>(wrap_signed(best % N, N));
  return FlowField(M, N, dx, dy);
}

inline constexpr double kPsnrCap = 99.0;

inline double mean_squared_error(const Frame& a, const Frame& b) {
  return squared_error(a, b) / static_cast<double>(a.channel_count() * a.rows() * a.cols());
}

/// 10 log10(1 / MSE) for unit dynamic range, never above kPsnrCap.
inline double psnr(const Frame& a, const Frame& b) {
  const double mse = mean_squared_error(a, b);
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> taps(n);
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - centre;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

/// Valid-mode separable filtering with taps ty (rows) and tx (cols).
inline RealGrid filter_valid(const RealGrid& g, const std::vector<double>& ty, const std::vector<double>& tx) {
  const std::size_t ro = g.rows() - ty.size() + 1;
  const std::size_t co = g.cols() - tx.size() + 1;
  RealGrid horiz(g.rows(), co);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < co; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tx.size(); ++k) acc += tx[k] * g(r, c + k);
      horiz(r, c) = acc;
    }
  }
  RealGrid out(ro, co);
  for (std::size_t r = 0; r < ro; ++r) {
    for (std::size_t c = 0; c < co; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ty.size(); ++k) acc += ty[k] * horiz(r + k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM over valid window positions and channels. Frames smaller than
/// the window use a window truncated to the frame along that axis.
inline double ssim(const Frame& a, const Frame& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim");
  const auto ty = detail::gaussian_taps(std::min(p.window, a.rows()), p.sigma);
  const auto tx = detail::gaussian_taps(std::min(p.window, a.cols()), p.sigma);
  const double c1 = std::pow(p.k1 * p.dynamic_range, 2);
  const double c2 = std::pow(p.k2 * p.dynamic_range, 2);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < a.channel_count(); ++ch) {
    const auto& x = a.channel(ch);
    const auto& y = b.channel(ch);
    RealGrid xx(x.rows(), x.cols());
    RealGrid yy(x.rows(), x.cols());
    RealGrid xy(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, ty, tx);
    const auto my = detail::filter_valid(y, ty, tx);
    const auto sxx = detail::filter_valid(xx, ty, tx);
    const auto syy = detail::filter_valid(yy, ty, tx);
    const auto sxy = detail::filter_valid(xy, ty, tx);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

// Middlebury .flo: float32 202021.25 ("PIEH"), u32 width, u32 height, then
// (dx, dy) float32 pairs row-major, all little-endian.

inline constexpr float kFloMagic = 202021.25f;

inline io::Bytes encode_flo(const FlowField& flow) {
  io::ByteWriter w;
  w.f32(kFloMagic);
  w.u32(static_cast<std::uint32_t>(flow.cols()));
  w.u32(static_cast<std::uint32_t>(flow.rows()));
  for (std::size_t i = 0; i < flow.dx.size(); ++i) {
    w.f32(static_cast<float>(flow.dx[i]));
    w.f32(static_cast<float>(flow.dy[i]));
  }
  return w.take();
}

inline FlowField decode_flo(const io::Bytes& bytes, const std::string& context = "flo") {
  io::ByteReader r(bytes, context);
  const float magic = r.f32("magic");
  if (magic != kFloMagic) {
    r.fail("bad magic " + std::to_string(magic) + ", expected 202021.25 ('PIEH')", 0);
  }
  const std::size_t dims_at = r.offset();
  const std::uint32_t width = r.u32("width");
  const std::uint32_t height = r.u32("height");
  if (width == 0 || height == 0) r.fail("zero flow dimension", dims_at);
  if (static_cast<std::uint64_t>(width) * height > r.remaining() / 8) {
    r.fail(std::to_string(width) + "x" + std::to_string(height) + " flow needs " +
               std::to_string(static_cast<std::uint64_t>(width) * height * 8) + " payload bytes, have " +
               std::to_string(r.remaining()),
           r.offset());
  }
  FlowField flow(height, width);
  for (std::size_t i = 0; i < flow.dx.size(); ++i) {
    flow.dx[i] = r.f32("dx");
    flow.dy[i] = r.f32("dy");
  }
  r.expect_end();
  if (!flow.finite()) throw FormatError(context + ": flow holds non-finite values", 12);
  return flow;
}

inline void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  io::write_file(path, encode_flo(flow));
}

inline FlowField read_flo(const std::filesystem::path& path) { return decode_flo(io::read_file(path), path.string()); }

// ---------------------------------------------------------------------------

enum class FlowSource { Files, PhaseCorrelation };

inline const char* to_string(FlowSource s) noexcept {
  return s == FlowSource::Files ? "files" : "phase-correlation";
}

struct TransitionMetric {
  std::size_t t = 0;  // 1-based index of the current frame
  double tcm = 1.0;
  double e_ref = 0.0;
  double e_syn = 0.0;
};

struct FrameMetric {
  std::size_t t = 0;  // 1-based
  double psnr = kPsnrCap;
  double ssim = 1.0;
};

struct MetricReport {
  FlowSource flow_source = FlowSource::PhaseCorrelation;
  std::vector<TransitionMetric> per_transition;
  std::vector<FrameMetric> per_frame;
  double mean_tcm = 1.0;
  double mean_psnr = kPsnrCap;
  double mean_ssim = 1.0;
};

/// `flows[k]` belongs to the transition from frame k to frame k+1 (0-based);
/// without flows they are estimated on the reference pair.
inline MetricReport evaluate_video(const VideoSequence& ref, const VideoSequence& syn,
                                   const std::optional<std::vector<FlowField>>& flows, std::size_t threads = 1) {
  if (ref.length() != syn.length()) {
    throw InvalidInput("sequence lengths differ: reference has " + std::to_string(ref.length()) +
                       " frames, synthetic has " + std::to_string(syn.length()));
  }
  require_same_shape(ref.frame(0), syn.frame(0), "evaluate_video");
  const std::size_t T = ref.length();
  if (flows && flows->size() != T - 1) {
    throw InvalidInput("expected " + std::to_string(T - 1) + " flow fields, got " + std::to_string(flows->size()));
  }
  if (flows) {
    for (std::size_t k = 0; k < flows->size(); ++k) {
      try {
        detail::require_flow_matches(ref.frame(k), (*flows)[k]);
      } catch (const InvalidInput& e) {
        throw InvalidInput("transition " + std::to_string(k + 2) + ": " + e.what());
      }
    }
  }
  MetricReport report;
  report.flow_source = flows ? FlowSource::Files : FlowSource::PhaseCorrelation;
  report.per_transition.resize(T - 1);
  report.per_frame.resize(T);
  parallel_for(T - 1, threads, [&](std::size_t k) {
    const FlowField flow =
        flows ? (*flows)[k] : estimate_flow_translation(ref.frame(k), ref.frame(k + 1));
    const auto terms = tcm_terms(ref.frame(k), ref.frame(k + 1), syn.frame(k), syn.frame(k + 1), flow);
    report.per_transition[k] = {k + 2, terms.tcm, terms.e_ref, terms.e_syn};
  });
  parallel_for(T, threads, [&](std::size_t k) {
    report.per_frame[k] = {k + 1, psnr(ref.frame(k), syn.frame(k)), ssim(ref.frame(k), syn.frame(k))};
  });
  double s = 0.0;
  for (const auto& m : report.per_transition) s += m.tcm;
  report.mean_tcm = s / static_cast<double>(T - 1);
  double sp = 0.0;
  double ss = 0.0;
  for (const auto& m : report.per_frame) {
    sp += m.psnr;
    ss += m.ssim;
  }
  report.mean_psnr = sp / static_cast<double>(T);
  report.mean_ssim = ss / static_cast<double>(T);
  return report;
}

}  // namespace freqcons
