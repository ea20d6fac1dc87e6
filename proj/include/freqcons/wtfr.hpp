#pragma once

// Weighted temporal-frequency regulariser.
//
// For a reference transition (R_{t-1} -> R_t) and a synthetic one
// (S_{t-1} -> S_t), per channel:
//
//   L_tac = 1/(MN) sum_uv w(u,v) | TAC_R(u,v) - TAC_S(u,v) |
//   L_tpc = 1/(MN) sum_uv w(u,v) | TPC_R(u,v) - TPC_S(u,v) |
//   total = alpha * L_tac + beta * L_tpc
//
// with TAC/TPC the per-frequency amplitude / phase changes and w a radial
// weight that grows toward the highest frequencies. Channel losses are
// averaged. The gradient is taken with respect to the pixels of S_t (and
// optionally S_{t-1}) by the chain rule through the DFT, amplitude/phase and
// the absolute values, using subgradient 0 at every kink.

#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "freqcons/binary_io.hpp"
#include "freqcons/errors.hpp"
#include "freqcons/grid.hpp"
#include "freqcons/parallel.hpp"
#include "freqcons/spectral.hpp"
#include "freqcons/tfc.hpp"

namespace freqcons {

struct WtfrConfig {
  double alpha = 0.5;
  double beta = 1.0;
  double delta = 0.05;
  PhaseMode phase_mode = PhaseMode::Wrapped;
  bool weighting = true;
  // Also differentiate with respect to the previous synthetic frame.
  bool gradient_through_prev = false;

  void validate() const {
    if (!(std::isfinite(alpha) && alpha >= 0.0)) throw InvalidInput("alpha must be finite and >= 0");
    if (!(std::isfinite(beta) && beta >= 0.0)) throw InvalidInput("beta must be finite and >= 0");
    if (!(alpha + beta > 0.0)) throw InvalidInput("alpha + beta must be positive");
    if (!(std::isfinite(delta) && delta >= 0.0)) throw InvalidInput("delta must be finite and >= 0");
  }
};

struct WtfrResult {
  double total = 0.0;
  double l_tac = 0.0;
  double l_tpc = 0.0;
  // d total / d synthetic current frame, one grid per channel.
  std::optional<Frame> gradient;
  // d total / d synthetic previous frame, only with gradient_through_prev.
  std::optional<Frame> gradient_prev;
};

/// w(u,v) = [(M/2)^2 + (N/2)^2]^delta - [(u-M/2)^2 + (v-N/2)^2]^delta + 1 on
/// unshifted indices, so the Nyquist corner (M/2, N/2) gets the largest
/// weight and DC gets 1.
inline RealGrid weight_grid(std::size_t rows, std::size_t cols, double delta) {
  if (rows == 0 || cols == 0) throw InvalidInput("weight_grid: dimensions must be positive");
  const double hm = static_cast<double>(rows) / 2.0;
  const double hn = static_cast<double>(cols) / 2.0;
  const double reference = std::pow(hm * hm + hn * hn, delta);
  RealGrid w(rows, cols);
  for (std::size_t u = 0; u < rows; ++u) {
    const double du = static_cast<double>(u) - hm;
    for (std::size_t v = 0; v < cols; ++v) {
      const double dv = static_cast<double>(v) - hn;
      const double dist2 = du * du + dv * dv;
      // 0^delta is 0 for delta > 0; std::pow(0, 0) == 1 keeps w == 1 at delta == 0.
      const double radius = (dist2 == 0.0 && delta > 0.0) ? 0.0 : std::pow(dist2, delta);
      w(u, v) = reference - radius + 1.0;
    }
  }
  return w;
}

namespace detail {

inline double sign(double x) noexcept { return (x > 0.0) - (x < 0.0); }

/// d/dp1 of phase_distance(p1, p0); 0 on every kink.
inline double phase_distance_slope(double p1, double p0, PhaseMode mode) noexcept {
  const double d = p1 - p0;
  if (mode == PhaseMode::Raw) return sign(d);
  const double ad = std::abs(d);
  if (ad == std::numbers::pi) return 0.0;
  return ad < std::numbers::pi ? sign(d) : -sign(d);
}

/// Pulls d/dA and d/dphi at each frequency back to d/dR + i d/dI, then to
/// pixels. A real pixel f(x,y) enters R with cos(theta) and I with
/// -sin(theta), so the pixel gradient is Re(sum_uv G(u,v) e^{+i theta}).
inline FrameGrid pixel_gradient(const Spectrum& spectrum, const RealGrid& d_amp, const RealGrid& d_phase) {
  ComplexGrid g(spectrum.rows(), spectrum.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto z = spectrum.values[i];
    const double a = std::abs(z);
    if (a < kPhaseAmplitudeFloor) continue;
    const double re = z.real();
    const double im = z.imag();
    const double a2 = a * a;
    g[i] = {d_amp[i] * re / a - d_phase[i] * im / a2, d_amp[i] * im / a + d_phase[i] * re / a2};
  }
  const ComplexGrid back = ifft2(std::move(g));
  const double scale = static_cast<double>(back.size());
  FrameGrid out(back.rows(), back.cols());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = back[i].real() * scale;
  return out;
}

struct ChannelSpectra {
  Spectrum spectrum;
  RealGrid amp;
  RealGrid phase;
};

inline ChannelSpectra channel_spectra(const FrameGrid& grid) {
  Spectrum s = dft2(grid);
  RealGrid a = amplitude(s);
  RealGrid p = phase(s);
  return {std::move(s), std::move(a), std::move(p)};
}

}  // namespace detail

inline WtfrResult wtfr_loss(const Frame& ref_prev, const Frame& ref_curr, const Frame& syn_prev,
                            const Frame& syn_curr, const WtfrConfig& cfg, bool want_gradient = false) {
  cfg.validate();
  require_same_shape(ref_prev, ref_curr, "wtfr_loss");
  require_same_shape(ref_prev, syn_prev, "wtfr_loss");
  require_same_shape(ref_prev, syn_curr, "wtfr_loss");
  for (const Frame* f : {&ref_prev, &ref_curr, &syn_prev, &syn_curr}) {
    if (!all_finite(*f)) throw InvalidInput("wtfr_loss: non-finite pixel value");
  }

  const std::size_t rows = ref_prev.rows();
  const std::size_t cols = ref_prev.cols();
  const std::size_t channels = ref_prev.channel_count();
  const RealGrid weights = cfg.weighting ? weight_grid(rows, cols, cfg.delta) : RealGrid(rows, cols, 1.0);
  const double inv_mn = 1.0 / static_cast<double>(rows * cols);
  const double inv_c = 1.0 / static_cast<double>(channels);

  WtfrResult result;
  std::vector<FrameGrid> grad_curr;
  std::vector<FrameGrid> grad_prev;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto rp = detail::channel_spectra(ref_prev.channel(c));
    const auto rc = detail::channel_spectra(ref_curr.channel(c));
    const auto sp = detail::channel_spectra(syn_prev.channel(c));
    const auto sc = detail::channel_spectra(syn_curr.channel(c));

    double tac_sum = 0.0;
    double tpc_sum = 0.0;
    RealGrid d_amp(rows, cols, 0.0);
    RealGrid d_phase(rows, cols, 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double tac_r = std::abs(rc.amp[i] - rp.amp[i]);
      const double tac_s = std::abs(sc.amp[i] - sp.amp[i]);
      const double tpc_r = phase_distance(rc.phase[i], rp.phase[i], cfg.phase_mode);
      const double tpc_s = phase_distance(sc.phase[i], sp.phase[i], cfg.phase_mode);
      tac_sum += weights[i] * std::abs(tac_r - tac_s);
      tpc_sum += weights[i] * std::abs(tpc_r - tpc_s);
      if (want_gradient) {
        const double scale = weights[i] * inv_mn * inv_c;
        d_amp[i] = cfg.alpha * scale * detail::sign(tac_s - tac_r) * detail::sign(sc.amp[i] - sp.amp[i]);
        d_phase[i] = cfg.beta * scale * detail::sign(tpc_s - tpc_r) *
                     detail::phase_distance_slope(sc.phase[i], sp.phase[i], cfg.phase_mode);
      }
    }
    result.l_tac += tac_sum * inv_mn;
    result.l_tpc += tpc_sum * inv_mn;

    if (want_gradient) {
      grad_curr.push_back(detail::pixel_gradient(sc.spectrum, d_amp, d_phase));
      if (cfg.gradient_through_prev) {
        // TAC_S and TPC_S are odd in (current - previous).
        for (auto& v : d_amp.values()) v = -v;
        for (auto& v : d_phase.values()) v = -v;
        grad_prev.push_back(detail::pixel_gradient(sp.spectrum, d_amp, d_phase));
      }
    }
  }
  result.l_tac *= inv_c;
  result.l_tpc *= inv_c;
  result.total = cfg.alpha * result.l_tac + cfg.beta * result.l_tpc;
  if (want_gradient) {
    result.gradient = Frame(std::move(grad_curr));
    if (cfg.gradient_through_prev) result.gradient_prev = Frame(std::move(grad_prev));
  }
  return result;
}

struct WtfrSequenceResult {
  std::vector<WtfrResult> transitions;  // index t-1: change into frame t
  WtfrResult mean;                      // scalar fields only
};

inline WtfrSequenceResult wtfr_sequence_loss(const VideoSequence& ref, const VideoSequence& syn,
                                             const WtfrConfig& cfg, std::size_t threads = 1) {
  if (ref.length() != syn.length()) {
    throw InvalidInput("sequence length mismatch: reference has " + std::to_string(ref.length()) +
                       " frames, synthetic has " + std::to_string(syn.length()));
  }
  require_same_shape(ref.frame(0), syn.frame(0), "wtfr_sequence_loss");
  cfg.validate();
  WtfrSequenceResult out;
  out.transitions.resize(ref.transitions());
  parallel_for(out.transitions.size(), threads, [&](std::size_t i) {
    out.transitions[i] = wtfr_loss(ref.frame(i), ref.frame(i + 1), syn.frame(i), syn.frame(i + 1), cfg, false);
  });
  for (const auto& r : out.transitions) {
    out.mean.total += r.total;
    out.mean.l_tac += r.l_tac;
    out.mean.l_tpc += r.l_tpc;
  }
  const double inv = 1.0 / static_cast<double>(out.transitions.size());
  out.mean.total *= inv;
  out.mean.l_tac *= inv;
  out.mean.l_tpc *= inv;
  return out;
}

// Flat "key = value" configuration with '#' comments. Keys: alpha, beta,
// delta, phase_mode (raw|wrapped), weighting (on|off),
// gradient_through_prev (on|off). Missing keys keep their defaults.

inline WtfrConfig parse_wtfr_config(const std::string& text) {
  WtfrConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  const auto parse_bool = [&](const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw InvalidInput("config line " + std::to_string(line_no) + ": " + key + " expects on/off, got '" + v + "'");
  };
  const auto parse_real = [&](const std::string& v, const std::string& key) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": " + key + " expects a number, got '" + v +
                         "'");
    }
    return x;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "alpha") {
      cfg.alpha = parse_real(value, key);
    } else if (key == "beta") {
      cfg.beta = parse_real(value, key);
    } else if (key == "delta") {
      cfg.delta = parse_real(value, key);
    } else if (key == "phase_mode") {
      cfg.phase_mode = parse_phase_mode(value);
    } else if (key == "weighting") {
      cfg.weighting = parse_bool(value, key);
    } else if (key == "gradient_through_prev") {
      cfg.gradient_through_prev = parse_bool(value, key);
    } else {
      throw InvalidInput("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline WtfrConfig load_wtfr_config(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_wtfr_config(std::string(bytes.begin(), bytes.end()));
}

}  // namespace freqcons
