#pragma once

// Independent WTFR evaluation and finite-difference gradient check. The
// scalar oracle rebuilds every spectrum with the double-sum DFT and evaluates
// the weight formula inline; it shares no code with the FFT path.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "freqcons/wtfr.hpp"
#include "support/oracles.hpp"

namespace freqcons::oracle {

struct OracleChannel {
  std::vector<double> amp;
  std::vector<double> phase;
};

inline OracleChannel oracle_channel(const FrameGrid& g) {
  const auto F = naive_dft2(g);
  OracleChannel out;
  for (std::size_t u = 0; u < g.rows(); ++u) {
    for (std::size_t v = 0; v < g.cols(); ++v) {
      const auto z = F(u, v);
      out.amp.push_back(std::abs(z));
      out.phase.push_back(oracle_phase(z, is_self_conjugate(u, v, g.rows(), g.cols())));
    }
  }
  return out;
}

inline double oracle_phase_change(double a, double b, PhaseMode mode) {
  double d = std::abs(a - b);
  if (mode == PhaseMode::Wrapped && d > std::numbers::pi) d = 2 * std::numbers::pi - d;
  return d;
}

struct OracleLoss {
  double total = 0.0;
  double l_tac = 0.0;
  double l_tpc = 0.0;
};

inline OracleLoss oracle_wtfr(const Frame& rp, const Frame& rc, const Frame& sp, const Frame& sc,
                              const WtfrConfig& cfg) {
  const std::size_t M = rp.rows();
  const std::size_t N = rp.cols();
  const std::size_t C = rp.channel_count();
  OracleLoss out;
  for (std::size_t c = 0; c < C; ++c) {
    const auto a = oracle_channel(rp.channel(c));
    const auto b = oracle_channel(rc.channel(c));
    const auto s0 = oracle_channel(sp.channel(c));
    const auto s1 = oracle_channel(sc.channel(c));
    double tac = 0.0;
    double tpc = 0.0;
    for (std::size_t u = 0; u < M; ++u) {
      for (std::size_t v = 0; v < N; ++v) {
        const std::size_t i = u * N + v;
        double w = 1.0;
        if (cfg.weighting) {
          const double r0 = std::pow(M / 2.0, 2) + std::pow(N / 2.0, 2);
          const double r = std::pow(u - M / 2.0, 2) + std::pow(v - N / 2.0, 2);
          w = std::pow(r0, cfg.delta) - (r == 0.0 ? 0.0 : std::pow(r, cfg.delta)) + 1.0;
        }
        tac += w * std::abs(std::abs(b.amp[i] - a.amp[i]) - std::abs(s1.amp[i] - s0.amp[i]));
        tpc += w * std::abs(oracle_phase_change(b.phase[i], a.phase[i], cfg.phase_mode) -
                            oracle_phase_change(s1.phase[i], s0.phase[i], cfg.phase_mode));
      }
    }
    out.l_tac += tac / static_cast<double>(M * N);
    out.l_tpc += tpc / static_cast<double>(M * N);
  }
  out.l_tac /= static_cast<double>(C);
  out.l_tpc /= static_cast<double>(C);
  out.total = cfg.alpha * out.l_tac + cfg.beta * out.l_tpc;
  return out;
}

/// True when the loss is smooth in every frequency term for this channel:
/// synthetic amplitudes above amp_floor and every absolute-value argument at
/// least kink_margin away from zero. Phase terms at self-conjugate bins are
/// locally constant for real input and are not checked.
inline bool channel_qualifies(const FrameGrid& rp, const FrameGrid& rc, const FrameGrid& sp, const FrameGrid& sc,
                              const WtfrConfig& cfg, double amp_floor, double kink_margin) {
  const auto a = oracle_channel(rp);
  const auto b = oracle_channel(rc);
  const auto s0 = oracle_channel(sp);
  const auto s1 = oracle_channel(sc);
  const std::size_t M = rp.rows();
  const std::size_t N = rp.cols();
  for (std::size_t u = 0; u < M; ++u) {
    for (std::size_t v = 0; v < N; ++v) {
      const std::size_t i = u * N + v;
      if (s1.amp[i] <= amp_floor) return false;
      const double tac_r = std::abs(b.amp[i] - a.amp[i]);
      const double tac_s = std::abs(s1.amp[i] - s0.amp[i]);
      if (std::abs(s1.amp[i] - s0.amp[i]) <= kink_margin) return false;
      if (std::abs(tac_r - tac_s) <= kink_margin) return false;
      if (is_self_conjugate(u, v, M, N)) continue;
      const double dphi = s1.phase[i] - s0.phase[i];
      if (std::abs(dphi) <= kink_margin) return false;
      if (cfg.phase_mode == PhaseMode::Wrapped && std::abs(std::abs(dphi) - std::numbers::pi) <= kink_margin) {
        return false;
      }
      const double tpc_r = oracle_phase_change(b.phase[i], a.phase[i], cfg.phase_mode);
      const double tpc_s = oracle_phase_change(s1.phase[i], s0.phase[i], cfg.phase_mode);
      if (std::abs(tpc_r - tpc_s) <= kink_margin) return false;
    }
  }
  return true;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences of the library loss with step h against its analytic
/// gradient w.r.t. the current synthetic frame. Relative error uses
/// max(|analytic|, |numeric|, scale_floor) as denominator.
inline GradientCheck check_gradient(const Frame& rp, const Frame& rc, const Frame& sp, const Frame& sc,
                                    const WtfrConfig& cfg, double h = 1e-6, double amp_floor = 1e-3,
                                    double kink_margin = 1e-6, double scale_floor = 1e-6) {
  GradientCheck out;
  const auto analytic = wtfr_loss(rp, rc, sp, sc, cfg, true);
  for (std::size_t c = 0; c < sc.channel_count(); ++c) {
    if (!channel_qualifies(rp.channel(c), rc.channel(c), sp.channel(c), sc.channel(c), cfg, amp_floor,
                           kink_margin)) {
      continue;
    }
    for (std::size_t i = 0; i < sc.channel(c).size(); ++i) {
      Frame plus = sc;
      Frame minus = sc;
      plus.channel(c)[i] += h;
      minus.channel(c)[i] -= h;
      const double numeric =
          (wtfr_loss(rp, rc, sp, plus, cfg).total - wtfr_loss(rp, rc, sp, minus, cfg).total) / (2 * h);
      const double g = analytic.gradient->channel(c)[i];
      const double denom = std::max({std::abs(g), std::abs(numeric), scale_floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(g - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace freqcons::oracle
