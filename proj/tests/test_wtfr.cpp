#include <gtest/gtest.h>

#include <cmath>

#include "freqcons/wtfr.hpp"
#include "support/oracles.hpp"
#include "support/wtfr_oracle.hpp"

using namespace freqcons;
using freqcons::oracle::Rng;

TEST(WeightGrid, ReferenceValuesOnEightByEight) {
  const auto w = weight_grid(8, 8, 0.05);
  EXPECT_EQ(w(0, 0), 1.0);
  // 32^0.05 = exp(0.05 ln 32)
  const double r32 = std::exp(0.05 * std::log(32.0));
  EXPECT_NEAR(w(4, 4), r32 + 1.0, 1e-12);
  EXPECT_NEAR(w(4, 4), 2.1892071150027210, 1e-12);
  EXPECT_NEAR(w(2, 2), r32 - std::exp(0.05 * std::log(8.0)) + 1.0, 1e-12);
  EXPECT_NEAR(w(2, 2), 1.0796, 5e-5);
}

TEST(WeightGrid, BoundsHoldOnOddAndEvenShapes) {
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{7, 5}, {8, 12}, {1, 1}, {192, 256}}) {
    const auto w = weight_grid(m, n, 0.05);
    const double upper = std::pow(m * m / 4.0 + n * n / 4.0, 0.05) + 1.0;
    for (double v : w.values()) {
      EXPECT_GE(v, 1.0 - 1e-15);
      EXPECT_LE(v, upper + 1e-15);
    }
  }
}

TEST(WeightGrid, ZeroExponentIsFlat) {
  const auto w = weight_grid(4, 6, 0.0);
  for (double v : w.values()) EXPECT_EQ(v, 1.0);
}

TEST(WtfrConfigTest, DefaultsAndValidation) {
  const WtfrConfig cfg;
  EXPECT_EQ(cfg.alpha, 0.5);
  EXPECT_EQ(cfg.beta, 1.0);
  EXPECT_EQ(cfg.delta, 0.05);
  EXPECT_EQ(cfg.phase_mode, PhaseMode::Wrapped);
  EXPECT_TRUE(cfg.weighting);
  EXPECT_FALSE(cfg.gradient_through_prev);
  EXPECT_THROW((WtfrConfig{0.0, 0.0}).validate(), InvalidInput);
  EXPECT_THROW((WtfrConfig{-1.0, 1.0}).validate(), InvalidInput);
  EXPECT_THROW((WtfrConfig{1.0, 1.0, std::nan("")}).validate(), InvalidInput);
}

TEST(WtfrConfigTest, ParsesFlatKeyValueFiles) {
  const auto cfg = parse_wtfr_config(
      "# comment\nalpha = 0.25\n beta=2 \ndelta = 0.1  # trailing\nphase_mode = raw\nweighting = off\n");
  EXPECT_EQ(cfg.alpha, 0.25);
  EXPECT_EQ(cfg.beta, 2.0);
  EXPECT_EQ(cfg.delta, 0.1);
  EXPECT_EQ(cfg.phase_mode, PhaseMode::Raw);
  EXPECT_FALSE(cfg.weighting);
  EXPECT_THROW(parse_wtfr_config("gamma = 1\n"), InvalidInput);
  EXPECT_THROW(parse_wtfr_config("alpha = abc\n"), InvalidInput);
  EXPECT_THROW(parse_wtfr_config("alpha 1\n"), InvalidInput);
  EXPECT_THROW(parse_wtfr_config("phase_mode = sideways\n"), InvalidInput);
}

TEST(WtfrLoss, IdenticalSequencesGiveExactZero) {
  Rng rng(1);
  const auto a = oracle::random_frame(rng, 3, 6, 6);
  const auto b = oracle::random_frame(rng, 3, 6, 6);
  const auto r = wtfr_loss(a, b, a, b, WtfrConfig{}, true);
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.l_tac, 0.0);
  EXPECT_EQ(r.l_tpc, 0.0);
  ASSERT_TRUE(r.gradient.has_value());
  for (const auto& ch : r.gradient->channels()) {
    for (double v : ch.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(WtfrLoss, AlphaZeroIsPhaseOnly) {
  Rng rng(2);
  const auto f = [&] { return oracle::random_frame(rng, 1, 5, 5); };
  const auto rp = f(), rc = f(), sp = f(), sc = f();
  WtfrConfig cfg;
  cfg.alpha = 0.0;
  const auto r = wtfr_loss(rp, rc, sp, sc, cfg);
  EXPECT_EQ(r.total, cfg.beta * r.l_tpc);
  EXPECT_GT(r.l_tac, 0.0);
}

TEST(WtfrLoss, TotalIsWeightedSum) {
  Rng rng(3);
  const auto f = [&] { return oracle::random_frame(rng, 3, 4, 7); };
  const auto rp = f(), rc = f(), sp = f(), sc = f();
  WtfrConfig cfg{0.3, 1.7};
  const auto r = wtfr_loss(rp, rc, sp, sc, cfg);
  EXPECT_NEAR(r.total, 0.3 * r.l_tac + 1.7 * r.l_tpc, 1e-12);
}

TEST(WtfrLoss, MatchesNaiveDftRecomputation) {
  Rng rng(4);
  for (int seed = 0; seed < 8; ++seed) {
    const std::size_t n = seed % 2 == 0 ? 4 : 8;
    const auto f = [&] { return oracle::random_frame(rng, seed % 3 == 0 ? 3 : 1, n, n); };
    const auto rp = f(), rc = f(), sp = f(), sc = f();
    for (auto mode : {PhaseMode::Wrapped, PhaseMode::Raw}) {
      for (bool weighting : {true, false}) {
        WtfrConfig cfg;
        cfg.phase_mode = mode;
        cfg.weighting = weighting;
        const auto got = wtfr_loss(rp, rc, sp, sc, cfg);
        const auto want = oracle::oracle_wtfr(rp, rc, sp, sc, cfg);
        EXPECT_NEAR(got.total, want.total, 1e-10);
        EXPECT_NEAR(got.l_tac, want.l_tac, 1e-10);
        EXPECT_NEAR(got.l_tpc, want.l_tpc, 1e-10);
      }
    }
  }
}

TEST(WtfrLoss, UnweightedEqualsLiteralOnes) {
  Rng rng(5);
  const auto f = [&] { return oracle::random_frame(rng, 1, 6, 4); };
  const auto rp = f(), rc = f(), sp = f(), sc = f();
  WtfrConfig off;
  off.weighting = false;
  WtfrConfig flat;
  flat.delta = 0.0;  // w == 1 everywhere
  EXPECT_DOUBLE_EQ(wtfr_loss(rp, rc, sp, sc, off).total, wtfr_loss(rp, rc, sp, sc, flat).total);
}

TEST(WtfrLoss, SymmetricInReferenceAndSynthetic) {
  Rng rng(6);
  for (int i = 0; i < 10; ++i) {
    const auto f = [&] { return oracle::random_frame(rng, 3, 5, 6); };
    const auto rp = f(), rc = f(), sp = f(), sc = f();
    const auto a = wtfr_loss(rp, rc, sp, sc, WtfrConfig{});
    const auto b = wtfr_loss(sp, sc, rp, rc, WtfrConfig{});
    EXPECT_EQ(a.total, b.total);
    EXPECT_GE(a.total, 0.0);
  }
}

TEST(WtfrLoss, RejectsMismatchAndNonFinite) {
  const Frame a(FrameGrid(4, 4, 0.5));
  const Frame b(FrameGrid(4, 5, 0.5));
  EXPECT_THROW(wtfr_loss(a, a, a, b, WtfrConfig{}), InvalidInput);
  FrameGrid bad(4, 4, 0.5);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(wtfr_loss(a, a, a, Frame(bad), WtfrConfig{}), InvalidInput);
}

TEST(WtfrGradient, MatchesCentralDifferences) {
  Rng rng(7);
  std::size_t total_checked = 0;
  for (int seed = 0; seed < 6; ++seed) {
    const std::size_t rows = 4 + static_cast<std::size_t>(seed % 3);
    const std::size_t cols = 4 + static_cast<std::size_t>((seed + 1) % 2);
    const auto f = [&] { return oracle::random_frame(rng, seed % 2 ? 3 : 1, rows, cols); };
    const auto rp = f(), rc = f(), sp = f(), sc = f();
    for (auto mode : {PhaseMode::Wrapped, PhaseMode::Raw}) {
      WtfrConfig cfg;
      cfg.phase_mode = mode;
      const auto check = oracle::check_gradient(rp, rc, sp, sc, cfg);
      EXPECT_LT(check.max_rel_error, 1e-4) << "seed " << seed;
      total_checked += check.checked;
    }
  }
  EXPECT_GT(total_checked, 0u);
}

TEST(WtfrGradient, PreviousFrameGradientMatchesCentralDifferences) {
  Rng rng(8);
  const auto f = [&] { return oracle::random_frame(rng, 1, 4, 5); };
  const auto rp = f(), rc = f(), sp = f(), sc = f();
  WtfrConfig cfg;
  cfg.gradient_through_prev = true;
  ASSERT_TRUE(oracle::channel_qualifies(rp.channel(0), rc.channel(0), sp.channel(0), sc.channel(0), cfg, 1e-3, 1e-6));
  const auto r = wtfr_loss(rp, rc, sp, sc, cfg, true);
  ASSERT_TRUE(r.gradient_prev.has_value());
  const double h = 1e-6;
  for (std::size_t i = 0; i < sp.channel(0).size(); ++i) {
    Frame plus = sp;
    Frame minus = sp;
    plus.channel(0)[i] += h;
    minus.channel(0)[i] -= h;
    const double numeric = (wtfr_loss(rp, rc, plus, sc, cfg).total - wtfr_loss(rp, rc, minus, sc, cfg).total) / (2 * h);
    EXPECT_NEAR(r.gradient_prev->channel(0)[i], numeric, 1e-4 * std::max(1e-3, std::abs(numeric)));
  }
}

TEST(WtfrSequence, MeansAndEdgeCases) {
  Rng rng(9);
  std::vector<Frame> ref_frames;
  std::vector<Frame> syn_frames;
  for (int t = 0; t < 3; ++t) {
    ref_frames.push_back(oracle::random_frame(rng, 3, 6, 6));
    syn_frames.push_back(oracle::random_frame(rng, 3, 6, 6));
  }
  const VideoSequence ref(ref_frames);
  const VideoSequence syn(syn_frames);
  const WtfrConfig cfg;

  const auto same = wtfr_sequence_loss(ref, ref, cfg);
  EXPECT_EQ(same.mean.total, 0.0);

  const auto seq = wtfr_sequence_loss(ref, syn, cfg);
  ASSERT_EQ(seq.transitions.size(), 2u);
  const auto a = wtfr_loss(ref_frames[0], ref_frames[1], syn_frames[0], syn_frames[1], cfg);
  const auto b = wtfr_loss(ref_frames[1], ref_frames[2], syn_frames[1], syn_frames[2], cfg);
  EXPECT_NEAR(seq.mean.total, (a.total + b.total) / 2, 1e-14);
  EXPECT_NEAR(seq.mean.l_tac, (a.l_tac + b.l_tac) / 2, 1e-14);

  const VideoSequence ref2({ref_frames[0], ref_frames[1]});
  const VideoSequence syn2({syn_frames[0], syn_frames[1]});
  EXPECT_EQ(wtfr_sequence_loss(ref2, syn2, cfg).mean.total, a.total);

  EXPECT_THROW(wtfr_sequence_loss(ref, syn2, cfg), InvalidInput);
  EXPECT_EQ(wtfr_sequence_loss(ref, syn, cfg, 4).mean.total, seq.mean.total);
}
