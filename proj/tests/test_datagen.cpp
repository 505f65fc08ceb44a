#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"

using mores::Matrix;
using mores::Sample;
using mores::Vector;

TEST(Rng, SeedDeterminesSequence) {
    mores::Rng a(5);
    mores::Rng b(5);
    mores::Rng c(6);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        differs = differs || va != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, NormalMoments) {
    mores::Rng rng(1);
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        s += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(PaperSynthetic, ShapeAndBiasColumn) {
    const auto s = mores::gen_paper_synthetic({});
    ASSERT_EQ(s.samples.size(), 500u);
    EXPECT_EQ(s.p_real.rows(), 3u);
    EXPECT_EQ(s.p_real.cols(), 11u);
    for (const auto& smp : s.samples) {
        EXPECT_EQ(smp.x.size(), 11u);
        EXPECT_EQ(smp.x.back(), 1.0);
        EXPECT_EQ(smp.y.size(), 3u);
    }
    for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(s.p_real(2, i), s.p_real(0, i) + s.p_real(1, i));
}

TEST(PaperSynthetic, NoiselessThirdOutputIsTheSum) {
    mores::SynthConfig cfg;
    cfg.noise_std = 0.0;
    cfg.seed = 3;
    for (const auto& smp : mores::gen_paper_synthetic(cfg).samples) EXPECT_EQ(smp.y[2], smp.y[0] + smp.y[1]);
}

TEST(PaperSynthetic, Reproducible) {
    mores::SynthConfig cfg;
    cfg.seed = 42;
    const auto a = mores::gen_paper_synthetic(cfg);
    const auto b = mores::gen_paper_synthetic(cfg);
    for (std::size_t n = 0; n < a.samples.size(); ++n) {
        EXPECT_EQ(a.samples[n].x, b.samples[n].x);
        EXPECT_EQ(a.samples[n].y, b.samples[n].y);
    }
    cfg.seed = 43;
    EXPECT_NE(mores::gen_paper_synthetic(cfg).samples[0].y, a.samples[0].y);
}

TEST(PaperSynthetic, ResidualCorrelationOfSummedNoise) {
    // Residuals e1 and e1 + e2 + e3 have correlation 1/√3.
    mores::SynthConfig cfg;
    cfg.samples = 100000;
    cfg.d_features = 1;
    cfg.seed = 9;
    const auto s = mores::gen_paper_synthetic(cfg);
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (const auto& smp : s.samples) {
        const Vector f = mores::multiply(s.p_real, std::span<const double>(smp.x));
        const double a = smp.y[0] - f[0];
        const double b = smp.y[2] - f[2];
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }
    const double n = static_cast<double>(cfg.samples);
    const double cov = sab / n - sa * sb / (n * n);
    const double corr = cov / std::sqrt((saa / n - sa * sa / (n * n)) * (sbb / n - sb * sb / (n * n)));
    EXPECT_NEAR(corr, 1.0 / std::sqrt(3.0), 0.02);
}

TEST(PaperSynthetic, RejectsBadConfig) {
    mores::SynthConfig cfg;
    cfg.samples = 0;
    EXPECT_THROW(mores::gen_paper_synthetic(cfg), mores::Error);
    cfg = {};
    cfg.noise_std = -1;
    EXPECT_THROW(mores::gen_paper_synthetic(cfg), mores::Error);
}

TEST(NoiselessLinear, ExactAndFullRank) {
    const std::size_t d = 6;
    const auto s = mores::gen_noiseless_linear(4, 10 * d, d, 2);
    mores::SufficientStats st(d, 2, 1.0);
    for (const auto& smp : s.samples) {
        const Vector f = mores::multiply(s.p_real, std::span<const double>(smp.x));
        EXPECT_EQ(f, smp.y);
        mores::fold_in_place(st, smp);
    }
    EXPECT_GT(mores::sym_eig(st.c_xx).values.front(), 0.0);
    const auto again = mores::gen_noiseless_linear(4, 10 * d, d, 2);
    EXPECT_EQ(again.p_real, s.p_real);
}

TEST(Drifting, SwitchAtEndReproducesNoiselessStream) {
    const auto a = mores::gen_drifting(8, 50, 4, 2, 50);
    const auto b = mores::gen_noiseless_linear(8, 50, 4, 2);
    EXPECT_EQ(a.p_before, b.p_real);
    for (std::size_t n = 0; n < 50; ++n) {
        EXPECT_EQ(a.samples[n].x, b.samples[n].x);
        EXPECT_EQ(a.samples[n].y, b.samples[n].y);
    }
}

TEST(Drifting, PiecewiseCoefficients) {
    const auto s = mores::gen_drifting(8, 60, 4, 2, 20);
    EXPECT_NE(s.p_before, s.p_after);
    for (std::size_t n = 0; n < 60; ++n) {
        const Matrix& p = n < 20 ? s.p_before : s.p_after;
        EXPECT_EQ(mores::multiply(p, std::span<const double>(s.samples[n].x)), s.samples[n].y) << n;
    }
    EXPECT_THROW(mores::gen_drifting(8, 60, 4, 2, 0), mores::Error);
    EXPECT_THROW(mores::gen_drifting(8, 60, 4, 2, 61), mores::Error);
}

TEST(Drifting, ForgettingRecoversAfterTheSwitch) {
    const std::size_t d = 5;
    const std::size_t switch_at = 100;
    const auto s = mores::gen_drifting(2, 200, d, 2, switch_at, 0.05);
    const auto post_switch_mae = [&](double mu) {
        mores::HyperParams hp;
        hp.mu = mu;
        mores::MoresLearner l(d, 2, hp);
        const auto rep = mores::prequential_run(l, std::span<const Sample>(s.samples));
        double sum = 0.0;
        for (std::size_t n = switch_at + 5 * d; n < rep.rounds.size(); ++n)
            sum += rep.rounds[n].abs_err[0] + rep.rounds[n].abs_err[1];
        return sum;
    };
    EXPECT_LT(post_switch_mae(0.9), post_switch_mae(1.0));
}
