#include <gtest/gtest.h>

#include "oracles.hpp"

using mores::Matrix;
using mores::Sample;
using mores::SufficientStats;

TEST(SufficientStats, FirstFoldIsOuterProduct) {
    SufficientStats s(2, 1, 0.9);
    mores::fold_in_place(s, Sample{{1, 2}, {0}});
    EXPECT_EQ(s.c_xx, (Matrix{{1, 2}, {2, 4}}));
    EXPECT_EQ(s.count, 1u);
    mores::fold_in_place(s, Sample{{0, 1}, {0}});
    EXPECT_NEAR(s.c_xx(0, 0), 0.9, 1e-15);
    EXPECT_NEAR(s.c_xx(0, 1), 1.8, 1e-15);
    EXPECT_NEAR(s.c_xx(1, 0), 1.8, 1e-15);
    EXPECT_NEAR(s.c_xx(1, 1), 4.6, 1e-15);
    EXPECT_EQ(s.count, 2u);
}

TEST(SufficientStats, ZeroForgettingKeepsOnlyTheCurrentSample) {
    mores::Rng rng(1);
    SufficientStats s(3, 2, 0.0);
    for (int t = 0; t < 10; ++t) {
        Sample smp{{rng.normal(), rng.normal(), rng.normal()}, {rng.normal(), rng.normal()}};
        mores::fold_in_place(s, smp);
        EXPECT_EQ(s.c_xx, Matrix::outer(smp.x, smp.x));
        EXPECT_EQ(s.c_xy, Matrix::outer(smp.x, smp.y));
        EXPECT_EQ(s.c_yy, Matrix::outer(smp.y, smp.y));
    }
}

TEST(SufficientStats, MatchesDirectWeightedSums) {
    mores::Rng rng(2);
    for (double mu : {0.0, 0.5, 0.9, 1.0}) {
        SufficientStats s(4, 3, mu);
        std::vector<std::vector<double>> xs;
        std::vector<std::vector<double>> ys;
        for (int t = 0; t < 30; ++t) {
            Sample smp{{}, {}};
            for (int i = 0; i < 4; ++i) smp.x.push_back(rng.normal());
            for (int j = 0; j < 3; ++j) smp.y.push_back(rng.normal());
            xs.push_back(smp.x);
            ys.push_back(smp.y);
            s = mores::fold(s, smp);
            EXPECT_LE(oracle::rel_diff(s.c_xx, oracle::weighted_outer_sum(xs, xs, mu)), 1e-12);
            EXPECT_LE(oracle::rel_diff(s.c_xy, oracle::weighted_outer_sum(xs, ys, mu)), 1e-12);
            EXPECT_LE(oracle::rel_diff(s.c_yy, oracle::weighted_outer_sum(ys, ys, mu)), 1e-12);
            EXPECT_EQ(s.c_xx, s.c_xx.transposed());
            EXPECT_EQ(s.c_yy, s.c_yy.transposed());
            EXPECT_GE(mores::sym_eig(s.c_xx).values.front(), -1e-9 * (1.0 + s.c_xx.trace()));
        }
        EXPECT_EQ(s.count, 30u);
    }
}

TEST(SufficientStats, FoldByValueLeavesInputUntouched) {
    SufficientStats s(1, 1, 0.5);
    const SufficientStats before = s;
    const SufficientStats after = mores::fold(s, Sample{{2}, {3}});
    EXPECT_EQ(s.c_xx, before.c_xx);
    EXPECT_EQ(s.count, 0u);
    EXPECT_EQ(after.count, 1u);
}

TEST(SufficientStats, RejectsBadShapesAndMu) {
    SufficientStats s(2, 1, 0.5);
    EXPECT_THROW(mores::fold_in_place(s, Sample{{1}, {1}}), mores::Error);
    EXPECT_THROW(mores::fold_in_place(s, Sample{{1, 2}, {1, 2}}), mores::Error);
    EXPECT_THROW(SufficientStats(2, 1, 1.5), mores::Error);
    EXPECT_THROW(SufficientStats(2, 1, -0.1), mores::Error);
}

TEST(WeightedLoss, ZeroForInterpolatingModel) {
    mores::Rng rng(3);
    const Matrix p = rng.normal_matrix(2, 3);
    SufficientStats s(3, 2, 0.8);
    for (int t = 0; t < 12; ++t) {
        Sample smp{{rng.normal(), rng.normal(), rng.normal()}, {}};
        smp.y = mores::multiply(p, std::span<const double>(smp.x));
        mores::fold_in_place(s, smp);
    }
    EXPECT_NEAR(mores::weighted_loss(s, p, Matrix::identity(2)), 0.0, 1e-10);
}

TEST(WeightedLoss, ScalarHandComputation) {
    for (double mu : {0.0, 0.3, 1.0}) {
        SufficientStats s(1, 1, mu);
        mores::fold_in_place(s, Sample{{2}, {3}});
        EXPECT_DOUBLE_EQ(mores::weighted_loss(s, Matrix{{1}}, Matrix{{1}}), 1.0);
    }
}

TEST(WeightedLoss, MatchesBruteForceSumWithGeneralMetric) {
    mores::Rng rng(4);
    for (double mu : {0.0, 0.5, 0.9, 1.0}) {
        SufficientStats s(3, 3, mu);
        std::vector<Sample> history;
        for (int t = 0; t < 25; ++t) {
            Sample smp{{rng.normal(), rng.normal(), rng.normal()}, {rng.normal(), rng.normal(), rng.normal()}};
            history.push_back(smp);
            mores::fold_in_place(s, smp);
        }
        const Matrix p = rng.normal_matrix(3, 3);
        const Matrix gamma = oracle::random_spd(rng, 3);
        const double expected = oracle::weighted_loss(history, mu, p, gamma);
        EXPECT_NEAR(mores::weighted_loss(s, p, gamma), expected, 1e-10 * expected);
    }
}

TEST(WeightedLoss, ClampsRoundOffNegativesAndCountsThem) {
    SufficientStats s(1, 1, 1.0);
    s.c_xx = Matrix{{1}};
    s.c_xy = Matrix{{1}};
    s.c_yy = Matrix{{1 - 1e-12}};  // slightly inconsistent, as after heavy cancellation
    s.xx_spectral.reset();
    mores::LossDiagnostics diag;
    EXPECT_EQ(mores::weighted_loss(s, Matrix{{1}}, Matrix{{1}}, &diag), 0.0);
    EXPECT_EQ(diag.clamped, 1u);
}

TEST(XxSpectral, ReconstructsDenseSumsAcrossRebuilds) {
    mores::Rng rng(21);
    for (const double mu : {0.0, 0.6, 0.95, 1.0}) {
        const std::size_t d = 9;
        SufficientStats s(d, 2, mu);
        const std::size_t limit = s.xx_spectral->max_rank;
        for (std::size_t t = 1; t <= 5 * (limit + 1) + 3; ++t) {
            mores::fold_in_place(s, Sample{rng.normal_vector(d), rng.normal_vector(2)});
            const auto& sp = *s.xx_spectral;
            Matrix inner = Matrix(d, d);
            for (std::size_t i = 0; i < d; ++i) inner(i, i) = sp.theta[i];
            for (const auto& w : sp.w)
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) inner(i, j) += w[i] * w[j];
            const Matrix rebuilt = sp.v * mores::multiply_transposed(inner, sp.v);
            ASSERT_LE(oracle::rel_diff(rebuilt, s.c_xx), 1e-12) << "mu=" << mu << " t=" << t;
            ASSERT_LE(sp.w.size(), limit);
        }
        EXPECT_EQ(s.xx_spectral->rebuilds, mu == 0.0 ? 0u : 5u) << mu;
    }
}
