#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "oracles.hpp"

using mores::HyperParams;
using mores::Matrix;
using mores::Sample;
using mores::Vector;

namespace {

/// Predicts from a lookup keyed by the input's first entry; learns nothing.
struct LookupLearner {
    std::map<double, Vector> table;
    std::size_t d = 1;
    std::size_t m = 1;
    std::size_t input_dim() const { return d; }
    std::size_t output_dim() const { return m; }
    Vector predict(std::span<const double> x) const { return table.at(x[0]); }
    Vector step(const Sample& s) { return predict(s.x); }
};

struct ZeroLearner {
    std::size_t d = 1;
    std::size_t m = 1;
    std::size_t input_dim() const { return d; }
    std::size_t output_dim() const { return m; }
    Vector predict(std::span<const double>) const { return Vector(m, 0.0); }
    Vector step(const Sample&) { return Vector(m, 0.0); }
};

/// Fails numerically on a chosen round.
struct FailingLearner : ZeroLearner {
    std::size_t fail_at = 3;
    std::size_t seen = 0;
    Vector step(const Sample& s) {
        if (++seen == fail_at) throw mores::Error(mores::ErrorKind::NotPositiveDefinite, "boom");
        return ZeroLearner::step(s);
    }
};

std::vector<Sample> unit_stream(std::size_t n, std::size_t m) {
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({{static_cast<double>(i)}, Vector(m, i % 2 ? 1.0 : -1.0)});
    return out;
}

}  // namespace

TEST(Prequential, PerfectPredictorScoresZero) {
    const auto stream = unit_stream(20, 2);
    LookupLearner l;
    l.m = 2;
    for (const auto& s : stream) l.table[s.x[0]] = s.y;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(stream));
    EXPECT_EQ(rep.average_mae, 0.0);
    EXPECT_EQ(rep.per_output_mae, (Vector{0, 0}));
    EXPECT_TRUE(rep.complete);
}

TEST(Prequential, ZeroPredictorOnUnitTargets) {
    const auto stream = unit_stream(15, 3);
    ZeroLearner l;
    l.m = 3;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(stream));
    EXPECT_EQ(rep.per_output_mae, (Vector{1, 1, 1}));
    EXPECT_EQ(rep.average_mae, 1.0);
    EXPECT_EQ(rep.mae_curve.size(), 15u);
    EXPECT_EQ(rep.evaluated_rounds, 15u);
}

TEST(Prequential, SkipFirstLearnsButDoesNotScore) {
    const auto stream = unit_stream(10, 1);
    ZeroLearner l;
    mores::ReportOptions opt;
    opt.skip_first = 4;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(stream), opt);
    EXPECT_EQ(rep.total_rounds, 10u);
    EXPECT_EQ(rep.evaluated_rounds, 6u);
    EXPECT_EQ(rep.rounds.front().t, 5u);
}

TEST(Prequential, NumericalFailureYieldsPartialReport) {
    const auto stream = unit_stream(10, 1);
    FailingLearner l;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(stream));
    EXPECT_FALSE(rep.complete);
    EXPECT_EQ(rep.failed_round, 3u);
    EXPECT_EQ(rep.evaluated_rounds, 2u);
    EXPECT_EQ(rep.error_kind, mores::ErrorKind::NotPositiveDefinite);
}

TEST(Prequential, MaeRecomputableFromLoggedPredictions) {
    mores::SynthConfig cfg;
    cfg.seed = 5;
    const auto s = mores::gen_paper_synthetic(cfg);
    mores::MoresLearner l(11, 3, HyperParams{});
    mores::ReportOptions opt;
    opt.keep_predictions = true;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(s.samples), opt);

    // Independent replay of the absolute errors.
    std::vector<double> sums(3, 0.0);
    for (std::size_t n = 0; n < s.samples.size(); ++n) {
        double avg = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            sums[j] += std::abs(s.samples[n].y[j] - rep.predictions[n][j]);
            avg += sums[j] / static_cast<double>(n + 1);
        }
        EXPECT_NEAR(rep.mae_curve[n], avg / 3.0, 1e-12);
    }
    const auto replay = mores::score_predictions(s.samples, rep.predictions);
    EXPECT_NEAR(replay.average_mae, rep.average_mae, 1e-12);
    double mean = 0.0;
    for (double v : rep.per_output_mae) mean += v / 3.0;
    EXPECT_NEAR(rep.average_mae, mean, 1e-15);
}

TEST(Prequential, PredictionsAreCausal) {
    // Each logged prediction must equal what a fresh learner fed only the
    // earlier samples would predict.
    const auto s = mores::gen_noiseless_linear(6, 30, 3, 2);
    mores::MoresLearner l(3, 2, HyperParams{});
    mores::ReportOptions opt;
    opt.keep_predictions = true;
    const auto rep = mores::prequential_run(l, std::span<const Sample>(s.samples), opt);
    mores::MoresLearner shadow(3, 2, HyperParams{});
    for (std::size_t n = 0; n < s.samples.size(); ++n) {
        EXPECT_EQ(shadow.predict(s.samples[n].x), rep.predictions[n]);
        shadow.step(s.samples[n]);
    }
}

TEST(Prequential, DiagnosticsDoNotChangeTheRun) {
    mores::SynthConfig cfg;
    cfg.seed = 2;
    cfg.samples = 120;
    const auto s = mores::gen_paper_synthetic(cfg);
    mores::MoresLearner plain(11, 3, HyperParams{});
    mores::MoresLearner probed(11, 3, HyperParams{});
    mores::ReportOptions opt;
    opt.diagnostics = true;
    opt.structure = true;
    opt.diagnostics_every = 7;
    opt.p_ref = s.p_real;
    const auto a = mores::prequential_run(plain, std::span<const Sample>(s.samples));
    const auto b = mores::prequential_run(probed, std::span<const Sample>(s.samples), opt);
    EXPECT_EQ(a.mae_curve, b.mae_curve);
    EXPECT_EQ(plain.coefficients(), probed.coefficients());
    std::size_t with_diag = 0;
    for (const auto& r : b.rounds) {
        if (!r.p_dist) continue;
        ++with_diag;
        EXPECT_TRUE(r.t % 7 == 0 || r.t == 120);
        EXPECT_GT(*r.gamma_eig_min, 0.0);
        EXPECT_LE(*r.gamma_eig_max, 1.0 + 1e-8);
        ASSERT_TRUE(r.structure.has_value());
    }
    EXPECT_EQ(with_diag, 120u / 7 + 1);
}

TEST(Structure, IdentityGammaHasNoCorrelation) {
    auto st = mores::RegressionState::initial(2, 3);
    const auto s = mores::structure_diagnostics(st);
    EXPECT_EQ(s.residual_correlation, Matrix::identity(3));
}

TEST(Structure, HandBuiltGamma) {
    auto st = mores::RegressionState::initial(1, 2);
    const Matrix gamma_inv = Matrix::identity(2) + Matrix{{1, 0.5}, {0.5, 1}};
    st.gamma = oracle::inverse(gamma_inv);
    st.gamma = mores::symmetrized(st.gamma);
    const auto s = mores::structure_diagnostics(st);
    EXPECT_NEAR(s.residual_correlation(0, 1), 0.5, 1e-12);
    EXPECT_NEAR(s.residual_correlation(1, 0), 0.5, 1e-12);
}

TEST(Structure, CorrelationNormalizationZeroVariance) {
    const Matrix c = mores::correlation_normalize(Matrix{{0, 0}, {0, 2}});
    EXPECT_EQ(c, Matrix::identity(2));
}

TEST(ConvergenceTrace, FrozenLearnerAtReference) {
    struct Frozen : ZeroLearner {
        Matrix p;
        const Matrix& coefficients() const { return p; }
    };
    const auto s = mores::gen_noiseless_linear(3, 20, 2, 1);
    Frozen l;
    l.d = 2;
    l.p = s.p_real;
    const auto trace = mores::convergence_trace(l, std::span<const Sample>(s.samples), s.p_real);
    ASSERT_EQ(trace.size(), 20u);
    for (double v : trace) EXPECT_EQ(v, 0.0);
}

TEST(ConvergenceTrace, NoiselessStreamIsNonIncreasing) {
    const auto s = mores::gen_noiseless_linear(13, 150, 6, 3);
    HyperParams hp;
    hp.mu = 1.0;
    mores::MoresLearner l(6, 3, hp);
    const auto trace = mores::convergence_trace(l, std::span<const Sample>(s.samples), s.p_real);
    for (std::size_t t = 1; t < trace.size(); ++t) EXPECT_LE(trace[t], trace[t - 1] + 1e-10);
}

TEST(Sweep, SingletonGridMatchesSingleRun) {
    const auto s = mores::gen_drifting(4, 120, 4, 2, 60, 0.1);
    HyperParams hp;
    hp.alpha = 0.5;
    const auto rows = mores::sweep({{"alpha", {0.5}}}, s.samples, HyperParams{});
    ASSERT_EQ(rows.size(), 1u);
    mores::MoresLearner l(4, 2, hp);
    const auto rep = mores::prequential_run(l, std::span<const Sample>(s.samples));
    EXPECT_EQ(*rows[0].average_mae, rep.average_mae);
}

TEST(Sweep, CardinalityAndThreadIndependence) {
    const auto s = mores::gen_drifting(4, 80, 3, 2, 40, 0.1);
    const std::vector<mores::GridAxis> grid{{"alpha", {0.1, 1, 10}}, {"mu", {0.5, 0.9}}};
    const auto one = mores::sweep(grid, s.samples, HyperParams{}, {}, 1);
    const auto many = mores::sweep(grid, s.samples, HyperParams{}, {}, 4);
    ASSERT_EQ(one.size(), 6u);
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(one[i].params, many[i].params);
        EXPECT_EQ(*one[i].average_mae, *many[i].average_mae);
    }
    EXPECT_EQ(one[1].params.at("alpha"), 0.1);
    EXPECT_EQ(one[1].params.at("mu"), 0.9);
}

TEST(Sweep, InvalidCellRecordsErrorOthersRun) {
    const auto s = mores::gen_drifting(4, 40, 3, 2, 20, 0.1);
    const auto rows = mores::sweep({{"mu", {0.5, 1.5}}}, s.samples, HyperParams{});
    EXPECT_TRUE(rows[0].average_mae.has_value());
    EXPECT_FALSE(rows[1].average_mae.has_value());
    EXPECT_NE(rows[1].error.find("mu"), std::string::npos);
    EXPECT_THROW(mores::sweep({{"lambda", {1}}}, s.samples, HyperParams{}), mores::Error);
}

TEST(Sweep, InteriorForgettingFactorWinsOnDrift) {
    const auto s = mores::gen_drifting(1, 400, 10, 3, 200, 0.1);
    std::vector<double> mus;
    for (int k = 0; k <= 10; ++k) mus.push_back(k / 10.0);
    const auto rows = mores::sweep({{"mu", mus}}, s.samples, HyperParams{});
    double best_interior = INFINITY;
    for (std::size_t k = 1; k + 1 < rows.size(); ++k) best_interior = std::min(best_interior, *rows[k].average_mae);
    EXPECT_LT(best_interior, *rows.front().average_mae);
    EXPECT_LT(best_interior, *rows.back().average_mae);
}

TEST(Bench, ReportsPositiveRates) {
    const auto r = mores::throughput_bench(3, 2, 200, HyperParams{}, 10);
    EXPECT_GT(r.updates_per_second, 0.0);
    EXPECT_GT(r.median_step_seconds, 0.0);
    EXPECT_GE(r.median_phase.solve_p, 0.0);
    EXPECT_THROW(mores::throughput_bench(3, 2, 0, HyperParams{}), mores::Error);
}
