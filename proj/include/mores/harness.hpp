#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mores/core.hpp"
#include "mores/datagen.hpp"
#include "mores/error.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"

namespace mores {

/// Anything that predicts from x and then learns from (x, y). step() must
/// return the prediction made before the update.
template <class L>
concept Learner = requires(L& learner, const L& cl, std::span<const double> x, const Sample& s) {
    { cl.input_dim() } -> std::convertible_to<std::size_t>;
    { cl.output_dim() } -> std::convertible_to<std::size_t>;
    { cl.predict(x) } -> std::convertible_to<Vector>;
    { learner.step(s) } -> std::convertible_to<Vector>;
};

template <class L>
concept HasCoefficients = requires(const L& l) {
    { l.coefficients() } -> std::convertible_to<Matrix>;
};

template <class L>
concept HasMetricState = requires(const L& l) {
    { l.state() } -> std::same_as<const RegressionState&>;
};

struct StructureDiagnostics {
    Matrix residual_correlation;           // from Γ⁻¹ − I
    Matrix coefficient_change_correlation;  // from Ω⁻¹ − I
};

/// Rescales a symmetric matrix to unit diagonal. Rows with (numerically) zero
/// variance get zero off-diagonals and a unit diagonal.
inline Matrix correlation_normalize(const Matrix& cov, double zero_variance = 1e-14) {
    const std::size_t n = cov.rows();
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double vi = cov(i, i);
            const double vj = cov(j, j);
            if (vi <= zero_variance || vj <= zero_variance) continue;
            out(i, j) = cov(i, j) / std::sqrt(vi * vj);
        }
    }
    return out;
}

/// Learned output structure. Γ⁻¹ − I is a positive multiple of the decayed
/// residual scatter, so its correlation normalization estimates the residual
/// correlation; Ω⁻¹ − I plays the same role for the coefficient changes.
inline StructureDiagnostics structure_diagnostics(const RegressionState& state) {
    const std::size_t m = state.output_dim();
    const Matrix identity = Matrix::identity(m);
    return {correlation_normalize(spd_inverse(state.gamma) - identity),
            correlation_normalize(spd_inverse(state.omega) - identity)};
}

struct ReportOptions {
    std::size_t skip_first = 0;        // rounds learned from but not scored
    bool keep_predictions = false;
    bool diagnostics = false;          // eigen extremes / p_dist / structure
    std::size_t diagnostics_every = 1;
    bool structure = false;            // add correlation matrices to diagnostics
    std::optional<Matrix> p_ref;
};

struct RoundRecord {
    std::uint64_t t = 0;
    Vector abs_err;
    double mae_avg_so_far = 0.0;
    std::optional<double> p_dist;
    std::optional<double> omega_eig_min;
    std::optional<double> omega_eig_max;
    std::optional<double> gamma_eig_min;
    std::optional<double> gamma_eig_max;
    std::optional<StructureDiagnostics> structure;
};

struct EvalReport {
    Vector per_output_mae;
    double average_mae = 0.0;
    std::vector<double> mae_curve;
    std::vector<RoundRecord> rounds;
    std::vector<Vector> predictions;  // only with keep_predictions
    std::uint64_t total_rounds = 0;
    std::uint64_t evaluated_rounds = 0;
    bool complete = true;
    std::optional<ErrorKind> error_kind;
    std::string error;
    std::uint64_t failed_round = 0;
};

namespace detail {

/// Running absolute-error sums.
class MaeAccumulator {
public:
    explicit MaeAccumulator(std::size_t m) : sums_(m, 0.0) {}

    void add(std::span<const double> abs_err) {
        for (std::size_t j = 0; j < sums_.size(); ++j) sums_[j] += abs_err[j];
        ++count_;
    }

    [[nodiscard]] Vector per_output() const {
        Vector out(sums_.size(), 0.0);
        if (count_ == 0) return out;
        for (std::size_t j = 0; j < sums_.size(); ++j) out[j] = sums_[j] / static_cast<double>(count_);
        return out;
    }

    [[nodiscard]] double average() const {
        const Vector v = per_output();
        if (v.empty()) return 0.0;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return count_; }

private:
    Vector sums_;
    std::uint64_t count_ = 0;
};

inline void finalize(EvalReport& report, const MaeAccumulator& acc) {
    report.per_output_mae = acc.per_output();
    report.average_mae = acc.average();
    report.evaluated_rounds = acc.count();
}

}  // namespace detail

/// Test-then-train evaluation: each sample is scored against the learner's
/// prediction before the learner sees its target. On a learner error the run
/// stops and the partial report is returned with complete = false.
template <Learner L>
EvalReport prequential_run(L& learner, std::span<const Sample> stream, const ReportOptions& options = {}) {
    const std::size_t m = learner.output_dim();
    EvalReport report;
    detail::MaeAccumulator acc(m);
    const std::size_t every = std::max<std::size_t>(1, options.diagnostics_every);
    if (options.p_ref && (options.p_ref->rows() != m || options.p_ref->cols() != learner.input_dim())) {
        throw Error(ErrorKind::DimensionMismatch, "prequential_run: reference matrix " + options.p_ref->shape());
    }

    for (std::size_t n = 0; n < stream.size(); ++n) {
        const Sample& sample = stream[n];
        const std::uint64_t t = n + 1;
        Vector prediction;
        try {
            if (sample.x.size() != learner.input_dim() || sample.y.size() != m) {
                throw Error(ErrorKind::DimensionMismatch, "sample " + std::to_string(t) + " has the wrong shape");
            }
            prediction = learner.predict(sample.x);
            (void)learner.step(sample);
        } catch (const Error& e) {
            report.complete = false;
            report.error_kind = e.kind();
            report.error = e.what();
            report.failed_round = t;
            break;
        }
        report.total_rounds = t;
        if (t <= options.skip_first) continue;

        RoundRecord rec;
        rec.t = t;
        rec.abs_err.resize(m);
        for (std::size_t j = 0; j < m; ++j) rec.abs_err[j] = std::abs(sample.y[j] - prediction[j]);
        acc.add(rec.abs_err);
        rec.mae_avg_so_far = acc.average();
        report.mae_curve.push_back(rec.mae_avg_so_far);
        if (options.keep_predictions) report.predictions.push_back(prediction);

        if (options.diagnostics && (t % every == 0 || n + 1 == stream.size())) {
            if constexpr (HasCoefficients<L>) {
                if (options.p_ref) rec.p_dist = frobenius_norm(Matrix(learner.coefficients()) - *options.p_ref);
            }
            if constexpr (HasMetricState<L>) {
                const RegressionState& st = learner.state();
                const auto om = sym_eig(st.omega);
                const auto ga = sym_eig(st.gamma);
                rec.omega_eig_min = om.values.front();
                rec.omega_eig_max = om.values.back();
                rec.gamma_eig_min = ga.values.front();
                rec.gamma_eig_max = ga.values.back();
                if (options.structure) rec.structure = structure_diagnostics(st);
            }
        }
        report.rounds.push_back(std::move(rec));
    }
    detail::finalize(report, acc);
    return report;
}

/// ‖P_t − P_ref‖_F after every step.
template <Learner L>
    requires HasCoefficients<L>
std::vector<double> convergence_trace(L& learner, std::span<const Sample> stream, const Matrix& p_ref) {
    if (p_ref.rows() != learner.output_dim() || p_ref.cols() != learner.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "convergence_trace: reference matrix " + p_ref.shape());
    }
    std::vector<double> trace;
    trace.reserve(stream.size());
    for (const Sample& s : stream) {
        (void)learner.step(s);
        trace.push_back(frobenius_norm(Matrix(learner.coefficients()) - p_ref));
    }
    return trace;
}

/// Scores a prediction log produced elsewhere (one vector per round) against a
/// stream, with the same MAE definition as prequential_run.
inline EvalReport score_predictions(std::span<const Sample> stream, std::span<const Vector> predictions,
                                    std::size_t skip_first = 0) {
    if (predictions.size() != stream.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "score_predictions: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(stream.size()) + " samples");
    }
    const std::size_t m = stream.empty() ? 0 : stream.front().y.size();
    EvalReport report;
    detail::MaeAccumulator acc(m);
    for (std::size_t n = 0; n < stream.size(); ++n) {
        const std::uint64_t t = n + 1;
        report.total_rounds = t;
        if (predictions[n].size() != m || stream[n].y.size() != m) {
            throw Error(ErrorKind::DimensionMismatch, "score_predictions: round " + std::to_string(t) + " has the wrong length");
        }
        if (t <= skip_first) continue;
        RoundRecord rec;
        rec.t = t;
        rec.abs_err.resize(m);
        for (std::size_t j = 0; j < m; ++j) rec.abs_err[j] = std::abs(stream[n].y[j] - predictions[n][j]);
        acc.add(rec.abs_err);
        rec.mae_avg_so_far = acc.average();
        report.mae_curve.push_back(rec.mae_avg_so_far);
        report.rounds.push_back(std::move(rec));
    }
    detail::finalize(report, acc);
    return report;
}

// ---------------------------------------------------------------------------
// Throughput
// ---------------------------------------------------------------------------

struct BenchReport {
    std::size_t d = 0;
    std::size_t m = 0;
    std::size_t samples = 0;
    std::size_t warmup = 0;
    double updates_per_second = 0.0;
    double median_step_seconds = 0.0;
    PhaseTimings median_phase;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace detail

/// Steady-state MORES update rate on a noisy linear stream of shape (d, m).
/// The first `warmup` steps are run but not timed.
inline BenchReport throughput_bench(std::size_t d, std::size_t m, std::size_t samples, const HyperParams& hp,
                                    std::size_t warmup = 200, std::uint64_t seed = 1) {
    if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "bench dimensions must be >= 1");
    if (samples < 1) throw Error(ErrorKind::InvalidConfig, "samples must be >= 1");
    hp.validate();

    Rng rng(seed);
    const Matrix p_true = rng.normal_matrix(m, d);
    const auto draw = [&] {
        Sample s{Vector(d), {}};
        for (auto& v : s.x) v = rng.normal();
        s.y = multiply(p_true, std::span<const double>(s.x));
        for (auto& v : s.y) v += 0.1 * rng.normal();
        return s;
    };

    MoresLearner learner(d, m, hp);
    for (std::size_t n = 0; n < warmup; ++n) (void)learner.step(draw());

    std::vector<Sample> stream;
    stream.reserve(samples);
    for (std::size_t n = 0; n < samples; ++n) stream.push_back(draw());

    using clock = std::chrono::steady_clock;
    std::vector<double> step_s(samples);
    std::vector<double> fold_s(samples);
    std::vector<double> p_s(samples);
    std::vector<double> omega_s(samples);
    std::vector<double> gamma_s(samples);
    const auto start = clock::now();
    for (std::size_t n = 0; n < samples; ++n) {
        PhaseTimings phases;
        const auto t0 = clock::now();
        (void)learner.step(stream[n], &phases);
        step_s[n] = std::chrono::duration<double>(clock::now() - t0).count();
        fold_s[n] = phases.fold;
        p_s[n] = phases.solve_p;
        omega_s[n] = phases.update_omega;
        gamma_s[n] = phases.update_gamma;
    }
    const double total = std::chrono::duration<double>(clock::now() - start).count();

    BenchReport out;
    out.d = d;
    out.m = m;
    out.samples = samples;
    out.warmup = warmup;
    out.updates_per_second = total > 0.0 ? static_cast<double>(samples) / total : 0.0;
    out.median_step_seconds = detail::median(std::move(step_s));
    out.median_phase.fold = detail::median(std::move(fold_s));
    out.median_phase.solve_p = detail::median(std::move(p_s));
    out.median_phase.update_omega = detail::median(std::move(omega_s));
    out.median_phase.update_gamma = detail::median(std::move(gamma_s));
    return out;
}

// ---------------------------------------------------------------------------
// Parameter sweeps
// ---------------------------------------------------------------------------

struct GridAxis {
    std::string name;  // alpha | beta | rho | eta | mu | period
    std::vector<double> values;
};

struct SweepRow {
    std::map<std::string, double> params;
    HyperParams hp;
    std::optional<double> average_mae;
    Vector per_output_mae;
    std::string error;
};

inline bool is_sweep_param(const std::string& name) {
    return name == "alpha" || name == "beta" || name == "rho" || name == "eta" || name == "mu" || name == "period";
}

inline void set_hyper_param(HyperParams& hp, const std::string& name, double value) {
    if (name == "alpha") hp.alpha = value;
    else if (name == "beta") hp.beta = value;
    else if (name == "rho") hp.rho = value;
    else if (name == "eta") hp.eta = value;
    else if (name == "mu") hp.mu = value;
    else if (name == "period") {
        if (!(value >= 1.0) || value != std::floor(value)) {
            throw Error(ErrorKind::InvalidConfig, "period must be a positive integer");
        }
        hp.update_period = static_cast<std::size_t>(value);
    } else {
        throw Error(ErrorKind::InvalidConfig, "unknown sweep parameter '" + name + "'");
    }
}

/// One independent MORES run per point of the Cartesian product of the axes.
/// Cells that fail record their error; the remaining cells still run.
inline std::vector<SweepRow> sweep(const std::vector<GridAxis>& grid, std::span<const Sample> stream,
                                   const HyperParams& base, const ReportOptions& options = {},
                                   unsigned threads = 1) {
    if (grid.empty()) throw Error(ErrorKind::InvalidConfig, "sweep grid is empty");
    if (stream.empty()) throw Error(ErrorKind::InvalidConfig, "sweep stream is empty");
    std::size_t cells = 1;
    for (const auto& axis : grid) {
        if (!is_sweep_param(axis.name)) {
            throw Error(ErrorKind::InvalidConfig, "unknown sweep parameter '" + axis.name + "'");
        }
        if (axis.values.empty()) throw Error(ErrorKind::InvalidConfig, "sweep axis '" + axis.name + "' has no values");
        cells *= axis.values.size();
    }

    std::vector<SweepRow> rows(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t rem = c;
        rows[c].hp = base;
        for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
            const double v = it->values[rem % it->values.size()];
            rem /= it->values.size();
            rows[c].params[it->name] = v;
        }
    }
    const std::size_t d = stream.front().x.size();
    const std::size_t m = stream.front().y.size();
    ReportOptions cell_options = options;
    cell_options.keep_predictions = false;

    const auto run_cell = [&](SweepRow& row) {
        try {
            for (const auto& [name, value] : row.params) set_hyper_param(row.hp, name, value);
            MoresLearner learner(d, m, row.hp);
            EvalReport rep = prequential_run(learner, stream, cell_options);
            if (!rep.complete) {
                row.error = rep.error + " (round " + std::to_string(rep.failed_round) + ")";
                return;
            }
            row.average_mae = rep.average_mae;
            row.per_output_mae = rep.per_output_mae;
        } catch (const Error& e) {
            row.error = e.what();
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells)));
    if (workers == 1) {
        for (auto& row : rows) run_cell(row);
        return rows;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < cells; c = next++) run_cell(rows[c]);
        });
    }
    pool.clear();
    return rows;
}

}  // namespace mores
