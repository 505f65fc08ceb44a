#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "mores/error.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"

namespace mores {

/// Trade-off weights of the MORES objective plus the stream protocol knobs.
struct HyperParams {
    double alpha = 1.0;  // loss weight
    double beta = 1.0;   // Ω stays close to Ω_{t-1}
    double rho = 1.0;    // Ω stays close to I
    double eta = 100.0;  // Γ stays close to I
    double mu = 0.9;     // forgetting factor
    std::size_t update_period = 1;

    /// Throws InvalidConfig naming the first offending field.
    void validate() const {
        const auto nonneg = [](double v, const char* name) {
            if (!std::isfinite(v) || v < 0.0) {
                throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be finite and >= 0, got " + std::to_string(v));
            }
        };
        nonneg(alpha, "alpha");
        nonneg(beta, "beta");
        nonneg(rho, "rho");
        nonneg(eta, "eta");
        if (!(beta + rho > 0.0)) throw Error(ErrorKind::InvalidConfig, "beta + rho must be > 0");
        if (eta > 0.0 && !(alpha > 0.0)) throw Error(ErrorKind::InvalidConfig, "alpha must be > 0 when eta > 0");
        if (!(mu >= 0.0 && mu <= 1.0)) throw Error(ErrorKind::InvalidConfig, "mu must lie in [0, 1], got " + std::to_string(mu));
        if (update_period < 1) throw Error(ErrorKind::InvalidConfig, "update_period must be >= 1");
    }
};

/// P (m×d) and the two learned metrics Ω (coefficient change) and Γ
/// (residuals), both m×m SPD with spectrum in (0, 1].
struct RegressionState {
    Matrix p;
    Matrix omega;
    Matrix gamma;
    std::uint64_t round = 0;

    static RegressionState initial(std::size_t d, std::size_t m) {
        return {Matrix(m, d), Matrix::identity(m), Matrix::identity(m), 0};
    }

    [[nodiscard]] std::size_t input_dim() const noexcept { return p.cols(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return p.rows(); }
};

inline Vector predict(const RegressionState& state, std::span<const double> x) {
    if (x.size() != state.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "predict: x has length " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(state.input_dim()));
    }
    return multiply(state.p, x);
}

namespace detail {

inline void require_compatible(const RegressionState& state, const SufficientStats& stats, const char* op) {
    if (state.input_dim() != stats.input_dim() || state.output_dim() != stats.output_dim() ||
        state.omega.rows() != state.output_dim() || state.gamma.rows() != state.output_dim()) {
        throw Error(ErrorKind::DimensionMismatch, std::string(op) + ": state and statistics disagree on (d, m)");
    }
}

}  // namespace detail

/// Solves  Ω P + α Γ P C_XX = Ω P_{t-1} + α Γ C_XYᵀ  for P.
///
/// With Γ⁻¹Ω = U L U⁻¹ (L diagonal, positive) the system decouples into rows
/// of P̃ = U⁻¹ P:  p̃_j (L_j I + α C_XX) = (U⁻¹ Z)_j,  Z = Γ⁻¹Ω P_{t-1} + α C_XYᵀ.
/// With C_XX = V (Θ + W Wᵀ) Vᵀ each row is a diagonal plus rank-k solve in
/// the V basis (Woodbury, k×k capacitance). Without a spectral view, C_XX is
/// eigendecomposed here and k = 0.
inline Matrix solve_p(const RegressionState& state, const SufficientStats& stats, const HyperParams& hp) {
    detail::require_compatible(state, stats, "solve_p");
    if (hp.alpha == 0.0) return state.p;

    const auto pencil = gen_eig_spd(state.omega, state.gamma);
    XxSpectral local;
    if (!stats.xx_spectral) {
        auto eig = sym_eig(stats.c_xx);
        local.v = std::move(eig.vectors);
        local.theta = std::move(eig.values);
    }
    const XxSpectral& sp = stats.xx_spectral ? *stats.xx_spectral : local;
    const std::size_t d = stats.input_dim();
    const std::size_t k = sp.w.size();

    // U⁻¹ Z = L U⁻¹ P_{t-1} + α U⁻¹ C_XYᵀ
    Matrix uz = pencil.inverse_vectors * state.p;
    for (std::size_t j = 0; j < uz.rows(); ++j)
        for (auto& v : uz.row(j)) v *= pencil.values[j];
    uz += hp.alpha * multiply_transposed(pencil.inverse_vectors, stats.c_xy);

    Matrix g(k, d);
    const double root_alpha = std::sqrt(hp.alpha);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < d; ++i) g(c, i) = root_alpha * sp.w[c][i];

    Matrix tilde = uz * sp.v;
    Vector inv_s(d);
    Matrix gs(k, d);
    Matrix cap(k, k);
    Matrix rhs(k, 1);
    for (std::size_t j = 0; j < tilde.rows(); ++j) {
        auto row = tilde.row(j);
        for (std::size_t i = 0; i < d; ++i) {
            const double denom = pencil.values[j] + hp.alpha * std::max(0.0, sp.theta[i]);
            if (!(denom > 0.0)) {
                throw Error(ErrorKind::NotPositiveDefinite, "solve_p: non-positive decoupled denominator");
            }
            inv_s[i] = 1.0 / denom;
            row[i] *= inv_s[i];
        }
        if (k == 0) continue;
        // (S + G Gᵀ)⁻¹ b = u − S⁻¹ G (I + Gᵀ S⁻¹ G)⁻¹ Gᵀ u,  u = S⁻¹ b
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                gs(c, i) = g(c, i) * inv_s[i];
                acc += g(c, i) * row[i];
            }
            rhs(c, 0) = acc;
        }
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                double acc = a == b ? 1.0 : 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += gs(a, i) * g(b, i);
                cap(a, b) = acc;
                cap(b, a) = acc;
            }
        }
        const Matrix r = cholesky(cap);
        const Matrix h = back_substitute_transposed(r, forward_substitute(r, rhs));
        for (std::size_t c = 0; c < k; ++c) {
            const double hc = h(c, 0);
            for (std::size_t i = 0; i < d; ++i) row[i] -= gs(c, i) * hc;
        }
    }
    Matrix p = pencil.vectors * multiply_transposed(tilde, sp.v);
    p.require_finite("solve_p");
    return p;
}

/// Ω_t = ((β Ω_{t-1}⁻¹ + ρ I + ΔP ΔPᵀ) / (β + ρ))⁻¹,  ΔP = P_t − P_{t-1}.
inline Matrix update_omega(const RegressionState& state, const Matrix& p_new, const HyperParams& hp) {
    if (p_new.rows() != state.p.rows() || p_new.cols() != state.p.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "update_omega: P_t " + p_new.shape() + " vs P_{t-1} " + state.p.shape());
    }
    if (!(hp.beta + hp.rho > 0.0)) throw Error(ErrorKind::InvalidConfig, "beta + rho must be > 0");
    const std::size_t m = state.output_dim();
    const Matrix delta = p_new - state.p;
    Matrix inner = multiply_transposed(delta, delta);
    if (hp.beta > 0.0) inner += hp.beta * spd_inverse(state.omega);
    for (std::size_t i = 0; i < m; ++i) inner(i, i) += hp.rho;
    inner *= 1.0 / (hp.beta + hp.rho);
    symmetrize(inner);
    return spd_inverse(inner);
}

/// Decayed residual scatter  C_YY − C_XYᵀ Pᵀ − P C_XY + P C_XX Pᵀ, symmetrized
/// and with any round-off negative eigenvalues floored at zero.
inline Matrix residual_scatter(const Matrix& p, const SufficientStats& stats) {
    if (p.rows() != stats.output_dim() || p.cols() != stats.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "residual_scatter: P " + p.shape());
    }
    const Matrix p_cxy = p * stats.c_xy;  // m×m
    Matrix r = stats.c_yy - p_cxy - p_cxy.transposed() + multiply_transposed(p * stats.c_xx, p);
    symmetrize(r);
    auto eig = sym_eig(r);
    if (!eig.values.empty() && eig.values.front() < 0.0) {
        for (auto& v : eig.values) v = std::max(v, 0.0);
        r = multiply_transposed(eig.vectors * Matrix::diagonal(eig.values), eig.vectors);
        symmetrize(r);
    }
    return r;
}

/// Γ_t = (I + (α/η) R)⁻¹ with R the decayed residual scatter at P_t: the
/// stationary point of α·tr(Γ R) + η·Δ(Γ, I). Either weight at zero gives I.
inline Matrix update_gamma(const Matrix& p_new, const SufficientStats& stats, const HyperParams& hp) {
    const std::size_t m = stats.output_dim();
    if (p_new.rows() != m || p_new.cols() != stats.input_dim()) {
        throw Error(ErrorKind::DimensionMismatch, "update_gamma: P_t " + p_new.shape());
    }
    if (hp.eta == 0.0 || hp.alpha == 0.0) return Matrix::identity(m);
    Matrix inner = (hp.alpha / hp.eta) * residual_scatter(p_new, stats);
    for (std::size_t i = 0; i < m; ++i) inner(i, i) += 1.0;
    return spd_inverse(inner);
}

/// Wall-clock split of one step, in seconds.
struct PhaseTimings {
    double fold = 0.0;
    double solve_p = 0.0;
    double update_omega = 0.0;
    double update_gamma = 0.0;

    [[nodiscard]] double total() const noexcept { return fold + solve_p + update_omega + update_gamma; }
};

struct StepResult {
    Vector prediction;
    RegressionState state;
    SufficientStats stats;
};

/// One prequential round: predict with the current model, fold the sample,
/// then run a single P → Ω → Γ pass (only every update_period rounds).
/// Inputs are never modified, so a failure leaves the caller's learner intact.
inline StepResult step(const RegressionState& state, const SufficientStats& stats, const Sample& sample,
                       const HyperParams& hp, PhaseTimings* timings = nullptr) {
    detail::require_compatible(state, stats, "step");
    require_finite(sample);
    using clock = std::chrono::steady_clock;
    const auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };

    StepResult out{predict(state, sample.x), state, stats};
    auto t0 = clock::now();
    fold_in_place(out.stats, sample);
    if (!out.stats.c_xx.all_finite() || !out.stats.c_xy.all_finite() || !out.stats.c_yy.all_finite()) {
        throw Error(ErrorKind::NonFinite, "sufficient statistics overflowed");
    }
    auto t1 = clock::now();
    ++out.state.round;
    if (timings != nullptr) timings->fold = seconds(t0, t1);

    if (out.state.round % hp.update_period != 0) return out;

    Matrix p = solve_p(state, out.stats, hp);
    auto t2 = clock::now();
    Matrix omega = update_omega(state, p, hp);
    auto t3 = clock::now();
    Matrix gamma = update_gamma(p, out.stats, hp);
    auto t4 = clock::now();
    if (timings != nullptr) {
        timings->solve_p = seconds(t1, t2);
        timings->update_omega = seconds(t2, t3);
        timings->update_gamma = seconds(t3, t4);
    }
    out.state.p = std::move(p);
    out.state.omega = std::move(omega);
    out.state.gamma = std::move(gamma);
    return out;
}

/// LogDet divergence Δ(A, B) = log(det B / det A) + tr(B⁻¹ A) − m.
inline double logdet_div(const Matrix& a, const Matrix& b) {
    if (!a.square() || a.rows() != b.rows() || !b.square()) {
        throw Error(ErrorKind::DimensionMismatch, "logdet_div: " + a.shape() + " vs " + b.shape());
    }
    const Matrix b_inv = spd_inverse(b);
    double tr = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.rows(); ++j) tr += b_inv(i, j) * a(j, i);
    const double div = log_det_spd(b) - log_det_spd(a) + tr - static_cast<double>(a.rows());
    return std::max(0.0, div);
}

/// ‖P − P_prev‖²_Ω = tr((P − P_prev)ᵀ Ω (P − P_prev))
inline double mahalanobis_sq(const Matrix& delta, const Matrix& omega) {
    const Matrix od = omega * delta;
    double s = 0.0;
    for (std::size_t k = 0; k < delta.entries().size(); ++k) s += delta.entries()[k] * od.entries()[k];
    return s;
}

/// Full objective J at a candidate (P, Ω, Γ) relative to the previous round.
inline double objective_eval(const RegressionState& candidate, const RegressionState& previous,
                             const SufficientStats& stats, const HyperParams& hp) {
    detail::require_compatible(candidate, stats, "objective_eval");
    detail::require_compatible(previous, stats, "objective_eval");
    const Matrix identity = Matrix::identity(candidate.output_dim());
    double j = mahalanobis_sq(candidate.p - previous.p, candidate.omega);
    if (hp.alpha != 0.0) j += hp.alpha * weighted_loss(stats, candidate.p, candidate.gamma);
    if (hp.beta != 0.0) j += hp.beta * logdet_div(candidate.omega, previous.omega);
    if (hp.rho != 0.0) j += hp.rho * logdet_div(candidate.omega, identity);
    if (hp.eta != 0.0) j += hp.eta * logdet_div(candidate.gamma, identity);
    return j;
}

/// ‖Ω P + αΓ P C_XX − Ω P_{t-1} − αΓ C_XYᵀ‖_F / (‖Ω P_{t-1}‖_F + α‖Γ C_XYᵀ‖_F)
inline double p_solve_residual(const RegressionState& previous, const Matrix& p_new, const SufficientStats& stats,
                               const HyperParams& hp) {
    const Matrix& omega = previous.omega;
    const Matrix& gamma = previous.gamma;
    const Matrix omega_prev = omega * previous.p;
    const Matrix gamma_cxy = multiply_transposed(gamma, stats.c_xy);
    const Matrix lhs = omega * p_new + hp.alpha * (gamma * p_new * stats.c_xx);
    const Matrix rhs = omega_prev + hp.alpha * gamma_cxy;
    const double scale = frobenius_norm(omega_prev) + hp.alpha * frobenius_norm(gamma_cxy);
    const double res = frobenius_norm(lhs - rhs);
    return scale > 0.0 ? res / scale : res;
}

/// Stateful wrapper owning (state, statistics, hyperparameters).
class MoresLearner {
public:
    MoresLearner(std::size_t d, std::size_t m, HyperParams hp)
        : hp_(std::move(hp)), state_(RegressionState::initial(d, m)), stats_(d, m, hp_.mu) {
        if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "d and m must be >= 1");
        hp_.validate();
    }

    [[nodiscard]] static constexpr std::string_view name() noexcept { return "mores"; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return state_.input_dim(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return state_.output_dim(); }

    [[nodiscard]] Vector predict(std::span<const double> x) const { return mores::predict(state_, x); }

    /// Returns the pre-update prediction for sample.x.
    Vector step(const Sample& sample, PhaseTimings* timings = nullptr) {
        StepResult r = mores::step(state_, stats_, sample, hp_, timings);
        state_ = std::move(r.state);
        stats_ = std::move(r.stats);
        return std::move(r.prediction);
    }

    [[nodiscard]] const Matrix& coefficients() const noexcept { return state_.p; }
    [[nodiscard]] const RegressionState& state() const noexcept { return state_; }
    [[nodiscard]] const SufficientStats& stats() const noexcept { return stats_; }
    [[nodiscard]] const HyperParams& hyper_params() const noexcept { return hp_; }

private:
    HyperParams hp_;
    RegressionState state_;
    SufficientStats stats_;
};

}  // namespace mores
