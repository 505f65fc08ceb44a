#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mores/error.hpp"
#include "mores/linalg.hpp"

namespace mores {

/// One stream observation: input x (length d) and target y (length m).
struct Sample {
    Vector x;
    Vector y;
};

inline void require_finite(const Sample& s) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(s.x.begin(), s.x.end(), finite) || !std::all_of(s.y.begin(), s.y.end(), finite)) {
        throw Error(ErrorKind::NonFinite, "sample contains a non-finite entry");
    }
}

/// Spectral view of c_xx kept alongside the dense sums:
///   c_xx = V (diag(θ) + Σ_k w_k w_kᵀ) Vᵀ,   w_k stored in the V basis.
/// Decay leaves V unchanged, so a fold scales θ and the w_k and appends Vᵀx
/// in O(d² + kd). Once more than max_rank columns pile up, V and θ are
/// rebuilt from the dense c_xx and the columns are dropped.
struct XxSpectral {
    Matrix v;
    Vector theta;
    std::vector<Vector> w;
    std::size_t max_rank = 0;
    std::uint64_t rebuilds = 0;

    [[nodiscard]] static std::size_t default_max_rank(std::size_t d) {
        return std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(2.0 * std::sqrt(static_cast<double>(d)))));
    }
};

/// Forgetting-factor sums over the history:
///   c_xx = Σ μ^{t-i} x_i x_iᵀ   (d×d)
///   c_xy = Σ μ^{t-i} x_i y_iᵀ   (d×m)
///   c_yy = Σ μ^{t-i} y_i y_iᵀ   (m×m)
/// with μ^0 = 1 even when μ = 0.
struct SufficientStats {
    Matrix c_xx;
    Matrix c_xy;
    Matrix c_yy;
    double mu = 1.0;
    std::uint64_t count = 0;
    /// Valid only while c_xx changes through fold; reset it after editing c_xx by hand.
    std::optional<XxSpectral> xx_spectral;

    SufficientStats() = default;
    SufficientStats(std::size_t d, std::size_t m, double forgetting)
        : c_xx(d, d), c_xy(d, m), c_yy(m, m), mu(forgetting) {
        if (!(forgetting >= 0.0 && forgetting <= 1.0)) {
            throw Error(ErrorKind::InvalidConfig, "mu must lie in [0, 1], got " + std::to_string(forgetting));
        }
        xx_spectral = XxSpectral{Matrix::identity(d), Vector(d, 0.0), {}, XxSpectral::default_max_rank(d), 0};
    }

    [[nodiscard]] std::size_t input_dim() const noexcept { return c_xx.rows(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return c_yy.rows(); }
};

namespace detail {

inline void decay_add_outer(Matrix& c, double mu, std::span<const double> a, std::span<const double> b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto ci = c.row(i);
        const double ai = a[i];
        for (std::size_t j = 0; j < b.size(); ++j) ci[j] = mu * ci[j] + ai * b[j];
    }
}

inline void fold_spectral(XxSpectral& sp, const Matrix& c_xx, double mu, std::span<const double> x) {
    if (mu == 0.0) {
        std::fill(sp.theta.begin(), sp.theta.end(), 0.0);
        sp.w.clear();
    } else if (mu != 1.0) {
        const double root = std::sqrt(mu);
        for (auto& t : sp.theta) t *= mu;
        for (auto& col : sp.w)
            for (auto& v : col) v *= root;
    }
    if (sp.w.size() >= sp.max_rank) {
        auto eig = sym_eig(c_xx);
        sp.v = std::move(eig.vectors);
        sp.theta = std::move(eig.values);
        sp.w.clear();
        ++sp.rebuilds;
        return;
    }
    const std::size_t d = x.size();
    Vector z(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        const auto vr = sp.v.row(r);
        const double xr = x[r];
        for (std::size_t i = 0; i < d; ++i) z[i] += vr[i] * xr;
    }
    sp.w.push_back(std::move(z));
}

}  // namespace detail

/// Folds one sample into the statistics in place. Cost is O(d² + dm + m²),
/// independent of how many samples came before, except that one fold in
/// every max_rank + 1 rebuilds the spectral view of c_xx in O(d³).
inline void fold_in_place(SufficientStats& stats, const Sample& sample) {
    if (sample.x.size() != stats.input_dim() || sample.y.size() != stats.output_dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "fold: sample (" + std::to_string(sample.x.size()) + ", " + std::to_string(sample.y.size()) +
                        ") vs stats (" + std::to_string(stats.input_dim()) + ", " +
                        std::to_string(stats.output_dim()) + ")");
    }
    detail::decay_add_outer(stats.c_xx, stats.mu, sample.x, sample.x);
    detail::decay_add_outer(stats.c_xy, stats.mu, sample.x, sample.y);
    detail::decay_add_outer(stats.c_yy, stats.mu, sample.y, sample.y);
    if (stats.xx_spectral) detail::fold_spectral(*stats.xx_spectral, stats.c_xx, stats.mu, sample.x);
    ++stats.count;
}

[[nodiscard]] inline SufficientStats fold(SufficientStats stats, const Sample& sample) {
    fold_in_place(stats, sample);
    return stats;
}

struct LossDiagnostics {
    /// Number of evaluations whose tiny negative round-off was clamped to 0.
    std::uint64_t clamped = 0;
};

/// Γ-weighted decayed loss from the statistics alone:
///   tr(Γ C_YY) + tr(Pᵀ Γ P C_XX) − 2 tr(Γ P C_XY)
/// which equals Σ μ^{t-i} (y_i − P x_i)ᵀ Γ (y_i − P x_i).
inline double weighted_loss(const SufficientStats& stats, const Matrix& p, const Matrix& gamma,
                            LossDiagnostics* diagnostics = nullptr) {
    const std::size_t d = stats.input_dim();
    const std::size_t m = stats.output_dim();
    if (p.rows() != m || p.cols() != d || gamma.rows() != m || gamma.cols() != m) {
        throw Error(ErrorKind::DimensionMismatch,
                    "weighted_loss: P " + p.shape() + ", Gamma " + gamma.shape() + " for d=" + std::to_string(d) +
                        ", m=" + std::to_string(m));
    }
    const Matrix gp = gamma * p;  // m×d
    double t_yy = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) t_yy += gamma(i, j) * stats.c_yy(j, i);

    // tr(Pᵀ Γ P C_XX) = Σ_ij (Pᵀ Γ P)_ij C_XX_ji = Σ_ij (P C_XX)_ki (Γ P)_ki summed over k.
    const Matrix pc = p * stats.c_xx;  // m×d
    double t_xx = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < d; ++i) t_xx += gp(k, i) * pc(k, i);

    // tr(Γ P C_XY) = Σ_k,i (ΓP)_ki (C_XY)_ik
    double t_xy = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < d; ++i) t_xy += gp(k, i) * stats.c_xy(i, k);

    const double loss = t_yy + t_xx - 2.0 * t_xy;
    if (loss < 0.0) {
        if (diagnostics != nullptr) ++diagnostics->clamped;
        return 0.0;
    }
    return loss;
}

}  // namespace mores
