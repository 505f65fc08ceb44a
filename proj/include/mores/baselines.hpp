#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mores/error.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"

namespace mores {

struct SomorState {
    Matrix p;
    double xi = 1.0;
    std::uint64_t zero_input_events = 0;
};

struct SomorStepResult {
    Vector prediction;
    SomorState state;
};

/// Minimal-Frobenius-change update subject to ‖y − P x‖² ≤ ξ. When the
/// constraint is violated the residual r = y − P x is shrunk onto the sphere
/// of radius √ξ:  P ← P + ((‖r‖ − √ξ) / (‖r‖ ‖x‖²)) r xᵀ.
inline SomorStepResult somor_step(const SomorState& state, const Sample& sample) {
    if (sample.x.size() != state.p.cols() || sample.y.size() != state.p.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "somor_step: sample does not match P " + state.p.shape());
    }
    if (!(state.xi > 0.0)) throw Error(ErrorKind::InvalidConfig, "xi must be > 0");
    SomorStepResult out{multiply(state.p, std::span<const double>(sample.x)), state};
    Vector r(sample.y.size());
    double r_sq = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        r[j] = sample.y[j] - out.prediction[j];
        r_sq += r[j] * r[j];
    }
    if (r_sq <= state.xi) return out;

    const double x_sq = std::inner_product(sample.x.begin(), sample.x.end(), sample.x.begin(), 0.0);
    if (x_sq == 0.0) {
        ++out.state.zero_input_events;
        return out;
    }
    const double r_norm = std::sqrt(r_sq);
    const double scale = (r_norm - std::sqrt(state.xi)) / (r_norm * x_sq);
    for (std::size_t j = 0; j < r.size(); ++j) {
        auto row = out.state.p.row(j);
        for (std::size_t i = 0; i < row.size(); ++i) row[i] += scale * r[j] * sample.x[i];
    }
    return out;
}

enum class PaVariant { PA1, PA2 };

struct PaState {
    std::vector<Vector> w;  // one weight vector per output
    PaVariant variant = PaVariant::PA1;
    double c = 1.0;
    double eps = 0.0;
    std::uint64_t zero_input_events = 0;
};

struct PaStepResult {
    Vector prediction;
    PaState state;
};

/// ε-insensitive passive-aggressive regression, run independently per output.
inline PaStepResult pa_step(const PaState& state, const Sample& sample) {
    if (sample.y.size() != state.w.size()) {
        throw Error(ErrorKind::DimensionMismatch, "pa_step: expected " + std::to_string(state.w.size()) + " outputs");
    }
    if (!(state.c > 0.0) || state.eps < 0.0) throw Error(ErrorKind::InvalidConfig, "PA needs c > 0 and eps >= 0");
    PaStepResult out{Vector(state.w.size()), state};
    const double x_sq = std::inner_product(sample.x.begin(), sample.x.end(), sample.x.begin(), 0.0);
    for (std::size_t j = 0; j < state.w.size(); ++j) {
        const Vector& w = state.w[j];
        if (w.size() != sample.x.size()) throw Error(ErrorKind::DimensionMismatch, "pa_step: weight/input length");
        const double yhat = std::inner_product(w.begin(), w.end(), sample.x.begin(), 0.0);
        out.prediction[j] = yhat;
        const double err = sample.y[j] - yhat;
        const double loss = std::max(0.0, std::abs(err) - state.eps);
        if (loss == 0.0) continue;
        if (x_sq == 0.0) {
            ++out.state.zero_input_events;
            continue;
        }
        const double tau = state.variant == PaVariant::PA1 ? std::min(state.c, loss / x_sq)
                                                           : loss / (x_sq + 1.0 / (2.0 * state.c));
        const double signed_tau = std::copysign(tau, err);
        auto& wn = out.state.w[j];
        for (std::size_t i = 0; i < wn.size(); ++i) wn[i] += signed_tau * sample.x[i];
    }
    return out;
}

// Learner wrappers sharing the interface of MoresLearner.

class SomorLearner {
public:
    SomorLearner(std::size_t d, std::size_t m, double xi) : state_{Matrix(m, d), xi, 0} {
        if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "d and m must be >= 1");
        if (!(xi > 0.0) || !std::isfinite(xi)) throw Error(ErrorKind::InvalidConfig, "xi must be finite and > 0");
    }

    [[nodiscard]] static constexpr std::string_view name() noexcept { return "somor"; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return state_.p.cols(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return state_.p.rows(); }
    [[nodiscard]] Vector predict(std::span<const double> x) const { return multiply(state_.p, x); }

    Vector step(const Sample& sample) {
        auto r = somor_step(state_, sample);
        state_ = std::move(r.state);
        return std::move(r.prediction);
    }

    [[nodiscard]] const Matrix& coefficients() const noexcept { return state_.p; }
    [[nodiscard]] const SomorState& state() const noexcept { return state_; }

private:
    SomorState state_;
};

class PaLearner {
public:
    PaLearner(std::size_t d, std::size_t m, PaVariant variant, double c = 1.0, double eps = 0.0)
        : state_{std::vector<Vector>(m, Vector(d, 0.0)), variant, c, eps, 0} {
        if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "d and m must be >= 1");
        if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidConfig, "pa_c must be finite and > 0");
        if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::InvalidConfig, "pa_eps must be finite and >= 0");
    }

    [[nodiscard]] std::string_view name() const noexcept { return state_.variant == PaVariant::PA1 ? "pa1" : "pa2"; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return state_.w.front().size(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return state_.w.size(); }

    [[nodiscard]] Vector predict(std::span<const double> x) const {
        if (x.size() != input_dim()) throw Error(ErrorKind::DimensionMismatch, "pa predict: input length");
        Vector y(state_.w.size());
        for (std::size_t j = 0; j < y.size(); ++j)
            y[j] = std::inner_product(state_.w[j].begin(), state_.w[j].end(), x.begin(), 0.0);
        return y;
    }

    Vector step(const Sample& sample) {
        auto r = pa_step(state_, sample);
        state_ = std::move(r.state);
        return std::move(r.prediction);
    }

    [[nodiscard]] Matrix coefficients() const {
        Matrix p(output_dim(), input_dim());
        for (std::size_t j = 0; j < output_dim(); ++j)
            for (std::size_t i = 0; i < input_dim(); ++i) p(j, i) = state_.w[j][i];
        return p;
    }
    [[nodiscard]] const PaState& state() const noexcept { return state_; }

private:
    PaState state_;
};

}  // namespace mores
