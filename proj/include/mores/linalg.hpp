#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mores/error.hpp"

namespace mores {

/// Dense row-major matrix. Construction from explicit entries rejects
/// non-finite values; arithmetic results are not re-validated.
template <std::floating_point T>
class BasicMatrix {
public:
    using value_type = T;

    BasicMatrix() = default;

    BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (!std::isfinite(fill)) throw Error(ErrorKind::NonFinite, "matrix construction: non-finite fill value");
    }

    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_) {
            throw Error(ErrorKind::DimensionMismatch,
                        "matrix entries: expected " + std::to_string(rows_ * cols_) + ", got " +
                            std::to_string(data_.size()));
        }
        require_finite("matrix construction");
    }

    BasicMatrix(std::initializer_list<std::initializer_list<T>> rows)
        : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw Error(ErrorKind::DimensionMismatch, "ragged initializer list");
            data_.insert(data_.end(), r.begin(), r.end());
        }
        require_finite("matrix construction");
    }

    static BasicMatrix identity(std::size_t n) {
        BasicMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    static BasicMatrix diagonal(std::span<const T> d) {
        BasicMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    /// a bᵀ
    static BasicMatrix outer(std::span<const T> a, std::span<const T> b) {
        BasicMatrix m(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<T> entries() noexcept { return data_; }
    std::span<const T> entries() const noexcept { return data_; }

    [[nodiscard]] BasicMatrix transposed() const {
        BasicMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] T trace() const {
        T s{0};
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
        return s;
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    void require_finite(const char* context) const {
        if (!all_finite()) throw Error(ErrorKind::NonFinite, std::string(context) + ": non-finite entry");
    }

    BasicMatrix& operator+=(const BasicMatrix& o) {
        require_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }
    BasicMatrix& operator-=(const BasicMatrix& o) {
        require_same_shape(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }
    BasicMatrix& operator*=(T s) noexcept {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend BasicMatrix operator+(BasicMatrix a, const BasicMatrix& b) { return a += b; }
    friend BasicMatrix operator-(BasicMatrix a, const BasicMatrix& b) { return a -= b; }
    friend BasicMatrix operator*(BasicMatrix a, T s) { return a *= s; }
    friend BasicMatrix operator*(T s, BasicMatrix a) { return a *= s; }

    friend BasicMatrix operator*(const BasicMatrix& a, const BasicMatrix& b) {
        if (a.cols_ != b.rows_) {
            throw Error(ErrorKind::DimensionMismatch, "matrix product " + a.shape() + " * " + b.shape());
        }
        BasicMatrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            T* ci = c.data_.data() + i * c.cols_;
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const T aik = a(i, k);
                if (aik == T{0}) continue;
                const T* bk = b.data_.data() + k * b.cols_;
                for (std::size_t j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
            }
        }
        return c;
    }

    friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

    [[nodiscard]] std::string shape() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    void require_same_shape(const BasicMatrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) {
            throw Error(ErrorKind::DimensionMismatch, std::string(op) + " on " + shape() + " and " + o.shape());
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using Vector = std::vector<double>;

/// a * bᵀ without materializing the transpose.
template <std::floating_point T>
BasicMatrix<T> multiply_transposed(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
    if (a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "product a*b^T " + a.shape() + ", " + b.shape());
    }
    BasicMatrix<T> c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto bj = b.row(j);
            c(i, j) = std::inner_product(ai.begin(), ai.end(), bj.begin(), T{0});
        }
    }
    return c;
}

/// aᵀ * b without materializing the transpose.
template <std::floating_point T>
BasicMatrix<T> transposed_multiply(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
    if (a.rows() != b.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "product a^T*b " + a.shape() + ", " + b.shape());
    }
    BasicMatrix<T> c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto ak = a.row(k);
        const auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const T aki = ak[i];
            if (aki == T{0}) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

template <std::floating_point T>
std::vector<T> multiply(const BasicMatrix<T>& a, std::span<const T> x) {
    if (a.cols() != x.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "matrix-vector product " + a.shape() + " * " + std::to_string(x.size()));
    }
    std::vector<T> y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        y[i] = std::inner_product(ai.begin(), ai.end(), x.begin(), T{0});
    }
    return y;
}

template <std::floating_point T>
T frobenius_norm(const BasicMatrix<T>& a) {
    T s{0};
    for (T v : a.entries()) s += v * v;
    return std::sqrt(s);
}

template <std::floating_point T>
T max_abs(const BasicMatrix<T>& a) {
    T s{0};
    for (T v : a.entries()) s = std::max(s, std::abs(v));
    return s;
}

template <std::floating_point T>
void symmetrize(BasicMatrix<T>& a) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            const T avg = (a(i, j) + a(j, i)) / T{2};
            a(i, j) = avg;
            a(j, i) = avg;
        }
    }
}

template <std::floating_point T>
BasicMatrix<T> symmetrized(BasicMatrix<T> a) {
    symmetrize(a);
    return a;
}

// ---------------------------------------------------------------------------
// Factorizations and eigensolvers
// ---------------------------------------------------------------------------

struct LinalgSettings {
    /// Relative asymmetry accepted before a matrix is refused as non-symmetric.
    double symmetry_tolerance = 1e-12;
    /// Cholesky retry adds jitter_scale * trace / n to the diagonal.
    double jitter_scale = 1e-10;
    /// Cyclic Jacobi sweep cap.
    int max_sweeps = 100;
};

template <std::floating_point T>
struct EigenPair {
    std::vector<T> values;   // ascending
    BasicMatrix<T> vectors;  // column k pairs with values[k]
};

/// Eigendecomposition of the pencil Γ⁻¹Ω: Γ⁻¹ Ω U = U diag(values).
template <std::floating_point T>
struct GeneralizedEigenPair {
    std::vector<T> values;
    BasicMatrix<T> vectors;
    BasicMatrix<T> inverse_vectors;
};

namespace detail {

template <std::floating_point T>
void require_square(const BasicMatrix<T>& a, const char* op) {
    if (!a.square()) throw Error(ErrorKind::DimensionMismatch, std::string(op) + ": matrix " + a.shape() + " is not square");
}

template <std::floating_point T>
void require_symmetric(const BasicMatrix<T>& a, const LinalgSettings& s, const char* op) {
    const T scale = std::max(T{1}, max_abs(a));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > static_cast<T>(s.symmetry_tolerance) * scale)
                throw Error(ErrorKind::DimensionMismatch, std::string(op) + ": matrix is not symmetric");
}

/// Lower Cholesky factor of a + shift*I, or false on a non-positive pivot.
template <std::floating_point T>
bool try_cholesky(const BasicMatrix<T>& a, T shift, BasicMatrix<T>& r) {
    const std::size_t n = a.rows();
    r = BasicMatrix<T>(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        T pivot = a(j, j) + shift;
        const auto rj = r.row(j);
        for (std::size_t k = 0; k < j; ++k) pivot -= rj[k] * rj[k];
        if (!(pivot > T{0})) return false;
        const T rjj = std::sqrt(pivot);
        r(j, j) = rjj;
        for (std::size_t i = j + 1; i < n; ++i) {
            T v = a(i, j);
            const auto ri = r.row(i);
            for (std::size_t k = 0; k < j; ++k) v -= ri[k] * rj[k];
            r(i, j) = v / rjj;
        }
    }
    return true;
}

}  // namespace detail

/// Lower-triangular R with R Rᵀ = a. One retry with diagonal jitter is allowed
/// for matrices that are positive definite in exact arithmetic but graze zero.
template <std::floating_point T>
BasicMatrix<T> cholesky(const BasicMatrix<T>& a, const LinalgSettings& s = {}) {
    detail::require_square(a, "cholesky");
    a.require_finite("cholesky");
    detail::require_symmetric(a, s, "cholesky");
    BasicMatrix<T> r;
    if (detail::try_cholesky(a, T{0}, r)) return r;
    const T n = static_cast<T>(a.rows());
    const T jitter = static_cast<T>(s.jitter_scale) * a.trace() / n;
    if (jitter > T{0} && detail::try_cholesky(a, jitter, r)) return r;
    throw Error(ErrorKind::NotPositiveDefinite, "cholesky: non-positive pivot after jitter retry");
}

/// Solves L X = B for lower-triangular L.
template <std::floating_point T>
BasicMatrix<T> forward_substitute(const BasicMatrix<T>& l, BasicMatrix<T> b) {
    if (l.rows() != b.rows()) throw Error(ErrorKind::DimensionMismatch, "forward_substitute");
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        auto bi = b.row(i);
        for (std::size_t k = 0; k < i; ++k) {
            const T lik = l(i, k);
            if (lik == T{0}) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) bi[j] -= lik * bk[j];
        }
        const T inv = T{1} / l(i, i);
        for (auto& v : bi) v *= inv;
    }
    return b;
}

/// Solves Lᵀ X = B for lower-triangular L.
template <std::floating_point T>
BasicMatrix<T> back_substitute_transposed(const BasicMatrix<T>& l, BasicMatrix<T> b) {
    if (l.rows() != b.rows()) throw Error(ErrorKind::DimensionMismatch, "back_substitute_transposed");
    const std::size_t n = l.rows();
    for (std::size_t ii = n; ii-- > 0;) {
        auto bi = b.row(ii);
        for (std::size_t k = ii + 1; k < n; ++k) {
            const T lki = l(k, ii);
            if (lki == T{0}) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) bi[j] -= lki * bk[j];
        }
        const T inv = T{1} / l(ii, ii);
        for (auto& v : bi) v *= inv;
    }
    return b;
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Input is
/// symmetrized first; eigenvalues come back ascending.
template <std::floating_point T>
EigenPair<T> sym_eig(const BasicMatrix<T>& input, const LinalgSettings& s = {}) {
    detail::require_square(input, "sym_eig");
    input.require_finite("sym_eig");
    detail::require_symmetric(input, s, "sym_eig");

    const std::size_t n = input.rows();
    BasicMatrix<T> a = symmetrized(input);
    BasicMatrix<T> v = BasicMatrix<T>::identity(n);
    constexpr T eps = std::numeric_limits<T>::epsilon();
    const T floor = T{1e-2} * eps * frobenius_norm(a);

    bool converged = n <= 1;
    for (int sweep = 0; sweep < s.max_sweeps && !converged; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const T apq = a(p, q);
                if (apq == T{0}) continue;
                const T app = a(p, p);
                const T aqq = a(q, q);
                if (std::abs(apq) <= eps * std::sqrt(std::abs(app * aqq)) || std::abs(apq) <= floor) {
                    a(p, q) = T{0};
                    a(q, p) = T{0};
                    continue;
                }
                rotated = true;
                const T theta = (aqq - app) / (T{2} * apq);
                T t;
                if (std::abs(theta) > T{1e150}) {
                    t = T{1} / (T{2} * theta);
                } else {
                    t = std::copysign(T{1}, theta) / (std::abs(theta) + std::sqrt(theta * theta + T{1}));
                }
                const T c = T{1} / std::sqrt(t * t + T{1});
                const T sn = t * c;
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = T{0};
                a(q, p) = T{0};
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const T akp = a(k, p);
                    const T akq = a(k, q);
                    const T np = c * akp - sn * akq;
                    const T nq = sn * akp + c * akq;
                    a(k, p) = np;
                    a(p, k) = np;
                    a(k, q) = nq;
                    a(q, k) = nq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const T vkp = v(k, p);
                    const T vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw Error(ErrorKind::ConvergenceFailure,
                    "sym_eig: no convergence in " + std::to_string(s.max_sweeps) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    EigenPair<T> out{std::vector<T>(n), BasicMatrix<T>(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

/// Symmetric-definite pencil Ω u = λ Γ u via Γ = R Rᵀ and the symmetric
/// matrix R⁻¹ Ω R⁻ᵀ. The returned U satisfies Γ⁻¹ Ω U = U diag(λ).
template <std::floating_point T>
GeneralizedEigenPair<T> gen_eig_spd(const BasicMatrix<T>& omega, const BasicMatrix<T>& gamma,
                                    const LinalgSettings& s = {}) {
    detail::require_square(omega, "gen_eig_spd");
    if (omega.rows() != gamma.rows() || !gamma.square()) {
        throw Error(ErrorKind::DimensionMismatch, "gen_eig_spd: " + omega.shape() + " vs " + gamma.shape());
    }
    // Ω must itself be SPD for the values to be positive.
    (void)cholesky(omega, s);
    const BasicMatrix<T> r = cholesky(gamma, s);
    const BasicMatrix<T> half = forward_substitute(r, symmetrized(omega));   // R⁻¹ Ω
    BasicMatrix<T> reduced = forward_substitute(r, half.transposed());      // R⁻¹ Ω R⁻ᵀ
    symmetrize(reduced);
    EigenPair<T> inner = sym_eig(reduced, s);

    GeneralizedEigenPair<T> out;
    out.values = std::move(inner.values);
    out.vectors = back_substitute_transposed(r, inner.vectors);           // R⁻ᵀ W
    out.inverse_vectors = multiply_transposed(inner.vectors.transposed(), r);  // Wᵀ Rᵀ
    return out;
}

template <std::floating_point T>
BasicMatrix<T> spd_inverse(const BasicMatrix<T>& a, const LinalgSettings& s = {}) {
    const BasicMatrix<T> r = cholesky(a, s);
    const BasicMatrix<T> r_inv = forward_substitute(r, BasicMatrix<T>::identity(a.rows()));
    BasicMatrix<T> inv = transposed_multiply(r_inv, r_inv);  // R⁻ᵀ R⁻¹
    symmetrize(inv);
    return inv;
}

/// log det(a) for SPD a.
template <std::floating_point T>
T log_det_spd(const BasicMatrix<T>& a, const LinalgSettings& s = {}) {
    const BasicMatrix<T> r = cholesky(a, s);
    T acc{0};
    for (std::size_t i = 0; i < r.rows(); ++i) acc += std::log(r(i, i));
    return T{2} * acc;
}

}  // namespace mores
