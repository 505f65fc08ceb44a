#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mores/error.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"

namespace mores {

/// xoshiro256** (Blackman & Vigna) seeded through splitmix64, with standard
/// normals from the Box–Muller transform. Both halves of each Box–Muller pair
/// are used, cosine branch first. Every stream in this library is a fixed
/// sequence of calls on this generator, so a seed reproduces it exactly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() noexcept {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

    Vector normal_vector(std::size_t n) {
        Vector v(n);
        for (auto& e : v) e = normal();
        return v;
    }

    Matrix normal_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (auto& v : m.entries()) v = normal();
        return m;
    }

    static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
    std::optional<double> spare_;
};

struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t samples = 500;
    std::size_t d_features = 10;  // before the constant bias column
    double noise_std = 0.1;

    void validate() const {
        if (samples < 1) throw Error(ErrorKind::InvalidConfig, "samples must be >= 1");
        if (d_features < 1) throw Error(ErrorKind::InvalidConfig, "d_features must be >= 1");
        if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
            throw Error(ErrorKind::InvalidConfig, "noise_std must be finite and >= 0");
        }
    }
};

struct SyntheticStream {
    std::vector<Sample> samples;
    Matrix p_real;  // m×d generating coefficients
};

/// Three correlated outputs over d_features standard-normal inputs plus a
/// trailing constant 1:
///   y1 = p1·x + e1,  y2 = p2·x + e2,  y3 = y1 + y2 + e3,  e_k ~ N(0, noise_std²).
/// Draw order: p1, p2, then per sample the d_features inputs and e1, e2, e3.
inline SyntheticStream gen_paper_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d = cfg.d_features + 1;
    Vector p1(d);
    Vector p2(d);
    for (auto& v : p1) v = rng.normal();
    for (auto& v : p2) v = rng.normal();

    SyntheticStream out;
    out.p_real = Matrix(3, d);
    for (std::size_t i = 0; i < d; ++i) {
        out.p_real(0, i) = p1[i];
        out.p_real(1, i) = p2[i];
        out.p_real(2, i) = p1[i] + p2[i];
    }
    out.samples.reserve(cfg.samples);
    for (std::size_t n = 0; n < cfg.samples; ++n) {
        Sample s{Vector(d), Vector(3)};
        for (std::size_t i = 0; i + 1 < d; ++i) s.x[i] = rng.normal();
        s.x[d - 1] = 1.0;
        const double e1 = cfg.noise_std * rng.normal();
        const double e2 = cfg.noise_std * rng.normal();
        const double e3 = cfg.noise_std * rng.normal();
        double f1 = 0.0;
        double f2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            f1 += p1[i] * s.x[i];
            f2 += p2[i] * s.x[i];
        }
        s.y[0] = f1 + e1;
        s.y[1] = f2 + e2;
        s.y[2] = s.y[0] + s.y[1] + e3;
        out.samples.push_back(std::move(s));
    }
    return out;
}

/// y = P_real x exactly with standard-normal x and P_real.
/// Draw order: P_real row-major, then per sample the d inputs.
inline SyntheticStream gen_noiseless_linear(std::uint64_t seed, std::size_t samples, std::size_t d, std::size_t m) {
    if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "d and m must be >= 1");
    Rng rng(seed);
    SyntheticStream out;
    out.p_real = rng.normal_matrix(m, d);
    out.samples.reserve(samples);
    for (std::size_t n = 0; n < samples; ++n) {
        Sample s{Vector(d), {}};
        for (auto& v : s.x) v = rng.normal();
        s.y = multiply(out.p_real, std::span<const double>(s.x));
        out.samples.push_back(std::move(s));
    }
    return out;
}

struct DriftingStream {
    std::vector<Sample> samples;
    Matrix p_before;
    Matrix p_after;
    std::size_t switch_at = 0;  // samples with index >= switch_at use p_after

    [[nodiscard]] const Matrix& p_at(std::size_t index) const noexcept {
        return index < switch_at ? p_before : p_after;
    }
};

/// Coefficients jump from P_A to P_B at sample index switch_at. The P_A path
/// consumes the generator exactly like gen_noiseless_linear (noise draws are
/// appended per sample only when noise_std > 0); P_B comes from an independent
/// generator, so switch_at == samples reproduces the noiseless stream.
inline DriftingStream gen_drifting(std::uint64_t seed, std::size_t samples, std::size_t d, std::size_t m,
                                   std::size_t switch_at, double noise_std = 0.0) {
    if (d < 1 || m < 1) throw Error(ErrorKind::InvalidConfig, "d and m must be >= 1");
    if (switch_at < 1 || switch_at > samples) {
        throw Error(ErrorKind::InvalidConfig, "switch_at must lie in [1, samples]");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw Error(ErrorKind::InvalidConfig, "noise_std must be finite and >= 0");
    }
    Rng rng(seed);
    Rng rng_after(seed ^ 0xD1B54A32D192ED03ULL);
    DriftingStream out;
    out.p_before = rng.normal_matrix(m, d);
    out.p_after = rng_after.normal_matrix(m, d);
    out.switch_at = switch_at;
    out.samples.reserve(samples);
    for (std::size_t n = 0; n < samples; ++n) {
        Sample s{Vector(d), {}};
        for (auto& v : s.x) v = rng.normal();
        s.y = multiply(out.p_at(n), std::span<const double>(s.x));
        if (noise_std > 0.0)
            for (auto& v : s.y) v += noise_std * rng.normal();
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace mores
