#pragma once

/*
 * Deterministic random number layer.
 *
 * Every random quantity in the project derives from a single 64-bit base seed
 * through a counter-based stream split: derive_seed(base, a, b, c) feeds the
 * base and up to three stream-id words through the SplitMix64 finalizer chain
 * and the result seeds an independent xoshiro256++ engine.  Replicas, per-
 * vertex weight draws, per-experiment streams etc. each get their own id
 * tuple, so results do not depend on scheduling or worker count.
 *
 * Samplers are hand-rolled (inversion / exact rejection) so that distribution
 * sampling is bit-reproducible across standard library versions:
 *   - poisson: product-of-uniforms inversion below mean 10, Hormann's PTRS
 *     transformed rejection (an exact method) above;
 *   - gamma: Marsaglia-Tsang squeeze with the shape<1 power boost;
 *   - exponential / normal: inversion resp. Box-Muller.
 */

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "common.hpp"

namespace rigsir {

/* SplitMix64 finalizer. */
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/* Derive a child seed from the base seed and up to three stream-id words. */
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = mix64(base);
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    h = mix64(h ^ c);
    return h;
}

/* Fixed stream-id words for the project's named streams (arbitrary distinct
 * constants; listed here so collisions are impossible by construction). */
namespace stream {
inline constexpr std::uint64_t vertex_weight = 0x01;
inline constexpr std::uint64_t group_weight = 0x02;
inline constexpr std::uint64_t membership = 0x03;
inline constexpr std::uint64_t exploration = 0x04;
inline constexpr std::uint64_t transmission = 0x05;
inline constexpr std::uint64_t kernel = 0x06;
inline constexpr std::uint64_t branching = 0x07;
inline constexpr std::uint64_t coupling = 0x08;
inline constexpr std::uint64_t experiment = 0x09;
inline constexpr std::uint64_t seed_choice = 0x0a;
}  // namespace stream

/* xoshiro256++ engine (Blackman/Vigna), state filled by SplitMix64. */
class rng_t {
  public:
    using result_type = std::uint64_t;

    explicit rng_t(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& w : s_) {
            w = mix64(x);
            x = w;
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /* Uniform double in [0, 1), 53 random bits. */
    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

    /* Uniform integer in [0, n). */
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("uniform_below: n == 0");
        /* rejection sampling on the top bits: unbiased */
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

/* Exponential with given rate via inversion; rate must be positive. */
inline double rand_exponential(rng_t& rng, double rate) {
    if (!(rate > 0))
        throw std::invalid_argument("rand_exponential: rate must be > 0");
    return -std::log1p(-rng.uniform01()) / rate;
}

/* Standard normal via Box-Muller (second variate discarded to keep the
 * consumption pattern fixed at two uniforms per call). */
inline double rand_normal(rng_t& rng) {
    const double u1 = 1.0 - rng.uniform01(); /* (0, 1] */
    const double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

namespace detail {

/* Hormann's PTRS transformed-rejection Poisson sampler; exact for mean >= 10. */
inline std::uint64_t poisson_ptrs(rng_t& rng, double mean) {
    const double log_mean = std::log(mean);
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform01() - 0.5;
        const double v = rng.uniform01();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r)
            return std::uint64_t(k);
        if (k < 0 || (us < 0.013 && v > us))
            continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            k * log_mean - mean - std::lgamma(k + 1.0))
            return std::uint64_t(k);
    }
}

}  // namespace detail

/* Poisson with the given mean (mean >= 0, finite). */
inline std::uint64_t rand_poisson(rng_t& rng, double mean) {
    if (!(mean >= 0) || !is_finite(mean))
        throw std::invalid_argument("rand_poisson: mean must be finite and >= 0");
    if (mean == 0)
        return 0;
    if (mean < 10.0) {
        /* Knuth inversion by multiplication of uniforms. */
        const double threshold = std::exp(-mean);
        std::uint64_t k = 0;
        double p = rng.uniform01();
        while (p > threshold) {
            ++k;
            p *= rng.uniform01();
        }
        return k;
    }
    return detail::poisson_ptrs(rng, mean);
}

/* Gamma(shape, scale) via Marsaglia-Tsang; shape, scale > 0. */
inline double rand_gamma(rng_t& rng, double shape, double scale) {
    if (!(shape > 0) || !(scale > 0))
        throw std::invalid_argument("rand_gamma: shape and scale must be > 0");
    if (shape < 1.0) {
        const double u = rng.uniform01();
        return rand_gamma(rng, shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rand_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - rng.uniform01(); /* (0, 1] so log is safe */
        if (u < 1.0 - 0.0331 * x * x * x * x)
            return d * v * scale;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
            return d * v * scale;
    }
}

/* Walker alias table for repeated draws from a fixed finite weight vector;
 * used for size-biased vertex/group picks (probability w_i / sum w). */
class alias_table_t {
  public:
    alias_table_t() = default;

    explicit alias_table_t(const std::vector<double>& weights) {
        const std::size_t n = weights.size();
        if (n == 0)
            throw std::invalid_argument("alias_table_t: empty weights");
        long double total = 0.0L;
        for (double w : weights) {
            if (!(w >= 0) || !is_finite(w))
                throw std::invalid_argument("alias_table_t: weights must be finite and >= 0");
            total += w;
        }
        if (!(total > 0.0L))
            throw std::invalid_argument("alias_table_t: total weight must be > 0");
        prob_.resize(n);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::uint32_t> small, large;
        small.reserve(n);
        large.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = double((long double)(weights[i]) * n / total);
            (scaled[i] < 1.0 ? small : large).push_back(std::uint32_t(i));
        }
        while (!small.empty() && !large.empty()) {
            const std::uint32_t s = small.back();
            small.pop_back();
            const std::uint32_t l = large.back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::uint32_t i : large)
            prob_[i] = 1.0;
        for (std::uint32_t i : small)
            prob_[i] = 1.0;
    }

    std::size_t size() const { return prob_.size(); }

    /* One draw consumes exactly one engine step. */
    std::uint32_t sample(rng_t& rng) const {
        const double u = rng.uniform01() * double(prob_.size());
        std::size_t i = std::size_t(u);
        if (i >= prob_.size())
            i = prob_.size() - 1;
        const double frac = u - double(i);
        return frac < prob_[i] ? std::uint32_t(i) : alias_[i];
    }

  private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

}  // namespace rigsir
