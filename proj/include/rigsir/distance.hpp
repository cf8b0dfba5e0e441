#pragma once

/*
 * Distances between laws.
 *
 * poisson_tv uses the L1 convention d(P,Q) = sum_k |P(k) - Q(k)|, i.e. twice
 * the usual sup-over-events total variation distance.  All bounds and rate
 * experiments in this project quote that convention consistently.
 */

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "common.hpp"
#include "weights.hpp"

namespace rigsir {

inline double poisson_pmf(std::uint64_t k, double lambda) {
    if (lambda == 0)
        return k == 0 ? 1.0 : 0.0;
    return std::exp(double(k) * std::log(lambda) - lambda - std::lgamma(double(k) + 1.0));
}

/* L1 distance between Poisson(a) and Poisson(b); a, b >= 0 finite. */
inline double poisson_tv(double a, double b) {
    if (!(a >= 0) || !(b >= 0) || !is_finite(a) || !is_finite(b))
        throw std::invalid_argument("poisson_tv: intensities must be finite and >= 0");
    if (a == b)
        return 0.0;
    const double top = std::max(a, b);
    /* march until both survivor functions are negligible */
    const std::uint64_t kmax =
        std::uint64_t(top + 40.0 * std::sqrt(top + 1.0) + 60.0);
    double ta = a == 0 ? 1.0 : std::exp(-a); /* running pmf terms */
    double tb = b == 0 ? 1.0 : std::exp(-b);
    kahan_sum_t acc;
    double cum_a = 0.0, cum_b = 0.0;
    for (std::uint64_t k = 0; k <= kmax; ++k) {
        acc.add(std::abs(ta - tb));
        cum_a += ta;
        cum_b += tb;
        if (1.0 - cum_a < 1e-16 && 1.0 - cum_b < 1e-16)
            break;
        ta *= a / (double(k) + 1.0);
        tb *= b / (double(k) + 1.0);
    }
    return std::min(acc.value(), 2.0);
}

/* Barbour-type upper bound for poisson_tv (L1 convention, hence the cap 2). */
inline double poisson_tv_bound(double a, double b) {
    const double top = std::max(std::max(a, b), 1e-12);
    return std::min(2.0, std::abs(a - b) * 2.0 / std::sqrt(top));
}

/* One atom of a discrete law. */
struct atom_t {
    double value;
    double prob;
};

inline std::vector<atom_t> atoms_of(const weight_law_t& law) {
    const auto v = law.atom_values();
    const auto p = law.atom_probs();
    std::vector<atom_t> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = {v[i], p[i]};
    return out;
}

/*
 * Expectation of f(x, y) under the comonotone (quantile) coupling of two
 * discrete laws: x and y are matched by marching both quantile functions in
 * lockstep.  For laws on a common support this is the coupling that leaves
 * only the unavoidable probability-mass mismatch on unequal pairs, and it
 * realizes argmin E|sqrt(x) - sqrt(y)| among monotone couplings.
 * Atom lists must be sorted ascending by value with positive probabilities.
 */
template <class F>
double comonotone_expectation(const std::vector<atom_t>& a, const std::vector<atom_t>& b, F&& f) {
    kahan_sum_t acc;
    std::size_t i = 0, j = 0;
    double ra = a.empty() ? 0.0 : a[0].prob;
    double rb = b.empty() ? 0.0 : b[0].prob;
    while (i < a.size() && j < b.size()) {
        const double w = std::min(ra, rb);
        if (w > 0)
            acc.add(w * f(a[i].value, b[j].value));
        ra -= w;
        rb -= w;
        if (ra <= 0 && ++i < a.size())
            ra = a[i].prob;
        if (rb <= 0 && ++j < b.size())
            rb = b[j].prob;
    }
    return acc.value();
}

/*
 * W1 distance between the laws of sqrt(Xbar) for two size-biased discrete
 * laws, computed exactly as E|sqrt(x) - sqrt(y)| under the comonotone
 * coupling (which attains W1 on the line).
 */
inline double wasserstein1_sqrt(const std::vector<atom_t>& a, const std::vector<atom_t>& b) {
    return comonotone_expectation(
        a, b, [](double x, double y) { return std::abs(std::sqrt(x) - std::sqrt(y)); });
}

/* Size-biased atoms of an explicit weight vector (the empirical law of
 * realized weights, reweighted by value).  Zero weights carry no mass. */
inline std::vector<atom_t> size_biased_empirical_atoms(const std::vector<double>& w) {
    std::vector<double> sorted(w);
    std::sort(sorted.begin(), sorted.end());
    long double total = 0.0L;
    for (double x : sorted) {
        if (!(x >= 0) || !is_finite(x))
            throw std::invalid_argument("size_biased_empirical_atoms: weights must be finite, >= 0");
        total += x;
    }
    if (!(total > 0))
        throw std::invalid_argument("size_biased_empirical_atoms: all weights are 0");
    std::vector<atom_t> out;
    for (double x : sorted) {
        if (x == 0)
            continue;
        const double p = double((long double)x / total);
        if (!out.empty() && out.back().value == x)
            out.back().prob += p;
        else
            out.push_back({x, p});
    }
    return out;
}

}  // namespace rigsir
