#pragma once

/*
 * Generation-time solver for the epidemic growth rate.
 *
 * A newly infected individual (size-biased, i.e. typical in the exponential
 * phase) belongs to a Poisson(mu_A_bar)-mean number of further cliques; a
 * clique reached through one of its members carries k additional members
 * with probability p_k, the mixed-Poisson law of the size-biased group
 * weight.  The expected count of cliques with k secondaries per infected is
 *
 *   gamma_k = mu_A_bar * k * p_k,   k >= 1,
 *
 * and each secondary in a (k+1)-clique is infected after a passage time with
 * Laplace transform L_{k+1}.  The growth rate alpha solves
 *
 *   f(alpha) = sum_k gamma_k L_{k+1}(alpha) = 1,
 *
 * f(0) is the reproduction number, and the mean age at childbearing is
 * -S'(alpha) where S is the block-level transform
 *
 *   S(lambda) = gamma_1 L_2(lambda) / (1 - sum_{k>=2} gamma_k L_{k+1}(lambda)):
 *
 * pair-cliques start new blocks, larger cliques continue the current one, and
 * the geometric series collects all within-block relay paths.
 *
 * Truncation at K is certified through the exact total
 * sum_k gamma_k = mu_A_bar * mu_B_bar: since every L <= 1, the dropped tail
 * changes f by at most the dropped gamma mass.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "clique_kernel.hpp"
#include "common.hpp"
#include "weights.hpp"

namespace rigsir {

struct lotka_problem_t {
    std::vector<double> gamma;    /* gamma[i] = gamma_{i+1}, i = 0 .. K-1 */
    laplace_vector_t transforms;  /* L_2 .. L_{K+1} */
    double offspring_mean = 0.0;  /* exact sum of all gamma_k */
    double truncation_gap = 0.0;  /* offspring_mean - sum(gamma) */

    std::size_t K() const { return gamma.size(); }

    /* f(lambda) = sum_k gamma_k L_{k+1}(lambda) over the kept range */
    double evaluate(double lambda) const {
        const auto L = transforms.eval(lambda);
        kahan_sum_t acc;
        for (std::size_t i = 0; i < gamma.size(); ++i)
            acc.add(gamma[i] * L[i]);
        return acc.value();
    }

    /* caches for different k are independent, so variances add */
    double evaluate_stderr(double lambda) const {
        if (transforms.exact())
            return 0.0;
        const auto se = transforms.stderr_at(lambda);
        double var = 0.0;
        for (std::size_t i = 0; i < gamma.size(); ++i)
            var += gamma[i] * gamma[i] * se[i] * se[i];
        return std::sqrt(var);
    }

    /* limit of f as lambda -> inf: only zero-length passage times survive */
    double evaluate_limit_inf() const {
        if (transforms.exact())
            return 0.0; /* exponential contacts carry no atom at zero */
        kahan_sum_t acc;
        for (std::size_t i = 0; i < gamma.size(); ++i) {
            const auto& s = transforms.caches()[i].samples;
            std::size_t zeros = 0;
            for (double t : s) {
                if (t > 0.0)
                    break; /* sorted */
                ++zeros;
            }
            acc.add(gamma[i] * double(zeros) / double(s.size()));
        }
        return acc.value();
    }

    /* S(lambda); requires the within-block part to be subcritical there */
    double block_transform(double lambda) const {
        const auto L = transforms.eval(lambda);
        kahan_sum_t rest;
        for (std::size_t i = 1; i < gamma.size(); ++i)
            rest.add(gamma[i] * L[i]);
        const double denom = 1.0 - rest.value();
        if (!(denom > 0))
            throw std::domain_error("block_transform: within-block part is supercritical");
        return gamma.empty() ? 0.0 : gamma[0] * L[0] / denom;
    }

    /* expected within-block offspring count; < 1 enables block accounting */
    double block_offspring_mean() const {
        kahan_sum_t rest;
        for (std::size_t i = 1; i < gamma.size(); ++i)
            rest.add(gamma[i] * transforms.eval(0.0)[i]);
        return rest.value();
    }

    static lotka_problem_t from_gamma(std::vector<double> g, laplace_vector_t transforms) {
        if (g.size() != transforms.K())
            throw std::invalid_argument("lotka_problem_t: gamma size must equal transform count");
        lotka_problem_t p;
        kahan_sum_t total;
        for (double v : g) {
            if (!(v >= 0))
                throw std::invalid_argument("lotka_problem_t: gamma entries must be >= 0");
            total.add(v);
        }
        p.gamma = std::move(g);
        p.transforms = std::move(transforms);
        p.offspring_mean = total.value();
        p.truncation_gap = 0.0;
        return p;
    }

    /* gamma vector of a model, truncated once the dropped mass is certified
     * below tail_tol against the exact total mu_A_bar * mu_B_bar */
    static std::vector<double> gamma_of_model(const model_t& model, double tail_tol = 1e-9,
                                              std::size_t max_K = 4096) {
        const double total = model.mean_offspring();
        const auto size_biased_B = model.B.size_biased();
        std::size_t kmax = 64;
        while (true) {
            const auto pmf = size_biased_B.mixed_poisson_pmf(kmax);
            std::vector<double> gamma(kmax);
            kahan_sum_t kept;
            std::size_t K = 0;
            for (std::size_t k = 1; k <= kmax; ++k) {
                gamma[k - 1] = model.mu_A_bar() * double(k) * pmf[k];
                kept.add(gamma[k - 1]);
                if (total - kept.value() <= tail_tol) {
                    K = k;
                    break;
                }
            }
            if (K > 0) {
                gamma.resize(K);
                return gamma;
            }
            if (kmax >= max_K)
                throw assumption_error("gamma truncation not certified by k = " +
                                       std::to_string(max_K) +
                                       "; secondary-count tail is too heavy");
            kmax *= 2;
        }
    }

    /* closed-form transforms: infinite periods and exponential contacts only */
    static lotka_problem_t from_model_exact(const model_t& model, double tail_tol = 1e-9) {
        model.validate();
        if (!(model.I.kind() == law_kind::constant && model.I.has_infinite_atom()))
            throw config_error("model.I", "exact transforms require an infinite constant period");
        if (model.T.kind() != law_kind::exponential)
            throw config_error("model.T", "exact transforms require exponential contacts");
        auto gamma = gamma_of_model(model, tail_tol);
        const std::size_t K = gamma.size();
        const double beta = 1.0 / model.T.mean();
        lotka_problem_t p = from_gamma(std::move(gamma), laplace_vector_t::exact_exponential(K, beta));
        p.offspring_mean = model.mean_offspring();
        p.truncation_gap = p.offspring_mean - sum_of(p.gamma);
        return p;
    }

    static lotka_problem_t from_model_mc(const model_t& model, std::size_t n_samples,
                                         std::uint64_t seed, double tail_tol = 1e-9) {
        model.validate();
        model.check_transmission_atom();
        auto gamma = gamma_of_model(model, tail_tol);
        const std::size_t K = gamma.size();
        lotka_problem_t p = from_gamma(
            std::move(gamma), laplace_vector_t::monte_carlo(K, model.I, model.T, n_samples, seed));
        p.offspring_mean = model.mean_offspring();
        p.truncation_gap = p.offspring_mean - sum_of(p.gamma);
        return p;
    }

  private:
    static double sum_of(const std::vector<double>& v) {
        kahan_sum_t acc;
        for (double x : v)
            acc.add(x);
        return acc.value();
    }
};

enum class growth_status { subcritical, supercritical, explosive };

inline std::string to_string(growth_status s) {
    switch (s) {
        case growth_status::subcritical: return "subcritical";
        case growth_status::supercritical: return "supercritical";
        case growth_status::explosive: return "explosive";
    }
    return "?";
}

struct lotka_solution_t {
    growth_status status = growth_status::subcritical;
    double alpha = std::numeric_limits<double>::quiet_NaN();    /* growth rate */
    double r_star = 0.0;                                        /* f(0): reproduction number */
    double mean_age = std::numeric_limits<double>::quiet_NaN(); /* -S'(alpha) */
    double residual = std::numeric_limits<double>::quiet_NaN(); /* |f(alpha) - 1| */
    std::size_t K = 0;
};

/*
 * Root solve for f(alpha) = 1.  f is continuous, strictly decreasing (common
 * random numbers keep the Monte Carlo route monotone too), f(0) = r*, and
 * f(inf) is the zero-passage mass.  r* <= 1 means no positive root
 * (subcritical, including critical); a zero-passage limit >= 1 means f never
 * crosses 1 (explosive regime).  Otherwise bisection; with Monte Carlo
 * transforms the stopping tolerance widens to three standard errors.
 */
inline lotka_solution_t solve_malthusian(const lotka_problem_t& problem, double tol = 1e-8) {
    if (problem.K() == 0)
        throw std::invalid_argument("solve_malthusian: empty problem");
    lotka_solution_t sol;
    sol.K = problem.K();
    sol.r_star = problem.evaluate(0.0);
    if (sol.r_star <= 1.0) {
        sol.status = growth_status::subcritical;
        return sol;
    }
    if (problem.evaluate_limit_inf() >= 1.0) {
        sol.status = growth_status::explosive;
        return sol;
    }
    double lo = 0.0, hi = 1.0;
    for (int i = 0; problem.evaluate(hi) > 1.0; ++i) {
        lo = hi;
        hi *= 2.0;
        if (i > 200)
            throw std::runtime_error("solve_malthusian: failed to bracket the root");
    }
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double f = problem.evaluate(mid);
        const double tol_eff = std::max(tol, 3.0 * problem.evaluate_stderr(mid));
        if (std::abs(f - 1.0) <= tol_eff && hi - lo <= 1e-10 * (1.0 + mid))
            break;
        (f > 1.0 ? lo : hi) = mid;
        if (hi - lo < 1e-15 * (1.0 + mid))
            break;
    }
    sol.status = growth_status::supercritical;
    sol.alpha = mid;
    sol.residual = std::abs(problem.evaluate(mid) - 1.0);
    const double h = 1e-4;
    const double s_plus = problem.block_transform(sol.alpha + h);
    const double s_minus = problem.block_transform(std::max(0.0, sol.alpha - h));
    sol.mean_age = -(s_plus - s_minus) / (2.0 * h);
    return sol;
}

}  // namespace rigsir
