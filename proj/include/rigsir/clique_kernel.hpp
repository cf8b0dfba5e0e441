#pragma once

/*
 * Within-clique passage times.
 *
 * A clique of total size k is the complete directed graph on its members;
 * member 0 is the primary case.  Every ordered pair (i, j) carries a contact
 * time T_ij and every member a period I_i; the transmission weight is
 * T'_ij = T_ij if T_ij <= I_i, else +inf (all edges out of i share I_i).
 * The passage time from the primary to member j is the first-passage distance
 * through that weighted graph.
 *
 * The same engine backs three consumers: the clique-size-k passage-law
 * samples used by the generation solver (F_k), the offspring generator of the
 * branching process, and the replay checks of the coupled graph runs.  The
 * draw order is pinned and shared by all of them: first the k-1 member
 * periods (members 1..k-1), then the k(k-1) contact times in row-major order
 * (source-major, target ascending, diagonal skipped).  Contacts are always
 * drawn even when censored so streams stay aligned across consumers.
 */

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "weights.hpp"

namespace rigsir {

/* First-passage distances from member 0 on the complete graph of size k.
 * periods: k entries; contact: row-major k*k, diagonal ignored. */
inline std::vector<double> clique_passage(std::size_t k, const double* periods,
                                          const double* contact) {
    if (k == 0)
        throw std::invalid_argument("clique_passage: empty clique");
    std::vector<double> dist(k, inf);
    std::vector<char> done(k, 0);
    dist[0] = 0.0;
    for (std::size_t round = 0; round < k; ++round) {
        std::size_t u = k;
        for (std::size_t i = 0; i < k; ++i)
            if (!done[i] && (u == k || dist[i] < dist[u]))
                u = i;
        if (u == k || !is_finite(dist[u]))
            break;
        done[u] = 1;
        const double cutoff = periods[u];
        for (std::size_t j = 0; j < k; ++j) {
            if (done[j] || j == u)
                continue;
            const double t = contact[u * k + j];
            if (t <= cutoff && dist[u] + t < dist[j])
                dist[j] = dist[u] + t;
        }
    }
    return dist;
}

struct clique_member_outcome_t {
    double passage; /* first-passage time from the primary; +inf if never */
    double period;  /* the member's own infectious period */
};

/* Simulate one clique of total size k: the primary's period is given, member
 * periods and all contacts are drawn fresh.  Returns members 1..k-1. */
inline std::vector<clique_member_outcome_t> simulate_clique(std::size_t k, double primary_period,
                                                            const weight_law_t& law_I,
                                                            const weight_law_t& law_T,
                                                            rng_t& rng) {
    if (k < 1 || k > 100000)
        throw std::invalid_argument("simulate_clique: clique size out of range");
    std::vector<double> periods(k);
    periods[0] = primary_period;
    for (std::size_t i = 1; i < k; ++i)
        periods[i] = law_I.sample(rng);
    std::vector<double> contact(k * k, inf);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (i != j)
                contact[i * k + j] = law_T.sample(rng);
    const std::vector<double> dist = clique_passage(k, periods.data(), contact.data());
    std::vector<clique_member_outcome_t> out(k - 1);
    for (std::size_t j = 1; j < k; ++j)
        out[j - 1] = {dist[j], periods[j]};
    return out;
}

/*
 * Monte Carlo sample cache for the size-k passage law F_k: passage time from
 * a fresh primary to one fixed member of a clique of size k.  The cache is
 * the common-random-numbers backbone of the Laplace transforms: one sample
 * set serves every lambda, so transform values are monotone in lambda by
 * construction and a solver bracketing on them cannot jitter.
 */
struct kernel_cache_t {
    std::uint32_t k = 0;
    std::uint64_t law_hash = 0;
    std::vector<double> samples; /* sorted ascending, +inf entries last */

    /* Mean of exp(-lambda t); the t = +inf entries contribute 0 for every
     * lambda >= 0 (the lambda = 0 value is the reachable-mass P(t < inf)). */
    double laplace(double lambda) const {
        if (!(lambda >= 0))
            throw std::invalid_argument("laplace: lambda must be >= 0");
        kahan_sum_t acc;
        for (double t : samples)
            acc.add(std::isinf(t) ? 0.0 : std::exp(-lambda * t));
        return acc.value() / double(samples.size());
    }

    double laplace_stderr(double lambda) const {
        if (samples.size() < 2)
            return inf;
        const double m = laplace(lambda);
        kahan_sum_t ss;
        for (double t : samples) {
            const double v = (std::isinf(t) ? 0.0 : std::exp(-lambda * t)) - m;
            ss.add(v * v);
        }
        return std::sqrt(ss.value() / (double(samples.size() - 1) * double(samples.size())));
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("kernel_cache_t::save: cannot open " + path);
        out << "k,law_hash,n_samples\n"
            << k << ',' << law_hash << ',' << samples.size() << '\n';
        for (double t : samples)
            out << fmt_double(t) << '\n';
    }

    static kernel_cache_t load(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("kernel_cache_t::load: cannot open " + path);
        std::string header, line;
        std::getline(in, header);
        if (header != "k,law_hash,n_samples")
            throw std::runtime_error("kernel_cache_t::load: bad header in " + path);
        std::getline(in, line);
        kernel_cache_t cache;
        std::size_t n = 0;
        {
            std::istringstream ss(line);
            char comma;
            if (!(ss >> cache.k >> comma >> cache.law_hash >> comma >> n))
                throw std::runtime_error("kernel_cache_t::load: bad key line in " + path);
        }
        cache.samples.reserve(n);
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            cache.samples.push_back(line == "inf" ? inf : std::strtod(line.c_str(), nullptr));
        }
        if (cache.samples.size() != n)
            throw std::runtime_error("kernel_cache_t::load: sample count mismatch in " + path);
        return cache;
    }
};

/* Combined identity of the (I, T) law pair, used to key caches. */
inline std::uint64_t passage_law_hash(const weight_law_t& law_I, const weight_law_t& law_T) {
    return mix64(law_I.hash() ^ mix64(law_T.hash()));
}

inline kernel_cache_t simulate_kernel(std::size_t k, const weight_law_t& law_I,
                                      const weight_law_t& law_T, std::size_t n_samples,
                                      std::uint64_t seed) {
    if (k < 2)
        throw std::invalid_argument("simulate_kernel: need clique size >= 2");
    if (n_samples == 0)
        throw std::invalid_argument("simulate_kernel: need at least one sample");
    kernel_cache_t cache;
    cache.k = std::uint32_t(k);
    cache.law_hash = passage_law_hash(law_I, law_T);
    cache.samples.resize(n_samples);
    /* fixed chunking keeps the sample set independent of any parallel driver */
    constexpr std::size_t chunk = 4096;
    for (std::size_t lo = 0; lo < n_samples; lo += chunk) {
        rng_t rng(derive_seed(seed, stream::kernel, k, lo / chunk));
        const std::size_t hi = std::min(lo + chunk, n_samples);
        for (std::size_t i = lo; i < hi; ++i) {
            const double primary_period = law_I.sample(rng);
            const auto outcome = simulate_clique(k, primary_period, law_I, law_T, rng);
            cache.samples[i] = outcome.front().passage; /* member 1: the fixed target */
        }
    }
    std::sort(cache.samples.begin(), cache.samples.end());
    return cache;
}

/*
 * Exact Laplace transform of F_k when periods are infinite and contacts are
 * Exponential(beta).  With j members infected, each susceptible is infected
 * at total rate j*beta, so the j -> j+1 waiting time is Exp(j*beta*(k-j));
 * the fixed target's infection rank is uniform on {1..k-1} by exchangeability,
 * giving
 *   L_k(lambda) = (1/(k-1)) sum_{r=1}^{k-1} prod_{j=1}^{r} c_j/(c_j+lambda),
 * with c_j = j*beta*(k-j).
 */
inline double clique_laplace_exponential(std::size_t k, double beta, double lambda) {
    if (k < 2)
        throw std::invalid_argument("clique_laplace_exponential: need k >= 2");
    if (!(beta > 0) || !(lambda >= 0))
        throw std::invalid_argument("clique_laplace_exponential: need beta > 0, lambda >= 0");
    double prod = 1.0;
    kahan_sum_t sum;
    for (std::size_t j = 1; j < k; ++j) {
        const double rate = double(j) * beta * double(k - j);
        prod *= rate / (rate + lambda);
        sum.add(prod);
    }
    return sum.value() / double(k - 1);
}

/*
 * The transform vector (L_2, ..., L_{K+1}) used by the generation solver,
 * either in closed form (infinite periods + exponential contacts) or from
 * Monte Carlo caches sharing common random numbers across lambda.
 */
class laplace_vector_t {
  public:
    static laplace_vector_t exact_exponential(std::size_t K, double beta) {
        laplace_vector_t v;
        v.K_ = K;
        v.beta_ = beta;
        v.exact_ = true;
        return v;
    }

    static laplace_vector_t monte_carlo(std::size_t K, const weight_law_t& law_I,
                                        const weight_law_t& law_T, std::size_t n_samples,
                                        std::uint64_t seed) {
        laplace_vector_t v;
        v.K_ = K;
        v.exact_ = false;
        v.caches_.reserve(K);
        for (std::size_t k = 2; k <= K + 1; ++k)
            v.caches_.push_back(simulate_kernel(k, law_I, law_T, n_samples, seed));
        return v;
    }

    static laplace_vector_t from_caches(std::vector<kernel_cache_t> caches) {
        laplace_vector_t v;
        v.K_ = caches.size();
        v.exact_ = false;
        for (std::size_t i = 0; i < caches.size(); ++i)
            if (caches[i].k != i + 2)
                throw std::invalid_argument("laplace_vector_t: caches must cover k = 2..K+1");
        v.caches_ = std::move(caches);
        return v;
    }

    std::size_t K() const { return K_; }
    bool exact() const { return exact_; }
    const std::vector<kernel_cache_t>& caches() const { return caches_; }

    /* entry i holds L_{i+2}(lambda), i = 0..K-1 */
    std::vector<double> eval(double lambda) const {
        std::vector<double> out(K_);
        for (std::size_t i = 0; i < K_; ++i)
            out[i] = exact_ ? clique_laplace_exponential(i + 2, beta_, lambda)
                            : caches_[i].laplace(lambda);
        return out;
    }

    std::vector<double> stderr_at(double lambda) const {
        std::vector<double> out(K_, 0.0);
        if (!exact_)
            for (std::size_t i = 0; i < K_; ++i)
                out[i] = caches_[i].laplace_stderr(lambda);
        return out;
    }

  private:
    std::size_t K_ = 0;
    double beta_ = 0.0;
    bool exact_ = false;
    std::vector<kernel_cache_t> caches_;
};

}  // namespace rigsir
