#pragma once

/*
 * Weight laws and the four-law model (vertex weight A, group weight B,
 * infectious period I, contact time T).
 *
 * Supported law kinds: point mass, finite discrete (two-point and empirical
 * samples normalize to this), exponential, gamma.  All kinds expose exact
 * first/second moments and, for the mixing laws, an exact mixed-Poisson pmf:
 *   MP(constant c)      = Poisson(c)
 *   MP(discrete)        = Poisson mixture
 *   MP(Exponential(r))  = Geometric(r/(1+r))
 *   MP(Gamma(s, th))    = NegBinomial(s, 1/(1+th))
 *
 * Size-biasing (P(Xbar in dx) = x P(X in dx)/E X) stays inside the family:
 * constants are fixed points, discrete laws reweight by value, Exponential(r)
 * maps to Gamma(2, 1/r) and Gamma(s, th) to Gamma(s+1, th).
 *
 * The infectious-period law may carry an atom at +inf (never recovers); all
 * other laws must be finite-valued.
 */

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace rigsir {

enum class law_kind { constant, discrete, exponential, gamma };

inline const char* law_kind_name(law_kind k) {
    switch (k) {
        case law_kind::constant: return "constant";
        case law_kind::discrete: return "discrete";
        case law_kind::exponential: return "exponential";
        case law_kind::gamma: return "gamma";
    }
    return "?";
}

class weight_law_t {
  public:
    /* Default-constructed law is the point mass at 0. */
    weight_law_t() = default;

    static weight_law_t point_mass(double value) {
        if (std::isnan(value) || value < 0)
            throw config_error("constant.value", "must be >= 0 (or inf)");
        weight_law_t law;
        law.kind_ = law_kind::constant;
        law.p1_ = value;
        return law;
    }

    static weight_law_t discrete(std::vector<double> values, std::vector<double> probs) {
        if (values.empty() || values.size() != probs.size())
            throw config_error("discrete", "values and probs must be non-empty and equal length");
        /* merge duplicate atoms, drop zero-probability ones, sort by value */
        std::vector<std::size_t> idx(values.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        weight_law_t law;
        law.kind_ = law_kind::discrete;
        long double total = 0.0L;
        for (double p : probs) {
            if (std::isnan(p) || p < 0)
                throw config_error("discrete.probs", "must be >= 0");
            total += p;
        }
        if (!(total > 0))
            throw config_error("discrete.probs", "must sum to a positive value");
        for (std::size_t i : idx) {
            const double v = values[i];
            if (std::isnan(v) || v < 0)
                throw config_error("discrete.values", "must be >= 0 (or inf)");
            const double p = double((long double)probs[i] / total);
            if (p == 0)
                continue;
            if (!law.values_.empty() && law.values_.back() == v)
                law.probs_.back() += p;
            else {
                law.values_.push_back(v);
                law.probs_.push_back(p);
            }
        }
        if (law.values_.size() == 1)
            return point_mass(law.values_[0]);
        return law;
    }

    static weight_law_t two_point(double v1, double v2, double p1) {
        if (std::isnan(p1) || p1 < 0 || p1 > 1)
            throw config_error("two_point.p1", "must lie in [0, 1]");
        return discrete({v1, v2}, {p1, 1.0 - p1});
    }

    static weight_law_t exponential(double rate) {
        if (!(rate > 0) || !is_finite(rate))
            throw config_error("exponential.rate", "must be finite and > 0");
        weight_law_t law;
        law.kind_ = law_kind::exponential;
        law.p1_ = rate;
        return law;
    }

    static weight_law_t gamma(double shape, double scale) {
        if (!(shape > 0) || !is_finite(shape) || !(scale > 0) || !is_finite(scale))
            throw config_error("gamma", "shape and scale must be finite and > 0");
        weight_law_t law;
        law.kind_ = law_kind::gamma;
        law.p1_ = shape;
        law.p2_ = scale;
        return law;
    }

    /* Empirical sample file: whitespace-separated non-negative reals (the
     * token "inf" is accepted); becomes the uniform law over the samples. */
    static weight_law_t empirical(const std::vector<double>& samples) {
        return discrete(samples, std::vector<double>(samples.size(), 1.0));
    }

    static weight_law_t empirical_file(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw config_error("empirical_file.path", "cannot open '" + path + "'");
        std::vector<double> samples;
        std::string tok;
        while (in >> tok) {
            if (tok == "inf" || tok == "+inf")
                samples.push_back(inf);
            else {
                try {
                    samples.push_back(std::stod(tok));
                } catch (const std::exception&) {
                    throw config_error("empirical_file", "bad token '" + tok + "' in " + path);
                }
            }
        }
        if (samples.empty())
            throw config_error("empirical_file", "no samples in " + path);
        return empirical(samples);
    }

    law_kind kind() const { return kind_; }
    bool is_discrete_kind() const {
        return kind_ == law_kind::constant || kind_ == law_kind::discrete;
    }

    /* Atom list of a discrete-kind law (values ascending, probs normalized). */
    std::vector<double> atom_values() const {
        require_discrete("atom_values");
        if (kind_ == law_kind::constant)
            return {p1_};
        return values_;
    }
    std::vector<double> atom_probs() const {
        require_discrete("atom_probs");
        if (kind_ == law_kind::constant)
            return {1.0};
        return probs_;
    }

    bool has_infinite_atom() const {
        if (kind_ == law_kind::constant)
            return std::isinf(p1_);
        if (kind_ == law_kind::discrete)
            return std::isinf(values_.back());
        return false;
    }

    double mass_at_zero() const {
        switch (kind_) {
            case law_kind::constant: return p1_ == 0 ? 1.0 : 0.0;
            case law_kind::discrete: return values_.front() == 0 ? probs_.front() : 0.0;
            default: return 0.0;
        }
    }

    double mean() const {
        require_finite_support("mean");
        switch (kind_) {
            case law_kind::constant: return p1_;
            case law_kind::discrete: {
                kahan_sum_t s;
                for (std::size_t i = 0; i < values_.size(); ++i)
                    s.add(values_[i] * probs_[i]);
                return s.value();
            }
            case law_kind::exponential: return 1.0 / p1_;
            case law_kind::gamma: return p1_ * p2_;
        }
        return 0;
    }

    double second_moment() const {
        require_finite_support("second_moment");
        switch (kind_) {
            case law_kind::constant: return p1_ * p1_;
            case law_kind::discrete: {
                kahan_sum_t s;
                for (std::size_t i = 0; i < values_.size(); ++i)
                    s.add(values_[i] * values_[i] * probs_[i]);
                return s.value();
            }
            case law_kind::exponential: return 2.0 / (p1_ * p1_);
            case law_kind::gamma: return p1_ * (p1_ + 1.0) * p2_ * p2_;
        }
        return 0;
    }

    /* All supported kinds have E(X^2 log+ X) < inf: finite atom sets are
     * bounded and exponential/gamma have every moment.  Laws outside this
     * family are not representable, so the gate is structural. */
    bool second_moment_log_finite() const { return !has_infinite_atom(); }

    double sample(rng_t& rng) const {
        switch (kind_) {
            case law_kind::constant: return p1_;
            case law_kind::discrete: {
                double u = rng.uniform01();
                for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
                    u -= probs_[i];
                    if (u < 0)
                        return values_[i];
                }
                return values_.back();
            }
            case law_kind::exponential: return rand_exponential(rng, p1_);
            case law_kind::gamma: return rand_gamma(rng, p1_, p2_);
        }
        return 0;
    }

    weight_law_t size_biased() const {
        require_finite_support("size_biased");
        switch (kind_) {
            case law_kind::constant:
                if (!(p1_ > 0))
                    throw std::invalid_argument("size_biased: law is a point mass at 0");
                return *this;
            case law_kind::discrete: {
                std::vector<double> v, p;
                for (std::size_t i = 0; i < values_.size(); ++i)
                    if (values_[i] > 0) {
                        v.push_back(values_[i]);
                        p.push_back(values_[i] * probs_[i]);
                    }
                if (v.empty())
                    throw std::invalid_argument("size_biased: law is a point mass at 0");
                return discrete(std::move(v), std::move(p));
            }
            case law_kind::exponential: return gamma(2.0, 1.0 / p1_);
            case law_kind::gamma: return gamma(p1_ + 1.0, p2_);
        }
        throw std::logic_error("size_biased: unreachable");
    }

    /* Exact pmf of the mixed Poisson MP(X), entries k = 0..kmax. */
    std::vector<double> mixed_poisson_pmf(std::size_t kmax) const {
        require_finite_support("mixed_poisson_pmf");
        std::vector<double> pmf(kmax + 1, 0.0);
        switch (kind_) {
            case law_kind::constant: {
                accumulate_poisson(pmf, p1_, 1.0);
                break;
            }
            case law_kind::discrete: {
                for (std::size_t i = 0; i < values_.size(); ++i)
                    accumulate_poisson(pmf, values_[i], probs_[i]);
                break;
            }
            case law_kind::exponential: {
                const double r = p1_;
                double term = r / (1.0 + r); /* k = 0 */
                for (std::size_t k = 0; k <= kmax; ++k) {
                    pmf[k] = term;
                    term /= (1.0 + r);
                }
                break;
            }
            case law_kind::gamma: {
                const double s = p1_, th = p2_;
                const double q = th / (1.0 + th);
                double term = std::pow(1.0 - q, s); /* k = 0 */
                for (std::size_t k = 0; k <= kmax; ++k) {
                    pmf[k] = term;
                    term *= q * (s + double(k)) / (double(k) + 1.0);
                }
                break;
            }
        }
        return pmf;
    }

    bool operator==(const weight_law_t& o) const {
        return kind_ == o.kind_ && p1_ == o.p1_ && p2_ == o.p2_ && values_ == o.values_ &&
               probs_ == o.probs_;
    }

    /* Stable content hash (used to key Monte Carlo kernel caches). */
    std::uint64_t hash() const {
        std::uint64_t h = mix64(0x6c61774b696e64ULL ^ std::uint64_t(kind_));
        auto fold = [&h](double x) {
            std::uint64_t bits;
            static_assert(sizeof bits == sizeof x);
            std::memcpy(&bits, &x, sizeof bits);
            h = mix64(h ^ bits);
        };
        fold(p1_);
        fold(p2_);
        for (double v : values_) fold(v);
        for (double p : probs_) fold(p);
        return h;
    }

  private:
    void require_discrete(const char* who) const {
        if (!is_discrete_kind())
            throw std::logic_error(std::string(who) + ": law has no finite atom list");
    }
    void require_finite_support(const char* who) const {
        if (has_infinite_atom())
            throw std::invalid_argument(std::string(who) + ": law has an atom at +inf");
    }
    static void accumulate_poisson(std::vector<double>& pmf, double lambda, double weight) {
        if (lambda == 0) {
            pmf[0] += weight;
            return;
        }
        double term = std::exp(-lambda); /* k = 0 */
        for (std::size_t k = 0; k < pmf.size(); ++k) {
            pmf[k] += weight * term;
            term *= lambda / (double(k) + 1.0);
        }
    }

    law_kind kind_ = law_kind::constant;
    double p1_ = 0.0, p2_ = 0.0;
    std::vector<double> values_, probs_;
};

/* One draw of MP(law): Poisson with a freshly sampled intensity. */
inline std::uint64_t sample_mixed_poisson(const weight_law_t& law, rng_t& rng) {
    return rand_poisson(rng, law.sample(rng));
}

/*
 * The four-law model.  Standing admissibility conditions checked here:
 *   - A and B non-negative, finite, not almost surely 0, with finite
 *     E(X^2 log+ X) (structural for the supported family);
 *   - I non-negative, may include +inf;
 *   - T non-negative and finite.
 * The transmission-time atom condition P(T' = 0) < 1/(mu_Abar * mu_Bbar) is a
 * separate gate (check_transmission_atom) because it involves both weight
 * laws; the epidemic and solver layers apply it.
 */
struct model_t {
    weight_law_t A, B, I, T;

    double mu_A() const { return A.mean(); }
    double mu_B() const { return B.mean(); }
    double mu_A_bar() const { return A.second_moment() / A.mean(); }
    double mu_B_bar() const { return B.second_moment() / B.mean(); }

    /* Number of group vertices for n ordinary vertices. */
    std::uint64_t group_count(std::uint64_t n) const {
        return std::uint64_t(std::floor(double(n) * mu_A() / mu_B()));
    }

    /* P(T' = 0) = P(T = 0): a zero contact time is never censored because
     * infectious periods are non-negative. */
    double p_transmission_zero() const { return T.mass_at_zero(); }

    double mean_offspring() const { return mu_A_bar() * mu_B_bar(); }

    void validate() const {
        validate_weight("A", A);
        validate_weight("B", B);
        if (T.has_infinite_atom())
            throw assumption_error("contact time law T must be finite-valued");
        /* I: non-negativity is structural; +inf atoms allowed. */
    }

    void check_transmission_atom() const {
        const double limit = 1.0 / mean_offspring();
        if (p_transmission_zero() >= limit)
            throw assumption_error(
                "P(T'=0) = " + fmt_double(p_transmission_zero()) +
                " must be < 1/(mu_Abar*mu_Bbar) = " + fmt_double(limit) +
                ": instantaneous transmissions would dominate");
    }

  private:
    static void validate_weight(const char* name, const weight_law_t& law) {
        if (law.has_infinite_atom())
            throw assumption_error(std::string("weight law ") + name +
                                   " must be finite-valued");
        if (!(law.mean() > 0))
            throw assumption_error(std::string("weight law ") + name +
                                   " must not be almost surely 0");
        if (!law.second_moment_log_finite())
            throw assumption_error(std::string("weight law ") + name +
                                   " needs E(X^2 log+ X) < inf");
    }
};

/*
 * Size-bias transfer identity for mixed Poisson variables: if D ~ MP(X) with
 * E X > 0, then the size-biased variable minus one, Dbar - 1, is MP(Xbar).
 * Returns the max absolute pmf difference over k = 0..kmax between
 *   P(Dbar - 1 = k) = (k+1) P(D = k+1) / E D      and      P(MP(Xbar) = k).
 */
inline double size_biased_mp_identity_gap(const weight_law_t& law, std::size_t kmax) {
    const double mean = law.mean();
    if (!(mean > 0))
        throw std::invalid_argument("size_biased_mp_identity_gap: E X must be > 0");
    const std::vector<double> base = law.mixed_poisson_pmf(kmax + 1);
    const std::vector<double> shifted = law.size_biased().mixed_poisson_pmf(kmax);
    double gap = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
        const double lhs = double(k + 1) * base[k + 1] / mean;
        gap = std::max(gap, std::abs(lhs - shifted[k]));
    }
    return gap;
}

}  // namespace rigsir
