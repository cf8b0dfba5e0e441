/* Continuous-time multitype branching process approximating the epidemic.
 *
 * An individual with infectious period I spawns a mixed-Poisson number of
 * cliques (mixing law A for the ordinary root, size-biased A for everyone
 * else); each clique holds MP(size-biased B) secondaries, and the within-
 * clique first-passage engine decides who is reached and when.  A child
 * reached through a clique of total size 2 carries the abstract type theta
 * and redraws its period fresh on materialization; every other child's type
 * is the period it already realized inside the clique.
 *
 * Theta individuals anchor "blocks" (their theta-free descendant trees) and
 * form embedded generations; the discounted sums over those generations are
 * the martingale used to cross-check the Malthusian rate.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clique_kernel.hpp"
#include "common.hpp"
#include "rng.hpp"
#include "weights.hpp"

namespace rigsir {

inline constexpr std::int64_t no_individual = -1;

struct individual_t {
    std::int64_t parent = no_individual;
    double tau = 0.0;  /* birth time */
    bool is_theta = false;
    double period = 0.0; /* infectious period actually lived */
    std::uint32_t generation = 0;
    std::size_t block_root = 0;               /* index of the anchoring theta/root */
    std::int64_t embedded_generation = no_individual; /* defined for theta and the root */
};

struct child_spec_t {
    double offset;   /* birth delay relative to the parent */
    bool is_theta;   /* reached through a clique of total size 2 */
    double period;   /* period realized in the clique; ignored for theta children */
};

struct reproduce_result_t {
    std::vector<child_spec_t> children;
    std::size_t clique_count = 0;
    std::vector<std::size_t> clique_sizes; /* secondaries per clique, zeros included */
};

enum class root_kind_t {
    general,     /* ordinary ancestor: clique count mixes over A */
    tilde_theta, /* theta-typed ancestor mixing over size-biased A */
};

struct branching_run_t {
    std::vector<individual_t> individuals; /* id = index, in birth order */
    double t_max = 0.0;
    bool truncated = false; /* individual cap hit */
    bool extinct = false;
    std::vector<double> birth_events;    /* sorted */
    std::vector<double> recovery_events; /* sorted, finite ones only */

    std::size_t size() const { return individuals.size(); }

    /* #{u: tau_u <= t < tau_u + I_u} */
    std::size_t alive_at(double t) const {
        if (t < 0.0)
            return 0;
        const auto births =
            std::upper_bound(birth_events.begin(), birth_events.end(), t) - birth_events.begin();
        const auto recoveries =
            std::upper_bound(recovery_events.begin(), recovery_events.end(), t) -
            recovery_events.begin();
        return std::size_t(births - recoveries);
    }

    /* Discounted embedded-generation sums; index n holds sum over generation n
     * of exp(-alpha * tau).  Index 0 is exactly 1 (the root at time 0). */
    std::vector<double> w_hat(double alpha) const {
        std::int64_t top = 0;
        for (const auto& ind : individuals)
            top = std::max(top, ind.embedded_generation);
        std::vector<kahan_sum_t> sums(std::size_t(top) + 1);
        for (const auto& ind : individuals)
            if (ind.embedded_generation != no_individual)
                sums[std::size_t(ind.embedded_generation)].add(std::exp(-alpha * ind.tau));
        std::vector<double> out(sums.size());
        for (std::size_t i = 0; i < sums.size(); ++i)
            out[i] = sums[i].value();
        return out;
    }

    void save_jsonl(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("save_jsonl: cannot open " + path);
        for (std::size_t id = 0; id < individuals.size(); ++id) {
            const auto& ind = individuals[id];
            nlohmann::json rec;
            rec["id"] = id;
            if (ind.parent == no_individual)
                rec["parent"] = nullptr;
            else
                rec["parent"] = ind.parent;
            rec["tau"] = ind.tau;
            if (ind.is_theta)
                rec["type"] = "theta";
            else
                rec["type"] = ind.period;
            if (is_finite(ind.period))
                rec["I"] = ind.period;
            else
                rec["I"] = nullptr;
            rec["block_root"] = ind.block_root;
            if (ind.embedded_generation == no_individual)
                rec["embedded_generation"] = nullptr;
            else
                rec["embedded_generation"] = ind.embedded_generation;
            out << rec.dump() << '\n';
        }
    }

    void save_counts_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("save_counts_csv: cannot open " + path);
        out << "t,alive\n";
        std::vector<double> grid = birth_events;
        grid.insert(grid.end(), recovery_events.begin(), recovery_events.end());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        for (double t : grid)
            out << fmt_double(t) << ',' << alive_at(t) << '\n';
    }
};

struct embedded_run_t {
    /* generation_birth_times[n] lists tau over embedded generation n */
    std::vector<std::vector<double>> generation_birth_times;
    bool truncated = false;

    std::vector<double> w_hat(double alpha) const {
        std::vector<double> out(generation_birth_times.size(), 0.0);
        for (std::size_t n = 0; n < out.size(); ++n) {
            kahan_sum_t sum;
            for (double tau : generation_birth_times[n])
                sum.add(std::exp(-alpha * tau));
            out[n] = sum.value();
        }
        return out;
    }
};

class branching_engine_t {
  public:
    explicit branching_engine_t(model_t model)
        : model_(std::move(model)), a_bar_(model_.A.size_biased()), b_bar_(model_.B.size_biased()) {
        model_.validate();
    }

    const model_t& model() const { return model_; }

    /* One reproduction event for an individual living the given period.
     * Draw order: clique-count mixing value, clique count, then per clique
     * the secondary-count mixing value, the count, and the clique passage. */
    reproduce_result_t reproduce_detailed(double period, bool root_clique_law, rng_t& rng) const {
        reproduce_result_t out;
        const double a = (root_clique_law ? model_.A : a_bar_).sample(rng);
        out.clique_count = rand_poisson(rng, a);
        out.clique_sizes.reserve(out.clique_count);
        for (std::size_t c = 0; c < out.clique_count; ++c) {
            const std::uint64_t k = sample_mixed_poisson(b_bar_, rng);
            out.clique_sizes.push_back(k);
            if (k == 0)
                continue;
            const auto members = simulate_clique(std::size_t(k) + 1, period, model_.I, model_.T, rng);
            for (const auto& m : members)
                if (is_finite(m.passage))
                    out.children.push_back({m.passage, k == 1, m.period});
        }
        return out;
    }

    std::vector<child_spec_t> reproduce(double period, bool root_clique_law, rng_t& rng) const {
        return reproduce_detailed(period, root_clique_law, rng).children;
    }

    branching_run_t run(double t_max, std::size_t cap, rng_t& rng,
                        root_kind_t kind = root_kind_t::general) const {
        if (!(t_max > 0.0))
            throw std::invalid_argument("run_branching: t_max must be positive");
        if (cap == 0)
            throw std::invalid_argument("run_branching: cap must be positive");

        struct pending_t {
            double tau;
            std::uint64_t seq; /* deterministic tie-break for equal birth times */
            std::int64_t parent;
            bool is_theta;
            double period;
            std::uint32_t generation;
        };
        const auto later = [](const pending_t& x, const pending_t& y) {
            return std::tie(x.tau, x.seq) > std::tie(y.tau, y.seq);
        };
        std::priority_queue<pending_t, std::vector<pending_t>, decltype(later)> queue(later);

        branching_run_t run;
        run.t_max = t_max;
        std::uint64_t seq = 0;
        queue.push({0.0, seq++, no_individual, kind == root_kind_t::tilde_theta, 0.0, 0});
        bool births_beyond_horizon = false;

        while (!queue.empty()) {
            if (run.individuals.size() >= cap) {
                run.truncated = true;
                break;
            }
            const pending_t p = queue.top();
            queue.pop();
            const bool is_root = p.parent == no_individual;

            individual_t ind;
            ind.parent = p.parent;
            ind.tau = p.tau;
            ind.is_theta = p.is_theta;
            ind.generation = p.generation;
            /* theta children and the root regenerate: the period is a fresh
             * draw; all other children live the period their clique realized */
            ind.period = (p.is_theta || is_root) ? model_.I.sample(rng) : p.period;

            const std::size_t id = run.individuals.size();
            if (is_root) {
                ind.block_root = id;
                ind.embedded_generation = 0;
            } else if (p.is_theta) {
                ind.block_root = id; /* a theta child starts its own block */
                const auto& anchor = run.individuals[run.individuals[p.parent].block_root];
                ind.embedded_generation = anchor.embedded_generation + 1;
            } else {
                ind.block_root = run.individuals[p.parent].block_root;
            }

            const auto kids =
                reproduce(ind.period, is_root && kind == root_kind_t::general, rng);
            for (const auto& kid : kids) {
                const double child_tau = ind.tau + kid.offset;
                if (child_tau > t_max) {
                    births_beyond_horizon = true;
                    continue;
                }
                queue.push({child_tau, seq++, std::int64_t(id), kid.is_theta, kid.period,
                            ind.generation + 1});
            }
            run.individuals.push_back(ind);
        }

        run.birth_events.reserve(run.individuals.size());
        for (const auto& ind : run.individuals) {
            run.birth_events.push_back(ind.tau);
            const double recovery = ind.tau + ind.period;
            if (is_finite(recovery))
                run.recovery_events.push_back(recovery);
        }
        std::sort(run.birth_events.begin(), run.birth_events.end());
        std::sort(run.recovery_events.begin(), run.recovery_events.end());
        run.extinct =
            !run.truncated && !births_beyond_horizon && run.alive_at(t_max) == 0;
        return run;
    }

    /* Generation-driven expansion of the theta-rooted process: each theta
     * individual's block is expanded exhaustively (no time horizon), so the
     * discounted generation sums are complete.  Requires the within-block
     * offspring mean to be < 1 or the cap will trip. */
    embedded_run_t run_embedded(std::size_t n_gen, std::size_t cap, rng_t& rng) const {
        embedded_run_t out;
        out.generation_birth_times.assign(n_gen + 1, {});
        out.generation_birth_times[0] = {0.0};
        std::size_t materialized = 1;
        for (std::size_t g = 0; g < n_gen; ++g) {
            for (std::size_t anchor = 0; anchor < out.generation_birth_times[g].size(); ++anchor) {
                const double anchor_tau = out.generation_birth_times[g][anchor];
                std::vector<std::pair<double, double>> block; /* (tau, period) */
                block.emplace_back(anchor_tau, model_.I.sample(rng));
                for (std::size_t i = 0; i < block.size(); ++i) {
                    const auto member = block[i];
                    const auto kids = reproduce(member.second, false, rng);
                    for (const auto& kid : kids) {
                        const double child_tau = member.first + kid.offset;
                        if (kid.is_theta) {
                            out.generation_birth_times[g + 1].push_back(child_tau);
                        } else {
                            block.emplace_back(child_tau, kid.period);
                            if (++materialized > cap) {
                                out.truncated = true;
                                return out;
                            }
                        }
                    }
                }
                ++materialized;
            }
        }
        return out;
    }

  private:
    model_t model_;
    weight_law_t a_bar_, b_bar_;
};

inline branching_run_t run_branching(const model_t& model, double t_max, std::size_t cap,
                                     rng_t& rng, root_kind_t kind = root_kind_t::general) {
    return branching_engine_t(model).run(t_max, cap, rng, kind);
}

/* Double-counts the population through the block partition: each block anchor
 * x contributes #{y in its block: tau_y <= tau_x + s < tau_y + I_y} at age
 * s = t - tau_x.  Must agree with the direct sweep over all individuals. */
inline std::size_t characteristic_count(const branching_run_t& run, double t) {
    if (t > run.t_max)
        throw std::invalid_argument("characteristic_count: t beyond the run horizon");
    std::size_t total = 0;
    for (const auto& y : run.individuals) {
        const auto& anchor = run.individuals[y.block_root];
        const double shifted = anchor.tau + (t - anchor.tau);
        if (y.tau <= shifted && shifted < y.tau + y.period)
            ++total;
    }
    const std::size_t direct = run.alive_at(t);
    if (total != direct)
        throw std::logic_error("characteristic_count: block double-count disagrees with the "
                               "direct population count");
    return total;
}

struct martingale_report_t {
    std::vector<double> mean;      /* index n = embedded generation */
    std::vector<double> variance;
    std::vector<double> stderr_;
    std::size_t n_reps = 0;
};

inline martingale_report_t martingale_diagnostics(const model_t& model, double alpha,
                                                  std::size_t n_gen, std::size_t n_reps,
                                                  std::uint64_t seed,
                                                  std::size_t cap = 1000000) {
    if (n_reps == 0)
        throw std::invalid_argument("martingale_diagnostics: n_reps must be positive");
    branching_engine_t engine(model);
    std::vector<kahan_sum_t> sum(n_gen + 1), sum_sq(n_gen + 1);
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
        rng_t rng(derive_seed(seed, stream::branching, rep));
        const auto run = engine.run_embedded(n_gen, cap, rng);
        if (run.truncated)
            throw std::runtime_error(
                "martingale_diagnostics: a block expansion hit the cap; the within-block "
                "offspring mean must be below 1 for this diagnostic");
        const auto w = run.w_hat(alpha);
        for (std::size_t n = 0; n <= n_gen; ++n) {
            sum[n].add(w[n]);
            sum_sq[n].add(w[n] * w[n]);
        }
    }
    martingale_report_t report;
    report.n_reps = n_reps;
    report.mean.resize(n_gen + 1);
    report.variance.resize(n_gen + 1);
    report.stderr_.resize(n_gen + 1);
    for (std::size_t n = 0; n <= n_gen; ++n) {
        const double mean = sum[n].value() / double(n_reps);
        const double var =
            std::max(0.0, sum_sq[n].value() / double(n_reps) - mean * mean);
        report.mean[n] = mean;
        report.variance[n] = var;
        report.stderr_[n] = std::sqrt(var / double(n_reps));
    }
    return report;
}

/* Least-squares slope of log population size over an evenly spaced time grid;
 * grid points with an empty population are skipped. */
inline ols_fit_t log_growth_fit(const branching_run_t& run, double t_lo, double t_hi,
                                double dt) {
    if (!(dt > 0.0) || !(t_hi > t_lo))
        throw std::invalid_argument("log_growth_fit: bad grid");
    if (t_hi > run.t_max)
        throw std::invalid_argument(
            "log_growth_fit: window beyond the run horizon (counts there miss "
            "births that were never materialized)");
    std::vector<double> xs, ys;
    for (double t = t_lo; t <= t_hi + 1e-12; t += dt) {
        const std::size_t c = run.alive_at(t);
        if (c > 0) {
            xs.push_back(t);
            ys.push_back(std::log(double(c)));
        }
    }
    if (xs.size() < 3)
        throw std::runtime_error("log_growth_fit: not enough populated grid points");
    return ols_fit(xs, ys);
}

}  // namespace rigsir
