/* Joint experiments on the epidemic and its branching approximation.
 *
 * run_coupled drives the lazy graph exploration in infection order: every
 * infection reveals the vertex's remaining group memberships, every newly
 * revealed clique draws its passage times from a stream keyed by its reveal
 * index, and the same numbers read as a growing tree give the approximating
 * branching process.  The two interpretations coincide until the first
 * repeated draw (a repeated group, a repeated or in-clique duplicate vertex,
 * or a revisit of an explored vertex); we record where that happens.
 *
 * The remaining experiments quantify the ingredients of that agreement:
 * the birthday bound on size-biased draws staying distinct, the total
 * variation decay of mixed-Poisson laws built from empirical versus exact
 * size-biased weights, and the scaling-factor perturbation bounds.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "clique_kernel.hpp"
#include "common.hpp"
#include "distance.hpp"
#include "rig_graph.hpp"
#include "rng.hpp"
#include "weights.hpp"

namespace rigsir {

/* Coupling-horizon exponent by moment order of the vertex-weight law.  The
 * boundary order q = 3 carries an extra logarithmic factor in the underlying
 * rate, so rates measured near it are indicative only. */
inline double coupling_gamma(double q) {
    if (!(q >= 2.0))
        throw std::invalid_argument("coupling_gamma: need a moment order q >= 2");
    return std::min(0.5, (q - 1.5) / q);
}

/* One infection step of the coupled run: the realized per-clique stream
 * (secondary counts, passage times, periods) both interpretations consume. */
struct coupled_step_t {
    std::uint32_t entry = 0;
    double time = 0.0;
    double period = 0.0;
    struct clique_draw_t {
        std::size_t k = 0;              /* members beside the entry */
        std::vector<double> passage;    /* aligned with members, ascending id */
        std::vector<double> period;
    };
    std::vector<clique_draw_t> cliques;
};

struct coupled_options_t {
    double q = 4.0;
    double epsilon = -1.0;           /* < 0: use 2 / ln n */
    double horizon_override = -1.0;  /* < 0: n^(gamma - epsilon) */
    std::size_t max_infections = 0;  /* 0: run to exhaustion */
    bool stop_after_divergence = true;
    bool record_streams = false;
    std::uint32_t seed_vertex = 0;
};

struct coupling_report_t {
    std::size_t n = 0;
    double gamma = 0.0;
    double epsilon = 0.0;
    double horizon_target = 0.0;
    std::size_t total_infections = 0;
    std::optional<std::size_t> infections_at_divergence;
    miscoupling_kind first_kind = miscoupling_kind::none;
    miscoupling_record_t record;
    bool reached_horizon_clean = false;
    std::vector<coupled_step_t> steps; /* filled only when recording streams */
};

inline coupling_report_t run_coupled(const model_t& model, std::size_t n, std::uint64_t seed,
                                     const coupled_options_t& opts = {}) {
    if (n < 2)
        throw std::invalid_argument("run_coupled: need n >= 2");
    model.check_transmission_atom();

    coupling_report_t report;
    report.n = n;
    report.gamma = coupling_gamma(opts.q);
    report.epsilon = opts.epsilon >= 0.0 ? opts.epsilon : 2.0 / std::log(double(n));
    report.horizon_target = opts.horizon_override >= 0.0
                                ? opts.horizon_override
                                : std::pow(double(n), report.gamma - report.epsilon);

    explorer_t explorer(model, n, seed);
    explorer.start(opts.seed_vertex);

    struct pending_t {
        double time;
        std::uint64_t push_seq;
        std::uint32_t vertex;
        double period;   /* the period realized in the infecting clique */
        bool pair;       /* infected through a pair clique: redraw fresh */
    };
    const auto later = [](const pending_t& x, const pending_t& y) {
        return std::tie(x.time, x.push_seq) > std::tie(y.time, y.push_seq);
    };
    std::priority_queue<pending_t, std::vector<pending_t>, decltype(later)> queue(later);
    std::uint64_t push_seq = 0;
    /* the initial case regenerates like a pair-clique child: fresh period */
    queue.push({0.0, push_seq++, opts.seed_vertex, 0.0, true});

    std::vector<char> infected(n, 0);
    std::size_t infections = 0;
    std::size_t cliques_revealed = 0;
    bool diverged = false;

    while (!queue.empty()) {
        const pending_t p = queue.top();
        queue.pop();
        if (infected[p.vertex])
            continue;
        infected[p.vertex] = 1;
        ++infections;

        double period = p.period;
        if (p.pair) {
            rng_t period_rng(derive_seed(seed, stream::coupling, 2 * std::uint64_t(p.vertex) + 1));
            period = model.I.sample(period_rng);
        }

        const auto step = explorer.explore(p.vertex);
        if (!diverged && !explorer.miscoupling().clean()) {
            diverged = true;
            report.infections_at_divergence = explorer.miscoupling().first_step;
            report.first_kind = explorer.miscoupling().first_kind;
        }

        coupled_step_t record_step;
        record_step.entry = p.vertex;
        record_step.time = p.time;
        record_step.period = period;

        for (std::uint32_t c : step.new_cliques) {
            const auto& members_with_entry = explorer.graph().cliques[c];
            std::vector<std::uint32_t> members;
            members.reserve(members_with_entry.size());
            for (std::uint32_t u : members_with_entry)
                if (u != p.vertex)
                    members.push_back(u); /* already sorted ascending */
            const std::size_t clique_stream = cliques_revealed++;
            const std::size_t k = members.size();
            if (k == 0)
                continue;
            rng_t clique_rng(derive_seed(seed, stream::coupling, 2 * clique_stream));
            const auto outcomes = simulate_clique(k + 1, period, model.I, model.T, clique_rng);
            coupled_step_t::clique_draw_t draw;
            draw.k = k;
            for (std::size_t j = 0; j < k; ++j) {
                draw.passage.push_back(outcomes[j].passage);
                draw.period.push_back(outcomes[j].period);
                if (is_finite(outcomes[j].passage) && !infected[members[j]])
                    queue.push({p.time + outcomes[j].passage, push_seq++, members[j],
                                outcomes[j].period, k == 1});
            }
            if (opts.record_streams)
                record_step.cliques.push_back(std::move(draw));
        }
        if (opts.record_streams)
            report.steps.push_back(std::move(record_step));

        if (!diverged && double(infections) >= report.horizon_target)
            report.reached_horizon_clean = true;
        if (diverged && opts.stop_after_divergence)
            break;
        if (opts.max_infections != 0 && infections >= opts.max_infections)
            break;
    }
    report.total_infections = infections;
    report.record = explorer.miscoupling();
    return report;
}

/* The tree reading of a recorded run: replay the per-clique streams as plain
 * parent-child offsets, with no vertex identities and no merging.  Before the
 * first repeated draw this must reproduce the epidemic's birth times and
 * periods bit for bit. */
struct shadow_birth_t {
    double time;
    double period;
};

inline std::vector<shadow_birth_t> replay_shadow(const std::vector<coupled_step_t>& steps) {
    struct pending_t {
        double time;
        std::uint64_t push_seq;
        double period;
    };
    const auto later = [](const pending_t& x, const pending_t& y) {
        return std::tie(x.time, x.push_seq) > std::tie(y.time, y.push_seq);
    };
    std::priority_queue<pending_t, std::vector<pending_t>, decltype(later)> queue(later);
    std::uint64_t push_seq = 0;
    queue.push({0.0, push_seq++, 0.0});

    std::vector<shadow_birth_t> births;
    for (const auto& step : steps) {
        if (queue.empty())
            break;
        const pending_t p = queue.top();
        queue.pop();
        /* the realized period (fresh redraws included) comes from the shared
         * stream, recorded at the matching epidemic infection */
        births.push_back({p.time, step.period});
        for (const auto& clique : step.cliques)
            for (std::size_t j = 0; j < clique.k; ++j)
                if (is_finite(clique.passage[j]))
                    queue.push({p.time + clique.passage[j], push_seq++, clique.period[j]});
    }
    return births;
}

/* ---- birthday bound on size-biased draws staying distinct ---- */

struct birthday_result_t {
    double empirical = 0.0;
    double bound = 0.0;
    double stderr_ = 0.0;
};

inline birthday_result_t birthday_bound_check(const std::vector<double>& weights, std::size_t j_n,
                                              std::size_t n_reps, std::uint64_t seed) {
    if (j_n < 1)
        throw std::invalid_argument("birthday_bound_check: need at least one draw");
    if (n_reps == 0)
        throw std::invalid_argument("birthday_bound_check: need at least one rep");
    kahan_sum_t sum, sum_sq;
    for (double w : weights) {
        sum.add(w);
        sum_sq.add(w * w);
    }
    const double total = sum.value();
    if (!(total > 0))
        throw std::invalid_argument("birthday_bound_check: weights sum to zero");

    birthday_result_t out;
    out.bound = double(j_n - 1) * double(j_n) * sum_sq.value() / (2.0 * total * total);

    alias_table_t pick(weights);
    std::size_t collisions = 0;
    /* rep-stamped marks make the repeat check O(1) per draw */
    std::vector<std::size_t> stamp(weights.size(), SIZE_MAX);
    for (std::size_t rep = 0; rep < n_reps; ++rep) {
        rng_t rng(derive_seed(seed, stream::coupling, rep));
        bool repeat = false;
        for (std::size_t j = 0; j < j_n && !repeat; ++j) {
            const auto x = pick.sample(rng);
            repeat = stamp[x] == rep;
            stamp[x] = rep;
        }
        collisions += repeat;
    }
    out.empirical = double(collisions) / double(n_reps);
    out.stderr_ = std::sqrt(out.empirical * (1.0 - out.empirical) / double(n_reps));
    return out;
}

/* ---- decay of d_TV(Po(size-biased exact), Po(size-biased empirical)) ---- */

struct tv_rate_result_t {
    std::vector<std::size_t> n_grid;
    std::vector<double> mean_tv;
    std::vector<double> stderr_;
    double slope = 0.0; /* log-log fit across the grid */
};

inline tv_rate_result_t tv_rate_experiment(const weight_law_t& law_A,
                                           const std::vector<std::size_t>& n_grid,
                                           std::size_t n_reps, std::uint64_t seed) {
    if (law_A.kind() != law_kind::constant && law_A.kind() != law_kind::discrete)
        throw config_error("tv_rates.law", "need a finite-support law");
    if (n_grid.empty() || n_reps == 0)
        throw std::invalid_argument("tv_rate_experiment: empty grid or no reps");

    auto exact = atoms_of(law_A.size_biased());
    std::sort(exact.begin(), exact.end(),
              [](const atom_t& a, const atom_t& b) { return a.value < b.value; });

    tv_rate_result_t out;
    out.n_grid = n_grid;
    std::vector<double> sample;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const std::size_t n = n_grid[gi];
        kahan_sum_t sum, sum_sq;
        for (std::size_t rep = 0; rep < n_reps; ++rep) {
            rng_t rng(derive_seed(seed, stream::coupling, gi, rep));
            sample.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                sample[i] = law_A.sample(rng);
            const auto empirical = size_biased_empirical_atoms(sample);
            const double tv = comonotone_expectation(exact, empirical, poisson_tv);
            sum.add(tv);
            sum_sq.add(tv * tv);
        }
        const double mean = sum.value() / double(n_reps);
        const double var = std::max(0.0, sum_sq.value() / double(n_reps) - mean * mean);
        out.mean_tv.push_back(mean);
        out.stderr_.push_back(std::sqrt(var / double(n_reps)));
    }

    std::vector<double> xs, ys;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi)
        if (out.mean_tv[gi] > 0.0) {
            xs.push_back(std::log(double(n_grid[gi])));
            ys.push_back(std::log(out.mean_tv[gi]));
        }
    out.slope = xs.size() >= 2 ? ols_fit(xs, ys).slope : 0.0;
    return out;
}

/* ---- empirical-mean scaling factors: d_TV(Po(c X), Po(X)) per side ---- */

struct scaling_tv_result_t {
    std::vector<std::size_t> n_grid;
    std::vector<double> group_side;  /* size-biased empirical B scaled by the A-mean ratio */
    std::vector<double> vertex_side; /* size-biased empirical A scaled by the B-mean ratio */
};

inline scaling_tv_result_t scaling_factor_tv_check(const model_t& model,
                                                   const std::vector<std::size_t>& n_grid,
                                                   std::size_t n_reps, std::uint64_t seed) {
    if (n_grid.empty() || n_reps == 0)
        throw std::invalid_argument("scaling_factor_tv_check: empty grid or no reps");
    model.validate();

    scaling_tv_result_t out;
    out.n_grid = n_grid;
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        const std::size_t n = n_grid[gi];
        const std::size_t m = model.group_count(n);
        kahan_sum_t group_acc, vertex_acc;
        for (std::size_t rep = 0; rep < n_reps; ++rep) {
            rng_t rng(derive_seed(seed, stream::coupling, gi, rep));
            std::vector<double> a(n), b(m);
            kahan_sum_t sa, sb;
            for (auto& x : a) {
                x = model.A.sample(rng);
                sa.add(x);
            }
            for (auto& x : b) {
                x = model.B.sample(rng);
                sb.add(x);
            }
            const double scale_a = sa.value() / double(n) / model.mu_A();
            const double scale_b = sb.value() / double(m) / model.mu_B();
            /* couple Po(cX) and Po(X) through the same size-biased draw X;
             * equal weights are aggregated so each distinct value costs one
             * total-variation evaluation */
            const auto tv_under = [](const std::vector<double>& w, double scale) {
                std::map<double, double> mass;
                kahan_sum_t total;
                for (double x : w) {
                    total.add(x);
                    if (x > 0)
                        mass[x] += x;
                }
                kahan_sum_t acc;
                for (const auto& [x, weight] : mass)
                    acc.add(weight / total.value() * poisson_tv(x * scale, x));
                return acc.value();
            };
            group_acc.add(tv_under(b, scale_a));
            vertex_acc.add(tv_under(a, scale_b));
        }
        out.group_side.push_back(group_acc.value() / double(n_reps));
        out.vertex_side.push_back(vertex_acc.value() / double(n_reps));
    }
    return out;
}

}  // namespace rigsir
