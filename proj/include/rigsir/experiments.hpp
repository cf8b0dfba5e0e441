#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigsir/branching.hpp"
#include "rigsir/clique_kernel.hpp"
#include "rigsir/config.hpp"
#include "rigsir/coupling.hpp"
#include "rigsir/epidemic.hpp"
#include "rigsir/lotka.hpp"
#include "rigsir/rig_graph.hpp"

/* Experiment drivers behind the command-line tool.  Every driver writes its
 * artifacts under cfg.out_dir and returns one human-readable summary line.
 * Replica work runs through parallel_for with per-replica result slots that
 * are reduced in index order afterwards, so outputs are byte-identical no
 * matter how many workers execute them. */

namespace rigsir {

template <typename F>
inline void parallel_for(std::size_t count, std::size_t workers, F&& body) {
    if (count == 0) return;
    std::size_t k = workers > 0 ? workers : 1;
    if (k > count) k = count;
    if (k == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto drain = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(drain);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace experiment_detail {

inline std::string replica_suffix(std::size_t replicas, std::size_t r) {
    return replicas > 1 ? "_r" + std::to_string(r) : std::string{};
}

inline std::uint64_t replica_seed(const run_config_t& cfg, std::size_t r) {
    return derive_seed(cfg.seed, stream::experiment, static_cast<std::uint64_t>(r));
}

inline std::filesystem::path out_path(const run_config_t& cfg, const std::string& name) {
    return std::filesystem::path(cfg.out_dir) / name;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

inline std::string fmt_fixed(double x, int digits = 6) {
    if (std::isnan(x)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

inline nlohmann::json finite_or_null(double x) {
    return is_finite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double mean_in_order(const std::vector<double>& xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    kahan_sum_t acc;
    for (double x : xs) acc.add(x);
    return acc.value() / static_cast<double>(xs.size());
}

}  // namespace experiment_detail

inline std::string run_generate_graph(const run_config_t& cfg) {
    using namespace experiment_detail;
    struct slot_t {
        std::size_t groups = 0, directed_edges = 0;
        double clustering = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<slot_t> slots(cfg.replicas);
    parallel_for(cfg.replicas, cfg.effective_workers(), [&](std::size_t r) {
        const auto g = generate_batch(cfg.model, cfg.n, replica_seed(cfg, r));
        const auto suffix = replica_suffix(cfg.replicas, r);
        g.save_csv(out_path(cfg, "graph_edges" + suffix + ".csv").string(),
                   out_path(cfg, "graph_cliques" + suffix + ".csv").string());
        slots[r].groups = g.m;
        slots[r].directed_edges = g.directed_edge_count();
        if (g.directed_edge_count() > 0) slots[r].clustering = g.clustering_coefficient();
    });

    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> edge_counts;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        rows.push_back({{"replica", r},
                        {"groups", slots[r].groups},
                        {"directed_edges", slots[r].directed_edges},
                        {"clustering", finite_or_null(slots[r].clustering)}});
        edge_counts.push_back(static_cast<double>(slots[r].directed_edges));
    }
    write_json(out_path(cfg, "graph_summary.json"),
               {{"n", cfg.n}, {"replicas", cfg.replicas}, {"runs", rows}});
    return "generate-graph: replicas=" + std::to_string(cfg.replicas) +
           " n=" + std::to_string(cfg.n) +
           " mean_directed_edges=" + fmt_fixed(mean_in_order(edge_counts), 1);
}

inline std::string run_simulate(const run_config_t& cfg) {
    using namespace experiment_detail;
    cfg.model.check_transmission_atom();  /* admissibility outranks window checks (exit 3) */
    if (cfg.seed_vertex >= cfg.n)
        throw config_error("seed_vertex", "must be smaller than n");
    if (cfg.effective_count_hi() <= cfg.count_lo)
        throw config_error("count_hi", "resolved fit window is empty: n^0.4 = " +
                                           fmt_fixed(cfg.effective_count_hi(), 1) +
                                           " does not exceed count_lo = " +
                                           fmt_fixed(cfg.count_lo, 1) +
                                           "; set count_lo or count_hi explicitly");
    struct slot_t {
        std::size_t total_infected = 0;
        double alpha_hat = std::numeric_limits<double>::quiet_NaN();
        double stderr_ = std::numeric_limits<double>::quiet_NaN();
        std::size_t n_points = 0;
    };
    std::vector<slot_t> slots(cfg.replicas);
    parallel_for(cfg.replicas, cfg.effective_workers(), [&](std::size_t r) {
        const std::uint64_t seed_r = replica_seed(cfg, r);
        const auto g = generate_batch(cfg.model, cfg.n, seed_r);
        const auto w = draw_transmission(g, cfg.model, seed_r);
        const auto trace = run_epidemic(g, w, cfg.seed_vertex, cfg.t_max);
        const auto suffix = replica_suffix(cfg.replicas, r);
        trace.save_jsonl(out_path(cfg, "epidemic" + suffix + ".jsonl").string(), g);
        trace.save_counts_csv(out_path(cfg, "epidemic_counts" + suffix + ".csv").string());
        slots[r].total_infected = trace.total_infected();
        try {
            const auto est = estimate_growth_rate(
                trace, cfg.n, cfg.count_lo,
                cfg.count_hi >= 0.0 ? std::optional<double>(cfg.count_hi) : std::nullopt);
            slots[r].alpha_hat = est.alpha_hat;
            slots[r].stderr_ = est.stderr_;
            slots[r].n_points = est.n_points;
        } catch (const std::runtime_error&) {
            /* outbreak never reached the fit window; leave the estimate empty */
        }
    });

    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> sizes, alphas;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        rows.push_back({{"replica", r},
                        {"total_infected", slots[r].total_infected},
                        {"alpha_hat", finite_or_null(slots[r].alpha_hat)},
                        {"stderr", finite_or_null(slots[r].stderr_)},
                        {"n_points", slots[r].n_points}});
        sizes.push_back(static_cast<double>(slots[r].total_infected));
        if (is_finite(slots[r].alpha_hat)) alphas.push_back(slots[r].alpha_hat);
    }
    write_json(out_path(cfg, "simulate_summary.json"),
               {{"n", cfg.n},
                {"replicas", cfg.replicas},
                {"t_max", finite_or_null(cfg.t_max)},
                {"count_lo", cfg.count_lo},
                {"count_hi", cfg.effective_count_hi()},
                {"runs", rows}});
    std::string line = "simulate: replicas=" + std::to_string(cfg.replicas) +
                       " mean_total_infected=" + fmt_fixed(mean_in_order(sizes), 1) +
                       " growth_fits=" + std::to_string(alphas.size()) + "/" +
                       std::to_string(cfg.replicas);
    if (!alphas.empty()) line += " median_alpha_hat=" + fmt_fixed(median_of(alphas));
    return line;
}

inline std::string run_solve_lotka(const run_config_t& cfg) {
    using namespace experiment_detail;
    std::string method;
    auto make_problem = [&]() -> lotka_problem_t {
        if (cfg.has_direct_lotka()) {
            method = "direct";
            return lotka_problem_t::from_gamma(
                cfg.lotka_gamma,
                laplace_vector_t::exact_exponential(cfg.lotka_gamma.size(), cfg.lotka_beta));
        }
        if (cfg.model.I.kind() == law_kind::constant && cfg.model.I.has_infinite_atom() &&
            cfg.model.T.kind() == law_kind::exponential) {
            method = "exact";
            return lotka_problem_t::from_model_exact(cfg.model, cfg.tail_tol);
        }
        method = "monte-carlo";
        return lotka_problem_t::from_model_mc(cfg.model, cfg.mc_samples, cfg.seed, cfg.tail_tol);
    };
    const lotka_problem_t problem = make_problem();
    const lotka_solution_t sol = solve_malthusian(problem, cfg.lotka_tol);

    write_json(out_path(cfg, "lotka.json"),
               {{"method", method},
                {"status", to_string(sol.status)},
                {"alpha", finite_or_null(sol.alpha)},
                {"r_star", sol.r_star},
                {"beta", finite_or_null(sol.mean_age)},
                {"residual", finite_or_null(sol.residual)},
                {"K", sol.K},
                {"offspring_mean", problem.offspring_mean},
                {"truncation_gap", problem.truncation_gap},
                {"tol", cfg.lotka_tol}});
    return "solve-lotka: method=" + method + " status=" + to_string(sol.status) +
           " alpha=" + fmt_fixed(sol.alpha) + " r_star=" + fmt_fixed(sol.r_star) +
           " beta=" + fmt_fixed(sol.mean_age);
}

inline std::string run_branching(const run_config_t& cfg) {
    using namespace experiment_detail;
    const branching_engine_t engine(cfg.model);
    struct slot_t {
        std::size_t individuals = 0, final_alive = 0;
        bool truncated = false, extinct = false;
    };
    std::vector<slot_t> slots(cfg.replicas);
    parallel_for(cfg.replicas, cfg.effective_workers(), [&](std::size_t r) {
        rng_t rng(replica_seed(cfg, r));
        const auto run = engine.run(cfg.t_max, cfg.cap, rng);
        const auto suffix = replica_suffix(cfg.replicas, r);
        run.save_jsonl(out_path(cfg, "branching" + suffix + ".jsonl").string());
        run.save_counts_csv(out_path(cfg, "branching_counts" + suffix + ".csv").string());
        slots[r].individuals = run.individuals.size();
        slots[r].final_alive = is_finite(run.t_max) ? run.alive_at(run.t_max) : 0;
        slots[r].truncated = run.truncated;
        slots[r].extinct = run.extinct;
    });

    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> finals;
    std::size_t truncated = 0, extinct = 0;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        rows.push_back({{"replica", r},
                        {"individuals", slots[r].individuals},
                        {"final_alive", slots[r].final_alive},
                        {"truncated", slots[r].truncated},
                        {"extinct", slots[r].extinct}});
        finals.push_back(static_cast<double>(slots[r].final_alive));
        truncated += slots[r].truncated ? 1 : 0;
        extinct += slots[r].extinct ? 1 : 0;
    }
    write_json(out_path(cfg, "branching_summary.json"),
               {{"replicas", cfg.replicas},
                {"t_max", finite_or_null(cfg.t_max)},
                {"cap", cfg.cap},
                {"runs", rows}});
    return "branching: replicas=" + std::to_string(cfg.replicas) +
           " truncated=" + std::to_string(truncated) + " extinct=" + std::to_string(extinct) +
           " mean_final_alive=" + fmt_fixed(mean_in_order(finals), 1);
}

inline std::string run_coupling(const run_config_t& cfg) {
    using namespace experiment_detail;
    if (cfg.n < 2) throw config_error("n", "coupling requires n >= 2");
    std::vector<coupling_report_t> slots(cfg.replicas);
    coupled_options_t opts;
    opts.q = cfg.q;
    opts.epsilon = cfg.epsilon;
    opts.seed_vertex = cfg.seed_vertex;
    parallel_for(cfg.replicas, cfg.effective_workers(), [&](std::size_t r) {
        slots[r] = run_coupled(cfg.model, cfg.n, replica_seed(cfg, r), opts);
    });

    std::ofstream csv(out_path(cfg, "coupling.csv"));
    if (!csv) throw std::runtime_error("cannot open coupling.csv for writing");
    csv << "n,rep,infections_at_divergence,miscoupling_kind,total_infections,"
           "reached_horizon_clean\n";
    std::vector<double> divergences;
    std::size_t clean = 0;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        const auto& rep = slots[r];
        csv << rep.n << ',' << r << ',';
        if (rep.infections_at_divergence) {
            csv << *rep.infections_at_divergence;
            divergences.push_back(static_cast<double>(*rep.infections_at_divergence));
        }
        csv << ',' << to_string(rep.first_kind) << ',' << rep.total_infections << ','
            << (rep.reached_horizon_clean ? 1 : 0) << '\n';
        clean += rep.reached_horizon_clean ? 1 : 0;
    }
    csv.close();

    write_json(out_path(cfg, "coupling_summary.json"),
               {{"n", cfg.n},
                {"replicas", cfg.replicas},
                {"gamma", slots[0].gamma},
                {"epsilon", slots[0].epsilon},
                {"horizon_target", slots[0].horizon_target},
                {"reached_horizon_clean", clean},
                {"median_infections_at_divergence",
                 divergences.empty() ? nlohmann::json(nullptr)
                                     : nlohmann::json(median_of(divergences))}});
    std::string line = "coupling: n=" + std::to_string(cfg.n) +
                       " clean_horizon=" + std::to_string(clean) + "/" +
                       std::to_string(cfg.replicas);
    if (!divergences.empty())
        line += " median_divergence=" + fmt_fixed(median_of(divergences), 1);
    return line;
}

inline std::string run_tv_rates(const run_config_t& cfg) {
    using namespace experiment_detail;
    const auto grid = cfg.effective_n_grid();
    const auto degree_side =
        tv_rate_experiment(cfg.model.A, grid, cfg.n_reps,
                           derive_seed(cfg.seed, stream::experiment, 101));
    const auto scaling_side = scaling_factor_tv_check(
        cfg.model, grid, cfg.n_reps, derive_seed(cfg.seed, stream::experiment, 102));

    std::ofstream csv(out_path(cfg, "tv_rates.csv"));
    if (!csv) throw std::runtime_error("cannot open tv_rates.csv for writing");
    csv << "n,mean_tv,stderr,group_side,vertex_side\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        csv << grid[i] << ',' << fmt_double(degree_side.mean_tv[i]) << ','
            << fmt_double(degree_side.stderr_[i]) << ','
            << fmt_double(scaling_side.group_side[i]) << ','
            << fmt_double(scaling_side.vertex_side[i]) << '\n';
    csv.close();

    write_json(out_path(cfg, "tv_rates.json"),
               {{"n_grid", grid},
                {"n_reps", cfg.n_reps},
                {"mean_tv", degree_side.mean_tv},
                {"stderr", degree_side.stderr_},
                {"slope", finite_or_null(degree_side.slope)},
                {"group_side", scaling_side.group_side},
                {"vertex_side", scaling_side.vertex_side}});
    return "tv-rates: points=" + std::to_string(grid.size()) +
           " slope=" + fmt_fixed(degree_side.slope, 3);
}

/* Runs cfg.experiment (or all of them, in a fixed order) and returns one
 * summary line per executed driver.  The fully resolved configuration is
 * echoed to out_dir/config_resolved.json before any work starts. */
inline std::vector<std::string> run_experiment(const run_config_t& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    experiment_detail::write_json(experiment_detail::out_path(cfg, "config_resolved.json"),
                                  cfg.echo());

    std::vector<std::string> lines;
    auto want = [&](const char* name) {
        return cfg.experiment == "all" || cfg.experiment == name;
    };
    if (want("generate-graph")) lines.push_back(run_generate_graph(cfg));
    if (want("simulate")) lines.push_back(run_simulate(cfg));
    if (want("solve-lotka")) lines.push_back(run_solve_lotka(cfg));
    if (want("branching")) lines.push_back(run_branching(cfg));
    if (want("coupling")) lines.push_back(run_coupling(cfg));
    if (want("tv-rates")) lines.push_back(run_tv_rates(cfg));
    return lines;
}

}  // namespace rigsir
