#pragma once

/*
 * SIR epidemic on a clique graph as first-passage percolation.
 *
 * Every vertex v carries an infectious period I_v; every ordered pair of
 * adjacent vertices (u, v) carries one contact time T_uv (drawn once even if
 * the pair shares several cliques).  The transmission weight is
 * T'_uv = T_uv if T_uv <= I_u, else +inf; all weights out of u share I_u.
 * The infection time of v is the shortest-path distance from the seed under
 * these weights; recovery is infection + I_v.
 *
 * Weight draws use one derived stream per source vertex (period first, then
 * contacts in ascending neighbor order), so results do not depend on
 * traversal or worker order.
 */

#include <cstdint>
#include <fstream>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "rig_graph.hpp"
#include "rng.hpp"
#include "weights.hpp"

namespace rigsir {

struct epidemic_weights_t {
    std::vector<double> period;                /* I_v per vertex */
    std::vector<std::vector<double>> weight;   /* aligned with graph out_edges */
};

/* Refuses models whose zero-time transmission mass reaches the explosive
 * threshold 1 / (mean offspring); beyond it path infima degenerate. */
inline epidemic_weights_t draw_transmission(const clique_graph_t& g, const model_t& model,
                                            std::uint64_t seed) {
    model.check_transmission_atom();
    epidemic_weights_t w;
    w.period.resize(g.n);
    w.weight.resize(g.n);
    for (std::uint32_t v = 0; v < g.n; ++v) {
        rng_t rng(derive_seed(seed, stream::transmission, v));
        w.period[v] = model.I.sample(rng);
        const auto& out = g.out_edges[v];
        w.weight[v].resize(out.size(), inf);
        /* one contact draw per distinct target; out_edges is sorted by dst,
         * so clique-duplicates of a pair form a run sharing the draw */
        std::size_t e = 0;
        while (e < out.size()) {
            const double t = model.T.sample(rng);
            const double value = t <= w.period[v] ? t : inf;
            const std::uint32_t dst = out[e].dst;
            for (; e < out.size() && out[e].dst == dst; ++e)
                w.weight[v][e] = value;
        }
    }
    return w;
}

enum class clique_role : std::uint8_t { primary, secondary, escaped };

inline std::string to_string(clique_role r) {
    switch (r) {
        case clique_role::primary: return "primary";
        case clique_role::secondary: return "secondary";
        case clique_role::escaped: return "escaped";
    }
    return "?";
}

struct count_series_t {
    std::vector<double> t;
    std::vector<double> value;
};

struct epidemic_trace_t {
    std::uint32_t seed_vertex = 0;
    double t_max = inf;
    std::vector<double> infection_time;  /* +inf if never infected (by t_max) */
    std::vector<double> recovery_time;
    std::vector<std::int64_t> infector;  /* -1 for the seed / uninfected */
    std::vector<std::vector<clique_role>> clique_roles; /* aligned with cliques' members */
    std::vector<double> event_time;              /* infection events, ascending */
    std::vector<std::uint32_t> event_vertex;

    std::size_t total_infected() const { return event_time.size(); }

    count_series_t cumulative_series() const {
        count_series_t s;
        s.t = event_time;
        s.value.resize(event_time.size());
        for (std::size_t i = 0; i < s.value.size(); ++i)
            s.value[i] = double(i + 1);
        return s;
    }

    count_series_t infectious_series() const {
        /* +1 at infection, -1 at finite recovery <= t_max; at equal times
         * infections apply first, then ties break by vertex id */
        struct ev_t {
            double t;
            int delta;
            std::uint32_t v;
        };
        std::vector<ev_t> events;
        events.reserve(2 * event_time.size());
        for (std::size_t i = 0; i < event_time.size(); ++i) {
            const std::uint32_t v = event_vertex[i];
            events.push_back({event_time[i], +1, v});
            if (is_finite(recovery_time[v]) && recovery_time[v] <= t_max)
                events.push_back({recovery_time[v], -1, v});
        }
        std::sort(events.begin(), events.end(), [](const ev_t& a, const ev_t& b) {
            if (a.t != b.t)
                return a.t < b.t;
            if (a.delta != b.delta)
                return a.delta > b.delta;
            return a.v < b.v;
        });
        count_series_t s;
        double count = 0;
        for (const auto& e : events) {
            count += e.delta;
            if (!s.t.empty() && s.t.back() == e.t)
                s.value.back() = count;
            else {
                s.t.push_back(e.t);
                s.value.push_back(count);
            }
        }
        return s;
    }

    void save_jsonl(const std::string& path, const clique_graph_t& g) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("save_jsonl: cannot open " + path);
        std::vector<std::vector<std::pair<std::uint32_t, clique_role>>> roles_of(infection_time.size());
        for (std::uint32_t c = 0; c < clique_roles.size(); ++c)
            for (std::size_t i = 0; i < clique_roles[c].size(); ++i)
                roles_of[g.cliques[c][i]].push_back({c, clique_roles[c][i]});
        for (std::size_t v = 0; v < infection_time.size(); ++v) {
            nlohmann::json rec;
            rec["id"] = v;
            rec["infection_time"] =
                is_finite(infection_time[v]) ? nlohmann::json(infection_time[v]) : nlohmann::json();
            rec["recovery_time"] =
                is_finite(recovery_time[v]) ? nlohmann::json(recovery_time[v]) : nlohmann::json();
            rec["infector"] = infector[v] >= 0 ? nlohmann::json(infector[v]) : nlohmann::json();
            auto roles = nlohmann::json::array();
            for (const auto& [c, r] : roles_of[v])
                roles.push_back({{"clique", c}, {"role", to_string(r)}});
            rec["roles"] = std::move(roles);
            out << rec.dump() << '\n';
        }
    }

    void save_counts_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("save_counts_csv: cannot open " + path);
        out << "t,infectious,cumulative\n";
        const auto inf_series = infectious_series();
        std::size_t cum = 0;
        for (std::size_t i = 0; i < inf_series.t.size(); ++i) {
            while (cum < event_time.size() && event_time[cum] <= inf_series.t[i])
                ++cum;
            out << fmt_double(inf_series.t[i]) << ',' << inf_series.value[i] << ',' << cum << '\n';
        }
    }
};

inline epidemic_trace_t run_epidemic(const clique_graph_t& g, const epidemic_weights_t& w,
                                     std::uint32_t seed_vertex, double t_max = inf) {
    if (seed_vertex >= g.n)
        throw std::invalid_argument("run_epidemic: seed vertex out of range");
    if (!(t_max > 0))
        throw std::invalid_argument("run_epidemic: t_max must be positive");
    epidemic_trace_t trace;
    trace.seed_vertex = seed_vertex;
    trace.t_max = t_max;
    trace.infection_time.assign(g.n, inf);
    trace.recovery_time.assign(g.n, inf);
    trace.infector.assign(g.n, -1);

    /* label-setting sweep; ties break by vertex id for reproducibility */
    using entry_t = std::pair<double, std::uint32_t>;
    std::priority_queue<entry_t, std::vector<entry_t>, std::greater<>> queue;
    std::vector<char> done(g.n, 0);
    std::vector<double> dist(g.n, inf);
    std::vector<std::int64_t> via(g.n, -1);
    dist[seed_vertex] = 0.0;
    queue.push({0.0, seed_vertex});
    while (!queue.empty()) {
        const auto [t, u] = queue.top();
        queue.pop();
        if (done[u] || t > dist[u])
            continue;
        if (t > t_max)
            break;
        done[u] = 1;
        trace.infection_time[u] = t;
        trace.recovery_time[u] = t + w.period[u];
        trace.infector[u] = via[u];
        trace.event_time.push_back(t);
        trace.event_vertex.push_back(u);
        const auto& out = g.out_edges[u];
        for (std::size_t e = 0; e < out.size(); ++e) {
            const std::uint32_t v = out[e].dst;
            const double weight = w.weight[u][e];
            if (done[v] || !is_finite(weight))
                continue;
            const double cand = t + weight;
            if (cand < dist[v]) {
                dist[v] = cand;
                via[v] = std::int64_t(u);
                queue.push({cand, v});
            }
        }
    }

    trace.clique_roles.resize(g.cliques.size());
    for (std::size_t c = 0; c < g.cliques.size(); ++c) {
        const auto& members = g.cliques[c];
        double best = inf;
        for (std::uint32_t v : members)
            best = std::min(best, trace.infection_time[v]);
        auto& roles = trace.clique_roles[c];
        roles.resize(members.size(), clique_role::escaped);
        if (is_finite(best))
            for (std::size_t i = 0; i < members.size(); ++i) {
                const double ti = trace.infection_time[members[i]];
                if (ti == best)
                    roles[i] = clique_role::primary;
                else if (is_finite(ti))
                    roles[i] = clique_role::secondary;
            }
    }
    return trace;
}

struct growth_estimate_t {
    double alpha_hat = 0;
    double stderr_ = 0;
    double t_lo = 0, t_hi = 0;
    std::size_t n_points = 0;
};

/*
 * Least-squares slope of log(count) against t between the first time the
 * count reaches count_lo and the first time it reaches count_hi.  The
 * default window (50 to n^0.4) stays inside the early phase where the
 * branching approximation provably holds; callers with a known model can
 * widen it.
 */
inline growth_estimate_t estimate_growth_rate(const count_series_t& series, double count_lo,
                                              double count_hi) {
    if (!(count_lo > 0) || !(count_hi > count_lo))
        throw std::invalid_argument("estimate_growth_rate: need 0 < count_lo < count_hi");
    std::size_t i_lo = series.value.size(), i_hi = series.value.size();
    for (std::size_t i = 0; i < series.value.size(); ++i)
        if (series.value[i] >= count_lo) {
            i_lo = i;
            break;
        }
    for (std::size_t i = i_lo; i < series.value.size(); ++i)
        if (series.value[i] >= count_hi) {
            i_hi = i + 1;
            break;
        }
    std::vector<double> xs, ys;
    for (std::size_t i = i_lo; i < i_hi; ++i)
        if (series.value[i] > 0) {
            xs.push_back(series.t[i]);
            ys.push_back(std::log(series.value[i]));
        }
    if (xs.size() < 3)
        throw std::runtime_error("estimate_growth_rate: window unreachable");
    const auto fit = ols_fit(xs, ys);
    growth_estimate_t est;
    est.alpha_hat = fit.slope;
    est.stderr_ = fit.slope_stderr;
    est.t_lo = xs.front();
    est.t_hi = xs.back();
    est.n_points = xs.size();
    return est;
}

inline growth_estimate_t estimate_growth_rate(const epidemic_trace_t& trace, std::size_t n,
                                              double count_lo = 50.0,
                                              std::optional<double> count_hi = std::nullopt) {
    return estimate_growth_rate(trace.cumulative_series(), count_lo,
                                count_hi.value_or(std::pow(double(n), 0.4)));
}

}  // namespace rigsir
