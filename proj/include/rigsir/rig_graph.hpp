#pragma once

/*
 * Random intersection graph with mixed-Poisson group structure.
 *
 * n vertices with weights A_i face m = floor(n mu_A / mu_B) groups with
 * weights B_j; the (vertex, group) membership multiplicity is
 * Po(A_i B_j / (n mu_A)), independent across pairs.  Each group's member set
 * forms a clique (every ordered pair of distinct members is a directed edge);
 * multiplicities >= 2 collapse to a single membership.
 *
 * Two constructions with the same law:
 *  - generate_batch: for each vertex draw its total membership count
 *    Po(A_i S_B / (n mu_A)) and split it over groups by size-biased draws
 *    (the Poisson-multinomial factorization; O(memberships), never O(n m)).
 *  - explorer_t: lazy component growth from a seed.  Exploring a vertex
 *    reveals its remaining memberships; each newly drawn group is explored
 *    immediately, revealing its remaining members by size-biased draws.
 *    A draw that lands on an entity whose pair with the current context is
 *    already decided (an explored group / explored vertex / an existing
 *    member of the clique being built) is discarded — this is Poisson
 *    thinning, so the revealed component has exactly the batch law.  Such
 *    discards, and draws that hit the discovered-but-unexplored frontier
 *    (which are valid members), are the miscoupling events that break the
 *    correspondence with the branching process; they are recorded but do not
 *    perturb the graph law.
 *
 * Determinism: weights and membership draws come from per-index derived
 * streams, so batch output is independent of traversal or worker order.
 */

#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "weights.hpp"

namespace rigsir {

struct half_edge_t {
    std::uint32_t dst;
    std::uint32_t clique; /* index into cliques */
    friend bool operator==(const half_edge_t&, const half_edge_t&) = default;
};

struct clique_graph_t {
    std::size_t n = 0; /* vertices */
    std::size_t m = 0; /* groups */
    std::vector<double> vertex_weight;
    std::vector<double> group_weight;
    std::vector<std::vector<std::uint32_t>> cliques; /* sorted distinct members */
    std::vector<std::uint32_t> clique_group;         /* originating group id */
    std::vector<std::uint32_t> raw_group_degree;     /* per vertex: membership draws incl. collapsed */
    std::vector<std::vector<half_edge_t>> out_edges; /* per vertex, built by finalize() */
    std::vector<std::vector<std::uint32_t>> neighbors; /* simple undirected projection */

    void finalize() {
        out_edges.assign(n, {});
        neighbors.assign(n, {});
        for (std::uint32_t c = 0; c < cliques.size(); ++c)
            for (std::uint32_t u : cliques[c])
                for (std::uint32_t v : cliques[c])
                    if (u != v)
                        out_edges[u].push_back({v, c});
        for (std::size_t v = 0; v < n; ++v) {
            auto& out = out_edges[v];
            std::sort(out.begin(), out.end(), [](const half_edge_t& a, const half_edge_t& b) {
                return a.dst != b.dst ? a.dst < b.dst : a.clique < b.clique;
            });
            auto& nb = neighbors[v];
            nb.reserve(out.size());
            for (const auto& e : out)
                if (nb.empty() || nb.back() != e.dst)
                    nb.push_back(e.dst);
        }
    }

    std::size_t directed_edge_count() const {
        std::size_t total = 0;
        for (const auto& out : out_edges)
            total += out.size();
        return total;
    }

    /* global transitivity: closed wedges / all wedges on the simple projection */
    double clustering_coefficient() const {
        if (n == 0)
            throw std::invalid_argument("clustering_coefficient: empty graph");
        std::size_t wedges = 0;
        std::size_t closed = 0; /* 3 * triangles: one count per triangle edge */
        for (std::size_t v = 0; v < n; ++v) {
            const std::size_t d = neighbors[v].size();
            wedges += d * (d - 1) / 2;
            for (std::uint32_t u : neighbors[v]) {
                if (u <= v)
                    continue; /* each undirected edge once */
                const auto& a = neighbors[v];
                const auto& b = neighbors[u];
                std::size_t i = 0, j = 0;
                while (i < a.size() && j < b.size()) {
                    if (a[i] == b[j]) {
                        ++closed;
                        ++i;
                        ++j;
                    } else if (a[i] < b[j]) {
                        ++i;
                    } else {
                        ++j;
                    }
                }
            }
        }
        return wedges == 0 ? 0.0 : double(closed) / double(wedges);
    }

    std::vector<std::uint32_t> component_of(std::uint32_t v) const {
        if (v >= n)
            throw std::invalid_argument("component_of: vertex out of range");
        std::vector<char> seen(n, 0);
        std::vector<std::uint32_t> order{v};
        seen[v] = 1;
        for (std::size_t head = 0; head < order.size(); ++head)
            for (std::uint32_t u : neighbors[order[head]])
                if (!seen[u]) {
                    seen[u] = 1;
                    order.push_back(u);
                }
        return order;
    }

    void save_csv(const std::string& edges_path, const std::string& cliques_path) const {
        std::ofstream edges(edges_path);
        if (!edges)
            throw std::runtime_error("save_csv: cannot open " + edges_path);
        edges << "src,dst,clique_id\n";
        for (std::size_t v = 0; v < n; ++v)
            for (const auto& e : out_edges[v])
                edges << v << ',' << e.dst << ',' << clique_group[e.clique] << '\n';
        std::ofstream cl(cliques_path);
        if (!cl)
            throw std::runtime_error("save_csv: cannot open " + cliques_path);
        cl << "clique_id,member_ids\n";
        for (std::size_t c = 0; c < cliques.size(); ++c) {
            cl << clique_group[c];
            for (std::uint32_t u : cliques[c])
                cl << ',' << u;
            cl << '\n';
        }
    }

    /* rebuild structure from the clique file (edges are implied by cliques;
     * n is the given vertex count, weights are not part of the format) */
    static clique_graph_t load_csv(const std::string& cliques_path, std::size_t n) {
        std::ifstream cl(cliques_path);
        if (!cl)
            throw std::runtime_error("load_csv: cannot open " + cliques_path);
        std::string line;
        std::getline(cl, line);
        if (line != "clique_id,member_ids")
            throw std::runtime_error("load_csv: bad header in " + cliques_path);
        clique_graph_t g;
        g.n = n;
        std::uint32_t max_group = 0;
        while (std::getline(cl, line)) {
            if (line.empty())
                continue;
            std::istringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            const std::uint32_t group = std::uint32_t(std::stoul(cell));
            max_group = std::max(max_group, group);
            std::vector<std::uint32_t> members;
            while (std::getline(ss, cell, ','))
                members.push_back(std::uint32_t(std::stoul(cell)));
            std::sort(members.begin(), members.end());
            for (std::uint32_t u : members)
                if (u >= n)
                    throw std::runtime_error("load_csv: member id out of range");
            g.cliques.push_back(std::move(members));
            g.clique_group.push_back(group);
        }
        g.m = g.cliques.empty() ? 0 : std::size_t(max_group) + 1;
        g.finalize();
        return g;
    }
};

inline std::vector<double> realize_weights(const weight_law_t& law, std::size_t count,
                                           std::uint64_t base, std::uint64_t stream_id) {
    std::vector<double> w(count);
    for (std::size_t i = 0; i < count; ++i) {
        rng_t rng(derive_seed(base, stream_id, i));
        w[i] = law.sample(rng);
    }
    return w;
}

inline clique_graph_t generate_batch(const model_t& model, std::size_t n, std::uint64_t seed) {
    if (n == 0)
        throw config_error("n", "need at least one vertex");
    model.validate();
    clique_graph_t g;
    g.n = n;
    g.m = model.group_count(n);
    g.vertex_weight = realize_weights(model.A, n, seed, stream::vertex_weight);
    g.group_weight = realize_weights(model.B, g.m, seed, stream::group_weight);
    g.raw_group_degree.assign(n, 0);
    kahan_sum_t sum_B;
    for (double b : g.group_weight)
        sum_B.add(b);
    const double S_B = sum_B.value();
    std::vector<std::vector<std::uint32_t>> members(g.m);
    if (S_B > 0) {
        const alias_table_t pick_group(g.group_weight);
        const double scale = S_B / (double(n) * model.mu_A());
        for (std::uint32_t i = 0; i < n; ++i) {
            rng_t rng(derive_seed(seed, stream::membership, i, 0));
            const std::uint64_t d = rand_poisson(rng, g.vertex_weight[i] * scale);
            g.raw_group_degree[i] = std::uint32_t(d);
            for (std::uint64_t r = 0; r < d; ++r)
                members[pick_group.sample(rng)].push_back(i);
        }
    }
    g.cliques.resize(g.m);
    g.clique_group.resize(g.m);
    for (std::uint32_t j = 0; j < g.m; ++j) {
        auto& mem = members[j];
        std::sort(mem.begin(), mem.end());
        mem.erase(std::unique(mem.begin(), mem.end()), mem.end());
        g.cliques[j] = std::move(mem);
        g.clique_group[j] = j;
    }
    g.finalize();
    return g;
}

enum class miscoupling_kind : std::uint8_t {
    none,
    repeated_group,     /* group draw hit an already-explored group */
    repeated_vertex,    /* vertex draw hit the frontier, the current vertex,
                           or a duplicate within the clique being built */
    revisited_explored, /* vertex draw hit an already-explored vertex */
};

inline std::string to_string(miscoupling_kind k) {
    switch (k) {
        case miscoupling_kind::none: return "none";
        case miscoupling_kind::repeated_group: return "repeated-group";
        case miscoupling_kind::repeated_vertex: return "repeated-vertex";
        case miscoupling_kind::revisited_explored: return "revisited-explored";
    }
    return "?";
}

struct miscoupling_record_t {
    miscoupling_kind first_kind = miscoupling_kind::none;
    std::size_t first_step = 0;        /* iteration t of the first event */
    std::size_t events_repeated_group = 0;
    std::size_t events_repeated_vertex = 0;
    std::size_t events_revisited_explored = 0;

    bool clean() const { return first_kind == miscoupling_kind::none; }
    void record(miscoupling_kind k, std::size_t step) {
        switch (k) {
            case miscoupling_kind::repeated_group: ++events_repeated_group; break;
            case miscoupling_kind::repeated_vertex: ++events_repeated_vertex; break;
            case miscoupling_kind::revisited_explored: ++events_revisited_explored; break;
            case miscoupling_kind::none: return;
        }
        if (first_kind == miscoupling_kind::none) {
            first_kind = k;
            first_step = step;
        }
    }
};

/*
 * Lazy component construction.  The caller chooses which frontier vertex to
 * explore next (FIFO by default; the coupled epidemic drives it in infection
 * order).  Weights for all n vertices and m groups are realized up front;
 * membership draws happen on demand from the same per-index streams the
 * batch construction uses.
 */
class explorer_t {
  public:
    explorer_t(const model_t& model, std::size_t n, std::uint64_t seed)
        : model_(model), seed_(seed) {
        if (n == 0)
            throw config_error("n", "need at least one vertex");
        model.validate();
        g_.n = n;
        g_.m = model.group_count(n);
        g_.vertex_weight = realize_weights(model.A, n, seed, stream::vertex_weight);
        g_.group_weight = realize_weights(model.B, g_.m, seed, stream::group_weight);
        kahan_sum_t sa, sb;
        for (double a : g_.vertex_weight)
            sa.add(a);
        for (double b : g_.group_weight)
            sb.add(b);
        S_A_ = sa.value();
        S_B_ = sb.value();
        if (S_A_ > 0)
            pick_vertex_.emplace(g_.vertex_weight);
        if (S_B_ > 0)
            pick_group_.emplace(g_.group_weight);
        discovered_.assign(n, 0);
        explored_.assign(n, 0);
        group_explored_.assign(g_.m, 0);
    }

    std::size_t n() const { return g_.n; }
    std::size_t m() const { return g_.m; }
    const miscoupling_record_t& miscoupling() const { return record_; }
    const std::vector<std::uint32_t>& explored_vertices() const { return explored_order_; }
    const std::vector<std::uint32_t>& explored_groups() const { return explored_groups_; }
    const std::deque<std::uint32_t>& frontier() const { return frontier_; }
    bool vertex_discovered(std::uint32_t v) const { return discovered_[v]; }
    bool vertex_explored(std::uint32_t v) const { return explored_[v]; }

    void start(std::uint32_t seed_vertex) {
        if (seed_vertex >= g_.n)
            throw std::invalid_argument("explorer_t: seed vertex out of range");
        if (started_)
            throw std::logic_error("explorer_t: already started");
        started_ = true;
        discovered_[seed_vertex] = 1;
        frontier_.push_back(seed_vertex);
    }

    /* The newly discovered members of the cliques revealed in this step, in
     * reveal order; also used by the coupled run as the secondary list. */
    struct step_result_t {
        std::uint32_t vertex;
        std::vector<std::uint32_t> new_cliques; /* indices into graph().cliques */
        std::vector<std::uint32_t> discovered;
    };

    /* One iteration of the construction: reveal the remaining memberships of
     * v and build every newly drawn group's clique. */
    step_result_t explore(std::uint32_t v) {
        if (!started_)
            throw std::logic_error("explorer_t: start() first");
        if (v >= g_.n || !discovered_[v] || explored_[v])
            throw std::invalid_argument("explorer_t: can only explore a discovered, unexplored vertex");
        ++step_;
        step_result_t result;
        result.vertex = v;
        rng_t row_rng(derive_seed(seed_, stream::membership, v, 0));
        const double degree_mean =
            S_B_ > 0 ? g_.vertex_weight[v] * S_B_ / (double(g_.n) * model_.mu_A()) : 0.0;
        const std::uint64_t d = rand_poisson(row_rng, degree_mean);
        for (std::uint64_t r = 0; r < d; ++r) {
            const std::uint32_t group = std::uint32_t(pick_group_->sample(row_rng));
            if (group_explored_[group]) {
                record_.record(miscoupling_kind::repeated_group, step_);
                continue; /* pair already decided: thinning discard */
            }
            reveal_group(group, v, result);
        }
        explored_[v] = 1;
        explored_order_.push_back(v);
        if (!frontier_.empty() && frontier_.front() == v)
            frontier_.pop_front();
        else
            purge_explored_from_frontier();
        return result;
    }

    /* FIFO exploration until the component is exhausted or max_steps spent */
    void explore_component(std::uint32_t seed_vertex, std::size_t max_steps = SIZE_MAX) {
        start(seed_vertex);
        while (!frontier_.empty() && step_ < max_steps)
            explore(frontier_.front());
    }

    bool exhausted() const { return started_ && frontier_.empty(); }

    const clique_graph_t& graph() const { return g_; }

    /* Decide every remaining membership: unexplored vertices draw their rows
     * with draws to explored groups discarded.  The union is one full sample
     * of the graph law in which the explored component sits unchanged. */
    clique_graph_t complete() const {
        if (!exhausted())
            throw std::logic_error("explorer_t::complete: exploration not exhausted");
        clique_graph_t full;
        full.n = g_.n;
        full.m = g_.m;
        full.vertex_weight = g_.vertex_weight;
        full.group_weight = g_.group_weight;
        std::vector<std::vector<std::uint32_t>> members(g_.m);
        for (std::size_t c = 0; c < g_.cliques.size(); ++c)
            members[g_.clique_group[c]] = g_.cliques[c];
        if (S_B_ > 0) {
            for (std::uint32_t v = 0; v < g_.n; ++v) {
                if (explored_[v])
                    continue;
                rng_t row_rng(derive_seed(seed_, stream::membership, v, 0));
                const double mean = g_.vertex_weight[v] * S_B_ / (double(g_.n) * model_.mu_A());
                const std::uint64_t d = rand_poisson(row_rng, mean);
                for (std::uint64_t r = 0; r < d; ++r) {
                    const std::uint32_t group = std::uint32_t(pick_group_->sample(row_rng));
                    if (!group_explored_[group])
                        members[group].push_back(v);
                }
            }
        }
        full.cliques.resize(g_.m);
        full.clique_group.resize(g_.m);
        for (std::uint32_t j = 0; j < g_.m; ++j) {
            auto& mem = members[j];
            std::sort(mem.begin(), mem.end());
            mem.erase(std::unique(mem.begin(), mem.end()), mem.end());
            full.cliques[j] = std::move(mem);
            full.clique_group[j] = j;
        }
        full.finalize();
        return full;
    }

  private:
    void reveal_group(std::uint32_t group, std::uint32_t entry, step_result_t& result) {
        group_explored_[group] = 1;
        explored_groups_.push_back(group);
        rng_t col_rng(derive_seed(seed_, stream::membership, group, 1));
        const double size_mean =
            S_A_ > 0 ? g_.group_weight[group] * S_A_ / (double(g_.n) * model_.mu_A()) : 0.0;
        const std::uint64_t d = rand_poisson(col_rng, size_mean);
        std::vector<std::uint32_t> mem{entry};
        for (std::uint64_t k = 0; k < d; ++k) {
            const std::uint32_t x = std::uint32_t(pick_vertex_->sample(col_rng));
            if (explored_[x]) {
                record_.record(miscoupling_kind::revisited_explored, step_);
                continue; /* pair already decided from x's side */
            }
            if (std::find(mem.begin(), mem.end(), x) != mem.end()) {
                /* multiplicity >= 2 inside this clique (includes the entry
                 * vertex itself): collapses, but the tree analogue forks */
                record_.record(miscoupling_kind::repeated_vertex, step_);
                continue;
            }
            if (discovered_[x])
                record_.record(miscoupling_kind::repeated_vertex, step_); /* frontier hit */
            else {
                discovered_[x] = 1;
                frontier_.push_back(x);
                result.discovered.push_back(x);
            }
            mem.push_back(x);
        }
        std::sort(mem.begin(), mem.end());
        result.new_cliques.push_back(std::uint32_t(g_.cliques.size()));
        g_.cliques.push_back(std::move(mem));
        g_.clique_group.push_back(group);
    }

    void purge_explored_from_frontier() {
        std::deque<std::uint32_t> keep;
        for (std::uint32_t v : frontier_)
            if (!explored_[v])
                keep.push_back(v);
        frontier_.swap(keep);
    }

    model_t model_;
    std::uint64_t seed_;
    clique_graph_t g_;
    double S_A_ = 0, S_B_ = 0;
    std::optional<alias_table_t> pick_vertex_, pick_group_;
    std::vector<char> discovered_, explored_, group_explored_;
    std::vector<std::uint32_t> explored_order_, explored_groups_;
    std::deque<std::uint32_t> frontier_;
    miscoupling_record_t record_;
    std::size_t step_ = 0;
    bool started_ = false;
};

}  // namespace rigsir
