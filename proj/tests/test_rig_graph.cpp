#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <set>

#include "rigsir/rig_graph.hpp"
#include "support/stats.hpp"

using namespace rigsir;

namespace {

model_t unit_model(double b = 1.0) {
    model_t m;
    m.A = weight_law_t::point_mass(1.0);
    m.B = weight_law_t::point_mass(b);
    m.I = weight_law_t::point_mass(inf);
    m.T = weight_law_t::exponential(1.0);
    return m;
}

model_t mixed_model() {
    model_t m;
    m.A = weight_law_t::two_point(1.0, 2.0, 0.5);
    m.B = weight_law_t::exponential(1.0);
    m.I = weight_law_t::point_mass(inf);
    m.T = weight_law_t::exponential(1.0);
    return m;
}

clique_graph_t hand_graph(std::size_t n, std::vector<std::vector<std::uint32_t>> cliques) {
    clique_graph_t g;
    g.n = n;
    g.m = cliques.size();
    for (std::uint32_t c = 0; c < cliques.size(); ++c) {
        std::sort(cliques[c].begin(), cliques[c].end());
        g.cliques.push_back(cliques[c]);
        g.clique_group.push_back(c);
    }
    g.finalize();
    return g;
}

}  // namespace

TEST_CASE("batch construction structure", "[graph]") {
    SECTION("single vertex has no edges") {
        const auto g = generate_batch(unit_model(), 1, 11);
        CHECK(g.n == 1);
        CHECK(g.directed_edge_count() == 0);
    }

    SECTION("zero vertices rejected") {
        CHECK_THROWS_AS(generate_batch(unit_model(), 0, 1), config_error);
    }

    SECTION("group count follows the weight means") {
        model_t m = mixed_model();
        const auto g = generate_batch(m, 1000, 3);
        CHECK(g.m == std::size_t(1000.0 * m.mu_A() / m.mu_B()));
        model_t m2 = unit_model(3.0);
        CHECK(generate_batch(m2, 500, 3).m == 166);
    }

    SECTION("directed edges: every ordered pair per clique, reverses present, no loops") {
        const auto g = generate_batch(mixed_model(), 2000, 19);
        std::size_t want = 0;
        for (const auto& c : g.cliques) {
            want += c.size() * (c.size() - 1);
            /* members distinct and sorted */
            CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
        }
        CHECK(g.directed_edge_count() == want);
        for (std::uint32_t v = 0; v < g.n; ++v) {
            for (const auto& e : g.out_edges[v]) {
                CHECK(e.dst != v);
                const auto& back = g.neighbors[e.dst];
                CHECK(std::binary_search(back.begin(), back.end(), v));
            }
            /* (dst, clique) pairs unique: one directed edge per clique-pair */
            for (std::size_t i = 1; i < g.out_edges[v].size(); ++i) {
                const auto &a = g.out_edges[v][i - 1], &b = g.out_edges[v][i];
                CHECK((a.dst != b.dst || a.clique != b.clique));
            }
        }
    }

    SECTION("vertices with zero weight stay isolated") {
        model_t m = mixed_model();
        m.A = weight_law_t::two_point(0.0, 2.0, 0.5);
        const auto g = generate_batch(m, 3000, 23);
        for (std::uint32_t v = 0; v < g.n; ++v)
            if (g.vertex_weight[v] == 0.0)
                CHECK(g.raw_group_degree[v] == 0);
    }
}

TEST_CASE("batch degree laws", "[graph]") {
    SECTION("mean vertex group-degree for unit weights") {
        const auto g = generate_batch(unit_model(), 100000, 101);
        double total = 0;
        for (auto d : g.raw_group_degree)
            total += d;
        CHECK(total / double(g.n) == Catch::Approx(1.0).margin(0.02));
    }

    SECTION("mean clique size for heavier groups") {
        const auto g = generate_batch(unit_model(3.0), 100000, 103);
        double members = 0;
        for (const auto& c : g.cliques)
            members += double(c.size());
        CHECK(members / double(g.m) == Catch::Approx(3.0).margin(0.05));
    }

    SECTION("constant-A group-degrees are Poisson-dispersed") {
        model_t m = unit_model();
        m.B = weight_law_t::exponential(1.0);
        const auto g = generate_batch(m, 50000, 107);
        double mean = 0, var = 0;
        for (auto d : g.raw_group_degree)
            mean += d;
        mean /= double(g.n);
        for (auto d : g.raw_group_degree)
            var += (d - mean) * (d - mean);
        var /= double(g.n - 1);
        CHECK(var / mean == Catch::Approx(1.0).margin(0.04));
    }
}

TEST_CASE("clustering coefficient", "[graph]") {
    SECTION("one triangle is fully transitive") {
        CHECK(hand_graph(3, {{0, 1, 2}}).clustering_coefficient() == 1.0);
    }

    SECTION("two triangles sharing a vertex") {
        /* 2 triangles, 10 wedges: 6 at the hub + 1 at each leaf */
        const auto g = hand_graph(5, {{0, 1, 2}, {0, 3, 4}});
        CHECK(g.clustering_coefficient() == Catch::Approx(0.6).margin(1e-15));
    }

    SECTION("pair cliques alone have no wedges") {
        CHECK(hand_graph(4, {{0, 1}, {2, 3}}).clustering_coefficient() == 0.0);
    }

    SECTION("generated graphs are genuinely clustered, stably across seeds") {
        double values[3];
        for (int s = 0; s < 3; ++s) {
            const auto g = generate_batch(unit_model(2.0), 30000, 200 + s);
            values[s] = g.clustering_coefficient();
            CHECK(values[s] > 0.0);
        }
        const double mean = (values[0] + values[1] + values[2]) / 3.0;
        for (double v : values)
            CHECK(std::abs(v - mean) / mean < 0.2);
    }
}

TEST_CASE("exploration basics", "[graph]") {
    SECTION("zero-weight seed yields a singleton component") {
        model_t m = mixed_model();
        m.A = weight_law_t::two_point(0.0, 1.0, 0.5);
        explorer_t ex(m, 400, 31);
        std::uint32_t zero_seed = UINT32_MAX;
        for (std::uint32_t v = 0; v < 400; ++v)
            if (ex.graph().vertex_weight[v] == 0.0) {
                zero_seed = v;
                break;
            }
        REQUIRE(zero_seed != UINT32_MAX);
        ex.explore_component(zero_seed);
        CHECK(ex.exhausted());
        CHECK(ex.explored_vertices() == std::vector<std::uint32_t>{zero_seed});
        CHECK(ex.explored_groups().empty());
    }

    SECTION("explored vertices are always discovered first, steps respect the cap") {
        explorer_t ex(mixed_model(), 500, 37);
        ex.explore_component(7, 3);
        CHECK(ex.explored_vertices().size() <= 3);
        for (auto v : ex.explored_vertices())
            CHECK(ex.vertex_discovered(v));
        CHECK_THROWS_AS(ex.explore(499), std::invalid_argument);
    }

    SECTION("seed out of range") {
        explorer_t ex(mixed_model(), 10, 41);
        CHECK_THROWS_AS(ex.start(10), std::invalid_argument);
    }

    SECTION("first-step group count fits its Poisson law") {
        /* unit weights, n = 10^4: the seed's membership count is Po(1) */
        const std::size_t runs = 10000;
        std::vector<std::uint64_t> counts(12, 0);
        for (std::size_t r = 0; r < runs; ++r) {
            explorer_t ex(unit_model(), 10000, derive_seed(601, stream::experiment, r));
            ex.start(0);
            ex.explore(0);
            const std::size_t d =
                ex.explored_groups().size() + ex.miscoupling().events_repeated_group;
            counts[std::min(d, counts.size() - 1)] += 1;
        }
        std::vector<double> probs(counts.size());
        double head = 0;
        for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
            probs[k] = std::exp(-1.0) / std::tgamma(double(k) + 1.0);
            head += probs[k];
        }
        probs.back() = 1.0 - head;
        const double p = teststat::chi2_gof_pvalue(counts, probs, runs);
        INFO("chi-square p = " << p);
        CHECK(p > 0.001);
    }
}

TEST_CASE("exploration matches batch in law", "[graph]") {
    /* component size of a uniform seed, two-sample KS at 0.001 */
    const auto model = mixed_model();
    const std::size_t runs = 2000;
    for (std::size_t n : {50u, 100u, 200u}) {
        std::vector<double> batch_sizes, explore_sizes;
        batch_sizes.reserve(runs);
        explore_sizes.reserve(runs);
        for (std::size_t r = 0; r < runs; ++r) {
            const std::uint64_t seed_b = derive_seed(700, stream::experiment, n, r);
            rng_t pick_b(derive_seed(seed_b, stream::exploration));
            const auto g = generate_batch(model, n, seed_b);
            batch_sizes.push_back(double(g.component_of(std::uint32_t(pick_b.uniform_below(n))).size()));

            const std::uint64_t seed_e = derive_seed(701, stream::experiment, n, r);
            rng_t pick_e(derive_seed(seed_e, stream::exploration));
            explorer_t ex(model, n, seed_e);
            ex.explore_component(std::uint32_t(pick_e.uniform_below(n)));
            explore_sizes.push_back(double(ex.explored_vertices().size()));
        }
        const double d = teststat::ks_two_sample_stat(batch_sizes, explore_sizes);
        const double threshold = teststat::ks_two_sample_threshold(runs, runs, 0.001);
        INFO("n=" << n << " KS=" << d << " threshold=" << threshold);
        CHECK(d < threshold);
    }
}

TEST_CASE("completing an exploration preserves its component", "[graph]") {
    const auto model = mixed_model();
    for (std::size_t rep = 0; rep < 50; ++rep) {
        const std::size_t n = 50 + 30 * (rep % 6);
        const std::uint64_t seed = derive_seed(800, stream::experiment, rep);
        explorer_t ex(model, n, seed);
        const std::uint32_t start = std::uint32_t(rep % n);
        ex.explore_component(start);
        REQUIRE(ex.exhausted());
        const auto full = ex.complete();
        /* weights identical to a batch draw with the same master seed */
        const auto batch = generate_batch(model, n, seed);
        CHECK(full.vertex_weight == batch.vertex_weight);
        CHECK(full.group_weight == batch.group_weight);
        /* the completed graph's seed component is exactly the explored set */
        auto comp = full.component_of(start);
        std::sort(comp.begin(), comp.end());
        auto explored = ex.explored_vertices();
        std::sort(explored.begin(), explored.end());
        CHECK(comp == explored);
    }
}

TEST_CASE("miscoupling bookkeeping", "[graph]") {
    SECTION("tiny graphs diverge and record a first event") {
        std::size_t diverged = 0;
        for (std::size_t r = 0; r < 200; ++r) {
            model_t m = unit_model();
            m.A = weight_law_t::point_mass(3.0);
            m.B = weight_law_t::point_mass(3.0);
            explorer_t ex(m, 2, derive_seed(900, stream::experiment, r));
            ex.explore_component(0);
            const auto& rec = ex.miscoupling();
            const std::size_t events = rec.events_repeated_group + rec.events_repeated_vertex +
                                       rec.events_revisited_explored;
            if (!rec.clean()) {
                ++diverged;
                CHECK(rec.first_step >= 1);
                CHECK(events >= 1);
            } else {
                CHECK(events == 0);
            }
        }
        CHECK(diverged > 150);
    }

    SECTION("large sparse graphs usually stay clean early") {
        std::size_t clean = 0;
        for (std::size_t r = 0; r < 20; ++r) {
            explorer_t ex(mixed_model(), 100000, derive_seed(903, stream::experiment, r));
            ex.explore_component(std::uint32_t(r), 10);
            clean += ex.miscoupling().clean();
        }
        CHECK(clean >= 18);
    }
}

TEST_CASE("graph CSV round-trip", "[graph]") {
    const auto g = generate_batch(mixed_model(), 500, 47);
    g.save_csv("graph_edges_test.csv", "graph_cliques_test.csv");
    const auto back = clique_graph_t::load_csv("graph_cliques_test.csv", g.n);
    CHECK(back.n == g.n);
    CHECK(back.m == g.m);
    CHECK(back.cliques == g.cliques);
    CHECK(back.clique_group == g.clique_group);
    CHECK(back.out_edges == g.out_edges);
    CHECK(back.neighbors == g.neighbors);
    std::remove("graph_edges_test.csv");
    std::remove("graph_cliques_test.csv");
}
