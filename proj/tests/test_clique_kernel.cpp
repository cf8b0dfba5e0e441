#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "rigsir/clique_kernel.hpp"
#include "support/stats.hpp"

using namespace rigsir;

TEST_CASE("clique passage on hand-built graphs", "[kernel]") {
    SECTION("pair: direct contact censored by the source period") {
        double periods[2] = {0.5, 1.0};
        double contact[4] = {0, 0.3, 0.4, 0};
        auto d = clique_passage(2, periods, contact);
        CHECK(d[0] == 0.0);
        CHECK(d[1] == 0.3); /* 0.3 <= 0.5 transmits */

        contact[1] = 0.7; /* 0.7 > 0.5 censored */
        d = clique_passage(2, periods, contact);
        CHECK(std::isinf(d[1]));

        contact[1] = 0.5; /* boundary contact transmits */
        d = clique_passage(2, periods, contact);
        CHECK(d[1] == 0.5);
    }

    SECTION("triangle: relay beats the censored direct edge") {
        /* primary reaches member 2 only through member 1 */
        double periods[3] = {0.6, 10.0, 0.2};
        double contact[9];
        for (auto& c : contact)
            c = 100.0;
        contact[0 * 3 + 1] = 0.5; /* primary -> 1: 0.5 <= 0.6 ok   */
        contact[0 * 3 + 2] = 2.0; /* primary -> 2: 2.0 > 0.6 blocked */
        contact[1 * 3 + 2] = 0.3; /* 1 -> 2: 0.3 <= 10 ok          */
        auto d = clique_passage(3, periods, contact);
        CHECK(d[1] == 0.5);
        CHECK(d[2] == Catch::Approx(0.8).margin(1e-15));
    }

    SECTION("all outgoing contacts of a member share its period") {
        /* member 1 has a tiny period: both of its out-edges censor at once */
        double periods[3] = {5.0, 0.01, 5.0};
        double contact[9];
        for (auto& c : contact)
            c = 100.0;
        contact[0 * 3 + 1] = 1.0;
        contact[1 * 3 + 0] = 0.2; /* irrelevant (0 already infected) */
        contact[1 * 3 + 2] = 0.2; /* 0.2 > 0.01 censored             */
        auto d = clique_passage(3, periods, contact);
        CHECK(d[1] == 1.0);
        CHECK(std::isinf(d[2]));
    }

    SECTION("zero-length contacts propagate instantly") {
        double periods[3] = {1.0, 1.0, 1.0};
        double contact[9];
        for (auto& c : contact)
            c = 100.0;
        contact[0 * 3 + 1] = 0.0;
        contact[1 * 3 + 2] = 0.0;
        auto d = clique_passage(3, periods, contact);
        CHECK(d[1] == 0.0);
        CHECK(d[2] == 0.0);
    }
}

TEST_CASE("simulate_clique matches a direct reconstruction", "[kernel]") {
    /* replay the pinned draw order by hand and compare distances */
    const auto law_I = weight_law_t::exponential(0.7);
    const auto law_T = weight_law_t::gamma(1.3, 0.9);
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        const std::size_t k = 2 + rep % 6;
        rng_t rng(derive_seed(2024, stream::kernel, rep));
        rng_t replay(derive_seed(2024, stream::kernel, rep));
        const double primary_period = law_I.sample(replay);

        std::vector<double> periods(k);
        periods[0] = law_I.sample(rng); /* consume the same draw */
        for (std::size_t i = 1; i < k; ++i)
            periods[i] = law_I.sample(rng);
        std::vector<double> contact(k * k, inf);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                if (i != j)
                    contact[i * k + j] = law_T.sample(rng);
        const auto want = clique_passage(k, periods.data(), contact.data());

        const auto got = simulate_clique(k, primary_period, law_I, law_T, replay);
        REQUIRE(got.size() == k - 1);
        for (std::size_t j = 1; j < k; ++j) {
            CHECK(got[j - 1].passage == want[j]);
            CHECK(got[j - 1].period == periods[j]);
        }
        /* both rngs must sit at the same point afterwards */
        CHECK(rng() == replay());
    }
}

TEST_CASE("exact exponential-family transform", "[kernel]") {
    SECTION("frozen spot values") {
        CHECK(clique_laplace_exponential(2, 1.0, 1.0) == Catch::Approx(0.5).margin(1e-12));
        CHECK(clique_laplace_exponential(3, 1.0, 2.0) == Catch::Approx(0.375).margin(1e-12));
    }

    SECTION("pair closed form beta/(beta+lambda)") {
        for (double beta : {0.5, 1.0, 2.5})
            for (double lam : {0.0, 0.3, 1.0, 7.0})
                CHECK(clique_laplace_exponential(2, beta, lam) ==
                      Catch::Approx(beta / (beta + lam)).margin(1e-14));
    }

    SECTION("lambda = 0 gives total mass 1 (periods are infinite)") {
        for (std::size_t k = 2; k <= 10; ++k)
            CHECK(clique_laplace_exponential(k, 0.8, 0.0) == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("strictly decreasing in lambda") {
        for (std::size_t k : {2u, 3u, 5u, 8u}) {
            double prev = clique_laplace_exponential(k, 1.0, 0.0);
            for (double lam : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
                const double cur = clique_laplace_exponential(k, 1.0, lam);
                CHECK(cur < prev);
                prev = cur;
            }
        }
    }

    SECTION("strictly increasing in k: extra members add relay paths") {
        for (double lam : {0.1, 1.0, 2.0, 10.0}) {
            double prev = clique_laplace_exponential(2, 1.0, lam);
            for (std::size_t k = 3; k <= 12; ++k) {
                const double cur = clique_laplace_exponential(k, 1.0, lam);
                CHECK(cur > prev);
                prev = cur;
            }
        }
    }

    SECTION("rejects bad arguments") {
        CHECK_THROWS_AS(clique_laplace_exponential(1, 1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(clique_laplace_exponential(3, 0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(clique_laplace_exponential(3, 1.0, -0.5), std::invalid_argument);
    }
}

TEST_CASE("Monte Carlo kernel agrees with the closed form", "[kernel]") {
    const auto law_I = weight_law_t::point_mass(inf);
    const auto law_T = weight_law_t::exponential(1.0);
    const std::size_t n = 40000;
    for (std::size_t k : {2u, 3u, 4u, 6u}) {
        const auto cache = simulate_kernel(k, law_I, law_T, n, 91);
        REQUIRE(cache.samples.size() == n);
        REQUIRE(std::is_sorted(cache.samples.begin(), cache.samples.end()));
        for (double lam : {0.5, 2.0}) {
            const double exact = clique_laplace_exponential(k, 1.0, lam);
            const double mc = cache.laplace(lam);
            const double se = cache.laplace_stderr(lam);
            INFO("k=" << k << " lambda=" << lam << " mc=" << mc << " exact=" << exact
                      << " se=" << se);
            CHECK(std::abs(mc - exact) < 4.0 * se);
        }
    }
}

TEST_CASE("kernel cache behaviour", "[kernel]") {
    const auto law_I = weight_law_t::point_mass(0.1);
    const auto law_T = weight_law_t::exponential(1.0);
    const auto cache = simulate_kernel(2, law_I, law_T, 20000, 7);

    SECTION("lambda = 0 recovers the reachable mass") {
        /* pair with I = 0.1: P(T <= 0.1) = 1 - exp(-0.1) */
        const double want = 1.0 - std::exp(-0.1);
        CHECK(cache.laplace(0.0) == Catch::Approx(want).margin(4.0 * cache.laplace_stderr(0.0)));
        std::size_t finite = 0;
        for (double t : cache.samples)
            finite += is_finite(t);
        CHECK(cache.laplace(0.0) == Catch::Approx(double(finite) / 20000.0).margin(1e-12));
    }

    SECTION("transform is monotone in lambda by shared samples") {
        double prev = cache.laplace(0.0);
        for (double lam : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            const double cur = cache.laplace(lam);
            CHECK(cur < prev);
            prev = cur;
        }
    }

    SECTION("deterministic in the seed") {
        const auto again = simulate_kernel(2, law_I, law_T, 20000, 7);
        CHECK(again.samples == cache.samples);
        const auto other = simulate_kernel(2, law_I, law_T, 20000, 8);
        CHECK(other.samples != cache.samples);
    }

    SECTION("save / load round-trip") {
        const std::string path = "kernel_cache_test.csv";
        cache.save(path);
        const auto loaded = kernel_cache_t::load(path);
        CHECK(loaded.k == cache.k);
        CHECK(loaded.law_hash == cache.law_hash);
        CHECK(loaded.samples == cache.samples);
        std::remove(path.c_str());
    }
}

TEST_CASE("laplace vector", "[kernel]") {
    SECTION("exact entries line up with the scalar transform") {
        const auto v = laplace_vector_t::exact_exponential(5, 1.3);
        REQUIRE(v.K() == 5);
        CHECK(v.exact());
        const auto at = v.eval(0.7);
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(at[i] == clique_laplace_exponential(i + 2, 1.3, 0.7));
        for (double se : v.stderr_at(0.7))
            CHECK(se == 0.0);
    }

    SECTION("monte carlo entries match their caches and report spread") {
        const auto law_I = weight_law_t::point_mass(inf);
        const auto law_T = weight_law_t::exponential(1.0);
        const auto v = laplace_vector_t::monte_carlo(3, law_I, law_T, 5000, 13);
        REQUIRE(v.K() == 3);
        CHECK_FALSE(v.exact());
        const auto at = v.eval(1.0);
        const auto se = v.stderr_at(1.0);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(at[i] == v.caches()[i].laplace(1.0));
            CHECK(se[i] > 0.0);
            CHECK(std::abs(at[i] - clique_laplace_exponential(i + 2, 1.0, 1.0)) < 5.0 * se[i]);
        }
    }
}
