#include <catch2/catch_amalgamated.hpp>

#include "rigsir/lotka.hpp"
#include "support/stats.hpp"

using namespace rigsir;

namespace {

model_t pair_heavy_model() {
    /* constant weights 2 / 1, exponential contacts, infinite periods */
    model_t m;
    m.A = weight_law_t::point_mass(2.0);
    m.B = weight_law_t::point_mass(1.0);
    m.I = weight_law_t::point_mass(inf);
    m.T = weight_law_t::exponential(1.0);
    return m;
}

model_t block_subcritical_model() {
    /* many cliques, small cliques: within-block offspring mean < 1 */
    model_t m = pair_heavy_model();
    m.A = weight_law_t::point_mass(5.0);
    m.B = weight_law_t::point_mass(0.3);
    return m;
}

}  // namespace

TEST_CASE("single-coefficient problems solve in closed form", "[lotka]") {
    SECTION("pairs only, rate-1 contacts: alpha = 1, mean age = 1/2") {
        const auto p = lotka_problem_t::from_gamma({2.0}, laplace_vector_t::exact_exponential(1, 1.0));
        const auto sol = solve_malthusian(p);
        REQUIRE(sol.status == growth_status::supercritical);
        CHECK(sol.alpha == Catch::Approx(1.0).margin(1e-8));
        CHECK(sol.r_star == Catch::Approx(2.0).margin(1e-12));
        CHECK(sol.mean_age == Catch::Approx(0.5).margin(1e-6));
        CHECK(sol.residual <= 1e-8);
        CHECK(p.block_transform(sol.alpha) == Catch::Approx(1.0).margin(1e-8));
    }

    SECTION("pairs only, general parameters: alpha = beta(gamma1 - 1)") {
        const auto p = lotka_problem_t::from_gamma({3.0}, laplace_vector_t::exact_exponential(1, 2.0));
        const auto sol = solve_malthusian(p);
        REQUIRE(sol.status == growth_status::supercritical);
        CHECK(sol.alpha == Catch::Approx(4.0).margin(1e-8));
        CHECK(sol.mean_age == Catch::Approx(1.0 / 6.0).margin(1e-6));
    }
}

TEST_CASE("solver statuses", "[lotka]") {
    SECTION("subcritical and critical report no growth rate") {
        for (double g : {0.5, 1.0}) {
            const auto p =
                lotka_problem_t::from_gamma({g}, laplace_vector_t::exact_exponential(1, 1.0));
            const auto sol = solve_malthusian(p);
            CHECK(sol.status == growth_status::subcritical);
            CHECK(std::isnan(sol.alpha));
            CHECK(sol.r_star == Catch::Approx(g).margin(1e-12));
        }
    }

    SECTION("zero-length contact mass >= 1 is explosive") {
        const auto law_I = weight_law_t::point_mass(inf);
        const auto law_T = weight_law_t::two_point(0.0, 1.0, 0.6);
        const auto v = laplace_vector_t::monte_carlo(1, law_I, law_T, 4000, 5);
        const auto p = lotka_problem_t::from_gamma({2.0}, v);
        CHECK(p.evaluate_limit_inf() == Catch::Approx(1.2).margin(0.05));
        const auto sol = solve_malthusian(p);
        CHECK(sol.status == growth_status::explosive);
        CHECK(std::isnan(sol.alpha));
    }

    SECTION("two-coefficient supercritical problem satisfies the fixed point") {
        const auto p =
            lotka_problem_t::from_gamma({1.0, 0.5}, laplace_vector_t::exact_exponential(2, 1.0));
        const auto sol = solve_malthusian(p);
        REQUIRE(sol.status == growth_status::supercritical);
        CHECK(sol.alpha > 0.0);
        CHECK(p.evaluate(sol.alpha) == Catch::Approx(1.0).margin(1e-8));
        CHECK(p.block_transform(sol.alpha) == Catch::Approx(1.0).margin(1e-7));
    }

    SECTION("empty problem is rejected") {
        CHECK_THROWS_AS(
            solve_malthusian(lotka_problem_t::from_gamma({}, laplace_vector_t::exact_exponential(0, 1.0))),
            std::invalid_argument);
    }
}

TEST_CASE("coefficient construction from a model", "[lotka]") {
    const auto model = pair_heavy_model();

    SECTION("entries match the size-biased secondary-count law") {
        const auto gamma = lotka_problem_t::gamma_of_model(model);
        REQUIRE(gamma.size() >= 8);
        /* constant B = 1: p_k = e^-1 / k!, gamma_k = 2 k e^-1 / k! */
        double fact = 1.0;
        for (std::size_t k = 1; k <= 8; ++k) {
            fact *= double(k);
            CHECK(gamma[k - 1] ==
                  Catch::Approx(2.0 * double(k) * std::exp(-1.0) / fact).margin(1e-12));
        }
    }

    SECTION("truncation is certified against the exact offspring mean") {
        const auto p = lotka_problem_t::from_model_exact(model);
        CHECK(p.offspring_mean == Catch::Approx(2.0).margin(1e-12));
        CHECK(p.truncation_gap >= 0.0);
        CHECK(p.truncation_gap <= 1e-9);
        kahan_sum_t kept;
        for (double g : p.gamma)
            kept.add(g);
        CHECK(kept.value() + p.truncation_gap == Catch::Approx(p.offspring_mean).margin(1e-12));
        /* a tighter tail tolerance keeps more coefficients */
        const auto tighter = lotka_problem_t::gamma_of_model(model, 1e-13);
        CHECK(tighter.size() > p.gamma.size());
    }

    SECTION("exact route demands its family") {
        auto finite_I = model;
        finite_I.I = weight_law_t::point_mass(3.0);
        CHECK_THROWS_AS(lotka_problem_t::from_model_exact(finite_I), config_error);
        auto gamma_T = model;
        gamma_T.T = weight_law_t::gamma(2.0, 0.5);
        CHECK_THROWS_AS(lotka_problem_t::from_model_exact(gamma_T), config_error);
    }
}

TEST_CASE("reference models solve to frozen values", "[lotka]") {
    SECTION("constant 2 / 1 model") {
        const auto p = lotka_problem_t::from_model_exact(pair_heavy_model());
        const auto sol = solve_malthusian(p);
        REQUIRE(sol.status == growth_status::supercritical);
        CHECK(sol.alpha == Catch::Approx(1.2166329252).margin(1e-8));
        CHECK(sol.r_star == Catch::Approx(2.0).margin(1e-9));
        CHECK(sol.mean_age == Catch::Approx(1.2811537).margin(1e-6));
        /* within-block offspring at zero tilt exceeds one here */
        CHECK(p.block_offspring_mean() > 1.0);
        CHECK_THROWS_AS(p.block_transform(0.0), std::domain_error);
    }

    SECTION("constant 5 / 0.3 model is block-subcritical") {
        const auto p = lotka_problem_t::from_model_exact(block_subcritical_model());
        const auto sol = solve_malthusian(p);
        REQUIRE(sol.status == growth_status::supercritical);
        CHECK(sol.alpha == Catch::Approx(0.5359247364).margin(1e-8));
        CHECK(sol.r_star == Catch::Approx(1.5).margin(1e-9));
        CHECK(p.block_offspring_mean() == Catch::Approx(0.3887727).margin(1e-6));
        CHECK_NOTHROW(p.block_transform(0.0));
    }
}

TEST_CASE("monte carlo route is consistent with the exact one", "[lotka]") {
    const auto model = pair_heavy_model();
    const auto exact = lotka_problem_t::from_model_exact(model);
    const auto exact_sol = solve_malthusian(exact);
    const auto mc = lotka_problem_t::from_model_mc(model, 5000, 17);
    REQUIRE(mc.K() == exact.K());

    SECTION("pointwise transform agreement") {
        for (double lam : {0.0, 0.5, 1.2}) {
            const double fe = exact.evaluate(lam);
            const double fm = mc.evaluate(lam);
            const double se = mc.evaluate_stderr(lam);
            INFO("lambda=" << lam << " exact=" << fe << " mc=" << fm << " se=" << se);
            CHECK(std::abs(fe - fm) <= 4.0 * se);
        }
        CHECK(mc.evaluate_limit_inf() == 0.0);
    }

    SECTION("solved growth rate agreement") {
        const auto mc_sol = solve_malthusian(mc);
        REQUIRE(mc_sol.status == growth_status::supercritical);
        CHECK(std::abs(mc_sol.alpha - exact_sol.alpha) < 0.05);
        CHECK(std::abs(mc_sol.mean_age - exact_sol.mean_age) < 0.1);
    }
}

TEST_CASE("evaluate is strictly decreasing", "[lotka]") {
    const auto p = lotka_problem_t::from_model_exact(pair_heavy_model());
    double prev = p.evaluate(0.0);
    for (double lam : {0.2, 0.6, 1.2, 2.5, 6.0}) {
        const double cur = p.evaluate(lam);
        CHECK(cur < prev);
        prev = cur;
    }
}
