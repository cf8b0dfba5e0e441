#include <catch2/catch_amalgamated.hpp>

#include "rigsir/coupling.hpp"
#include "support/stats.hpp"

using namespace rigsir;

namespace {

model_t reference_model() {
    model_t m;
    m.A = weight_law_t::point_mass(2.0);
    m.B = weight_law_t::point_mass(1.0);
    m.I = weight_law_t::point_mass(inf);
    m.T = weight_law_t::exponential(1.0);
    return m;
}

model_t tiny_model() {
    model_t m;
    m.A = weight_law_t::point_mass(1.0);
    m.B = weight_law_t::point_mass(1.0);
    m.I = weight_law_t::point_mass(inf);
    m.T = weight_law_t::exponential(1.0);
    return m;
}

double divergence_value(const coupling_report_t& r) {
    return double(r.infections_at_divergence.value_or(r.total_infections));
}

}  // namespace

TEST_CASE("horizon exponent", "[coupling]") {
    CHECK(coupling_gamma(2.0) == 0.25);
    CHECK(coupling_gamma(2.5) == 0.4);
    CHECK(coupling_gamma(4.0) == 0.5);
    CHECK(coupling_gamma(100.0) == 0.5);
    CHECK_THROWS_AS(coupling_gamma(1.5), std::invalid_argument);
}

TEST_CASE("coupled run bookkeeping", "[coupling]") {
    SECTION("two vertices diverge almost immediately") {
        coupled_options_t opts;
        opts.stop_after_divergence = false;
        std::size_t diverged = 0, runs_with_spread = 0;
        for (std::uint64_t s = 0; s < 200; ++s) {
            const auto r =
                run_coupled(tiny_model(), 2, derive_seed(3000, stream::coupling, s), opts);
            if (r.total_infections >= 2)
                ++runs_with_spread;
            if (r.infections_at_divergence) {
                ++diverged;
                CHECK(*r.infections_at_divergence <= r.total_infections);
                CHECK(*r.infections_at_divergence <= 2);
            }
        }
        CHECK(runs_with_spread > 30);
        CHECK(diverged > 50);
    }

    SECTION("report invariants at a moderate size") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto r =
                run_coupled(reference_model(), 5000, derive_seed(3001, stream::coupling, s));
            CHECK(r.gamma == 0.5);
            CHECK(r.epsilon == Catch::Approx(2.0 / std::log(5000.0)));
            CHECK(r.horizon_target ==
                  Catch::Approx(std::pow(5000.0, r.gamma - r.epsilon)));
            CHECK((r.infections_at_divergence.has_value() ==
                   (r.first_kind != miscoupling_kind::none)));
            if (r.infections_at_divergence)
                CHECK(*r.infections_at_divergence <= r.total_infections);
            if (r.reached_horizon_clean && r.infections_at_divergence)
                CHECK(double(*r.infections_at_divergence) >= r.horizon_target);
        }
    }

    SECTION("identical seeds reproduce the run bit for bit") {
        coupled_options_t opts;
        opts.record_streams = true;
        const auto a = run_coupled(reference_model(), 3000, 77, opts);
        const auto b = run_coupled(reference_model(), 3000, 77, opts);
        CHECK(a.total_infections == b.total_infections);
        CHECK(a.infections_at_divergence == b.infections_at_divergence);
        REQUIRE(a.steps.size() == b.steps.size());
        for (std::size_t i = 0; i < a.steps.size(); ++i) {
            CHECK(a.steps[i].entry == b.steps[i].entry);
            CHECK(a.steps[i].time == b.steps[i].time);
            CHECK(a.steps[i].period == b.steps[i].period);
        }
    }
}

TEST_CASE("tree replay matches the epidemic before the first repeat", "[coupling]") {
    coupled_options_t opts;
    opts.record_streams = true;
    std::size_t compared = 0, runs_with_depth = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const auto r =
            run_coupled(reference_model(), 20000, derive_seed(3100, stream::coupling, rep), opts);
        const auto shadow = replay_shadow(r.steps);
        /* compare the full clean prefix: every infection strictly before the
         * first repeated draw must be reproduced exactly by the tree reading */
        std::size_t clean = r.infections_at_divergence
                                ? *r.infections_at_divergence - 1
                                : r.steps.size();
        clean = std::min(clean, shadow.size());
        for (std::size_t s = 0; s < clean; ++s) {
            REQUIRE(shadow[s].time == r.steps[s].time);
            REQUIRE(shadow[s].period == r.steps[s].period);
        }
        compared += clean;
        runs_with_depth += clean >= 10;
    }
    CHECK(compared > 500);
    CHECK(runs_with_depth > 20);
}

TEST_CASE("divergence point grows with the graph", "[coupling]") {
    const std::vector<std::size_t> grid{2000, 8000, 32000};
    std::vector<double> medians;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        std::vector<double> values;
        for (std::uint64_t rep = 0; rep < 60; ++rep)
            values.push_back(divergence_value(
                run_coupled(reference_model(), grid[gi],
                            derive_seed(3200, stream::coupling, gi, rep))));
        medians.push_back(median_of(values));
    }
    CAPTURE(medians[0], medians[1], medians[2]);
    CHECK(medians[0] < medians[1]);
    CHECK(medians[1] < medians[2]);
}

TEST_CASE("size-biased birthday bound", "[coupling]") {
    SECTION("a single draw cannot collide") {
        const auto r = birthday_bound_check(std::vector<double>(50, 1.0), 1, 1000, 3300);
        CHECK(r.empirical == 0.0);
        CHECK(r.bound == 0.0);
    }

    SECTION("uniform weights reproduce the classical birthday probability") {
        const auto r = birthday_bound_check(std::vector<double>(365, 1.0), 23, 100000, 3301);
        CHECK(r.empirical == Catch::Approx(0.5073).margin(0.02));
        CHECK(r.empirical <= r.bound);
    }

    SECTION("the union bound dominates on random configurations") {
        rng_t gen(3302);
        for (int cfg = 0; cfg < 50; ++cfg) {
            const std::size_t n = 50 + gen.uniform_below(2000);
            std::vector<double> w(n);
            const int kind = int(gen.uniform_below(3));
            for (auto& x : w)
                x = kind == 0   ? 1.0
                    : kind == 1 ? rand_exponential(gen, 1.0)
                                : 1.0 + double(gen.uniform_below(9));
            const std::size_t j_n =
                2 + gen.uniform_below(std::size_t(std::sqrt(double(n)) / 2) + 3);
            const auto r = birthday_bound_check(w, j_n, 10000, derive_seed(3303, 0, cfg));
            CAPTURE(n, j_n, r.empirical, r.bound);
            CHECK(r.empirical <= r.bound + 3.0 * r.stderr_);
        }
    }

    SECTION("the square-root threshold is two-sided") {
        const std::vector<std::size_t> grid{1000, 10000, 100000};
        std::vector<double> above, below;
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const std::size_t n = grid[gi];
            const std::vector<double> w(n, 1.0);
            above.push_back(
                birthday_bound_check(w, std::size_t(std::pow(double(n), 0.6)), 20000,
                                     derive_seed(3304, 0, gi))
                    .empirical);
            below.push_back(
                birthday_bound_check(w, std::size_t(std::pow(double(n), 0.4)), 20000,
                                     derive_seed(3305, 0, gi))
                    .empirical);
        }
        CAPTURE(above[0], above[1], above[2], below[0], below[1], below[2]);
        /* above sqrt(n): collisions do not die out; below: they vanish */
        for (double p : above)
            CHECK(p > 0.5);
        CHECK(below[0] > below[1]);
        CHECK(below[1] > below[2]);
        CHECK(below[2] < 0.1);
    }
}

TEST_CASE("empirical size-biasing total-variation decay", "[coupling]") {
    SECTION("a point mass has no empirical error") {
        const auto r = tv_rate_experiment(weight_law_t::point_mass(2.0), {100, 1000}, 20, 3400);
        CHECK(r.mean_tv[0] == 0.0);
        CHECK(r.mean_tv[1] == 0.0);
    }

    SECTION("two-point law decays like an inverse square root") {
        const auto r = tv_rate_experiment(weight_law_t::two_point(1.0, 2.0, 0.5),
                                          {100, 1000, 10000}, 100, 3401);
        CAPTURE(r.mean_tv[0], r.mean_tv[1], r.mean_tv[2], r.slope);
        CHECK(r.slope <= -0.4);
        CHECK(r.mean_tv[2] < std::pow(10000.0, -0.4));
        CHECK(r.mean_tv[0] > r.mean_tv[1]);
        CHECK(r.mean_tv[1] > r.mean_tv[2]);
    }

    SECTION("continuous laws are rejected") {
        CHECK_THROWS_AS(tv_rate_experiment(weight_law_t::exponential(1.0), {100}, 10, 3402),
                        config_error);
    }
}

TEST_CASE("scaling-factor perturbations", "[coupling]") {
    SECTION("constant vertex weights leave the group side untouched") {
        model_t m = reference_model();
        const auto r = scaling_factor_tv_check(m, {100, 1000}, 30, 3500);
        CHECK(r.group_side[0] == 0.0);
        CHECK(r.group_side[1] == 0.0);
        /* B is constant too, so the vertex side is also exact */
        CHECK(r.vertex_side[0] == 0.0);
    }

    SECTION("two-point weights decay below the root-n envelope") {
        model_t m = reference_model();
        m.A = weight_law_t::two_point(1.0, 2.0, 0.5);
        m.B = weight_law_t::two_point(0.5, 1.5, 0.5);
        const auto r = scaling_factor_tv_check(m, {100, 1000, 10000}, 50, 3501);
        for (std::size_t gi = 0; gi < r.n_grid.size(); ++gi) {
            const double envelope = std::pow(double(r.n_grid[gi]), -0.4);
            CAPTURE(gi, r.group_side[gi], r.vertex_side[gi], envelope);
            CHECK(r.group_side[gi] < envelope);
            CHECK(r.vertex_side[gi] < envelope);
        }
        CHECK(r.group_side[0] > r.group_side[1]);
        CHECK(r.group_side[1] > r.group_side[2]);
        CHECK(r.vertex_side[0] > r.vertex_side[1]);
        CHECK(r.vertex_side[1] > r.vertex_side[2]);
        CHECK(r.group_side[2] < std::pow(10.0, -1.5));
    }
}
