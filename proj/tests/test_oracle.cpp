#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"

using Catch::Approx;
using namespace mte;
using fixtures::stratum;

TEST_CASE("check_monotonicity on the canonical populations", "[oracle]") {
    const auto p1 = fixtures::p1n();
    const auto p2 = fixtures::p2n();
    CHECK(check_monotonicity(p1, MonotonicityKind::ia_full).holds);

    const auto ia = check_monotonicity(p2, MonotonicityKind::ia_full);
    REQUIRE_FALSE(ia.holds);
    REQUIRE(ia.witnesses.size() == 1);
    CHECK(ia.witnesses[0].stratum == 1);
    CHECK(ia.witnesses[0].indices() == std::pair<std::size_t, std::size_t>{1, 2});

    CHECK(check_monotonicity(p2, MonotonicityKind::extreme_pair).holds);
    CHECK(check_monotonicity(p2, MonotonicityKind::bottom_anchored).holds);
    const auto top = check_monotonicity(p2, MonotonicityKind::top_anchored);
    REQUIRE_FALSE(top.holds);
    REQUIRE(top.witnesses.size() == 1);
    CHECK(top.witnesses[0].stratum == 1);

    // Pair (0.8, 0.5): B is treated at 0.5 only.
    CHECK_FALSE(check_monotonicity(p2, MonotonicityCondition::pair_of(2, 1)).holds);
    CHECK(check_monotonicity(p2, MonotonicityCondition::pair_of(1, 0)).holds);
}

TEST_CASE("zero-mass strata are not part of the type set", "[oracle]") {
    const auto pop = normalize(build_population(
        {stratum({0, 1, 1}, 0.5, 0, 1), stratum({0, 0, 1}, 0.5, 0, 1), stratum({1, 0, 0}, 0.0, 0, 1)},
        fixtures::three_point_grid()));
    CHECK(check_monotonicity(pop, MonotonicityKind::ia_full).holds);
    CHECK(check_monotonicity(pop, MonotonicityKind::extreme_pair).holds);
}

TEST_CASE("witness list is exhaustive and holds iff empty", "[oracle][property]") {
    RandomPopulationConfig cfg;
    cfg.mode = MonotonicityMode::unrestricted;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        cfg.grid_size = 3 + seed % 4;
        cfg.strata = cfg.grid_size + 3;
        const auto pop = random_population(cfg, seed);
        const auto r = check_monotonicity(pop, MonotonicityKind::ia_full);
        std::size_t expected = 0;
        for (const auto& s : pop.strata())
            for (std::size_t a = 0; a < pop.grid_size(); ++a)
                for (std::size_t b = a + 1; b < pop.grid_size(); ++b)
                    expected += (s.mass > 0 && s.response[a] > s.response[b]);
        REQUIRE(r.witnesses.size() == expected);
        REQUIRE(r.holds == r.witnesses.empty());
    }
}

TEST_CASE("ia_full implies every weaker condition", "[oracle][property]") {
    RandomPopulationConfig cfg;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        cfg.grid_size = 3 + seed % 4;
        cfg.mode = seed % 2 ? MonotonicityMode::ia_full : MonotonicityMode::unrestricted;
        cfg.strata = cfg.mode == MonotonicityMode::ia_full ? cfg.grid_size : cfg.grid_size + 2;
        const auto pop = random_population(cfg, seed);
        if (!check_monotonicity(pop, MonotonicityKind::ia_full).holds) continue;
        REQUIRE(check_monotonicity(pop, MonotonicityKind::extreme_pair).holds);
        REQUIRE(check_monotonicity(pop, MonotonicityKind::bottom_anchored).holds);
        REQUIRE(check_monotonicity(pop, MonotonicityKind::top_anchored).holds);
    }
}

TEST_CASE("on a 2-point grid the four conditions coincide", "[oracle]") {
    const std::vector<ResponseType> types{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const InstrumentGrid grid({0.0, 1.0}, {0.5, 0.5});
    for (unsigned subset = 0; subset < 16; ++subset) {
        std::vector<StratumSpec> strata;
        const int count = __builtin_popcount(subset);
        for (unsigned t = 0; t < 4; ++t)
            if (subset & (1U << t)) strata.push_back(stratum(types[t], 1.0 / count, 0, 1));
        if (strata.empty()) {
            // The empty type set satisfies every condition vacuously; nothing to build.
            continue;
        }
        const auto pop = build_population(std::move(strata), grid);
        const bool ia = check_monotonicity(pop, MonotonicityKind::ia_full).holds;
        CAPTURE(subset);
        CHECK(check_monotonicity(pop, MonotonicityKind::extreme_pair).holds == ia);
        CHECK(check_monotonicity(pop, MonotonicityKind::bottom_anchored).holds == ia);
        CHECK(check_monotonicity(pop, MonotonicityKind::top_anchored).holds == ia);
        CHECK(ia == !(subset & 0b0100));
    }
}

TEST_CASE("bottom and top anchored together need not imply ia_full", "[oracle]") {
    const InstrumentGrid grid({1, 2, 3, 4}, {0.25, 0.25, 0.25, 0.25});
    const auto pop = build_population(
        {stratum({0, 1, 0, 1}, 0.5, 0, 1), stratum({0, 0, 1, 1}, 0.5, 0, 1)}, grid);
    CHECK(check_monotonicity(pop, MonotonicityKind::bottom_anchored).holds);
    CHECK(check_monotonicity(pop, MonotonicityKind::top_anchored).holds);
    CHECK_FALSE(check_monotonicity(pop, MonotonicityKind::ia_full).holds);
}

TEST_CASE("true parameters of P2", "[oracle]") {
    const auto p2 = fixtures::p2n();
    const fixtures::JointTable joint(p2);
    CHECK(true_late(p2) == Approx(7.0 / 3).margin(1e-12));
    CHECK(true_latt(p2) == Approx(7.0 / 3).margin(1e-12));
    CHECK(true_latut(p2) == Approx(2.6).margin(1e-12));
    CHECK(true_ate(p2) == Approx(2.5).margin(1e-12));
    CHECK(true_late(p2) == Approx(joint.late()).margin(1e-12));
    CHECK(true_latt(p2) == Approx(joint.latt()).margin(1e-12));
    CHECK(true_latut(p2) == Approx(joint.latut()).margin(1e-12));
    CHECK(true_ate(p2) == Approx(joint.ate()).margin(1e-12));

    CHECK(true_late_pair(p2, 1, 0) == Approx(7.0 / 3).margin(1e-12));
    CHECK(true_late_pair(p2, 2, 0) == Approx(7.0 / 3).margin(1e-12));
    CHECK(true_late_pair(p2, 2, 1) == Approx(3.0).margin(1e-12));
    CHECK_THROWS_AS(true_late_pair(p2, 1, 1), UndefinedParameterError);

    const auto t = true_params(p2);
    CHECK(t.complier_mass == Approx(0.6));
    CHECK(t.treated_complier_mass == Approx(0.3));
    CHECK(t.untreated_complier_mass == Approx(1.0 / 3));
}

TEST_CASE("true parameters: degenerate and homogeneous cases", "[oracle]") {
    SECTION("only always- and never-takers") {
        const auto pop = build_population({stratum({1, 1, 1}, 0.4, 0, 1), stratum({0, 0, 0}, 0.6, 0, 1)},
                                          fixtures::three_point_grid());
        CHECK_THROWS_AS(true_late(pop), UndefinedParameterError);
        CHECK_THROWS_AS(true_latt(pop), UndefinedParameterError);
        CHECK_THROWS_AS(true_latut(pop), UndefinedParameterError);
    }
    SECTION("constant effect") {
        RandomPopulationConfig cfg;
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            cfg.grid_size = 3 + seed % 3;
            cfg.strata = cfg.grid_size + 2;
            const auto pop = fixtures::with_constant_effect(random_population(cfg, seed), -0.8);
            const auto t = true_params(pop);
            if (t.late) CHECK(*t.late == Approx(-0.8).margin(1e-12));
            if (t.latt) CHECK(*t.latt == Approx(-0.8).margin(1e-12));
            if (t.latut) CHECK(*t.latut == Approx(-0.8).margin(1e-12));
            CHECK(t.ate == Approx(-0.8).margin(1e-12));
        }
    }
    SECTION("symmetric effects average to zero") {
        const auto pop = build_population({stratum({0, 1, 1}, 0.5, 0, 2), stratum({0, 0, 1}, 0.5, 2, 0)},
                                          fixtures::three_point_grid());
        CHECK(true_ate(pop) == Approx(0.0).margin(1e-15));
    }
    SECTION("single stratum") {
        const auto pop = build_population({stratum({1, 1, 1}, 1.0, 0.5, 2.0)}, fixtures::three_point_grid());
        CHECK(true_ate(pop) == 1.5);
    }
}

TEST_CASE("parameters with empty conditioning events raise", "[oracle]") {
    // Compliers exist only between interior values; no stratum switches between the extremes.
    const InstrumentGrid grid({1, 2, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto pop = build_population(
        {stratum({1, 1, 1}, 0.3, 0, 1), stratum({0, 1, 0}, 0.2, 0, 1), stratum({1, 0, 1}, 0.1, 0, 1),
         stratum({0, 0, 0}, 0.4, 0, 1)},
        grid);
    CHECK_THROWS_AS(true_late(pop), UndefinedParameterError);
    CHECK_FALSE(true_params(pop).late.has_value());
    CHECK(true_params(pop).latt.has_value());
    CHECK_THROWS_AS(latt_weight_decomposition(pop), PreconditionError);
}

TEST_CASE("latt weight decomposition", "[oracle]") {
    SECTION("P2 reproduces the closed-form LATT estimand") {
        const auto pop = fixtures::p2n();
        const auto lw = latt_weight_decomposition(pop);
        const fixtures::JointTable joint(pop);
        const double target = (joint.mean_y() - joint.m(0)) / (joint.mean_z() - joint.z[0]);
        CHECK(lw.aggregate() == Approx(target).margin(1e-12));
        CHECK(lw.total() == Approx(1.0).margin(1e-12));
        for (std::size_t i = 0; i < lw.weights.size(); ++i)
            if (pop.stratum(i).response[0] == 0) CHECK(lw.weights[i] >= 0.0);
    }
    SECTION("P1 weights are all nonnegative") {
        for (double w : latt_weight_decomposition(fixtures::p1n()).weights) CHECK(w >= 0.0);
    }
    SECTION("treated at z_low but not everywhere gives a negative weight") {
        const auto pop = normalize(build_population(
            {stratum({1, 0, 1}, 0.2, 0, 1), stratum({0, 1, 1}, 0.4, 0, 1), stratum({0, 0, 1}, 0.3, 0, 1),
             stratum({0, 0, 0}, 0.1, 0, 1)},
            fixtures::three_point_grid()));
        const auto lw = latt_weight_decomposition(pop);
        bool negative = false;
        for (std::size_t i = 0; i < lw.weights.size(); ++i)
            if (pop.stratum(i).response.first() && !pop.stratum(i).response.is_threshold())
                negative |= lw.weights[i] < 0.0;
        CHECK(negative);
    }
    SECTION("aggregate matches over random populations") {
        RandomPopulationConfig cfg;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            cfg.grid_size = 3 + seed % 4;
            cfg.strata = cfg.grid_size + 2;
            const auto pop = random_population(cfg, seed);
            const fixtures::JointTable joint(pop);
            const double target = (joint.mean_y() - joint.m(0)) / (joint.mean_z() - joint.z[0]);
            REQUIRE(latt_weight_decomposition(pop).aggregate() == Approx(target).margin(1e-12));
        }
    }
}

TEST_CASE("interior-only types", "[oracle]") {
    const auto p2 = interior_only_types(fixtures::p2n());
    CHECK(p2.strata == std::vector<std::size_t>{1});
    CHECK(p2.mass == Approx(0.1));
    CHECK(*p2.mean_effect == Approx(5.0));
    const auto p1 = interior_only_types(fixtures::p1n());
    CHECK(p1.strata.empty());
    CHECK_FALSE(p1.mean_effect.has_value());
}
