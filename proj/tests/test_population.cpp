#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"

using Catch::Approx;
using namespace mte;
using fixtures::stratum;

TEST_CASE("instrument grid validates its invariants", "[population]") {
    CHECK_NOTHROW(InstrumentGrid({0.0, 1.0}, {0.5, 0.5}));
    CHECK_THROWS_AS(InstrumentGrid({0.0}, {1.0}), ValidationError);
    CHECK_THROWS_AS(InstrumentGrid({0.0, 0.0}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(InstrumentGrid({1.0, 0.0}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(InstrumentGrid({0.0, 1.0}, {0.6, 0.5}), ValidationError);
    CHECK_THROWS_AS(InstrumentGrid({0.0, 1.0}, {1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(InstrumentGrid({0.0, 1.0, 2.0}, {0.5, 0.5}), ValidationError);
}

TEST_CASE("build_population", "[population]") {
    SECTION("single always-taker stratum") {
        const auto pop = build_population({stratum({1, 1, 1}, 1.0, 0, 1)}, fixtures::three_point_grid());
        CHECK_FALSE(pop.normalized());
        CHECK(pop.strata().size() == 1);
    }
    SECTION("masses summing to 0.9") {
        CHECK_THROWS_AS(build_population({stratum({1, 1, 1}, 0.5, 0, 1), stratum({0, 0, 0}, 0.4, 0, 1)},
                                         fixtures::three_point_grid()),
                        ValidationError);
    }
    SECTION("pattern length mismatch") {
        CHECK_THROWS_AS(build_population({stratum({1, 1}, 1.0, 0, 1)}, fixtures::three_point_grid()),
                        ValidationError);
    }
    SECTION("empty strata") {
        CHECK_THROWS_AS(build_population({}, fixtures::three_point_grid()), ValidationError);
    }
    SECTION("P2 satisfies every invariant") {
        const auto pop = fixtures::p2();
        double mass = 0;
        for (const auto& s : pop.strata()) {
            mass += s.mass;
            CHECK(s.response.size() == 3);
            CHECK(s.mass >= 0);
        }
        CHECK(mass == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("propensity", "[population]") {
    const auto nt = build_population({stratum({0, 0, 0}, 1.0, 0, 1)}, fixtures::three_point_grid());
    const auto at = build_population({stratum({1, 1, 1}, 1.0, 0, 1)}, fixtures::three_point_grid());
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(propensity(nt, k) == 0.0);
        CHECK(propensity(at, k) == 1.0);
    }
    // 0.2 + 0.1 + 0.2 from AT, B, C1.
    CHECK(propensity(fixtures::p2(), 1) == Approx(0.5).margin(1e-15));
    CHECK_THROWS_AS(propensity(nt, 3), PreconditionError);
}

TEST_CASE("first_stage_check", "[population]") {
    const auto nt = build_population({stratum({0, 0, 0}, 1.0, 0, 1)}, fixtures::three_point_grid());
    CHECK_FALSE(first_stage_check(nt));
    CHECK(first_stage_check(fixtures::p2()));
    const auto at_nt = build_population({stratum({1, 1, 1}, 0.3, 0, 1), stratum({0, 0, 0}, 0.7, 0, 1)},
                                        fixtures::three_point_grid());
    CHECK_FALSE(first_stage_check(at_nt));
}

TEST_CASE("normalize", "[population]") {
    SECTION("relabels grid points by propensity") {
        const InstrumentGrid judges({10, 20, 30}, {0.25, 0.5, 0.25});
        const auto pop = build_population({stratum({1, 1, 1}, 0.2, 0, 1), stratum({0, 1, 1}, 0.3, 0, 1),
                                           stratum({0, 0, 1}, 0.3, 0, 1), stratum({0, 0, 0}, 0.2, 0, 1)},
                                          judges);
        const auto n = normalize(pop);
        CHECK(n.normalized());
        CHECK(n.grid().point(0) == Approx(0.2).margin(1e-12));
        CHECK(n.grid().point(1) == Approx(0.5).margin(1e-12));
        CHECK(n.grid().point(2) == Approx(0.8).margin(1e-12));
        CHECK(n.grid().weight(1) == 0.5);
    }
    SECTION("sorts unordered instrument labels") {
        const InstrumentGrid judges({1, 2, 3}, {0.2, 0.3, 0.5});
        // Propensities 0.8, 0.2, 0.5 -> order (2, 3, 1).
        const auto pop = build_population({stratum({1, 0, 0}, 0.3, 0, 1), stratum({1, 1, 1}, 0.2, 0, 1),
                                           stratum({1, 0, 1}, 0.3, 0, 1), stratum({0, 0, 0}, 0.2, 0, 1)},
                                          judges);
        const auto n = normalize(pop);
        CHECK(n.grid().point(0) == Approx(0.2));
        CHECK(n.grid().point(1) == Approx(0.5));
        CHECK(n.grid().point(2) == Approx(0.8));
        CHECK(n.grid().weight(0) == 0.3);
        CHECK(n.grid().weight(1) == 0.5);
        CHECK(n.grid().weight(2) == 0.2);
        CHECK(n.stratum(0).response == ResponseType{0, 0, 1});
    }
    SECTION("identical propensities are an error") {
        const InstrumentGrid judges({1, 2, 3}, {0.2, 0.3, 0.5});
        const auto pop = build_population({stratum({1, 0, 1}, 0.4, 0, 1), stratum({0, 1, 1}, 0.4, 0, 1),
                                           stratum({0, 0, 0}, 0.2, 0, 1)},
                                          judges);
        CHECK_THROWS_WITH(normalize(pop), Catch::Matchers::ContainsSubstring("non-injective propensity"));
    }
    SECTION("constant propensity is an error") {
        const auto at_nt = build_population({stratum({1, 1, 1}, 0.3, 0, 1), stratum({0, 0, 0}, 0.7, 0, 1)},
                                            fixtures::three_point_grid());
        CHECK_THROWS_AS(normalize(at_nt), NormalizationError);
    }
    SECTION("idempotent") {
        const auto once = fixtures::p2n();
        CHECK(normalize(once) == once);
    }
}

TEST_CASE("outcome_curve of P2", "[population]") {
    const auto curve = outcome_curve(fixtures::p2n());
    const fixtures::JointTable joint(fixtures::p2n());
    CHECK(curve.value(0) == Approx(1.0).margin(1e-12));
    CHECK(curve.value(1) == Approx(1.7).margin(1e-12));
    CHECK(curve.value(2) == Approx(2.4).margin(1e-12));
    for (std::size_t k = 0; k < 3; ++k) CHECK(curve.value(k) == Approx(joint.m(k)).margin(1e-12));
    CHECK_THROWS_AS(outcome_curve(fixtures::p2()), PreconditionError);
}

TEST_CASE("outcome_curve is constant when outcomes ignore treatment", "[population]") {
    const auto pop = normalize(
        build_population({stratum({0, 1, 1}, 0.5, 3, 3), stratum({0, 0, 1}, 0.5, 3, 3)},
                         fixtures::three_point_grid()));
    const auto curve = outcome_curve(pop);
    for (double v : curve.values()) CHECK(v == Approx(3.0).margin(1e-12));
}

TEST_CASE("random_population modes", "[population][property]") {
    auto held = [](const Population& p, MonotonicityKind k) { return check_monotonicity(p, k).holds; };
    auto draw = [](MonotonicityMode mode, std::uint64_t seed) {
        RandomPopulationConfig cfg;
        cfg.grid_size = 3 + seed % 3;
        cfg.strata = cfg.grid_size + (mode == MonotonicityMode::ia_full ? 1 : 2);
        cfg.mode = mode;
        cfg.pair_high = cfg.grid_size - 2;
        cfg.pair_low = 0;
        return random_population(cfg, seed);
    };
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        CAPTURE(seed);
        const auto ia = draw(MonotonicityMode::ia_full, seed);
        for (const auto& s : ia.strata())
            CHECK(s.response.is_threshold());

        const auto ep = draw(MonotonicityMode::extreme_pair_only, seed);
        CHECK(held(ep, MonotonicityKind::extreme_pair));
        CHECK_FALSE(held(ep, MonotonicityKind::bottom_anchored));
        CHECK_FALSE(held(ep, MonotonicityKind::top_anchored));

        const auto ba = draw(MonotonicityMode::bottom_anchored_only, seed);
        CHECK(held(ba, MonotonicityKind::bottom_anchored));
        CHECK_FALSE(held(ba, MonotonicityKind::top_anchored));
        CHECK_FALSE(held(ba, MonotonicityKind::ia_full));

        const auto ta = draw(MonotonicityMode::top_anchored_only, seed);
        CHECK(held(ta, MonotonicityKind::top_anchored));
        CHECK_FALSE(held(ta, MonotonicityKind::bottom_anchored));

        const auto pr = draw(MonotonicityMode::pair_only, seed);
        CHECK(check_monotonicity(pr, MonotonicityCondition::pair_of(pr.grid_size() - 2, 0)).holds);
        CHECK_FALSE(held(pr, MonotonicityKind::ia_full));
    }
}

TEST_CASE("random_population specific seeds", "[population]") {
    RandomPopulationConfig cfg;
    cfg.grid_size = 4;
    cfg.strata = 6;
    SECTION("extreme_pair_only seed 7 has a non-monotone interior with s(z_low) <= s(z_high)") {
        cfg.mode = MonotonicityMode::extreme_pair_only;
        const auto pop = random_population(cfg, 7);
        CHECK(check_monotonicity(pop, MonotonicityKind::extreme_pair).holds);
        bool found = false;
        for (const auto& s : pop.strata())
            found |= s.response.first() <= s.response.last() && !s.response.is_threshold();
        CHECK(found);
    }
    SECTION("unrestricted seed 1 may include extreme-pair defiers") {
        cfg.mode = MonotonicityMode::unrestricted;
        cfg.strata = 10;
        const auto pop = random_population(cfg, 1);
        const auto r = check_monotonicity(pop, MonotonicityKind::extreme_pair);
        bool defier = false;
        for (const auto& s : pop.strata()) defier |= s.response.first() && !s.response.last();
        CHECK(r.holds == !defier);
    }
    SECTION("infeasible configurations") {
        cfg.grid_size = 2;
        cfg.mode = MonotonicityMode::extreme_pair_only;
        CHECK_THROWS_AS(random_population(cfg, 1), InfeasibleConfigError);
        cfg.grid_size = 4;
        cfg.mode = MonotonicityMode::ia_full;
        cfg.strata = 6;  // only 5 threshold patterns exist on 4 points
        CHECK_THROWS_AS(random_population(cfg, 1), InfeasibleConfigError);
    }
}

TEST_CASE("population invariants over random draws", "[population][property]") {
    RandomPopulationConfig cfg;
    cfg.mode = MonotonicityMode::unrestricted;
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        cfg.grid_size = 2 + seed % 5;
        cfg.strata = cfg.grid_size + 1;
        const auto pop = random_population(cfg, seed);
        for (std::size_t k = 0; k < pop.grid_size(); ++k)
            REQUIRE(pop.propensity(k) == Approx(pop.grid().point(k)).margin(1e-12));
        const auto again = normalize(pop);
        REQUIRE(again == pop);
        // Bit-reproducible.
        REQUIRE(random_population(cfg, seed) == pop);

        // Constant effect b: the end-to-end slope of the curve is b.
        const auto ce = fixtures::with_constant_effect(pop, 1.75);
        const auto c = outcome_curve(ce);
        REQUIRE((c.value(c.size() - 1) - c.value(0)) / (c.upper() - c.lower()) ==
                Approx(1.75).margin(1e-10));
    }
}
