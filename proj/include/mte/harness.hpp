#pragma once

// Randomized verification of the identification results.
//
// Forward direction: populations drawn in the matching monotonicity mode must
// give estimand == true parameter to machine precision. Converse: among
// unrestricted populations, find one that violates the condition and shows a
// gap above a fixed threshold.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mte/error.hpp"
#include "mte/estimation.hpp"
#include "mte/oracle.hpp"
#include "mte/population.hpp"
#include "mte/seed.hpp"

namespace mte {

enum class TheoremPart { i, ii, iii, iv };

inline std::string to_string(TheoremPart p) {
    switch (p) {
        case TheoremPart::i: return "i";
        case TheoremPart::ii: return "ii";
        case TheoremPart::iii: return "iii";
        case TheoremPart::iv: return "iv";
    }
    return "?";
}

inline TheoremPart parse_theorem_part(const std::string& s) {
    if (s == "i") return TheoremPart::i;
    if (s == "ii") return TheoremPart::ii;
    if (s == "iii") return TheoremPart::iii;
    if (s == "iv") return TheoremPart::iv;
    throw ParseError("unknown theorem part \"" + s + "\" (expected i, ii, iii or iv)");
}

inline constexpr double kForwardTol = 1e-10;
inline constexpr double kConverseMinGap = 0.05;

struct TheoremCheckConfig {
    std::vector<TheoremPart> parts{TheoremPart::i, TheoremPart::ii, TheoremPart::iii,
                                   TheoremPart::iv};
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::size_t converse_budget = 200;
    // Examined before any random draw in the converse search.
    std::vector<Population> seeded_witnesses;
};

enum class ConverseStatus { found, inconclusive };

struct ConverseWitness {
    Population population;
    double estimand = 0.0;
    double true_value = 0.0;
    double gap = 0.0;
    std::size_t pair_high = 0, pair_low = 0;  // part iv only
    bool seeded = false;
};

struct PartResult {
    TheoremPart part = TheoremPart::i;
    std::string condition;
    std::size_t forward_trials = 0;
    double forward_max_gap = 0.0;
    bool forward_pass = false;
    ConverseStatus converse = ConverseStatus::inconclusive;
    std::size_t converse_draws = 0;  // random draws consumed
    std::optional<ConverseWitness> witness;
};

struct TheoremCheckResult {
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::size_t converse_budget = 0;
    std::vector<PartResult> parts;

    bool all_pass() const {
        for (const auto& p : parts)
            if (!p.forward_pass) return false;
        return true;
    }
};

namespace detail {

inline MonotonicityMode forward_mode(TheoremPart p) {
    switch (p) {
        case TheoremPart::i: return MonotonicityMode::extreme_pair_only;
        case TheoremPart::ii: return MonotonicityMode::bottom_anchored_only;
        case TheoremPart::iii: return MonotonicityMode::top_anchored_only;
        case TheoremPart::iv: return MonotonicityMode::pair_only;
    }
    return MonotonicityMode::unrestricted;
}

inline std::string condition_name(TheoremPart p) {
    switch (p) {
        case TheoremPart::i: return to_string(MonotonicityKind::extreme_pair);
        case TheoremPart::ii: return to_string(MonotonicityKind::bottom_anchored);
        case TheoremPart::iii: return to_string(MonotonicityKind::top_anchored);
        case TheoremPart::iv: return to_string(MonotonicityKind::pair);
    }
    return "";
}

// Largest discrepancy among the estimand forms of one part.
struct PartGap {
    double estimand = 0.0;
    double truth = 0.0;
    double gap = 0.0;
};

inline PartGap part_gap(TheoremPart part, const Population& pop, std::size_t high = 0,
                        std::size_t low = 0) {
    const OutcomeCurve curve = outcome_curve(pop);
    PartGap g;
    auto take = [&](double value) {
        const double d = std::abs(value - g.truth);
        if (d >= g.gap) g.gap = d, g.estimand = value;
    };
    switch (part) {
        case TheoremPart::i: {
            g.truth = true_late(pop);
            const auto f = late_forms(curve);
            take(f.integral), take(f.closed);
            break;
        }
        case TheoremPart::ii: {
            g.truth = true_latt(pop);
            const auto f = latt_forms(curve);
            take(f.integral), take(f.closed);
            break;
        }
        case TheoremPart::iii: {
            g.truth = true_latut(pop);
            const auto f = latut_forms(curve);
            take(f.integral), take(f.closed);
            break;
        }
        case TheoremPart::iv: {
            g.truth = true_late_pair(pop, high, low);
            take(wald(curve, high, low));
            take(avg_liv_range(curve, curve.grid().point(low), curve.grid().point(high)));
            break;
        }
    }
    return g;
}

inline bool condition_holds(TheoremPart part, const Population& pop, std::size_t high = 0,
                            std::size_t low = 0) {
    switch (part) {
        case TheoremPart::i: return check_monotonicity(pop, MonotonicityKind::extreme_pair).holds;
        case TheoremPart::ii: return check_monotonicity(pop, MonotonicityKind::bottom_anchored).holds;
        case TheoremPart::iii: return check_monotonicity(pop, MonotonicityKind::top_anchored).holds;
        case TheoremPart::iv:
            return check_monotonicity(pop, MonotonicityCondition::pair_of(high, low)).holds;
    }
    return false;
}

// Converse test of one population: a violated condition with gap above the
// threshold. Part iv scans every ordered pair high > low.
inline std::optional<ConverseWitness> converse_candidate(TheoremPart part, const Population& pop) {
    auto try_one = [&](std::size_t high, std::size_t low) -> std::optional<ConverseWitness> {
        if (condition_holds(part, pop, high, low)) return std::nullopt;
        PartGap g;
        try {
            g = part_gap(part, pop, high, low);
        } catch (const UndefinedParameterError&) {
            return std::nullopt;
        }
        if (!(g.gap > kConverseMinGap)) return std::nullopt;
        return ConverseWitness{pop, g.estimand, g.truth, g.gap, high, low, false};
    };
    if (part != TheoremPart::iv) return try_one(0, 0);
    for (std::size_t high = 1; high < pop.grid_size(); ++high)
        for (std::size_t low = 0; low < high; ++low)
            if (auto w = try_one(high, low)) return w;
    return std::nullopt;
}

}  // namespace detail

/// Grid size and stratum count used for random draw `t`.
inline RandomPopulationConfig harness_population_config(MonotonicityMode mode, std::size_t t) {
    RandomPopulationConfig cfg;
    cfg.grid_size = 3 + t % 4;
    cfg.strata = cfg.grid_size + 1 + t % 3;
    cfg.mean_low = -3.0;
    cfg.mean_high = 3.0;
    cfg.mode = mode;
    cfg.strata = std::min(cfg.strata, allowed_patterns(cfg).size());
    return cfg;
}

inline PartResult check_part(TheoremPart part, const TheoremCheckConfig& cfg) {
    PartResult r;
    r.part = part;
    r.condition = detail::condition_name(part);
    const auto part_id = static_cast<std::uint64_t>(part);

    for (std::size_t t = 0; t < cfg.trials; ++t) {
        auto pc = harness_population_config(detail::forward_mode(part), t);
        std::size_t high = 0, low = 0;
        if (part == TheoremPart::iv) {
            std::mt19937_64 rng(derive_seed(cfg.seed, {part_id, t, 1}));
            std::uniform_int_distribution<std::size_t> pick(0, pc.grid_size - 1);
            do {
                high = pick(rng);
                low = pick(rng);
            } while (high <= low);
            pc.pair_high = high;
            pc.pair_low = low;
        }
        const Population pop = random_population(pc, derive_seed(cfg.seed, {part_id, t, 0}));
        const auto g = detail::part_gap(part, pop, high, low);
        r.forward_max_gap = std::max(r.forward_max_gap, g.gap);
        ++r.forward_trials;
    }
    r.forward_pass = r.forward_trials > 0 && r.forward_max_gap < kForwardTol;

    for (const auto& pop : cfg.seeded_witnesses) {
        if (auto w = detail::converse_candidate(part, normalize(pop))) {
            w->seeded = true;
            r.witness = std::move(w);
            r.converse = ConverseStatus::found;
            return r;
        }
    }
    for (std::size_t d = 0; d < cfg.converse_budget; ++d) {
        ++r.converse_draws;
        const auto pc = harness_population_config(MonotonicityMode::unrestricted, d);
        const Population pop = random_population(pc, derive_seed(cfg.seed, {part_id, d, 2}));
        if (auto w = detail::converse_candidate(part, pop)) {
            r.witness = std::move(w);
            r.converse = ConverseStatus::found;
            return r;
        }
    }
    return r;
}

inline TheoremCheckResult theorem_check(const TheoremCheckConfig& cfg) {
    if (cfg.trials < 1) throw PreconditionError("theorem_check: trials must be at least 1");
    if (cfg.parts.empty()) throw PreconditionError("theorem_check: no theorem parts selected");
    TheoremCheckResult out;
    out.seed = cfg.seed;
    out.trials = cfg.trials;
    out.converse_budget = cfg.converse_budget;
    for (TheoremPart p : cfg.parts) out.parts.push_back(check_part(p, cfg));
    return out;
}

}  // namespace mte
