#pragma once

// Exact enumeration of true treatment parameters and monotonicity conditions.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mte/error.hpp"
#include "mte/population.hpp"

namespace mte {

enum class MonotonicityKind { ia_full, extreme_pair, bottom_anchored, top_anchored, pair };

inline std::string to_string(MonotonicityKind k) {
    switch (k) {
        case MonotonicityKind::ia_full: return "ia_full";
        case MonotonicityKind::extreme_pair: return "extreme_pair";
        case MonotonicityKind::bottom_anchored: return "bottom_anchored";
        case MonotonicityKind::top_anchored: return "top_anchored";
        case MonotonicityKind::pair: return "pair";
    }
    return "unknown";
}

/// A monotonicity condition. For `pair`, the condition is
/// s(z_high) >= s(z_low) for every type present.
struct MonotonicityCondition {
    MonotonicityKind kind = MonotonicityKind::ia_full;
    std::size_t high = 0;
    std::size_t low = 0;

    static MonotonicityCondition of(MonotonicityKind k) { return {k, 0, 0}; }
    static MonotonicityCondition pair_of(std::size_t high, std::size_t low) {
        return {MonotonicityKind::pair, high, low};
    }
    friend bool operator==(const MonotonicityCondition&, const MonotonicityCondition&) = default;
};

/// One violation: stratum `stratum` is treated at grid index `treated_at`
/// but not at `untreated_at`, although the condition needs the reverse.
struct Witness {
    std::size_t stratum = 0;
    std::size_t treated_at = 0;
    std::size_t untreated_at = 0;

    /// The violating index pair in ascending order.
    std::pair<std::size_t, std::size_t> indices() const {
        return treated_at < untreated_at ? std::pair{treated_at, untreated_at}
                                         : std::pair{untreated_at, treated_at};
    }
    friend bool operator==(const Witness&, const Witness&) = default;
};

struct MonotonicityReport {
    MonotonicityCondition condition;
    bool holds = true;
    std::vector<Witness> witnesses;
};

/// Scans every stratum with positive mass; zero-mass strata are not in the
/// population's type set.
inline MonotonicityReport check_monotonicity(const Population& pop, MonotonicityCondition cond) {
    const std::size_t K = pop.grid_size();
    const std::size_t top = K - 1;
    MonotonicityReport r{cond, true, {}};
    if (cond.kind == MonotonicityKind::pair && (cond.high >= K || cond.low >= K))
        throw PreconditionError("pair condition index out of range");
    for (std::size_t i = 0; i < pop.strata().size(); ++i) {
        const auto& st = pop.stratum(i);
        if (st.mass <= 0.0) continue;
        const auto& s = st.response;
        // Reports a violation when s is treated at `a` but not at `b`.
        auto flag = [&](std::size_t a, std::size_t b) {
            if (s.treated(a) && !s.treated(b)) r.witnesses.push_back({i, a, b});
        };
        switch (cond.kind) {
            case MonotonicityKind::ia_full:
                for (std::size_t a = 0; a < K; ++a)
                    for (std::size_t b = a + 1; b < K; ++b) flag(a, b);
                break;
            case MonotonicityKind::extreme_pair: flag(0, top); break;
            case MonotonicityKind::bottom_anchored:
                for (std::size_t b = 1; b < K; ++b) flag(0, b);
                break;
            case MonotonicityKind::top_anchored:
                for (std::size_t a = 0; a < top; ++a) flag(a, top);
                break;
            case MonotonicityKind::pair:
                if (cond.high != cond.low) flag(cond.low, cond.high);
                break;
        }
    }
    r.holds = r.witnesses.empty();
    return r;
}

inline MonotonicityReport check_monotonicity(const Population& pop, MonotonicityKind kind) {
    return check_monotonicity(pop, MonotonicityCondition::of(kind));
}

// ---------------------------------------------------------------------------
// True parameters

inline constexpr double kMassTol = 1e-12;

namespace detail {

inline void require_normalized(const Population& pop, const char* what) {
    if (!pop.normalized())
        throw PreconditionError(std::string(what) + " requires a normalized population");
}

// Mass-weighted mean of stratum effects with per-stratum weights.
template <class WeightFn>
double weighted_effect(const Population& pop, WeightFn&& weight, const char* what,
                       double* mass_out = nullptr) {
    double mass = 0.0, num = 0.0;
    for (const auto& s : pop.strata()) {
        const double w = weight(s);
        mass += w;
        num += w * s.effect();
    }
    if (mass_out) *mass_out = mass;
    if (!(mass > kMassTol))
        throw UndefinedParameterError(std::string(what) + " undefined: conditioning mass " +
                                      std::to_string(mass));
    return num / mass;
}

}  // namespace detail

// The extremes z_low, z_high are the first and last grid points. On a
// normalized population these carry the lowest and highest propensity.

/// E[beta | S(z_low)=0, S(z_high)=1].
inline double true_late(const Population& pop) {
    const std::size_t top = pop.grid_size() - 1;
    return detail::weighted_effect(
        pop,
        [&](const StratumSpec& s) {
            return (!s.response.treated(0) && s.response.treated(top)) ? s.mass : 0.0;
        },
        "LATE");
}

/// E[beta | S(z_low)=0, D=1].
inline double true_latt(const Population& pop) {
    const auto w = pop.grid().weights();
    return detail::weighted_effect(
        pop,
        [&](const StratumSpec& s) {
            return s.response.first() ? 0.0 : s.mass * s.response.treated_share(w);
        },
        "LATT");
}

/// E[beta | S(z_high)=1, D=0].
inline double true_latut(const Population& pop) {
    const auto w = pop.grid().weights();
    return detail::weighted_effect(
        pop,
        [&](const StratumSpec& s) {
            return s.response.last() ? s.mass * (1.0 - s.response.treated_share(w)) : 0.0;
        },
        "LATUT");
}

inline double true_ate(const Population& pop) {
    double ate = 0.0;
    for (const auto& s : pop.strata()) ate += s.mass * s.effect();
    return ate;
}

/// E[beta | D(z_high) > D(z_low)] for grid indices high, low.
inline double true_late_pair(const Population& pop, std::size_t high, std::size_t low) {
    if (high >= pop.grid_size() || low >= pop.grid_size())
        throw PreconditionError("true_late_pair: grid index out of range");
    if (high == low) throw UndefinedParameterError("true_late_pair: empty event (equal indices)");
    return detail::weighted_effect(
        pop,
        [&](const StratumSpec& s) {
            return (s.response.treated(high) && !s.response.treated(low)) ? s.mass : 0.0;
        },
        "pair LATE");
}

struct TrueParams {
    std::optional<double> late, latt, latut;
    double ate = 0.0;
    double complier_mass = 0.0;
    double treated_complier_mass = 0.0;
    double untreated_complier_mass = 0.0;
};

inline TrueParams true_params(const Population& pop) {
    TrueParams t;
    const std::size_t top = pop.grid_size() - 1;
    const auto w = pop.grid().weights();
    for (const auto& s : pop.strata()) {
        if (!s.response.first() && s.response.last()) t.complier_mass += s.mass;
        if (!s.response.first()) t.treated_complier_mass += s.mass * s.response.treated_share(w);
        if (s.response.treated(top))
            t.untreated_complier_mass += s.mass * (1.0 - s.response.treated_share(w));
    }
    auto attempt = [](auto&& fn) -> std::optional<double> {
        try {
            return fn();
        } catch (const UndefinedParameterError&) {
            return std::nullopt;
        }
    };
    t.late = attempt([&] { return true_late(pop); });
    t.latt = attempt([&] { return true_latt(pop); });
    t.latut = attempt([&] { return true_latut(pop); });
    t.ate = true_ate(pop);
    return t;
}

/// Types untreated at both extremes but treated somewhere in between. No
/// estimand targets them; reported as a diagnostic.
struct InteriorTypes {
    std::vector<std::size_t> strata;
    double mass = 0.0;
    std::optional<double> mean_effect;
};

inline InteriorTypes interior_only_types(const Population& pop) {
    InteriorTypes out;
    const std::size_t top = pop.grid_size() - 1;
    double num = 0.0;
    for (std::size_t i = 0; i < pop.strata().size(); ++i) {
        const auto& s = pop.stratum(i);
        if (s.mass <= 0.0 || s.response.treated(0) || s.response.treated(top)) continue;
        bool interior = false;
        for (std::size_t k = 1; k < top; ++k) interior |= s.response.treated(k);
        if (!interior) continue;
        out.strata.push_back(i);
        out.mass += s.mass;
        num += s.mass * s.effect();
    }
    if (out.mass > kMassTol) out.mean_effect = num / out.mass;
    return out;
}

/// Weights the integral-form LATT places on each stratum's mean effect.
///
/// weight_s = mass_s * (Pr[D=1|S=s] - s(z_low)) / (E[Z] - z_low). A stratum
/// treated at z_low but not everywhere gets a negative weight.
struct LattWeights {
    std::vector<double> weights;
    std::vector<double> effects;

    double aggregate() const {
        double v = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) v += weights[i] * effects[i];
        return v;
    }
    double total() const {
        double v = 0.0;
        for (double w : weights) v += w;
        return v;
    }
};

inline LattWeights latt_weight_decomposition(const Population& pop) {
    detail::require_normalized(pop, "latt_weight_decomposition");
    const double denom = pop.grid().mean() - pop.grid().lower();
    if (!(denom > kMassTol))
        throw PreconditionError("latt_weight_decomposition: E[Z] equals the lowest instrument value");
    const auto w = pop.grid().weights();
    LattWeights out;
    for (const auto& s : pop.strata()) {
        out.weights.push_back(s.mass * (s.response.treated_share(w) - s.response[0]) / denom);
        out.effects.push_back(s.effect());
    }
    return out;
}

}  // namespace mte
