#pragma once

// Finite-support populations of response types.
//
// A population is a mixture of strata. Each stratum has a response type
// (treatment choice at every instrument value) and potential-outcome means.
// Strata are specified independently of the instrument law, so exogeneity
// holds by construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mte/error.hpp"
#include "mte/seed.hpp"

namespace mte {

inline constexpr double kExactTol = 1e-12;
inline constexpr double kNormalizeTol = 1e-10;

/// Ordered instrument values together with the law of Z.
class InstrumentGrid {
public:
    InstrumentGrid(std::vector<double> points, std::vector<double> weights)
        : points_(std::move(points)), weights_(std::move(weights)) {
        if (points_.size() < 2)
            throw ValidationError("instrument grid needs at least 2 points");
        if (weights_.size() != points_.size())
            throw ValidationError("instrument grid: " + std::to_string(points_.size()) +
                                  " points but " + std::to_string(weights_.size()) + " weights");
        double total = 0.0;
        for (std::size_t k = 0; k < points_.size(); ++k) {
            if (!std::isfinite(points_[k]))
                throw ValidationError("instrument grid: non-finite point at index " +
                                      std::to_string(k));
            if (k > 0 && !(points_[k] > points_[k - 1]))
                throw ValidationError("instrument grid: points not strictly increasing at index " +
                                      std::to_string(k));
            if (!(weights_[k] > 0.0) || !std::isfinite(weights_[k]))
                throw ValidationError("instrument grid: weight at index " + std::to_string(k) +
                                      " must be positive");
            total += weights_[k];
        }
        if (std::abs(total - 1.0) > kExactTol)
            throw ValidationError("instrument grid: weights sum to " + std::to_string(total));
    }

    std::size_t size() const noexcept { return points_.size(); }
    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> weights() const noexcept { return weights_; }
    double point(std::size_t k) const { return points_.at(k); }
    double weight(std::size_t k) const { return weights_.at(k); }
    double lower() const noexcept { return points_.front(); }
    double upper() const noexcept { return points_.back(); }

    /// E[Z].
    double mean() const noexcept {
        double m = 0.0;
        for (std::size_t k = 0; k < points_.size(); ++k) m += weights_[k] * points_[k];
        return m;
    }

    /// Pr[Z > u] on the open segment to the right of knot k: sum of weights above k.
    double survival_after(std::size_t k) const noexcept {
        double s = 0.0;
        for (std::size_t j = k + 1; j < weights_.size(); ++j) s += weights_[j];
        return s;
    }

    /// Pr[Z < u] on the open segment to the right of knot k.
    double cdf_through(std::size_t k) const noexcept {
        double s = 0.0;
        for (std::size_t j = 0; j <= k && j < weights_.size(); ++j) s += weights_[j];
        return s;
    }

    friend bool operator==(const InstrumentGrid&, const InstrumentGrid&) = default;

private:
    std::vector<double> points_;
    std::vector<double> weights_;
};

/// Treatment choice at each grid index: the map s(z).
class ResponseType {
public:
    ResponseType() = default;
    explicit ResponseType(std::vector<std::uint8_t> pattern) : pattern_(std::move(pattern)) {
        for (auto v : pattern_)
            if (v > 1) throw ValidationError("response pattern entries must be 0 or 1");
    }
    ResponseType(std::initializer_list<int> pattern) {
        pattern_.reserve(pattern.size());
        for (int v : pattern) {
            if (v != 0 && v != 1) throw ValidationError("response pattern entries must be 0 or 1");
            pattern_.push_back(static_cast<std::uint8_t>(v));
        }
    }

    std::size_t size() const noexcept { return pattern_.size(); }
    bool treated(std::size_t k) const { return pattern_.at(k) != 0; }
    int operator[](std::size_t k) const { return pattern_[k]; }
    std::span<const std::uint8_t> pattern() const noexcept { return pattern_; }
    bool first() const { return treated(0); }
    bool last() const { return treated(pattern_.size() - 1); }

    /// Pr[D = 1 | S = s] under the given instrument law.
    double treated_share(std::span<const double> weights) const {
        double p = 0.0;
        for (std::size_t k = 0; k < pattern_.size(); ++k) p += weights[k] * pattern_[k];
        return p;
    }

    /// True for patterns of the form 0...01...1 (including all-0 and all-1).
    bool is_threshold() const noexcept {
        for (std::size_t k = 1; k < pattern_.size(); ++k)
            if (pattern_[k] < pattern_[k - 1]) return false;
        return true;
    }

    std::string to_string() const {
        std::string s;
        for (auto v : pattern_) s.push_back(v ? '1' : '0');
        return s;
    }

    friend bool operator==(const ResponseType&, const ResponseType&) = default;

private:
    std::vector<std::uint8_t> pattern_;
};

struct StratumSpec {
    ResponseType response;
    double mass = 0.0;
    double mu0 = 0.0;  // E[Y(0) | S = s]
    double mu1 = 0.0;  // E[Y(1) | S = s]
    double sd0 = 0.0;
    double sd1 = 0.0;

    double effect() const noexcept { return mu1 - mu0; }

    friend bool operator==(const StratumSpec&, const StratumSpec&) = default;
};

class Population {
public:
    Population(InstrumentGrid grid, std::vector<StratumSpec> strata, bool normalized)
        : grid_(std::move(grid)), strata_(std::move(strata)), normalized_(normalized) {
        if (strata_.empty()) throw ValidationError("population has no strata");
        double total = 0.0;
        for (std::size_t i = 0; i < strata_.size(); ++i) {
            const auto& s = strata_[i];
            if (s.response.size() != grid_.size())
                throw ValidationError("stratum " + std::to_string(i) + ": pattern length " +
                                      std::to_string(s.response.size()) + " != grid size " +
                                      std::to_string(grid_.size()));
            if (!(s.mass >= 0.0) || !std::isfinite(s.mass))
                throw ValidationError("stratum " + std::to_string(i) + ": negative mass");
            if (!(s.sd0 >= 0.0) || !(s.sd1 >= 0.0))
                throw ValidationError("stratum " + std::to_string(i) + ": negative noise sd");
            if (!std::isfinite(s.mu0) || !std::isfinite(s.mu1))
                throw ValidationError("stratum " + std::to_string(i) + ": non-finite outcome mean");
            total += s.mass;
        }
        if (std::abs(total - 1.0) > kExactTol)
            throw ValidationError("stratum masses sum to " + std::to_string(total) + ", not 1");
        if (normalized_) {
            for (std::size_t k = 0; k < grid_.size(); ++k) {
                const double p = propensity(k);
                if (std::abs(p - grid_.point(k)) > kExactTol)
                    throw ValidationError("normalized population: p(z_" + std::to_string(k) +
                                          ") != z_" + std::to_string(k));
                if (p < -kExactTol || p > 1.0 + kExactTol)
                    throw ValidationError("normalized population: propensity outside [0,1]");
            }
        }
    }

    const InstrumentGrid& grid() const noexcept { return grid_; }
    std::span<const StratumSpec> strata() const noexcept { return strata_; }
    const StratumSpec& stratum(std::size_t i) const { return strata_.at(i); }
    std::size_t grid_size() const noexcept { return grid_.size(); }
    bool normalized() const noexcept { return normalized_; }

    /// p(z_k): share of agents treated at grid index k.
    double propensity(std::size_t k) const {
        if (k >= grid_.size())
            throw PreconditionError("grid index " + std::to_string(k) + " out of range");
        double p = 0.0;
        for (const auto& s : strata_) p += s.mass * s.response[k];
        return p;
    }

    std::vector<double> propensities() const {
        std::vector<double> p(grid_.size());
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = propensity(k);
        return p;
    }

    friend bool operator==(const Population&, const Population&) = default;

private:
    InstrumentGrid grid_;
    std::vector<StratumSpec> strata_;
    bool normalized_ = false;
};

inline Population build_population(std::vector<StratumSpec> strata, InstrumentGrid grid) {
    return Population(std::move(grid), std::move(strata), false);
}

inline double propensity(const Population& pop, std::size_t k) { return pop.propensity(k); }

/// True when the propensity varies across the grid.
inline bool first_stage_check(const Population& pop) {
    const auto p = pop.propensities();
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    return *hi - *lo > kNormalizeTol;
}

/// Relabel instrument values by their propensities so that p(z) = z.
///
/// Grid points are sorted by propensity; weights and pattern entries are
/// permuted alongside. Ties are an error: merging points would change the set
/// of response types.
inline Population normalize(const Population& pop) {
    if (pop.normalized()) return pop;
    if (!first_stage_check(pop))
        throw NormalizationError("no first stage: propensity is constant across the grid");
    const auto p = pop.propensities();
    const std::size_t n = p.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t i = 1; i < n; ++i) {
        if (p[order[i]] - p[order[i - 1]] <= kNormalizeTol)
            throw NormalizationError("non-injective propensity: grid points " +
                                     std::to_string(pop.grid().point(order[i - 1])) + " and " +
                                     std::to_string(pop.grid().point(order[i])) +
                                     " share propensity " + std::to_string(p[order[i]]));
    }
    std::vector<double> points(n), weights(n);
    for (std::size_t i = 0; i < n; ++i) {
        points[i] = std::clamp(p[order[i]], 0.0, 1.0);
        weights[i] = pop.grid().weight(order[i]);
    }
    std::vector<StratumSpec> strata(pop.strata().begin(), pop.strata().end());
    for (auto& s : strata) {
        std::vector<std::uint8_t> permuted(n);
        for (std::size_t i = 0; i < n; ++i) permuted[i] = s.response.pattern()[order[i]];
        s.response = ResponseType(std::move(permuted));
    }
    return Population(InstrumentGrid(std::move(points), std::move(weights)), std::move(strata),
                      true);
}

/// E[Y | Z = z_k] tabulated on a grid, interpolated piecewise-linearly.
class OutcomeCurve {
public:
    OutcomeCurve(InstrumentGrid grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ValidationError("outcome curve: value count does not match grid size");
        for (double v : values_)
            if (!std::isfinite(v)) throw ValidationError("outcome curve: non-finite value");
    }

    const InstrumentGrid& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    double value(std::size_t k) const { return values_.at(k); }
    std::size_t size() const noexcept { return values_.size(); }
    double lower() const noexcept { return grid_.lower(); }
    double upper() const noexcept { return grid_.upper(); }

    /// Index of the segment [z_k, z_{k+1}] used at u: the right segment at
    /// interior knots, the last segment at the upper end.
    std::size_t segment_of(double u) const {
        if (!(u >= lower() && u <= upper()))
            throw PreconditionError("evaluation point " + std::to_string(u) +
                                    " outside instrument support [" + std::to_string(lower()) +
                                    ", " + std::to_string(upper()) + "]");
        const auto pts = grid_.points();
        auto it = std::upper_bound(pts.begin(), pts.end(), u);
        std::size_t seg = static_cast<std::size_t>(it - pts.begin());
        seg = seg == 0 ? 0 : seg - 1;
        return std::min(seg, size() - 2);
    }

    double segment_slope(std::size_t seg) const {
        return (values_.at(seg + 1) - values_.at(seg)) / (grid_.point(seg + 1) - grid_.point(seg));
    }

    /// Interpolated E[Y | Z = u].
    double at(double u) const {
        const std::size_t seg = segment_of(u);
        return values_[seg] + segment_slope(seg) * (u - grid_.point(seg));
    }

private:
    InstrumentGrid grid_;
    std::vector<double> values_;
};

inline OutcomeCurve outcome_curve(const Population& pop) {
    if (!pop.normalized())
        throw PreconditionError("outcome_curve requires a normalized population");
    std::vector<double> m(pop.grid_size(), 0.0);
    for (std::size_t k = 0; k < m.size(); ++k)
        for (const auto& s : pop.strata())
            m[k] += s.mass * (s.response[k] ? s.mu1 : s.mu0);
    return OutcomeCurve(pop.grid(), std::move(m));
}

// ---------------------------------------------------------------------------
// Random populations

enum class MonotonicityMode {
    ia_full,
    extreme_pair_only,
    bottom_anchored_only,
    top_anchored_only,
    unrestricted,
    pair_only,
};

inline std::string to_string(MonotonicityMode m) {
    switch (m) {
        case MonotonicityMode::ia_full: return "ia_full";
        case MonotonicityMode::extreme_pair_only: return "extreme_pair_only";
        case MonotonicityMode::bottom_anchored_only: return "bottom_anchored_only";
        case MonotonicityMode::top_anchored_only: return "top_anchored_only";
        case MonotonicityMode::unrestricted: return "unrestricted";
        case MonotonicityMode::pair_only: return "pair_only";
    }
    return "unknown";
}

struct RandomPopulationConfig {
    std::size_t grid_size = 4;
    std::size_t strata = 6;
    double mean_low = -2.0;
    double mean_high = 2.0;
    MonotonicityMode mode = MonotonicityMode::unrestricted;
    // pair_only: require pattern[pair_high] >= pattern[pair_low].
    std::size_t pair_high = 1;
    std::size_t pair_low = 0;
    double noise_sd = 0.0;
    // Minimum gap between consecutive propensities of an accepted draw.
    double min_propensity_gap = 1e-3;
    std::size_t max_attempts = 20000;
};

namespace detail {

inline ResponseType pattern_from_bits(std::uint32_t bits, std::size_t k) {
    std::vector<std::uint8_t> p(k);
    for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<std::uint8_t>((bits >> i) & 1U);
    return ResponseType(std::move(p));
}

inline bool bottom_ok(const ResponseType& s) {
    if (!s.first()) return true;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (!s.treated(k)) return false;
    return true;
}

inline bool top_ok(const ResponseType& s) {
    if (s.last()) return true;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s.treated(k)) return false;
    return true;
}

inline bool extreme_ok(const ResponseType& s) { return s.last() >= s.first(); }

}  // namespace detail

/// Every 0/1 pattern on the grid admitted by the config's mode.
inline std::vector<ResponseType> allowed_patterns(const RandomPopulationConfig& cfg) {
    const std::size_t K = cfg.grid_size;
    auto allowed = [&](const ResponseType& s) {
        switch (cfg.mode) {
            case MonotonicityMode::ia_full: return s.is_threshold();
            case MonotonicityMode::extreme_pair_only: return detail::extreme_ok(s);
            case MonotonicityMode::bottom_anchored_only: return detail::bottom_ok(s);
            case MonotonicityMode::top_anchored_only: return detail::top_ok(s);
            case MonotonicityMode::unrestricted: return true;
            case MonotonicityMode::pair_only: return s.treated(cfg.pair_high) >= s.treated(cfg.pair_low);
        }
        return false;
    };

    std::vector<ResponseType> pool;
    for (std::uint32_t bits = 0; bits < (1U << K); ++bits) {
        auto s = detail::pattern_from_bits(bits, K);
        if (allowed(s)) pool.push_back(std::move(s));
    }
    return pool;
}

/// Draw a normalized population whose response-type set satisfies exactly the
/// requested monotonicity mode.
///
/// "-only" modes also force a violation of the stronger conditions:
/// extreme_pair_only fails both anchored conditions, bottom_anchored_only
/// fails top_anchored (and vice versa), pair_only fails ia_full.
inline Population random_population(const RandomPopulationConfig& cfg, std::uint64_t seed) {
    const std::size_t K = cfg.grid_size;
    if (K < 2 || K > 16) throw InfeasibleConfigError("grid_size must be in [2, 16]");
    if (cfg.strata < 1) throw InfeasibleConfigError("need at least one stratum");
    if (!(cfg.mean_high >= cfg.mean_low)) throw InfeasibleConfigError("empty outcome-mean range");
    if (cfg.mode == MonotonicityMode::pair_only &&
        (cfg.pair_high >= K || cfg.pair_low >= K || cfg.pair_high == cfg.pair_low))
        throw InfeasibleConfigError("pair_only: invalid pair indices");

    std::vector<ResponseType> pool = allowed_patterns(cfg);

    // Groups from each of which at least one pattern must be present.
    std::vector<std::vector<std::size_t>> required;
    auto group = [&](auto pred) {
        std::vector<std::size_t> g;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (pred(pool[i])) g.push_back(i);
        if (g.empty())
            throw InfeasibleConfigError("mode " + to_string(cfg.mode) + " infeasible on a " +
                                        std::to_string(K) + "-point grid");
        required.push_back(std::move(g));
    };
    switch (cfg.mode) {
        case MonotonicityMode::extreme_pair_only:
            group([](const ResponseType& s) { return !detail::bottom_ok(s); });
            group([](const ResponseType& s) { return !detail::top_ok(s); });
            break;
        case MonotonicityMode::bottom_anchored_only:
            group([](const ResponseType& s) { return !detail::top_ok(s); });
            break;
        case MonotonicityMode::top_anchored_only:
            group([](const ResponseType& s) { return !detail::bottom_ok(s); });
            break;
        case MonotonicityMode::pair_only:
            group([](const ResponseType& s) { return !s.is_threshold(); });
            break;
        default: break;
    }
    if (cfg.strata < required.size() || cfg.strata > pool.size())
        throw InfeasibleConfigError("cannot place " + std::to_string(cfg.strata) +
                                    " distinct strata in mode " + to_string(cfg.mode));

    std::mt19937_64 rng(mix_seed(seed));
    std::uniform_real_distribution<double> mean_dist(cfg.mean_low, cfg.mean_high);
    std::gamma_distribution<double> mass_dist(1.0, 1.0);
    std::gamma_distribution<double> weight_dist(2.0, 1.0);

    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        std::vector<char> used(pool.size(), 0);
        std::vector<std::size_t> chosen;
        for (const auto& g : required) {
            std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
            const std::size_t idx = g[pick(rng)];
            if (!used[idx]) {
                used[idx] = 1;
                chosen.push_back(idx);
            }
        }
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!used[i]) rest.push_back(i);
        std::shuffle(rest.begin(), rest.end(), rng);
        for (std::size_t i = 0; chosen.size() < cfg.strata && i < rest.size(); ++i)
            chosen.push_back(rest[i]);

        std::vector<double> masses(chosen.size());
        double total = 0.0;
        for (auto& m : masses) total += (m = mass_dist(rng) + 1e-3);
        for (auto& m : masses) m /= total;

        std::vector<double> weights(K);
        double wtotal = 0.0;
        for (auto& w : weights) wtotal += (w = weight_dist(rng) + 1e-2);
        for (auto& w : weights) w /= wtotal;

        std::vector<StratumSpec> strata;
        strata.reserve(chosen.size());
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            StratumSpec s;
            s.response = pool[chosen[i]];
            s.mass = masses[i];
            s.mu0 = mean_dist(rng);
            s.mu1 = mean_dist(rng);
            s.sd0 = s.sd1 = cfg.noise_sd;
            strata.push_back(std::move(s));
        }
        // Fix rounding so the masses sum to one as tightly as possible.
        double sum = 0.0;
        for (const auto& s : strata) sum += s.mass;
        strata.front().mass += 1.0 - sum;
        if (strata.front().mass < 0.0) continue;

        std::vector<double> p(K, 0.0);
        for (std::size_t k = 0; k < K; ++k)
            for (const auto& s : strata) p[k] += s.mass * s.response[k];
        // Unrestricted draws may come in any order; the others are defined on the sorted grid.
        if (cfg.mode == MonotonicityMode::unrestricted) std::sort(p.begin(), p.end());
        bool increasing = true;
        for (std::size_t k = 1; k < K; ++k)
            if (p[k] - p[k - 1] < cfg.min_propensity_gap) increasing = false;
        if (!increasing) continue;

        std::vector<double> raw(K);
        std::iota(raw.begin(), raw.end(), 1.0);
        return normalize(Population(InstrumentGrid(std::move(raw), std::move(weights)),
                                    std::move(strata), false));
    }
    throw InfeasibleConfigError("no population with strictly increasing propensities found in " +
                                std::to_string(cfg.max_attempts) + " attempts (mode " +
                                to_string(cfg.mode) + ")");
}

}  // namespace mte
