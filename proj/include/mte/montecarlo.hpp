#pragma once

// Finite-sample realizations of a population and estimators built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mte/error.hpp"
#include "mte/estimation.hpp"
#include "mte/population.hpp"
#include "mte/seed.hpp"

namespace mte {

struct Record {
    std::size_t index = 0;  // grid index of z
    double z = 0.0;
    int d = 0;
    double y = 0.0;
    std::size_t stratum = 0;  // drawn stratum; not observable, kept for contract checks
};

struct Sample {
    std::vector<double> grid_points;
    std::vector<Record> records;
    std::uint64_t seed = 0;
    std::string source;

    std::size_t size() const noexcept { return records.size(); }
};

/// n i.i.d. agents: stratum by mass, z by the instrument law, d = s(z),
/// y = d (mu1 + e1) + (1 - d)(mu0 + e0) with Gaussian noise.
///
/// Works on unnormalized populations too; z is then the raw grid label.
inline Sample sample(const Population& pop, std::size_t n, std::uint64_t seed,
                     std::string source = {}) {
    if (n < 1) throw PreconditionError("sample size must be at least 1");
    std::vector<double> masses;
    for (const auto& s : pop.strata()) masses.push_back(s.mass);
    const auto w = pop.grid().weights();
    std::discrete_distribution<std::size_t> stratum_dist(masses.begin(), masses.end());
    std::discrete_distribution<std::size_t> z_dist(w.begin(), w.end());
    std::normal_distribution<double> noise(0.0, 1.0);
    std::mt19937_64 rng(mix_seed(seed));

    Sample out;
    out.grid_points.assign(pop.grid().points().begin(), pop.grid().points().end());
    out.seed = seed;
    out.source = std::move(source);
    out.records.resize(n);
    for (auto& r : out.records) {
        r.stratum = stratum_dist(rng);
        r.index = z_dist(rng);
        r.z = out.grid_points[r.index];
        const auto& s = pop.stratum(r.stratum);
        r.d = s.response[r.index];
        if (r.d) {
            r.y = s.mu1 + (s.sd1 > 0.0 ? s.sd1 * noise(rng) : 0.0);
        } else {
            r.y = s.mu0 + (s.sd0 > 0.0 ? s.sd0 * noise(rng) : 0.0);
        }
    }
    return out;
}

/// Per-grid-point sufficient statistics.
struct CellStats {
    std::vector<std::size_t> count;
    std::vector<double> sum_d;
    std::vector<double> sum_y;

    explicit CellStats(std::size_t k) : count(k, 0), sum_d(k, 0.0), sum_y(k, 0.0) {}

    void add(const Record& r) {
        ++count[r.index];
        sum_d[r.index] += r.d;
        sum_y[r.index] += r.y;
    }
    std::size_t total() const { return std::accumulate(count.begin(), count.end(), std::size_t{0}); }
};

inline CellStats cell_stats(const Sample& s) {
    CellStats c(s.grid_points.size());
    for (const auto& r : s.records) c.add(r);
    return c;
}

struct EmpiricalCurve {
    OutcomeCurve curve;  // grid: sample grid points with observed frequencies
    std::vector<std::size_t> counts;
    std::vector<double> propensity;  // mean of d per grid point
};

namespace detail {

inline void require_coverage(const CellStats& c, std::span<const double> points, const char* what) {
    for (std::size_t k = 0; k < c.count.size(); ++k)
        if (c.count[k] == 0)
            throw PreconditionError(std::string(what) + ": grid point " +
                                    std::to_string(points[k]) + " (index " + std::to_string(k) +
                                    ") not observed");
}

inline std::vector<double> frequencies(const CellStats& c) {
    const double n = static_cast<double>(c.total());
    std::vector<double> f(c.count.size());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(c.count[k]) / n;
    // Push rounding residue into the largest cell so the law sums to 1.
    const double sum = std::accumulate(f.begin(), f.end(), 0.0);
    auto big = std::max_element(f.begin(), f.end());
    *big += 1.0 - sum;
    return f;
}

inline EstimandReport estimands_from_stats(const CellStats& c, std::span<const double> points,
                                           std::optional<int> degree) {
    require_coverage(c, points, "empirical estimands");
    const std::size_t K = c.count.size();
    std::vector<double> p(K), m(K);
    for (std::size_t k = 0; k < K; ++k) {
        p[k] = c.sum_d[k] / static_cast<double>(c.count[k]);
        m[k] = c.sum_y[k] / static_cast<double>(c.count[k]);
    }
    for (std::size_t k = 1; k < K; ++k)
        if (!(p[k] > p[k - 1]))
            throw PreconditionError("empirical propensities not strictly increasing at grid index " +
                                    std::to_string(k));
    return estimand_report(OutcomeCurve(InstrumentGrid(p, frequencies(c)), std::move(m)), degree);
}

/// Calls fn(i) for i in [0, count). Work is split across hardware threads;
/// results must be written to slot i so aggregation order never depends on
/// scheduling.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += workers) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline EmpiricalCurve empirical_curve(const Sample& s) {
    const CellStats c = cell_stats(s);
    detail::require_coverage(c, s.grid_points, "empirical_curve");
    std::vector<double> m(c.count.size()), p(c.count.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        m[k] = c.sum_y[k] / static_cast<double>(c.count[k]);
        p[k] = c.sum_d[k] / static_cast<double>(c.count[k]);
    }
    return EmpiricalCurve{OutcomeCurve(InstrumentGrid(s.grid_points, detail::frequencies(c)),
                                       std::move(m)),
                          c.count, std::move(p)};
}

/// Closed-form estimands on the empirical curve, with empirical propensities
/// as the normalized instrument values and observed frequencies as its law.
inline EstimandReport empirical_estimands(const Sample& s,
                                          std::optional<int> degree = std::nullopt) {
    return detail::estimands_from_stats(cell_stats(s), s.grid_points, degree);
}

/// Nonparametric bootstrap standard errors over records, one per estimand
/// in named_estimands order. Descriptive only.
inline std::vector<std::pair<std::string, double>> bootstrap_se(const Sample& s,
                                                                std::size_t resamples,
                                                                std::uint64_t seed) {
    if (resamples < 2) throw PreconditionError("bootstrap needs at least 2 resamples");
    const std::size_t n = s.size();
    std::vector<EstimandReport> reps(resamples);
    detail::parallel_for(resamples, [&](std::size_t b) {
        std::mt19937_64 rng(derive_seed(seed, {b}));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        CellStats c(s.grid_points.size());
        for (std::size_t i = 0; i < n; ++i) c.add(s.records[pick(rng)]);
        reps[b] = detail::estimands_from_stats(c, s.grid_points, std::nullopt);
    });
    auto names = named_estimands(reps.front());
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t j = 0; j < names.size(); ++j) {
        std::vector<double> col;
        col.reserve(resamples);
        for (const auto& r : reps) col.push_back(named_estimands(r)[j].second);
        out.emplace_back(names[j].first, detail::sample_sd(col));
    }
    return out;
}

/// Intercept at z0 of a triangular-kernel weighted line fit to (z, y) over
/// records with |z - z0| < bandwidth.
inline double local_linear_mean(const Sample& s, double z0, double bandwidth) {
    if (!(bandwidth > 0.0)) throw PreconditionError("bandwidth must be positive");
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    std::vector<char> seen(s.grid_points.size(), 0);
    for (const auto& r : s.records) {
        const double dz = r.z - z0;
        if (!(std::abs(dz) < bandwidth)) continue;
        const double w = 1.0 - std::abs(dz) / bandwidth;
        s0 += w;
        s1 += w * dz;
        s2 += w * dz * dz;
        t0 += w * r.y;
        t1 += w * dz * r.y;
        if (w > 0.0) seen[r.index] = 1;
    }
    if (std::count(seen.begin(), seen.end(), 1) < 2)
        throw PreconditionError("local_linear_mean: fewer than 2 distinct instrument values within "
                                "bandwidth " + std::to_string(bandwidth) + " of " +
                                std::to_string(z0));
    return (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1);
}

/// max_k p_hat(z_k) - min_k p_hat(z_k) on the full sample.
inline double naive_extreme_gap(const Sample& s) {
    const CellStats c = cell_stats(s);
    detail::require_coverage(c, s.grid_points, "naive_extreme_gap");
    double lo = 1.0, hi = 0.0;
    for (std::size_t k = 0; k < c.count.size(); ++k) {
        const double p = c.sum_d[k] / static_cast<double>(c.count[k]);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    return hi - lo;
}

struct SplitSampleResult {
    std::size_t low_index = 0, high_index = 0;
    double low_z = 0.0, high_z = 0.0;
    double propensity_low = 0.0, propensity_high = 0.0;  // held-out half
    double mean_low = 0.0, mean_high = 0.0;              // held-out half
    double propensity_gap = 0.0;
    std::optional<double> wald;  // undefined when the held-out gap is zero
};

/// Half A picks the instrument values with the lowest and highest empirical
/// propensity; half B estimates propensities and mean outcomes at those values.
/// Ties resolve to the smaller instrument value.
inline SplitSampleResult split_sample_extremes(const Sample& s, std::uint64_t seed) {
    const std::size_t n = s.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t half = n / 2;
    const std::size_t K = s.grid_points.size();
    CellStats a(K), b(K);
    for (std::size_t i = 0; i < n; ++i) (i < half ? a : b).add(s.records[perm[i]]);
    detail::require_coverage(a, s.grid_points, "split_sample_extremes (selection half)");
    detail::require_coverage(b, s.grid_points, "split_sample_extremes (estimation half)");

    SplitSampleResult r;
    double best_lo = 2.0, best_hi = -1.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double p = a.sum_d[k] / static_cast<double>(a.count[k]);
        if (p < best_lo) best_lo = p, r.low_index = k;
        if (p > best_hi) best_hi = p, r.high_index = k;
    }
    auto cell = [&](std::size_t k, double& p, double& m) {
        p = b.sum_d[k] / static_cast<double>(b.count[k]);
        m = b.sum_y[k] / static_cast<double>(b.count[k]);
    };
    cell(r.low_index, r.propensity_low, r.mean_low);
    cell(r.high_index, r.propensity_high, r.mean_high);
    r.low_z = s.grid_points[r.low_index];
    r.high_z = s.grid_points[r.high_index];
    r.propensity_gap = r.propensity_high - r.propensity_low;
    if (r.propensity_gap != 0.0) r.wald = (r.mean_high - r.mean_low) / r.propensity_gap;
    return r;
}

struct ConvergenceRow {
    std::size_t n = 0;
    std::string estimand;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t replications = 0;
};

/// Replicated sampling at each size. Rows per size: mean_y and mean_d always;
/// each estimand only if every replication could compute it.
inline std::vector<ConvergenceRow> convergence_study(const Population& pop,
                                                     std::span<const std::size_t> sizes,
                                                     std::size_t replications,
                                                     std::uint64_t seed) {
    if (replications < 1) throw PreconditionError("convergence_study needs at least one replication");
    std::vector<ConvergenceRow> rows;
    for (std::size_t n : sizes) {
        struct Rep {
            double mean_y = 0, mean_d = 0;
            std::optional<EstimandReport> est;
        };
        std::vector<Rep> reps(replications);
        detail::parallel_for(replications, [&](std::size_t r) {
            const Sample smp = sample(pop, n, derive_seed(seed, {n, r}));
            double sy = 0, sd = 0;
            for (const auto& rec : smp.records) sy += rec.y, sd += rec.d;
            reps[r].mean_y = sy / static_cast<double>(n);
            reps[r].mean_d = sd / static_cast<double>(n);
            try {
                reps[r].est = empirical_estimands(smp);
            } catch (const PreconditionError&) {
                reps[r].est.reset();
            }
        });
        auto summarize = [&](const std::string& name, auto&& get) {
            std::vector<double> v;
            for (const auto& r : reps) v.push_back(get(r));
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            rows.push_back({n, name, mean, detail::sample_sd(v), v.size()});
        };
        summarize("mean_y", [](const Rep& r) { return r.mean_y; });
        summarize("mean_d", [](const Rep& r) { return r.mean_d; });
        const bool all_ok =
            std::all_of(reps.begin(), reps.end(), [](const Rep& r) { return r.est.has_value(); });
        if (!all_ok) continue;
        const auto names = named_estimands(*reps.front().est);
        for (std::size_t j = 0; j < names.size(); ++j)
            summarize(names[j].first,
                      [j](const Rep& r) { return named_estimands(*r.est)[j].second; });
    }
    return rows;
}

}  // namespace mte
