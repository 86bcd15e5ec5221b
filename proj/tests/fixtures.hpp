#pragma once

// Canonical populations and test-only oracles.
//
// JointTable computes every quantity as an expectation over the joint law of
// (stratum, Z), the way the definitions are written, without going through
// the library's per-stratum formulas. Tests compare the two routes.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "mte/mte.hpp"

namespace fixtures {

using mte::InstrumentGrid;
using mte::Population;
using mte::ResponseType;
using mte::StratumSpec;

inline InstrumentGrid three_point_grid() {
    return InstrumentGrid({0.2, 0.5, 0.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
}

inline StratumSpec stratum(ResponseType r, double mass, double mu0, double mu1) {
    return StratumSpec{std::move(r), mass, mu0, mu1, 0.0, 0.0};
}

/// IA-monotone: AT, two threshold complier types, NT.
inline Population p1() {
    return mte::build_population({stratum({1, 1, 1}, 0.2, 1, 3), stratum({0, 1, 1}, 0.3, 1, 2),
                                  stratum({0, 0, 1}, 0.3, 0, 3), stratum({0, 0, 0}, 0.2, 2, 4)},
                                 three_point_grid());
}

/// Extreme-pair and bottom-anchored monotone, IA-violating (stratum 1 = B).
inline Population p2() {
    return mte::build_population({stratum({1, 1, 1}, 0.2, 1, 3), stratum({0, 1, 0}, 0.1, 0, 5),
                                  stratum({0, 1, 1}, 0.2, 1, 2), stratum({0, 0, 1}, 0.4, 0, 3),
                                  stratum({0, 0, 0}, 0.1, 2, 4)},
                                 three_point_grid());
}

inline Population p1n() { return mte::normalize(p1()); }
inline Population p2n() { return mte::normalize(p2()); }

/// Same strata with mu1 = mu0 + b everywhere.
inline Population with_constant_effect(const Population& pop, double b) {
    std::vector<StratumSpec> s(pop.strata().begin(), pop.strata().end());
    for (auto& x : s) x.mu1 = x.mu0 + b;
    return Population(pop.grid(), std::move(s), pop.normalized());
}

/// Applies y -> scale * y + shift to every outcome mean.
inline Population transform_outcomes(const Population& pop, double scale, double shift) {
    std::vector<StratumSpec> s(pop.strata().begin(), pop.strata().end());
    for (auto& x : s) {
        x.mu0 = scale * x.mu0 + shift;
        x.mu1 = scale * x.mu1 + shift;
    }
    return Population(pop.grid(), std::move(s), pop.normalized());
}

/// Threshold-type population on normalized grid `points` whose outcome curve
/// equals f at every grid point, with E[Y(0)] = f(0) and E[Y(1)] = f(1).
///
/// Type j switches into treatment between virtual points t_{j-1} and t_j
/// (t_0 = 0, t_{K+1} = 1) with mass t_j - t_{j-1} and effect equal to the
/// secant slope of f; every type has mu0 = f(0).
inline Population curve_matching_population(const std::vector<double>& points,
                                            const std::vector<double>& weights,
                                            const std::function<double(double)>& f) {
    const std::size_t K = points.size();
    std::vector<double> t{0.0};
    t.insert(t.end(), points.begin(), points.end());
    t.push_back(1.0);
    std::vector<StratumSpec> strata;
    for (std::size_t j = 1; j < t.size(); ++j) {
        std::vector<std::uint8_t> pattern(K);
        // Treated at grid index k (virtual index k+1) iff k + 1 >= j.
        for (std::size_t k = 0; k < K; ++k) pattern[k] = (k + 1 >= j) ? 1 : 0;
        const double mass = t[j] - t[j - 1];
        const double slope = (f(t[j]) - f(t[j - 1])) / mass;
        strata.push_back(StratumSpec{ResponseType(std::move(pattern)), mass, f(0.0),
                                     f(0.0) + slope, 0.0, 0.0});
    }
    return mte::normalize(mte::build_population(std::move(strata), InstrumentGrid(points, weights)));
}

/// Expectations over the joint law of (stratum, Z).
struct JointTable {
    struct Cell {
        std::size_t stratum, k;
        double prob;  // Pr[S = s, Z = z_k]
        int d;
        double y;   // E[Y | S = s, Z = z_k]
        double beta;
        int d_low, d_high;  // s(z_low), s(z_high)
    };
    std::vector<Cell> cells;
    std::vector<double> z;

    explicit JointTable(const Population& pop) {
        const std::size_t K = pop.grid_size();
        for (std::size_t k = 0; k < K; ++k) z.push_back(pop.grid().point(k));
        for (std::size_t i = 0; i < pop.strata().size(); ++i) {
            const auto& s = pop.stratum(i);
            for (std::size_t k = 0; k < K; ++k) {
                const int d = s.response[k];
                cells.push_back({i, k, s.mass * pop.grid().weight(k), d, d ? s.mu1 : s.mu0,
                                 s.mu1 - s.mu0, s.response[0], s.response[K - 1]});
            }
        }
    }

    template <class Pred, class Val>
    double expect(Pred pred, Val val) const {
        double num = 0, den = 0;
        for (const auto& c : cells)
            if (pred(c)) num += c.prob * val(c), den += c.prob;
        return num / den;
    }

    double m(std::size_t k) const {
        return expect([k](const Cell& c) { return c.k == k; }, [](const Cell& c) { return c.y; });
    }
    double p(std::size_t k) const {
        return expect([k](const Cell& c) { return c.k == k; },
                      [](const Cell& c) { return double(c.d); });
    }
    double mean_y() const {
        return expect([](const Cell&) { return true; }, [](const Cell& c) { return c.y; });
    }
    double mean_z() const {
        return expect([](const Cell&) { return true; }, [this](const Cell& c) { return z[c.k]; });
    }
    double late() const {
        return expect([](const Cell& c) { return c.d_low == 0 && c.d_high == 1; },
                      [](const Cell& c) { return c.beta; });
    }
    double latt() const {
        return expect([](const Cell& c) { return c.d_low == 0 && c.d == 1; },
                      [](const Cell& c) { return c.beta; });
    }
    double latut() const {
        return expect([](const Cell& c) { return c.d_high == 1 && c.d == 0; },
                      [](const Cell& c) { return c.beta; });
    }
    double ate() const {
        return expect([](const Cell&) { return true; }, [](const Cell& c) { return c.beta; });
    }
};

/// Midpoint-rule quadrature of \int w(u) LIV(u) du, with LIV from a central
/// difference of the interpolated curve. Approximate: only for cross-checks.
inline double quadrature(const mte::OutcomeCurve& curve, const std::function<double(double)>& w,
                         int steps = 200000) {
    const double a = curve.lower(), b = curve.upper(), h = (b - a) / steps;
    double total = 0;
    for (int i = 0; i < steps; ++i) {
        const double u = a + (i + 0.5) * h;
        const double e = h * 1e-3;
        const double slope = (curve.at(std::min(b, u + e)) - curve.at(std::max(a, u - e))) /
                             (std::min(b, u + e) - std::max(a, u - e));
        total += w(u) * slope * h;
    }
    return total;
}

}  // namespace fixtures
