#pragma once

// Estimands computable from the observable pair (outcome curve, instrument law).
//
// The LIV curve is the slope of the piecewise-linear interpolant of
// E[Y | Z = u], so every integral below is an exact finite sum over segments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mte/error.hpp"
#include "mte/oracle.hpp"
#include "mte/population.hpp"

namespace mte {

/// Agreement required between integral and closed forms of one estimand.
inline constexpr double kFormAgreementTol = 1e-10;

inline double liv(const OutcomeCurve& curve, double u) {
    return curve.segment_slope(curve.segment_of(u));
}

/// \int_{z_low}^{z_high} LIV(u) du, summed segment by segment.
inline double integral_liv(const OutcomeCurve& curve) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < curve.size(); ++k)
        total += curve.segment_slope(k) * (curve.grid().point(k + 1) - curve.grid().point(k));
    return total;
}

/// \int Pr[Z > u] LIV(u) du. The survival function is constant on each open segment.
inline double integral_survival_weighted_liv(const OutcomeCurve& curve) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < curve.size(); ++k)
        total += curve.grid().survival_after(k) * curve.segment_slope(k) *
                 (curve.grid().point(k + 1) - curve.grid().point(k));
    return total;
}

/// \int Pr[Z < u] LIV(u) du.
inline double integral_cdf_weighted_liv(const OutcomeCurve& curve) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < curve.size(); ++k)
        total += curve.grid().cdf_through(k) * curve.segment_slope(k) *
                 (curve.grid().point(k + 1) - curve.grid().point(k));
    return total;
}

/// E[Y] under the curve's instrument law.
inline double mean_outcome(const OutcomeCurve& curve) {
    double m = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) m += curve.grid().weight(k) * curve.value(k);
    return m;
}

/// Both forms of one estimand.
struct EstimandForms {
    double integral = 0.0;
    double closed = 0.0;
};

namespace detail {

inline void check_agreement(const EstimandForms& f, const char* what) {
    if (!(std::abs(f.integral - f.closed) <= kFormAgreementTol))
        throw std::logic_error(std::string(what) + ": integral form " + std::to_string(f.integral) +
                               " disagrees with closed form " + std::to_string(f.closed));
}

inline double mean_minus_lower(const OutcomeCurve& curve) {
    const double d = curve.grid().mean() - curve.lower();
    if (!(d > kExactTol)) throw PreconditionError("degenerate E[Z]: equals lowest instrument value");
    return d;
}

inline double upper_minus_mean(const OutcomeCurve& curve) {
    const double d = curve.upper() - curve.grid().mean();
    if (!(d > kExactTol)) throw PreconditionError("degenerate E[Z]: equals highest instrument value");
    return d;
}

}  // namespace detail

inline EstimandForms late_forms(const OutcomeCurve& curve) {
    const double width = curve.upper() - curve.lower();
    if (!(width > 0.0)) throw PreconditionError("degenerate instrument support");
    EstimandForms f;
    f.integral = integral_liv(curve) / width;
    f.closed = (curve.value(curve.size() - 1) - curve.value(0)) / width;
    detail::check_agreement(f, "LATE");
    return f;
}

inline EstimandForms latt_forms(const OutcomeCurve& curve) {
    const double d = detail::mean_minus_lower(curve);
    EstimandForms f;
    f.integral = integral_survival_weighted_liv(curve) / d;
    f.closed = (mean_outcome(curve) - curve.value(0)) / d;
    detail::check_agreement(f, "LATT");
    return f;
}

inline EstimandForms latut_forms(const OutcomeCurve& curve) {
    const double d = detail::upper_minus_mean(curve);
    EstimandForms f;
    f.integral = integral_cdf_weighted_liv(curve) / d;
    f.closed = (curve.value(curve.size() - 1) - mean_outcome(curve)) / d;
    detail::check_agreement(f, "LATUT");
    return f;
}

/// (E[Y|Z=z_high] - E[Y|Z=z_low]) / (z_high - z_low).
inline double estimand_late(const OutcomeCurve& curve) { return late_forms(curve).closed; }

/// (E[Y] - E[Y|Z=z_low]) / (E[Z] - z_low).
inline double estimand_latt(const OutcomeCurve& curve) { return latt_forms(curve).closed; }

/// (E[Y|Z=z_high] - E[Y]) / (z_high - E[Z]).
inline double estimand_latut(const OutcomeCurve& curve) { return latut_forms(curve).closed; }

/// Difference quotient between grid indices k1 and k2.
inline double wald(const OutcomeCurve& curve, std::size_t k1, std::size_t k2) {
    if (k1 >= curve.size() || k2 >= curve.size())
        throw PreconditionError("wald: grid index out of range");
    const double dz = curve.grid().point(k1) - curve.grid().point(k2);
    if (k1 == k2 || dz == 0.0) throw PreconditionError("wald: empty pair (equal instrument values)");
    return (curve.value(k1) - curve.value(k2)) / dz;
}

/// Average of LIV over [u_low, u_high].
inline double avg_liv_range(const OutcomeCurve& curve, double u_low, double u_high) {
    if (!(u_low >= curve.lower() && u_high <= curve.upper()))
        throw PreconditionError("avg_liv_range: range outside instrument support");
    if (!(u_low < u_high)) throw PreconditionError("avg_liv_range: inverted or empty range");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
        const double a = std::max(u_low, curve.grid().point(k));
        const double b = std::min(u_high, curve.grid().point(k + 1));
        if (b > a) total += curve.segment_slope(k) * (b - a);
    }
    return total / (u_high - u_low);
}

/// Weighted least-squares polynomial fit; coefficients in increasing degree.
inline std::vector<double> fit_weighted_polynomial(std::span<const double> x,
                                                   std::span<const double> y,
                                                   std::span<const double> w, int degree) {
    const auto n = static_cast<Eigen::Index>(x.size());
    if (degree < 1) throw PreconditionError("polynomial degree must be at least 1");
    if (degree + 1 > n)
        throw PreconditionError("under-determined fit: degree " + std::to_string(degree) +
                                " needs at least " + std::to_string(degree + 1) + " points");
    Eigen::MatrixXd A(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sw = std::sqrt(w[i]);
        double xp = 1.0;
        for (int j = 0; j <= degree; ++j, xp *= x[i]) A(i, j) = sw * xp;
        b(i) = sw * y[i];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    return {c.data(), c.data() + c.size()};
}

/// ATE by extrapolating a weighted polynomial fit of the curve to [0, 1]:
/// f(1) - f(0).
inline double extrapolate_ate(const OutcomeCurve& curve, int degree) {
    const auto coef = fit_weighted_polynomial(curve.grid().points(), curve.values(),
                                              curve.grid().weights(), degree);
    double ate = 0.0;
    for (std::size_t j = 1; j < coef.size(); ++j) ate += coef[j];
    return ate;
}

// ---------------------------------------------------------------------------

/// Every estimand of one outcome curve, with the condition that identifies it.
struct EstimandReport {
    double late_tilde = 0.0;
    double latt_tilde = 0.0;
    double latut_tilde = 0.0;
    double late_wald = 0.0;
    double latt_direct = 0.0;
    double latut_direct = 0.0;
    std::optional<double> ate_extrapolated;
    std::optional<int> extrapolation_degree;

    static constexpr MonotonicityKind late_condition = MonotonicityKind::extreme_pair;
    static constexpr MonotonicityKind latt_condition = MonotonicityKind::bottom_anchored;
    static constexpr MonotonicityKind latut_condition = MonotonicityKind::top_anchored;
};

inline EstimandReport estimand_report(const OutcomeCurve& curve,
                                      std::optional<int> extrapolation_degree = std::nullopt) {
    EstimandReport r;
    const auto late = late_forms(curve);
    const auto latt = latt_forms(curve);
    const auto latut = latut_forms(curve);
    r.late_tilde = late.integral;
    r.late_wald = late.closed;
    r.latt_tilde = latt.integral;
    r.latt_direct = latt.closed;
    r.latut_tilde = latut.integral;
    r.latut_direct = latut.closed;
    if (extrapolation_degree) {
        r.ate_extrapolated = extrapolate_ate(curve, *extrapolation_degree);
        r.extrapolation_degree = extrapolation_degree;
    }
    return r;
}

/// Ordered (name, value) view of a report.
inline std::vector<std::pair<std::string, double>> named_estimands(const EstimandReport& r) {
    std::vector<std::pair<std::string, double>> v{
        {"late_tilde", r.late_tilde},   {"late_wald", r.late_wald},
        {"latt_tilde", r.latt_tilde},   {"latt_direct", r.latt_direct},
        {"latut_tilde", r.latut_tilde}, {"latut_direct", r.latut_direct},
    };
    if (r.ate_extrapolated) v.emplace_back("ate_extrapolated", *r.ate_extrapolated);
    return v;
}

}  // namespace mte
