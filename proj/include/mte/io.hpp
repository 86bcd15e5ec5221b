#pragma once

// JSON and CSV formats for populations, reports, samples and tables.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mte/error.hpp"
#include "mte/estimation.hpp"
#include "mte/montecarlo.hpp"
#include "mte/oracle.hpp"
#include "mte/population.hpp"

namespace mte {

using json = nlohmann::ordered_json;

/// Shortest string that round-trips the double.
inline std::string format_number(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline const json& require_field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw ParseError(path + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(path + "." + key + ": missing field");
    return *it;
}

inline double number_at(const json& j, const std::string& path) {
    if (!j.is_number()) throw ParseError(path + ": expected a number");
    return j.get<double>();
}

inline std::vector<double> numbers_at(const json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path + ": expected an array of numbers");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(number_at(j[i], path + "[" + std::to_string(i) + "]"));
    return v;
}

inline json optional_number(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Population

inline Population population_from_json(const json& j, const std::string& path = "population") {
    const json& g = detail::require_field(j, "grid", path);
    auto points = detail::numbers_at(detail::require_field(g, "points", path + ".grid"),
                                     path + ".grid.points");
    auto weights = detail::numbers_at(detail::require_field(g, "weights", path + ".grid"),
                                      path + ".grid.weights");
    const json& sj = detail::require_field(j, "strata", path);
    if (!sj.is_array()) throw ParseError(path + ".strata: expected an array");
    std::vector<StratumSpec> strata;
    for (std::size_t i = 0; i < sj.size(); ++i) {
        const std::string sp = path + ".strata[" + std::to_string(i) + "]";
        const json& s = sj[i];
        const json& pj = detail::require_field(s, "pattern", sp);
        if (!pj.is_array()) throw ParseError(sp + ".pattern: expected an array of 0/1");
        std::vector<std::uint8_t> pattern;
        for (std::size_t k = 0; k < pj.size(); ++k) {
            if (!pj[k].is_number_integer() || (pj[k] != 0 && pj[k] != 1))
                throw ParseError(sp + ".pattern[" + std::to_string(k) + "]: expected 0 or 1");
            pattern.push_back(static_cast<std::uint8_t>(pj[k].get<int>()));
        }
        StratumSpec st;
        st.response = ResponseType(std::move(pattern));
        st.mass = detail::number_at(detail::require_field(s, "mass", sp), sp + ".mass");
        st.mu0 = detail::number_at(detail::require_field(s, "mu0", sp), sp + ".mu0");
        st.mu1 = detail::number_at(detail::require_field(s, "mu1", sp), sp + ".mu1");
        if (s.contains("sd0")) st.sd0 = detail::number_at(s["sd0"], sp + ".sd0");
        if (s.contains("sd1")) st.sd1 = detail::number_at(s["sd1"], sp + ".sd1");
        strata.push_back(std::move(st));
    }
    try {
        return build_population(std::move(strata),
                                InstrumentGrid(std::move(points), std::move(weights)));
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline json to_json(const Population& pop) {
    json strata = json::array();
    for (const auto& s : pop.strata()) {
        json pattern = json::array();
        for (auto v : s.response.pattern()) pattern.push_back(static_cast<int>(v));
        strata.push_back({{"pattern", pattern},
                          {"mass", s.mass},
                          {"mu0", s.mu0},
                          {"mu1", s.mu1},
                          {"sd0", s.sd0},
                          {"sd1", s.sd1}});
    }
    const auto pv = pop.grid().points();
    const auto wv = pop.grid().weights();
    json points = std::vector<double>(pv.begin(), pv.end());
    json weights = std::vector<double>(wv.begin(), wv.end());
    return {{"grid", {{"points", points}, {"weights", weights}}}, {"strata", strata}};
}

/// Parses text, reporting the line of a syntax error.
inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // Byte offset -> line number.
        std::size_t line = 1;
        for (std::size_t i = 0; i < text.size() && i < e.byte; ++i)
            if (text[i] == '\n') ++line;
        throw ParseError(origin + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path + ": cannot open file for writing");
    out << text;
    if (!out) throw Error(path + ": write failed");
}

inline Population load_population(const std::string& path) {
    return population_from_json(parse_json_text(read_text_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Oracle / estimation reports

inline json to_json(const MonotonicityReport& r) {
    json w = json::array();
    for (const auto& x : r.witnesses) {
        const auto [a, b] = x.indices();
        w.push_back({{"stratum", x.stratum}, {"indices", {a, b}}});
    }
    json j{{"kind", to_string(r.condition.kind)}};
    if (r.condition.kind == MonotonicityKind::pair) {
        j["high"] = r.condition.high;
        j["low"] = r.condition.low;
    }
    j["holds"] = r.holds;
    j["witnesses"] = w;
    return j;
}

inline json to_json(const TrueParams& t) {
    return {{"late", detail::optional_number(t.late)},
            {"latt", detail::optional_number(t.latt)},
            {"latut", detail::optional_number(t.latut)},
            {"ate", t.ate},
            {"complier_mass", t.complier_mass},
            {"treated_complier_mass", t.treated_complier_mass},
            {"untreated_complier_mass", t.untreated_complier_mass}};
}

inline json to_json(const EstimandReport& r) {
    json j{{"late_tilde", r.late_tilde},     {"latt_tilde", r.latt_tilde},
           {"latut_tilde", r.latut_tilde},   {"late_wald", r.late_wald},
           {"latt_direct", r.latt_direct},   {"latut_direct", r.latut_direct},
           {"ate_extrapolated", detail::optional_number(r.ate_extrapolated)}};
    if (r.extrapolation_degree) j["extrapolation_degree"] = *r.extrapolation_degree;
    j["conditions"] = {{"late", to_string(EstimandReport::late_condition)},
                       {"latt", to_string(EstimandReport::latt_condition)},
                       {"latut", to_string(EstimandReport::latut_condition)},
                       {"ate", "none"}};
    return j;
}

/// One row of the estimand comparison table.
struct EstimandComparison {
    std::string name;
    double value = 0.0;
    std::string condition;
    bool condition_holds = false;
    std::optional<double> true_value;
    std::optional<double> gap;  // |value - true_value|
};

/// Pair every estimand in the report with the oracle value it targets.
inline std::vector<EstimandComparison> compare_estimands(const EstimandReport& r,
                                                         const Population& pop) {
    const TrueParams t = true_params(pop);
    const bool extreme = check_monotonicity(pop, MonotonicityKind::extreme_pair).holds;
    const bool bottom = check_monotonicity(pop, MonotonicityKind::bottom_anchored).holds;
    const bool top = check_monotonicity(pop, MonotonicityKind::top_anchored).holds;
    std::vector<EstimandComparison> rows;
    auto add = [&](std::string name, double v, MonotonicityKind cond, bool holds,
                   std::optional<double> truth) {
        EstimandComparison c{std::move(name), v, to_string(cond), holds, truth, std::nullopt};
        if (truth) c.gap = std::abs(v - *truth);
        rows.push_back(std::move(c));
    };
    add("late_tilde", r.late_tilde, EstimandReport::late_condition, extreme, t.late);
    add("late_wald", r.late_wald, EstimandReport::late_condition, extreme, t.late);
    add("latt_tilde", r.latt_tilde, EstimandReport::latt_condition, bottom, t.latt);
    add("latt_direct", r.latt_direct, EstimandReport::latt_condition, bottom, t.latt);
    add("latut_tilde", r.latut_tilde, EstimandReport::latut_condition, top, t.latut);
    add("latut_direct", r.latut_direct, EstimandReport::latut_condition, top, t.latut);
    if (r.ate_extrapolated) {
        EstimandComparison c{"ate_extrapolated", *r.ate_extrapolated, "none", true, t.ate,
                             std::abs(*r.ate_extrapolated - t.ate)};
        rows.push_back(std::move(c));
    }
    return rows;
}

inline json to_json(const EstimandComparison& c) {
    return {{"name", c.name},
            {"value", c.value},
            {"condition", c.condition},
            {"condition_holds", c.condition_holds},
            {"true_value", detail::optional_number(c.true_value)},
            {"gap", detail::optional_number(c.gap)}};
}

inline std::string estimands_csv(const std::vector<EstimandComparison>& rows) {
    std::string out = "name,value,condition,condition_holds,true_value,gap\n";
    for (const auto& c : rows) {
        out += c.name + "," + format_number(c.value) + "," + c.condition + "," +
               (c.condition_holds ? "true" : "false") + "," +
               (c.true_value ? format_number(*c.true_value) : "") + "," +
               (c.gap ? format_number(*c.gap) : "") + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Samples and tables

inline std::string sample_csv(const Sample& s) {
    std::string out = "z,d,y\n";
    out.reserve(out.size() + s.size() * 24);
    for (const auto& r : s.records)
        out += format_number(r.z) + "," + (r.d ? "1" : "0") + "," + format_number(r.y) + "\n";
    return out;
}

/// Reads "z,d,y" rows; every z must equal one of grid_points.
inline Sample sample_from_csv(const std::string& text, std::vector<double> grid_points,
                              const std::string& origin = "sample.csv") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "z,d,y")
        throw ParseError(origin + ":1: expected header \"z,d,y\"");
    Sample s;
    s.grid_points = std::move(grid_points);
    s.source = origin;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 3 fields");
        Record r;
        char* end = nullptr;
        const std::string zs = line.substr(0, c1), ds = line.substr(c1 + 1, c2 - c1 - 1),
                          ys = line.substr(c2 + 1);
        r.z = std::strtod(zs.c_str(), &end);
        if (end == zs.c_str() || *end)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": field z is not a number");
        if (ds != "0" && ds != "1")
            throw ParseError(origin + ":" + std::to_string(lineno) + ": field d must be 0 or 1");
        r.d = ds == "1";
        r.y = std::strtod(ys.c_str(), &end);
        if (end == ys.c_str() || *end)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": field y is not a number");
        auto it = std::find(s.grid_points.begin(), s.grid_points.end(), r.z);
        if (it == s.grid_points.end())
            throw ParseError(origin + ":" + std::to_string(lineno) + ": z = " + zs +
                             " is not a grid point");
        r.index = static_cast<std::size_t>(it - s.grid_points.begin());
        s.records.push_back(r);
    }
    return s;
}

inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
    std::string out = "n,estimand,mean,sd\n";
    for (const auto& r : rows)
        out += std::to_string(r.n) + "," + r.estimand + "," + format_number(r.mean) + "," +
               format_number(r.sd) + "\n";
    return out;
}

inline json to_json(const SplitSampleResult& r) {
    return {{"low_z", r.low_z},
            {"high_z", r.high_z},
            {"propensity_low", r.propensity_low},
            {"propensity_high", r.propensity_high},
            {"mean_low", r.mean_low},
            {"mean_high", r.mean_high},
            {"propensity_gap", r.propensity_gap},
            {"wald", detail::optional_number(r.wald)}};
}

}  // namespace mte
