#pragma once

// Scenario files: a population plus a list of tasks, run in a fixed order
// (oracle, estimands, extrapolate, montecarlo, theorem-check) and written
// to a JSON report with optional CSV side files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mte/error.hpp"
#include "mte/estimation.hpp"
#include "mte/harness.hpp"
#include "mte/io.hpp"
#include "mte/montecarlo.hpp"
#include "mte/oracle.hpp"
#include "mte/population.hpp"

namespace mte {

inline constexpr int kSchemaVersion = 1;

enum class Task { oracle, estimands, extrapolate, montecarlo, theorem_check };

inline std::string to_string(Task t) {
    switch (t) {
        case Task::oracle: return "oracle";
        case Task::estimands: return "estimands";
        case Task::extrapolate: return "extrapolate";
        case Task::montecarlo: return "montecarlo";
        case Task::theorem_check: return "theorem-check";
    }
    return "";
}

struct MonteCarloSettings {
    std::size_t n = 10000;
    std::size_t bootstrap = 199;
    std::size_t reps = 100;              // convergence-study replications
    std::vector<std::size_t> sizes;      // convergence-study sample sizes; empty = skip
    bool split_sample = false;
};

struct TheoremCheckSettings {
    std::vector<TheoremPart> parts{TheoremPart::i, TheoremPart::ii, TheoremPart::iii,
                                   TheoremPart::iv};
    std::size_t trials = 1000;
    std::size_t converse_budget = 200;
};

struct OutputPaths {
    std::filesystem::path dir;
    std::string report = "report.json";
    std::string estimands_csv = "estimands.csv";
    std::string convergence_csv = "convergence.csv";
    std::optional<std::string> sample_csv;
};

struct Scenario {
    std::string name;
    Population population;
    std::vector<Task> tasks;  // sorted into execution order
    std::optional<std::uint64_t> seed;
    MonteCarloSettings montecarlo;
    TheoremCheckSettings theorem;
    int extrapolation_degree = 2;
    OutputPaths output;

    bool has(Task t) const { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); }
};

namespace detail {

inline std::size_t count_at(const json& j, const std::string& path) {
    if (!j.is_number_integer() || j.get<long long>() < 0)
        throw ParseError(path + ": expected a non-negative integer");
    return j.get<std::size_t>();
}

inline std::string string_at(const json& j, const std::string& path) {
    if (!j.is_string()) throw ParseError(path + ": expected a string");
    return j.get<std::string>();
}

inline Task parse_task(const std::string& s, const std::string& path) {
    if (s == "oracle") return Task::oracle;
    if (s == "estimands") return Task::estimands;
    if (s == "extrapolate") return Task::extrapolate;
    if (s == "montecarlo") return Task::montecarlo;
    if (s == "theorem-check") return Task::theorem_check;
    throw ParseError(path + ": unknown task \"" + s + "\"");
}

}  // namespace detail

/// Relative paths resolve against base_dir (the scenario file's directory).
inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir) {
    namespace fs = std::filesystem;
    if (!j.is_object()) throw ParseError("scenario: expected an object");
    auto pop = [&]() -> Population {
        if (j.contains("population")) return population_from_json(j["population"], "population");
        if (j.contains("population_file")) {
            const fs::path p = base_dir / detail::string_at(j["population_file"], "population_file");
            if (!fs::exists(p)) throw ParseError("population_file: " + p.string() + " does not exist");
            return load_population(p.string());
        }
        throw ParseError("scenario.population: missing field (or population_file)");
    }();
    Scenario s{.name = "",
               .population = std::move(pop),
               .tasks = {},
               .seed = {},
               .montecarlo = {},
               .theorem = {},
               .extrapolation_degree = 2,
               .output = {}};
    if (j.contains("name")) s.name = detail::string_at(j["name"], "name");

    const json& tj = detail::require_field(j, "tasks", "scenario");
    if (!tj.is_array()) throw ParseError("tasks: expected an array");
    for (std::size_t i = 0; i < tj.size(); ++i) {
        const std::string path = "tasks[" + std::to_string(i) + "]";
        const Task t = detail::parse_task(detail::string_at(tj[i], path), path);
        if (!s.has(t)) s.tasks.push_back(t);
    }
    if (s.tasks.empty()) throw ValidationError("tasks: at least one task is required");
    std::sort(s.tasks.begin(), s.tasks.end());

    if (j.contains("seed")) {
        s.seed = detail::count_at(j["seed"], "seed");
    }
    if ((s.has(Task::montecarlo) || s.has(Task::theorem_check)) && !s.seed)
        throw ValidationError("seed: required when montecarlo or theorem-check is requested");

    if (j.contains("extrapolation")) {
        const json& e = j["extrapolation"];
        const auto d = detail::count_at(detail::require_field(e, "degree", "extrapolation"),
                                        "extrapolation.degree");
        s.extrapolation_degree = static_cast<int>(d);
    }
    if (j.contains("montecarlo")) {
        const json& m = j["montecarlo"];
        if (!m.is_object()) throw ParseError("montecarlo: expected an object");
        if (m.contains("n")) s.montecarlo.n = detail::count_at(m["n"], "montecarlo.n");
        if (m.contains("bootstrap"))
            s.montecarlo.bootstrap = detail::count_at(m["bootstrap"], "montecarlo.bootstrap");
        if (m.contains("reps")) s.montecarlo.reps = detail::count_at(m["reps"], "montecarlo.reps");
        if (m.contains("sizes")) {
            if (!m["sizes"].is_array()) throw ParseError("montecarlo.sizes: expected an array");
            for (std::size_t i = 0; i < m["sizes"].size(); ++i)
                s.montecarlo.sizes.push_back(
                    detail::count_at(m["sizes"][i], "montecarlo.sizes[" + std::to_string(i) + "]"));
        }
        if (m.contains("split_sample")) {
            if (!m["split_sample"].is_boolean())
                throw ParseError("montecarlo.split_sample: expected a boolean");
            s.montecarlo.split_sample = m["split_sample"].get<bool>();
        }
    }
    if (s.has(Task::montecarlo) && s.montecarlo.n < 1)
        throw ValidationError("montecarlo.n: must be at least 1");
    if (j.contains("theorem_check")) {
        const json& t = j["theorem_check"];
        if (!t.is_object()) throw ParseError("theorem_check: expected an object");
        if (t.contains("modes")) {
            s.theorem.parts.clear();
            const json& mj = t["modes"];
            if (!mj.is_array()) throw ParseError("theorem_check.modes: expected an array");
            for (std::size_t i = 0; i < mj.size(); ++i)
                s.theorem.parts.push_back(parse_theorem_part(
                    detail::string_at(mj[i], "theorem_check.modes[" + std::to_string(i) + "]")));
        }
        if (t.contains("trials"))
            s.theorem.trials = detail::count_at(t["trials"], "theorem_check.trials");
        if (t.contains("converse_budget"))
            s.theorem.converse_budget =
                detail::count_at(t["converse_budget"], "theorem_check.converse_budget");
    }

    const json& o = detail::require_field(j, "output", "scenario");
    s.output.dir = base_dir / detail::string_at(detail::require_field(o, "dir", "output"), "output.dir");
    if (o.contains("report")) s.output.report = detail::string_at(o["report"], "output.report");
    if (o.contains("estimands_csv"))
        s.output.estimands_csv = detail::string_at(o["estimands_csv"], "output.estimands_csv");
    if (o.contains("convergence_csv"))
        s.output.convergence_csv = detail::string_at(o["convergence_csv"], "output.convergence_csv");
    if (o.contains("sample_csv"))
        s.output.sample_csv = detail::string_at(o["sample_csv"], "output.sample_csv");
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    const json j = parse_json_text(read_text_file(path), path);
    return parse_scenario(j, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Task bodies

inline json oracle_section(const Population& pop) {
    json mono = json::array();
    for (auto k : {MonotonicityKind::ia_full, MonotonicityKind::extreme_pair,
                   MonotonicityKind::bottom_anchored, MonotonicityKind::top_anchored})
        mono.push_back(to_json(check_monotonicity(pop, k)));
    json weights = json::array();
    try {
        const auto lw = latt_weight_decomposition(pop);
        for (std::size_t i = 0; i < lw.weights.size(); ++i)
            weights.push_back({{"stratum", i}, {"weight", lw.weights[i]}, {"effect", lw.effects[i]}});
    } catch (const PreconditionError&) {
        weights = nullptr;
    }
    const auto interior = interior_only_types(pop);
    return {{"true_params", to_json(true_params(pop))},
            {"monotonicity", mono},
            {"latt_weights", weights},
            {"interior_only_types",
             {{"strata", interior.strata},
              {"mass", interior.mass},
              {"mean_effect", detail::optional_number(interior.mean_effect)}}}};
}

inline json theorem_check_json(const TheoremCheckResult& r,
                               const std::vector<std::string>& witness_files) {
    json parts = json::array();
    for (std::size_t i = 0; i < r.parts.size(); ++i) {
        const auto& p = r.parts[i];
        json c{{"status", p.converse == ConverseStatus::found ? "found" : "inconclusive"},
               {"draws", p.converse_draws}};
        if (p.witness) {
            c["seeded"] = p.witness->seeded;
            c["estimand"] = p.witness->estimand;
            c["true_value"] = p.witness->true_value;
            c["gap"] = p.witness->gap;
            if (p.part == TheoremPart::iv) {
                c["pair_high"] = p.witness->pair_high;
                c["pair_low"] = p.witness->pair_low;
            }
            c["witness_file"] = witness_files.at(i);
        }
        parts.push_back({{"part", to_string(p.part)},
                         {"condition", p.condition},
                         {"forward",
                          {{"trials", p.forward_trials},
                           {"max_gap", p.forward_max_gap},
                           {"tolerance", kForwardTol},
                           {"pass", p.forward_pass}}},
                         {"converse", c}});
    }
    return {{"schema_version", kSchemaVersion},
            {"seed", r.seed},
            {"trials", r.trials},
            {"converse_budget", r.converse_budget},
            {"converse_min_gap", kConverseMinGap},
            {"parts", parts}};
}

inline std::string theorem_check_csv(const TheoremCheckResult& r,
                                     const std::vector<std::string>& witness_files) {
    std::string out =
        "part,condition,forward_trials,forward_max_gap,forward_pass,converse_status,converse_draws,"
        "converse_gap,witness_file\n";
    for (std::size_t i = 0; i < r.parts.size(); ++i) {
        const auto& p = r.parts[i];
        out += to_string(p.part) + "," + p.condition + "," + std::to_string(p.forward_trials) + "," +
               format_number(p.forward_max_gap) + "," + (p.forward_pass ? "true" : "false") + "," +
               (p.converse == ConverseStatus::found ? "found" : "inconclusive") + "," +
               std::to_string(p.converse_draws) + "," +
               (p.witness ? format_number(p.witness->gap) : "") + "," + witness_files.at(i) + "\n";
    }
    return out;
}

/// Runs the harness and writes theorem_check.json, theorem_check.csv and one
/// replayable witness population per part that found one.
inline json write_theorem_check(const TheoremCheckConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const TheoremCheckResult r = theorem_check(cfg);
    std::vector<std::string> files(r.parts.size());
    for (std::size_t i = 0; i < r.parts.size(); ++i) {
        if (!r.parts[i].witness) continue;
        files[i] = "witness_part_" + to_string(r.parts[i].part) + ".json";
        write_text_file((dir / files[i]).string(),
                        to_json(r.parts[i].witness->population).dump(2) + "\n");
    }
    const json summary = theorem_check_json(r, files);
    write_text_file((dir / "theorem_check.json").string(), summary.dump(2) + "\n");
    write_text_file((dir / "theorem_check.csv").string(), theorem_check_csv(r, files));
    return summary;
}

inline json montecarlo_section(const Scenario& sc, const Population& pop, bool pop_normalized) {
    const auto& mc = sc.montecarlo;
    const std::uint64_t seed = *sc.seed;
    const Sample smp = sample(pop, mc.n, seed, sc.name);
    namespace fs = std::filesystem;
    if (sc.output.sample_csv)
        write_text_file((sc.output.dir / *sc.output.sample_csv).string(), sample_csv(smp));

    json out{{"n", mc.n}, {"seed", seed}};
    const CellStats cells = cell_stats(smp);
    json per_point = json::array();
    for (std::size_t k = 0; k < cells.count.size(); ++k) {
        const double c = static_cast<double>(cells.count[k]);
        per_point.push_back({{"z", smp.grid_points[k]},
                             {"count", cells.count[k]},
                             {"propensity", c > 0 ? json(cells.sum_d[k] / c) : json(nullptr)},
                             {"mean_y", c > 0 ? json(cells.sum_y[k] / c) : json(nullptr)}});
    }
    out["per_point"] = per_point;

    std::optional<EstimandReport> population_values;
    if (pop_normalized) population_values = estimand_report(outcome_curve(pop));

    try {
        const EstimandReport est = empirical_estimands(smp);
        out["estimands"] = to_json(est);
        if (mc.bootstrap >= 2) {
            const auto se = bootstrap_se(smp, mc.bootstrap, derive_seed(seed, {1}));
            json sej = json::object();
            json zj = json::object();
            const auto values = named_estimands(est);
            const auto truth =
                population_values ? named_estimands(*population_values) : decltype(values){};
            for (std::size_t i = 0; i < se.size(); ++i) {
                sej[se[i].first] = se[i].second;
                if (!truth.empty() && se[i].second > 0.0)
                    zj[se[i].first] = (values[i].second - truth[i].second) / se[i].second;
            }
            out["bootstrap"] = {{"resamples", mc.bootstrap}, {"se", sej}};
            if (!truth.empty()) out["z_scores"] = zj;
        }
    } catch (const PreconditionError& e) {
        out["estimands"] = nullptr;
        out["estimands_error"] = e.what();
    }
    if (population_values) out["population_values"] = to_json(*population_values);
    if (mc.split_sample) {
        auto ss = to_json(split_sample_extremes(smp, derive_seed(seed, {2})));
        ss["naive_gap"] = naive_extreme_gap(smp);
        out["split_sample"] = ss;
    }
    if (!mc.sizes.empty()) {
        const auto rows = convergence_study(pop, mc.sizes, mc.reps, derive_seed(seed, {3}));
        write_text_file((sc.output.dir / sc.output.convergence_csv).string(), convergence_csv(rows));
        json cj = json::array();
        for (const auto& r : rows)
            cj.push_back({{"n", r.n}, {"estimand", r.estimand}, {"mean", r.mean}, {"sd", r.sd}});
        out["convergence"] = {{"replications", mc.reps},
                              {"file", sc.output.convergence_csv},
                              {"rows", cj}};
    }
    return out;
}

struct RunOptions {
    // Run only the montecarlo task regardless of the scenario's task list.
    bool montecarlo_only = false;
};

/// Executes a parsed scenario and writes its report. Returns the report.
inline json run_scenario(const Scenario& sc, RunOptions opts = {}) {
    namespace fs = std::filesystem;
    std::vector<Task> tasks = sc.tasks;
    if (opts.montecarlo_only) {
        if (!sc.seed) throw ValidationError("seed: required when montecarlo is requested");
        tasks = {Task::montecarlo};
    }
    fs::create_directories(sc.output.dir);

    // Montecarlo alone can run on an instrument with no first stage.
    const bool needs_oracle = std::any_of(tasks.begin(), tasks.end(),
                                          [](Task t) { return t != Task::montecarlo; });
    std::optional<Population> normalized;
    try {
        normalized = normalize(sc.population);
    } catch (const NormalizationError&) {
        if (needs_oracle) throw;
    }
    const Population& pop = normalized ? *normalized : sc.population;

    json report{{"schema_version", kSchemaVersion}, {"scenario", sc.name}};
    json tj = json::array();
    for (Task t : tasks) tj.push_back(to_string(t));
    report["tasks"] = tj;
    report["population"] = to_json(pop);
    report["normalized"] = normalized.has_value();

    for (Task t : tasks) {
        switch (t) {
            case Task::oracle: report["oracle"] = oracle_section(pop); break;
            case Task::estimands: {
                const EstimandReport est = estimand_report(outcome_curve(pop));
                const auto rows = compare_estimands(est, pop);
                json cj = json::array();
                for (const auto& r : rows) cj.push_back(to_json(r));
                report["estimands"] = {{"report", to_json(est)}, {"comparisons", cj}};
                write_text_file((sc.output.dir / sc.output.estimands_csv).string(),
                                estimands_csv(rows));
                break;
            }
            case Task::extrapolate: {
                const double ate = extrapolate_ate(outcome_curve(pop), sc.extrapolation_degree);
                const double truth = true_ate(pop);
                report["extrapolation"] = {{"degree", sc.extrapolation_degree},
                                           {"ate_extrapolated", ate},
                                           {"true_ate", truth},
                                           {"gap", std::abs(ate - truth)}};
                break;
            }
            case Task::montecarlo:
                report["montecarlo"] = montecarlo_section(sc, pop, normalized.has_value());
                break;
            case Task::theorem_check: {
                TheoremCheckConfig cfg;
                cfg.parts = sc.theorem.parts;
                cfg.trials = sc.theorem.trials;
                cfg.converse_budget = sc.theorem.converse_budget;
                cfg.seed = *sc.seed;
                cfg.seeded_witnesses = {pop};
                report["theorem_check"] = write_theorem_check(cfg, sc.output.dir);
                break;
            }
        }
    }
    const std::string name = opts.montecarlo_only ? "mc_report.json" : sc.output.report;
    write_text_file((sc.output.dir / name).string(), report.dump(2) + "\n");
    return report;
}

}  // namespace mte
