// mte: batch front end for scenarios, Monte Carlo runs and the theorem harness.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mte/mte.hpp"

namespace {

int report_error(const char* type, const std::string& message) {
    const mte::json err{{"error", {{"type", type}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
    return 2;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const mte::ParseError& e) {
        return report_error("parse_error", e.what());
    } catch (const mte::ValidationError& e) {
        return report_error("validation_error", e.what());
    } catch (const mte::NormalizationError& e) {
        return report_error("normalization_error", e.what());
    } catch (const mte::PreconditionError& e) {
        return report_error("precondition_error", e.what());
    } catch (const mte::Error& e) {
        return report_error("error", e.what());
    } catch (const std::exception& e) {
        return report_error("internal_error", e.what());
    }
}

void print_theorem_table(const mte::json& summary) {
    std::printf("%-5s %-16s %8s %12s %-5s %-13s %6s %10s  %s\n", "part", "condition", "trials",
                "max_gap", "fwd", "converse", "draws", "gap", "witness");
    for (const auto& p : summary["parts"]) {
        const auto& c = p["converse"];
        const bool found = c["status"] == "found";
        std::printf("%-5s %-16s %8zu %12.3e %-5s %-13s %6zu %10s  %s\n",
                    p["part"].get<std::string>().c_str(),
                    p["condition"].get<std::string>().c_str(),
                    p["forward"]["trials"].get<std::size_t>(),
                    p["forward"]["max_gap"].get<double>(),
                    p["forward"]["pass"].get<bool>() ? "pass" : "FAIL",
                    c["status"].get<std::string>().c_str(), c["draws"].get<std::size_t>(),
                    found ? mte::format_number(c["gap"].get<double>()).c_str() : "-",
                    found ? c["witness_file"].get<std::string>().c_str() : "-");
    }
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Response-type IV identification: oracle, estimands, Monte Carlo, theorem checks"};
    app.require_subcommand(1);

    std::string run_path;
    auto* run = app.add_subcommand("run", "Run every task listed in a scenario file");
    run->add_option("scenario", run_path, "Scenario JSON")->required();

    std::string mc_path;
    auto* mc = app.add_subcommand("mc", "Run only the Monte Carlo task of a scenario file");
    mc->add_option("scenario", mc_path, "Scenario JSON")->required();

    std::string modes = "i,ii,iii,iv";
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    std::string out_dir;
    auto* tc = app.add_subcommand("theorem-check", "Randomized check of the identification results");
    tc->add_option("--modes", modes, "Comma-separated parts: i,ii,iii,iv");
    tc->add_option("--trials", trials, "Forward-direction trials per part")->required();
    tc->add_option("--seed", seed, "Base seed")->required();
    tc->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (*run || *mc) {
        const bool mc_only = mc->parsed();
        return guarded([&] {
            const auto sc = mte::load_scenario(mc_only ? mc_path : run_path);
            mte::run_scenario(sc, {.montecarlo_only = mc_only});
            std::cout << "wrote " << (sc.output.dir / (mc_only ? "mc_report.json" : sc.output.report)).string()
                      << "\n";
            return 0;
        });
    }
    return guarded([&] {
        mte::TheoremCheckConfig cfg;
        cfg.parts.clear();
        for (const auto& m : split_commas(modes)) cfg.parts.push_back(mte::parse_theorem_part(m));
        cfg.trials = trials;
        cfg.seed = seed;
        const auto summary = mte::write_theorem_check(cfg, out_dir);
        print_theorem_table(summary);
        for (const auto& p : summary["parts"])
            if (!p["forward"]["pass"].get<bool>()) return 1;
        return 0;
    });
}
