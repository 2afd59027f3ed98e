#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "epipolicy/epipolicy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitGuard = 4;

struct RunArgs {
    std::string scenario;
    std::string out;
    unsigned threads = 1;
    bool allow_large_search = false;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
    cmd->add_option("scenario", args.scenario, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "output path prefix; defaults to the scenario's `output`");
    cmd->add_option("--threads", args.threads, "search threads")->check(CLI::Range(1u, 1024u));
    cmd->add_flag("--allow-large-search", args.allow_large_search, "lift the search-space guard");
}

int run_command(epipolicy::Mode mode, const RunArgs& args) {
    const auto scenario = epipolicy::load_scenario(args.scenario);
    if (scenario.mode != mode) {
        throw epipolicy::ScenarioError("mode", std::string("scenario is for `") + to_string(scenario.mode) +
                                                   "`, not `" + to_string(mode) + "`");
    }
    epipolicy::RunOptions options;
    if (!args.out.empty()) {
        options.out_prefix = args.out;
    }
    options.threads = args.threads;
    options.allow_large_search = args.allow_large_search;
    const auto report = epipolicy::run(scenario, options);

    std::printf("%s (%s): %s in %.2fs\n", scenario.name.c_str(), to_string(mode), report.feasible ? "ok" : "infeasible",
                report.wall_seconds);
    if (report.search) {
        std::printf("  explored %llu schedules\n", static_cast<unsigned long long>(report.search->explored));
    }
    for (const auto& r : report.regions) {
        std::printf("  %-12s s_final=%s peak_i=%s", r.id.c_str(),
                    epipolicy::format_number(r.trajectory.final_state().s).c_str(),
                    epipolicy::format_number(r.trajectory.peak_infected()).c_str());
        if (r.cost) {
            std::printf(" cost=%s", epipolicy::format_number(r.cost->total).c_str());
        }
        std::printf("\n");
    }
    for (const auto& f : report.files) {
        std::printf("  wrote %s\n", f.string().c_str());
    }
    return report.feasible ? kExitOk : kExitInfeasible;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Policy-controlled SIR simulation, schedule search and hierarchical policy games"};
    app.require_subcommand(1);

    RunArgs sim_args;
    RunArgs opt_args;
    RunArgs game_args;
    add_run_options(app.add_subcommand("simulate", "simulate regions under given schedules"), sim_args);
    add_run_options(app.add_subcommand("optimize", "search the cheapest piecewise-constant schedule"), opt_args);
    add_run_options(app.add_subcommand("game", "play the per-interval hierarchical policy game"), game_args);

    std::string report_a;
    std::string report_b;
    auto* compare = app.add_subcommand("compare", "per-region differences between two reports (b - a)");
    compare->add_option("report_a", report_a)->required()->check(CLI::ExistingFile);
    compare->add_option("report_b", report_b)->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (app.got_subcommand("simulate")) {
            return run_command(epipolicy::Mode::simulate, sim_args);
        }
        if (app.got_subcommand("optimize")) {
            return run_command(epipolicy::Mode::optimize, opt_args);
        }
        if (app.got_subcommand("game")) {
            return run_command(epipolicy::Mode::game, game_args);
        }
        const auto deltas =
            epipolicy::compare_runs(epipolicy::load_report(report_a), epipolicy::load_report(report_b));
        std::cout << epipolicy::compare_json(deltas).dump(2) << '\n';
        return kExitOk;
    } catch (const epipolicy::ScenarioError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const epipolicy::PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const epipolicy::NoEpidemicError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const epipolicy::SearchTooLargeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitGuard;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
