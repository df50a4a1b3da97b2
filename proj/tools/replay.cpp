// replay: run a replicated file-system scenario script and print its output.
//
// Exit codes: 0 success, 1 failed assertion or oracle mismatch, 2 script,
// usage, or precondition errors.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "crdtfs/crdtfs.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Replay a replicated file-system scenario"};

    std::string scenario_path;
    std::uint64_t seed_val = 0;
    bool trace = false;
    bool oracle = false;
    std::string dump_format = "tree";

    app.add_option("scenario,--scenario,-s", scenario_path, "scenario script to run")
        ->required();
    auto* seed_opt = app.add_option("--seed", seed_val, "override the script's schedule seed");
    app.add_flag("--trace", trace, "print every local operation and delivery");
    app.add_flag("--oracle", oracle,
                 "run both view evaluation modes in lockstep and compare them");
    app.add_option("--dump-format", dump_format, "dump layout: tree or flat")
        ->check(CLI::IsMember({"tree", "flat"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::ifstream in(scenario_path);
    if (!in) {
        std::cerr << "error: cannot read " << scenario_path << "\n";
        return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();

    crdtfs::Scenario sc;
    try {
        sc = crdtfs::parse_scenario(buf.str());
    } catch (const crdtfs::parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    crdtfs::RunOptions opt;
    if (seed_opt->count() > 0) opt.seed_override = seed_val;
    opt.trace = trace;
    opt.oracle = oracle;
    opt.flat_dump = dump_format == "flat";

    try {
        crdtfs::RunResult res = crdtfs::run_scenario(sc, opt);
        std::cout << res.output;
        return res.exit_code;
    } catch (const crdtfs::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
