#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fs_model.hpp"
#include "naming.hpp"
#include "sim.hpp"

namespace crdtfs {

/// One line of a scenario script.
struct ScenarioCmd {
    enum class Kind { local, resolve, deliver, sync, dump, assert_converged };
    Kind kind = Kind::sync;
    std::size_t line = 0;
    std::string rid;                 // local, resolve, dump
    std::optional<FsOp> op;          // local
    Path dir;                        // resolve
    std::string name;                // resolve
    ResolveDecision decision = ResolveDecision::choose;
    std::optional<Path> origin;      // resolve choose
    std::optional<FileType> chosen_type;  // resolve choose, disambiguates same-origin groups
    bool all = false;                // deliver
    std::size_t count = 0;           // deliver
};

/// A parsed scenario: configuration header plus a command list.
///
///   # configuration (before the first command)
///   replicas 2
///   set or                  # g | 2p | lww | c | or
///   policy skip             # skip | reappear | root | compact
///   leaf-only
///   eval incremental        # incremental | non-incremental
///   naming rename by-origin # avoid | rename by-origin | rename by-algo
///   seed 7
///
///   # commands
///   local r1 add /prog.c text
///   local r1 upd /prog.c ins 0 x
///   local r2 rmv /prog.c
///   deliver 3
///   sync
///   dump r1
///   resolve r1 / prog.c choose /prog.c text
///   resolve r1 / prog.c merge
///   assert-converged
struct Scenario {
    std::size_t replicas = 2;
    SetVariant variant = SetVariant::or_set;
    HierarchyConfig hier;
    NamingConfig naming;
    std::uint64_t seed = 0;
    std::vector<ScenarioCmd> cmds;
};

namespace scn_detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

inline std::uint64_t parse_number(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw error("expected a number, got '" + s + "'");
    return std::stoull(s);
}

inline void expect_rid(const std::string& rid, std::size_t replicas) {
    if (rid.size() >= 2 && rid[0] == 'r') {
        std::string num = rid.substr(1);
        if (num.find_first_not_of("0123456789") == std::string::npos) {
            std::uint64_t n = std::stoull(num);
            if (n >= 1 && n <= replicas) return;
        }
    }
    throw error("unknown replica '" + rid + "'");
}

}  // namespace scn_detail

inline Scenario parse_scenario(const std::string& text) {
    using scn_detail::parse_number;
    using scn_detail::tokens;
    using scn_detail::trim;

    Scenario sc;
    bool commands_started = false;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;

    // Raised errors of any kind are line-stamped by the catch at the bottom
    // of the loop, exactly once.
    auto fail = [&](const std::string& what) -> error { return error(what); };

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        auto tks = tokens(line);
        const std::string& head = tks[0];

        auto config_directive = [&](auto&& apply) {
            if (commands_started) throw fail("configuration must precede commands");
            apply();
        };

        try {
            if (head == "replicas") {
                config_directive([&] {
                    if (tks.size() != 2) throw fail("usage: replicas N");
                    sc.replicas = parse_number(tks[1]);
                    if (sc.replicas < 1 || sc.replicas > 16)
                        throw fail("replica count must be between 1 and 16");
                });
            } else if (head == "set") {
                config_directive([&] {
                    if (tks.size() != 2) throw fail("usage: set g|2p|lww|c|or");
                    sc.variant = parse_variant_tag(tks[1]);
                });
            } else if (head == "policy") {
                config_directive([&] {
                    if (tks.size() != 2) throw fail("usage: policy skip|reappear|root|compact");
                    sc.hier.policy = parse_policy_tag(tks[1]);
                });
            } else if (head == "leaf-only") {
                config_directive([&] {
                    if (tks.size() != 1) throw fail("leaf-only takes no arguments");
                    sc.hier.leaf_only = true;
                });
            } else if (head == "eval") {
                config_directive([&] {
                    if (tks.size() != 2 || (tks[1] != "incremental" && tks[1] != "non-incremental"))
                        throw fail("usage: eval incremental|non-incremental");
                    sc.hier.incremental = tks[1] == "incremental";
                });
            } else if (head == "naming") {
                config_directive([&] {
                    if (tks.size() == 2 && tks[1] == "avoid") {
                        sc.naming.method = NamingMethod::avoid;
                    } else if (tks.size() == 3 && tks[1] == "rename" &&
                               (tks[2] == "by-origin" || tks[2] == "by-algo")) {
                        sc.naming.method = NamingMethod::rename;
                        sc.naming.decorator = tks[2] == "by-origin" ? Decorator::by_origin_path
                                                                    : Decorator::by_type_algorithm;
                    } else {
                        throw fail("usage: naming avoid | naming rename by-origin|by-algo");
                    }
                });
            } else if (head == "seed") {
                config_directive([&] {
                    if (tks.size() != 2) throw fail("usage: seed N");
                    sc.seed = parse_number(tks[1]);
                });
            } else if (head == "local") {
                commands_started = true;
                if (tks.size() < 3) throw fail("usage: local rN <operation>");
                scn_detail::expect_rid(tks[1], sc.replicas);
                // The operation literal is the rest of the line verbatim; a
                // write payload may contain spaces.
                std::size_t at = line.find(tks[1]);
                std::string rest = trim(line.substr(at + tks[1].size()));
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::local;
                c.line = line_no;
                c.rid = tks[1];
                c.op = parse_op(rest);
                sc.cmds.push_back(std::move(c));
            } else if (head == "resolve") {
                commands_started = true;
                if (tks.size() < 5) throw fail("usage: resolve rN <dir> <name> choose <origin> | merge");
                scn_detail::expect_rid(tks[1], sc.replicas);
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::resolve;
                c.line = line_no;
                c.rid = tks[1];
                c.dir = Path::parse(tks[2]);
                c.name = tks[3];
                if (tks[4] == "choose") {
                    if (tks.size() != 6 && tks.size() != 7)
                        throw fail("usage: resolve rN <dir> <name> choose <origin> [dir|text|bin]");
                    c.decision = ResolveDecision::choose;
                    c.origin = Path::parse(tks[5]);
                    if (tks.size() == 7) c.chosen_type = parse_type_tag(tks[6]);
                } else if (tks[4] == "merge") {
                    if (tks.size() != 5) throw fail("usage: resolve rN <dir> <name> merge");
                    c.decision = ResolveDecision::merge;
                } else {
                    throw fail("resolve decision must be 'choose' or 'merge'");
                }
                sc.cmds.push_back(std::move(c));
            } else if (head == "deliver") {
                commands_started = true;
                if (tks.size() != 2) throw fail("usage: deliver N|all");
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::deliver;
                c.line = line_no;
                if (tks[1] == "all") {
                    c.all = true;
                } else {
                    c.count = parse_number(tks[1]);
                }
                sc.cmds.push_back(std::move(c));
            } else if (head == "sync") {
                commands_started = true;
                if (tks.size() != 1) throw fail("sync takes no arguments");
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::sync;
                c.line = line_no;
                sc.cmds.push_back(std::move(c));
            } else if (head == "dump") {
                commands_started = true;
                if (tks.size() != 2) throw fail("usage: dump rN");
                scn_detail::expect_rid(tks[1], sc.replicas);
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::dump;
                c.line = line_no;
                c.rid = tks[1];
                sc.cmds.push_back(std::move(c));
            } else if (head == "assert-converged") {
                commands_started = true;
                if (tks.size() != 1) throw fail("assert-converged takes no arguments");
                ScenarioCmd c;
                c.kind = ScenarioCmd::Kind::assert_converged;
                c.line = line_no;
                sc.cmds.push_back(std::move(c));
            } else {
                throw fail("unknown directive '" + head + "'");
            }
        } catch (const error& e) {
            throw parse_error("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return sc;
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

struct RunOptions {
    std::optional<std::uint64_t> seed_override;
    bool trace = false;
    bool oracle = false;  // run both evaluation modes in lockstep and compare
    bool flat_dump = false;
};

struct RunResult {
    int exit_code = 0;   // 0 ok, 1 assertion/oracle failure, 2 script or precondition error
    std::string output;
};

inline RunResult run_scenario(const Scenario& sc, const RunOptions& opt = {}) {
    RunResult res;
    std::uint64_t seed = opt.seed_override.value_or(sc.seed);
    std::mt19937_64 rng(seed);
    std::mt19937_64 shadow_rng(seed);

    Cluster main(sc.replicas, sc.variant, sc.hier, sc.naming);
    std::optional<Cluster> shadow;
    if (opt.oracle) {
        HierarchyConfig flipped = sc.hier;
        flipped.incremental = !flipped.incremental;
        shadow.emplace(sc.replicas, sc.variant, flipped, sc.naming);
    }

    std::vector<std::string> trace;
    if (opt.trace) main.set_trace(&trace);
    auto flush_trace = [&] {
        for (const std::string& t : trace) {
            res.output += t;
            res.output += "\n";
        }
        trace.clear();
    };

    for (const ScenarioCmd& c : sc.cmds) {
        try {
            switch (c.kind) {
                case ScenarioCmd::Kind::local:
                    main.local(c.rid, *c.op);
                    if (shadow) shadow->local(c.rid, *c.op);
                    break;
                case ScenarioCmd::Kind::resolve:
                    main.resolve(c.rid, c.dir, c.name, c.decision, c.origin, c.chosen_type);
                    if (shadow)
                        shadow->resolve(c.rid, c.dir, c.name, c.decision, c.origin, c.chosen_type);
                    break;
                case ScenarioCmd::Kind::deliver:
                    if (c.all) {
                        main.deliver_all(rng);
                        if (shadow) shadow->deliver_all(shadow_rng);
                    } else {
                        for (std::size_t i = 0; i < c.count; ++i) {
                            if (!main.deliver_one(rng)) {
                                flush_trace();
                                res.output += "error line " + std::to_string(c.line) +
                                              ": nothing left to deliver\n";
                                res.exit_code = 2;
                                return res;
                            }
                            if (shadow) shadow->deliver_one(shadow_rng);
                        }
                    }
                    break;
                case ScenarioCmd::Kind::sync:
                    main.deliver_all(rng);
                    if (shadow) shadow->deliver_all(shadow_rng);
                    break;
                case ScenarioCmd::Kind::dump:
                    flush_trace();
                    res.output += "-- " + c.rid + " --\n";
                    res.output += main.by_id(c.rid).dump(opt.flat_dump);
                    break;
                case ScenarioCmd::Kind::assert_converged: {
                    std::string report;
                    if (!main.converged(&report)) {
                        flush_trace();
                        res.output += "assert-converged failed at line " +
                                      std::to_string(c.line) + ":\n" + report;
                        res.exit_code = 1;
                        return res;
                    }
                    flush_trace();
                    res.output += "converged\n";
                    break;
                }
            }
        } catch (const error& e) {
            flush_trace();
            res.output += "error line " + std::to_string(c.line) + ": " + std::string(e.what()) + "\n";
            res.exit_code = 2;
            return res;
        }
        flush_trace();

        if (shadow) {
            for (std::size_t i = 0; i < main.size(); ++i) {
                if (!(main.at(i).fs() == shadow->at(i).fs())) {
                    res.output += "oracle: mismatch at line " + std::to_string(c.line) + " (" +
                                  main.at(i).id() + ")\n";
                    res.output += "-- incremental --\n";
                    HierarchyConfig hc = main.at(i).hierarchy_config();
                    res.output += hc.incremental ? main.at(i).dump() : shadow->at(i).dump();
                    res.output += "-- non-incremental --\n";
                    res.output += hc.incremental ? shadow->at(i).dump() : main.at(i).dump();
                    res.exit_code = 1;
                    return res;
                }
            }
        }
    }
    if (shadow) res.output += "oracle: match\n";
    return res;
}

}  // namespace crdtfs
