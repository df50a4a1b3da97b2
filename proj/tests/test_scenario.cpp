#include <catch2/catch_amalgamated.hpp>

#include "crdtfs/scenario.hpp"
#include "scenario_expectations.hpp"

using namespace crdtfs;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("an empty script yields the default configuration") {
    Scenario sc = parse_scenario("");
    CHECK(sc.replicas == 2);
    CHECK(sc.variant == SetVariant::or_set);
    CHECK(sc.hier.policy == OrphanPolicy::skip);
    CHECK_FALSE(sc.hier.leaf_only);
    CHECK(sc.hier.incremental);
    CHECK(sc.naming.method == NamingMethod::rename);
    CHECK(sc.naming.decorator == Decorator::by_origin_path);
    CHECK(sc.seed == 0);
    CHECK(sc.cmds.empty());
}

TEST_CASE("configuration directives set every knob") {
    Scenario sc = parse_scenario(
        "# header comment\n"
        "replicas 3\n"
        "set lww\n"
        "policy compact\n"
        "eval non-incremental\n"
        "naming rename by-algo\n"
        "seed 42\n"
        "\n"
        "local r3 add /a.txt text\n"
        "resolve r1 / a.txt choose /a.txt text\n"
        "resolve r2 /d f.c merge\n"
        "deliver 2\n"
        "deliver all\n"
        "sync\n"
        "dump r2\n"
        "assert-converged\n");
    CHECK(sc.replicas == 3);
    CHECK(sc.variant == SetVariant::lww);
    CHECK(sc.hier.policy == OrphanPolicy::compact);
    CHECK_FALSE(sc.hier.incremental);
    CHECK(sc.naming.decorator == Decorator::by_type_algorithm);
    CHECK(sc.seed == 42);
    REQUIRE(sc.cmds.size() == 8);

    const ScenarioCmd& lo = sc.cmds[0];
    CHECK(lo.kind == ScenarioCmd::Kind::local);
    CHECK(lo.rid == "r3");
    CHECK(render_op(*lo.op) == "add /a.txt text");
    CHECK(lo.line == 9);

    const ScenarioCmd& ch = sc.cmds[1];
    CHECK(ch.kind == ScenarioCmd::Kind::resolve);
    CHECK(ch.decision == ResolveDecision::choose);
    CHECK(ch.dir.is_root());
    CHECK(ch.name == "a.txt");
    REQUIRE(ch.origin);
    CHECK(ch.origin->render() == "/a.txt");
    REQUIRE(ch.chosen_type);
    CHECK(*ch.chosen_type == FileType::text);

    const ScenarioCmd& mg = sc.cmds[2];
    CHECK(mg.decision == ResolveDecision::merge);
    CHECK(mg.dir.render() == "/d");
    CHECK_FALSE(mg.origin);

    CHECK(sc.cmds[3].count == 2);
    CHECK_FALSE(sc.cmds[3].all);
    CHECK(sc.cmds[4].all);
    CHECK(sc.cmds[5].kind == ScenarioCmd::Kind::sync);
    CHECK(sc.cmds[6].kind == ScenarioCmd::Kind::dump);
    CHECK(sc.cmds[6].rid == "r2");
    CHECK(sc.cmds[7].kind == ScenarioCmd::Kind::assert_converged);
}

TEST_CASE("leaf-only is a standalone flag") {
    Scenario sc = parse_scenario("leaf-only\n");
    CHECK(sc.hier.leaf_only);
}

TEST_CASE("a write payload keeps its spaces") {
    Scenario sc = parse_scenario("local r1 upd /b.png write two words\n");
    REQUIRE(sc.cmds.size() == 1);
    CHECK(render_op(*sc.cmds[0].op) == "upd /b.png write two words");
}

TEST_CASE("configuration after the first command is rejected") {
    CHECK_THROWS_WITH(parse_scenario("local r1 add /d dir\nreplicas 3\n"),
                      ContainsSubstring("line 2") &&
                          ContainsSubstring("configuration must precede commands"));
}

TEST_CASE("parse errors carry the offending line number") {
    CHECK_THROWS_WITH(parse_scenario("\n# c\nfrobnicate\n"),
                      ContainsSubstring("line 3") && ContainsSubstring("frobnicate"));
    CHECK_THROWS_WITH(parse_scenario("deliver soon\n"), ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_scenario("replicas 0\n"), ContainsSubstring("between 1 and 16"));
    CHECK_THROWS_WITH(parse_scenario("replicas 17\n"), ContainsSubstring("between 1 and 16"));
    CHECK_THROWS_WITH(parse_scenario("set xyz\n"), ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_scenario("local r3 add /d dir\n"),
                      ContainsSubstring("unknown replica 'r3'"));
    CHECK_THROWS_WITH(parse_scenario("local r0 add /d dir\n"),
                      ContainsSubstring("unknown replica 'r0'"));
    CHECK_THROWS_AS(parse_scenario("local r1 add / dir\n"), parse_error);
    CHECK_THROWS_WITH(parse_scenario("local r1 add relative dir\n"), ContainsSubstring("line 1"));
    CHECK_THROWS_WITH(parse_scenario("resolve r1 / f.txt pick /f.txt\n"),
                      ContainsSubstring("'choose' or 'merge'"));
    CHECK_THROWS_WITH(parse_scenario("resolve r1 / f.txt merge extra\n"),
                      ContainsSubstring("usage"));
}

TEST_CASE("a straight-line script runs to convergence") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "sync\n"
        "dump r2\n"
        "assert-converged\n");
    RunResult r = run_scenario(sc);
    CHECK(r.exit_code == 0);
    CHECK(r.output ==
          "-- r2 --\n"
          "/\n"
          "  d [dir]\n"
          "converged\n");
}

TEST_CASE("flat dumps list full displayed paths") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "local r1 add /d/f.txt text\n"
        "sync\n"
        "dump r2\n");
    RunOptions opt;
    opt.flat_dump = true;
    RunResult r = run_scenario(sc, opt);
    CHECK(r.exit_code == 0);
    CHECK(r.output ==
          "-- r2 --\n"
          "/ [dir]\n"
          "/d [dir]\n"
          "/d/f.txt [text] \"\"\n");
}

TEST_CASE("over-delivering is a script error") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "deliver 2\n");
    RunResult r = run_scenario(sc);
    CHECK(r.exit_code == 2);
    CHECK(r.output == "error line 2: nothing left to deliver\n");
}

TEST_CASE("a refused operation reports its line and stops") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "local r1 rmv /nope\n"
        "dump r1\n");
    RunResult r = run_scenario(sc);
    CHECK(r.exit_code == 2);
    CHECK_THAT(r.output, ContainsSubstring("error line 2: "));
    CHECK_THAT(r.output, !ContainsSubstring("-- r1 --"));
}

TEST_CASE("assert-converged fails loudly on divergence") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "assert-converged\n");
    RunResult r = run_scenario(sc);
    CHECK(r.exit_code == 1);
    CHECK_THAT(r.output, ContainsSubstring("assert-converged failed at line 2"));
}

TEST_CASE("the oracle mode runs both evaluators in lockstep") {
    Scenario sc = parse_scenario(
        "policy reappear\n"
        "local r1 add /d dir\n"
        "local r1 add /d/f.txt text\n"
        "sync\n"
        "local r2 rmv /d\n"
        "sync\n"
        "dump r1\n"
        "assert-converged\n");
    RunOptions opt;
    opt.oracle = true;
    RunResult r = run_scenario(sc, opt);
    CHECK(r.exit_code == 0);
    CHECK_THAT(r.output, ContainsSubstring("converged\noracle: match\n"));
}

TEST_CASE("the trace interleaves with command output in order") {
    Scenario sc = parse_scenario(
        "local r1 add /d dir\n"
        "sync\n"
        "dump r2\n");
    RunOptions opt;
    opt.trace = true;
    RunResult r = run_scenario(sc, opt);
    CHECK(r.exit_code == 0);
    CHECK(r.output ==
          "LOCAL r1 add /d dir\n"
          "DELIVER r2 from=r1 deps={} set or add (/d,dir) tag=r1:1\n"
          "-- r2 --\n"
          "/\n"
          "  d [dir]\n");
}

TEST_CASE("replays are deterministic for a fixed seed") {
    Scenario sc = parse_scenario(
        "replicas 3\n"
        "seed 9\n"
        "local r1 add /a dir\n"
        "local r2 add /b dir\n"
        "local r3 add /c.txt text\n"
        "deliver 4\n"
        "dump r1\n"
        "dump r2\n"
        "dump r3\n"
        "sync\n"
        "assert-converged\n");
    RunResult first = run_scenario(sc);
    RunResult second = run_scenario(sc);
    CHECK(first.exit_code == 0);
    CHECK(first.output == second.output);

    RunOptions opt;
    opt.seed_override = 10;  // a different schedule may dump mid-flight states
    RunResult third = run_scenario(sc, opt);
    CHECK(third.exit_code == 0);  // but must still converge
}

TEST_CASE("every bundled scenario replays to its expected output") {
    for (const auto& [file, expected] : support::scenario_expectations()) {
        DYNAMIC_SECTION(file) {
            Scenario sc = parse_scenario(support::read_file(support::scenario_dir() + "/" + file));
            RunResult r = run_scenario(sc);
            CHECK(r.exit_code == 0);
            CHECK(r.output == expected);

            RunOptions opt;
            opt.oracle = true;
            RunResult o = run_scenario(sc, opt);
            CHECK(o.exit_code == 0);
            CHECK(o.output == expected + "oracle: match\n");
        }
    }
}
