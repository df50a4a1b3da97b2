#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "crdtfs/sim.hpp"
#include "support.hpp"

using namespace crdtfs;

namespace {
const HierarchyConfig kSkip{false, OrphanPolicy::skip, true};
const HierarchyConfig kRoot{false, OrphanPolicy::root, true};
const NamingConfig kRename{NamingMethod::rename, Decorator::by_origin_path};

FsOp op(const char* literal) { return parse_op(literal); }
}  // namespace

TEST_CASE("a local operation broadcasts and the cluster converges") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /d dir"));
    c.local("r1", op("add /d/f.txt text"));
    c.local("r1", op("upd /d/f.txt ins 0 h"));

    CHECK(c.pending() == 3);  // three messages queued at r2
    CHECK_FALSE(c.converged());

    std::mt19937_64 rng(1);
    CHECK(c.deliver_all(rng) == 3);
    CHECK(c.pending() == 0);
    std::string report;
    CHECK(c.converged(&report));
    CHECK(c.at(0).dump() == c.at(1).dump());
    CHECK(c.at(0).dump() ==
          "/\n"
          "  d [dir]\n"
          "    f.txt [text] \"h\"\n");
}

TEST_CASE("messages from one sender deliver in send order") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /d dir"));
    c.local("r1", op("add /d/f.txt text"));

    // Only the queue head is offered; the second message waits its turn.
    auto pairs = c.deliverable_pairs();
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0] == DeliveryChoice{1, "r1"});
    c.deliver_choice(pairs[0]);
    pairs = c.deliverable_pairs();
    REQUIRE(pairs.size() == 1);
    c.deliver_choice(pairs[0]);
    CHECK(c.pending() == 0);
    CHECK(c.converged());
}

TEST_CASE("cross-replica dependencies gate delivery") {
    Cluster c(3, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /f.txt text"));    // A
    c.deliver_choice({1, "r1"});             // r2 sees A
    c.local("r2", op("upd /f.txt ins 0 x")); // B, causally after A

    // r1 can take B (it authored A); r3 must take A first.
    auto pairs = c.deliverable_pairs();
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == DeliveryChoice{0, "r2"});
    CHECK(pairs[1] == DeliveryChoice{2, "r1"});

    c.deliver_choice({2, "r1"});
    c.deliver_choice({2, "r2"});
    c.deliver_choice({0, "r2"});
    CHECK(c.pending() == 0);
    CHECK(c.converged());
    CHECK(c.at(2).dump() == "/\n  f.txt [text] \"x\"\n");
}

TEST_CASE("delivering with unmet dependencies breaks the contract") {
    Cluster c(3, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /f.txt text"));
    c.deliver_choice({1, "r1"});
    c.local("r2", op("upd /f.txt ins 0 x"));

    // Forcing r3 to take r2's message before r1's violates causal order.
    CHECK_THROWS_AS(c.deliver_choice({2, "r2"}), contract_error);
}

TEST_CASE("duplicate delivery of one envelope breaks the contract") {
    Replica r1("r1", SetVariant::or_set, kSkip, kRename);
    Replica r2("r2", SetVariant::or_set, kSkip, kRename);
    auto envs = r1.local(op("add /f.txt text"));
    REQUIRE(envs.size() == 1);
    r2.deliver(envs[0]);
    CHECK_THROWS_AS(r2.deliver(envs[0]), contract_error);
}

TEST_CASE("deliver_one reports an empty bus") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    std::mt19937_64 rng(7);
    CHECK_FALSE(c.deliver_one(rng));
    c.local("r1", op("add /d dir"));
    CHECK(c.deliver_one(rng));
    CHECK_FALSE(c.deliver_one(rng));
}

TEST_CASE("convergence reports name the diverging replicas") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /d dir"));
    std::string report;
    CHECK_FALSE(c.converged(&report));
    CHECK(report.find("r1") != std::string::npos);
    CHECK(report.find("r2") != std::string::npos);
}

TEST_CASE("decorated names are live targets for further operations") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /f.txt text"));
    c.local("r2", op("add /f.txt bin"));
    std::mt19937_64 rng(3);
    c.deliver_all(rng);
    CHECK(c.at(0).dump() ==
          "/\n"
          "  f.txt.bin__ [bin] (conflict) \"\"\n"
          "  f.txt.text__ [text] (conflict) \"\"\n");

    // The undecorated path no longer names anything...
    CHECK_THROWS_AS(c.local("r1", op("upd /f.txt ins 0 x")), not_found_error);
    // ...while the decorated paths do.
    c.local("r1", op("upd /f.txt.text__ ins 0 x"));
    c.local("r2", op("rmv /f.txt.bin__"));
    c.deliver_all(rng);
    CHECK(c.converged());
    CHECK(c.at(1).dump() == "/\n  f.txt [text] \"x\"\n");
}

TEST_CASE("choose-resolution drops the losers everywhere") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /f.txt text"));
    c.local("r1", op("upd /f.txt ins 0 h"));
    c.local("r2", op("add /f.txt bin"));
    c.local("r2", op("upd /f.txt write v2"));
    std::mt19937_64 rng(5);
    c.deliver_all(rng);

    c.resolve("r1", Path(), "f.txt", ResolveDecision::choose, Path::parse("/f.txt"),
              FileType::text);
    c.deliver_all(rng);
    CHECK(c.converged());
    CHECK(c.at(1).dump() == "/\n  f.txt [text] \"h\"\n");
}

TEST_CASE("merge-resolution folds text content into the smallest origin") {
    Cluster c(2, SetVariant::or_set, kRoot, kRename);
    c.local("r1", op("add /d1 dir"));
    c.local("r1", op("add /d2 dir"));
    std::mt19937_64 rng(11);
    c.deliver_all(rng);
    c.local("r1", op("add /d1/f.txt text"));
    c.local("r1", op("upd /d1/f.txt ins 0 a"));
    c.local("r2", op("add /d2/f.txt text"));
    c.local("r2", op("upd /d2/f.txt ins 0 b"));
    c.deliver_all(rng);
    c.local("r1", op("rmv /d1"));
    c.local("r2", op("rmv /d2"));
    c.deliver_all(rng);

    CHECK(c.at(0).dump() ==
          "/\n"
          "  f.txt.text__d1 [text] (conflict) \"a\"\n"
          "  f.txt.text__d2 [text] (conflict) \"b\"\n");

    c.resolve("r2", Path(), "f.txt", ResolveDecision::merge, std::nullopt);
    c.deliver_all(rng);
    CHECK(c.converged());
    CHECK(c.at(0).dump() == "/\n  f.txt [text] \"ab\"\n");
}

TEST_CASE("merge-resolution keeps the newest binary value") {
    Cluster c(2, SetVariant::or_set, kRoot, kRename);
    c.local("r1", op("add /d1 dir"));
    c.local("r1", op("add /d2 dir"));
    std::mt19937_64 rng(13);
    c.deliver_all(rng);
    c.local("r1", op("add /d1/f.png bin"));
    c.local("r1", op("upd /d1/f.png write old"));
    c.local("r2", op("add /d2/f.png bin"));
    c.deliver_all(rng);
    c.local("r2", op("upd /d2/f.png write new"));  // causally latest write
    c.deliver_all(rng);
    c.local("r1", op("rmv /d1"));
    c.local("r2", op("rmv /d2"));
    c.deliver_all(rng);

    c.resolve("r1", Path(), "f.png", ResolveDecision::merge, std::nullopt);
    c.deliver_all(rng);
    CHECK(c.converged());
    CHECK(c.at(1).dump() == "/\n  f.png [bin] \"new\"\n");  // winner origin /d1, newest value
}

TEST_CASE("an unresolvable conflict leaves the state untouched") {
    Cluster c(2, SetVariant::g, kSkip, kRename);
    c.local("r1", op("add /f.txt text"));
    c.local("r2", op("add /f.txt bin"));
    std::mt19937_64 rng(17);
    c.deliver_all(rng);

    std::string before = c.at(0).dump();
    CHECK_THROWS_AS(c.resolve("r1", Path(), "f.txt", ResolveDecision::choose,
                              Path::parse("/f.txt"), FileType::text),
                    precondition_error);  // grow-only: losers cannot be removed
    CHECK(c.at(0).dump() == before);
    CHECK(c.pending() == 0);  // nothing was broadcast
    CHECK(c.converged());
}

TEST_CASE("configuration conflicts surface at construction") {
    CHECK_THROWS_AS(Cluster(2, SetVariant::or_set, kRoot,
                            NamingConfig{NamingMethod::avoid, Decorator::by_origin_path}),
                    config_error);
    CHECK_THROWS_AS(Cluster(0, SetVariant::or_set, kSkip, kRename), config_error);
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    CHECK_THROWS_AS(c.local("r9", op("add /d dir")), not_found_error);
}

TEST_CASE("the trace records local operations and deliveries") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    std::vector<std::string> trace;
    c.set_trace(&trace);
    c.local("r1", op("add /d dir"));
    c.deliver_choice({1, "r1"});
    REQUIRE(trace.size() == 2);
    CHECK(trace[0] == "LOCAL r1 add /d dir");
    CHECK(trace[1] == "DELIVER r2 from=r1 deps={} set or add (/d,dir) tag=r1:1");
}

TEST_CASE("exhaustive enumeration finds a single outcome for a conflict") {
    Cluster c(2, SetVariant::or_set, kSkip, kRename);
    c.local("r1", op("add /Toto dir"));
    std::mt19937_64 rng(19);
    c.deliver_all(rng);
    c.local("r1", op("add /Toto/prog.c text"));
    c.local("r2", op("rmv /Toto"));

    EnumerationResult r = enumerate_schedules(c);
    CHECK_FALSE(r.capped);
    CHECK(r.divergence.empty());
    CHECK(r.outcomes.size() == 1);
    CHECK(r.terminal_states >= 1);
    CHECK(r.visited >= 3);

    // Unmemoized walk re-computes each complete order: two independent
    // envelopes (one per receiver) give exactly two orders, same outcome.
    EnumerationResult full = enumerate_schedules(c, 1 << 20, /*memoize=*/false);
    CHECK_FALSE(full.capped);
    CHECK(full.divergence.empty());
    CHECK(full.outcomes == r.outcomes);
    CHECK(full.terminal_states == 2);
}

TEST_CASE("random workloads drain to convergence under every schedule seed") {
    support::GenSettings g;
    g.variant = SetVariant::or_set;
    g.hier = kSkip;
    g.naming = kRename;
    std::mt19937_64 gen_rng(23);
    Cluster c(3, g.variant, g.hier, g.naming);
    support::load_cluster(c, g, gen_rng);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Cluster copy = c;
        std::mt19937_64 rng(seed);
        copy.deliver_all(rng);
        std::string report;
        INFO(report);
        CHECK(copy.converged(&report));
    }
}

TEST_CASE("a threaded drain reaches the same state as a sequential one") {
    support::GenSettings g;
    g.variant = SetVariant::or_set;
    g.hier = kRoot;
    g.naming = kRename;
    std::mt19937_64 gen_rng(29);
    Cluster c(3, g.variant, g.hier, g.naming);
    support::load_cluster(c, g, gen_rng);

    Cluster sequential = c;
    Cluster threaded = c;
    std::mt19937_64 rng(31);
    sequential.deliver_all(rng);
    drain_threaded(threaded);

    CHECK(sequential.converged());
    CHECK(threaded.converged());
    CHECK(sequential.state_fingerprint() == threaded.state_fingerprint());
}
