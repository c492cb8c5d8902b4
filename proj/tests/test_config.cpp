#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>
#include <string>

#include "fluidnet/config.hpp"

using namespace fluidnet;

namespace {

const char* kPlain = R"(# one-node example
[model]
nodes = 1
horizon = 1
lambda = 1
jobs = exp:1
drain = 1
routing = 1

[target]
a = 1
n = 10 20 40

[stopping]
eps = 0.1
min_runs = 2000

[run]
seed = 42
)";

const char* kModulated = R"([model]
nodes = 1
horizon = 1

[modulation]
states = 2
generator = -2 2  2 -2
initial = 1

[state 1]
lambda = 2
jobs = exp:0.5
drain = 5
routing = 1

[state 2]
lambda = 1
jobs = exp:1
drain = 1
routing = 1

[target]
a = 3
)";

}  // namespace

TEST_CASE("plain config parses") {
    const auto cfg = parse_config_text(kPlain);
    CHECK(!cfg.modulated);
    CHECK(cfg.network.nodes == 1);
    CHECK(cfg.network.lambda == 1.0);
    CHECK(cfg.network.jobs[0].kind == JobLaw::Kind::exponential);
    CHECK(cfg.has_target);
    CHECK(cfg.a(0) == 1.0);
    CHECK(cfg.n_values == std::vector<int>{10, 20, 40});
    CHECK(cfg.stopping.eps == 0.1);
    CHECK(cfg.stopping.min_runs == 2000);
    CHECK(cfg.stopping.critical_value == 1.96);  // default survives
    CHECK(cfg.has_seed);
    CHECK(cfg.seed == 42);
}

TEST_CASE("modulated config parses with 1-based initial state") {
    const auto cfg = parse_config_text(kModulated);
    CHECK(cfg.modulated);
    CHECK(cfg.mod.num_states == 2);
    CHECK(cfg.mod.initial_state == 0);
    CHECK(cfg.mod.generator(0, 1) == 2.0);
    CHECK(cfg.mod.states[0].lambda == 2.0);
    CHECK(cfg.mod.states[1].drain(0) == 1.0);
    CHECK(!cfg.has_seed);
    const auto spec = cfg.as_modulated();
    CHECK(spec.num_states == 2);
}

TEST_CASE("echo is a fixpoint of parse") {
    for (const char* src : {kPlain, kModulated}) {
        const std::string once = echo_config(parse_config_text(src));
        const std::string twice = echo_config(parse_config_text(once));
        CHECK(once == twice);
    }
}

TEST_CASE("config header round-trips through the comment prefix") {
    const auto cfg = parse_config_text(kModulated);
    const std::string header = config_header(cfg, "fluidnet 1.0.0");
    // strip "# " and the version line, reparse
    std::istringstream in(header);
    std::string line, body;
    bool first = true;
    while (std::getline(in, line)) {
        REQUIRE(line.rfind("# ", 0) == 0);
        if (first) {
            CHECK(line == "# version = fluidnet 1.0.0");
            first = false;
            continue;
        }
        body += line.substr(2) + "\n";
    }
    CHECK(echo_config(parse_config_text(body)) == echo_config(cfg));
}

TEST_CASE("job law spellings") {
    const auto cfg = parse_config_text(
        "[model]\nnodes = 3\nhorizon = 1\nlambda = 1\n"
        "jobs = exp:2 det:0.5 zero\ndrain = 1 1 1\n"
        "routing = 1 0 0  0 1 0  0 0 1\n");
    CHECK(cfg.network.jobs[0].kind == JobLaw::Kind::exponential);
    CHECK(cfg.network.jobs[0].param == 2.0);
    CHECK(cfg.network.jobs[1].kind == JobLaw::Kind::deterministic);
    CHECK(cfg.network.jobs[1].param == 0.5);
    CHECK(cfg.network.jobs[2].kind == JobLaw::Kind::zero);
}

TEST_CASE("malformed configs are rejected") {
    // missing required key
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 1\nlambda = 1\n"), ConfigError);
    // unknown key
    CHECK_THROWS_AS(parse_config_text(std::string(kPlain) + "\n[model2]\nfoo = 1\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text(std::string(kPlain) + "\n[stopping]\ntypo = 1\n"),
                    ConfigError);
    // duplicate key
    CHECK_THROWS_AS(
        parse_config_text("[model]\nnodes = 1\nnodes = 2\nhorizon = 1\nlambda = 1\n"
                          "jobs = exp:1\ndrain = 1\nrouting = 1\n"),
        ConfigError);
    // key outside any section
    CHECK_THROWS_AS(parse_config_text("nodes = 1\n"), ConfigError);
    // dimension mismatches
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 2\nhorizon = 1\nlambda = 1\n"
                                      "jobs = exp:1\ndrain = 1 1\nrouting = 0 1 0 1\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 2\nhorizon = 1\nlambda = 1\n"
                                      "jobs = exp:1 zero\ndrain = 1 1\nrouting = 0 1 0\n"),
                    ConfigError);
    // target dimension
    CHECK_THROWS_AS(parse_config_text(std::string(kModulated) + "\n[target]\na = 1 1\n"),
                    ConfigError);
    // model-level invariants surface as ConfigError too
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 1\nhorizon = 1\nlambda = -1\n"
                                      "jobs = exp:1\ndrain = 1\nrouting = 1\n"),
                    ConfigError);
    // bad numbers
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 1\nhorizon = abc\nlambda = 1\n"
                                      "jobs = exp:1\ndrain = 1\nrouting = 1\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text(std::string(kPlain) + "\n[run]\nseed = -1\n"),
                    ConfigError);
    // bad job law
    CHECK_THROWS_AS(parse_config_text("[model]\nnodes = 1\nhorizon = 1\nlambda = 1\n"
                                      "jobs = gamma:1\ndrain = 1\nrouting = 1\n"),
                    ConfigError);
}

TEST_CASE("shipped configs all parse") {
    // relies on ctest running in the build tree next to the source checkout
    for (const char* name :
         {"single_node.cfg", "tandem_downstream.cfg", "tandem_joint.cfg", "modulated_fast.cfg",
          "modulated_slow.cfg", "moments_two_node.cfg"}) {
        const std::string path = std::string(CONFIG_DIR) + "/" + name;
        CHECK_NOTHROW(parse_config_file(path));
    }
}
