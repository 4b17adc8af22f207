#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "contract/config.hpp"

using namespace contract;
using Catch::Approx;

namespace {

std::filesystem::path write_temp(const std::string& text) {
    static int counter = 0;
    const auto path = std::filesystem::temp_directory_path() /
                      ("contract_cfg_" + std::to_string(counter++) + ".ini");
    std::ofstream out(path);
    out << text;
    return path;
}

const std::string minimal =
    "theta = 1\nlambda = 0.5\nrho = 0.5\nr = 0.05\nsigma = 1\nM = 1\nT = 1\nm0 = 0\nh0 = 1\n";

} // namespace

TEST_CASE("minimal config applies documented defaults") {
    const auto cfg = load_config(write_temp(minimal));
    REQUIRE(cfg.params.theta == 1.0);
    REQUIRE(cfg.params.effort_cap == 1.0);
    REQUIRE(cfg.grid.n_time == 200);
    REQUIRE(cfg.grid.n_eta == 101);
    REQUIRE(cfg.grid.fixed_point_tol == 1e-10);
    REQUIRE(cfg.grid.root_tol == 1e-12);
    REQUIRE(cfg.grid.k_convention == KEquationConvention::printed);
    REQUIRE(cfg.sim.n_paths == 100000);
    REQUIRE(cfg.sim.n_steps == 1000);
    REQUIRE(cfg.sim.seed == 12345);
    REQUIRE(cfg.sim.v0 == -1.0);
    REQUIRE(cfg.out_dir == "out");
    // derived grid defaults resolve against the model
    const auto grid = cfg.grid.resolved(cfg.params);
    REQUIRE(grid.eta_center == 0.0);
    REQUIRE(grid.eta_halfwidth == Approx(6.0).epsilon(1e-12));
}

TEST_CASE("comments, blank lines, and spacing are tolerated") {
    const auto cfg = load_config(write_temp("# full economy\n\n" + minimal +
                                            "\n  n_time =  50   # coarse\nseed=99\n"));
    REQUIRE(cfg.grid.n_time == 50);
    REQUIRE(cfg.sim.seed == 99);
}

TEST_CASE("constraint violations name the key and line") {
    const auto path = write_temp(
        "theta = 1\nlambda = 1.5\nrho = 0.5\nr = 0.05\nsigma = 1\nM = 1\nT = 1\nm0 = 0\nh0 = 1\n");
    try {
        load_config(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("lambda") != std::string::npos);
        REQUIRE(msg.find("(0,1)") != std::string::npos);
        REQUIRE(msg.find("line 2") != std::string::npos);
        REQUIRE(e.key() == "lambda");
    }
}

TEST_CASE("duplicate keys are rejected naming both lines") {
    const auto path = write_temp(minimal + "seed = 1\n# filler\nseed = 2\n");
    try {
        load_config(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("duplicate key 'seed'") != std::string::npos);
        REQUIRE(msg.find("10") != std::string::npos); // first occurrence
        REQUIRE(msg.find("12") != std::string::npos); // second occurrence
    }
}

TEST_CASE("unknown keys are rejected") {
    REQUIRE_THROWS_AS(load_config(write_temp(minimal + "mystery = 3\n")), ConfigError);
}

TEST_CASE("missing required keys are rejected by name") {
    try {
        load_config(write_temp("theta = 1\nlambda = 0.5\n"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("rho") != std::string::npos);
    }
}

TEST_CASE("malformed values are rejected") {
    REQUIRE_THROWS_AS(load_config(write_temp(minimal + "n_time = twelve\n")), ConfigError);
    REQUIRE_THROWS_AS(load_config(write_temp(minimal + "v0 = 0.5\n")), ConfigError);
    REQUIRE_THROWS_AS(load_config(write_temp(minimal + "k_equation_convention = other\n")),
                      ConfigError);
    REQUIRE_THROWS_AS(load_config(write_temp("theta\n" + minimal)), ConfigError);
}

TEST_CASE("effective-config echo round-trips") {
    auto cfg = load_config(write_temp(minimal + "n_time = 37\nseed = 77\nv0 = -2.5\n"));
    const auto echo_path =
        std::filesystem::temp_directory_path() / "contract_cfg_echo_roundtrip.ini";
    write_effective_config(cfg, echo_path);
    const auto reloaded = load_config(echo_path);
    REQUIRE(reloaded.params.theta == cfg.params.theta);
    REQUIRE(reloaded.params.prior_precision == cfg.params.prior_precision);
    REQUIRE(reloaded.grid.n_time == 37);
    REQUIRE(reloaded.sim.seed == 77);
    REQUIRE(reloaded.sim.v0 == -2.5);
    // the echo pins the derived grid values explicitly
    REQUIRE(reloaded.grid.eta_halfwidth == Approx(6.0).epsilon(1e-12));
}
