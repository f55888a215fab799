#include "shred/config.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace shred;

namespace {

const char* kSample = R"ini(
# experiment setup
[surrogate]
nx = 32
ny = 64
tau_list = 1, 2.5, 10   # seconds

[train]
learning_rate = 1e-3
max_epochs = 200
use_dropout = true
name = baseline run
)ini";

}  // namespace

TEST_CASE("parsing sections, comments, and typed values") {
    const Config cfg = Config::parse_string(kSample);
    REQUIRE(cfg.get_int("surrogate.nx") == 32);
    REQUIRE(cfg.get_int("surrogate.ny") == 64);
    REQUIRE(cfg.get_double("train.learning_rate") == 1e-3);
    REQUIRE(cfg.get_bool("train.use_dropout"));
    REQUIRE(cfg.get_string("train.name") == "baseline run");
    REQUIRE(cfg.get_double_list("surrogate.tau_list") == std::vector<double>{1.0, 2.5, 10.0});
    REQUIRE(cfg.get_int_list("surrogate.nx") == std::vector<std::int64_t>{32});

    REQUIRE(cfg.has("surrogate.nx"));
    REQUIRE_FALSE(cfg.has("surrogate.nz"));
    REQUIRE(cfg.get_int("surrogate.nz", 7) == 7);
    REQUIRE(cfg.get_double("surrogate.dt", 0.05) == 0.05);
    REQUIRE(cfg.get_string("report.dir", "out") == "out");
    REQUIRE(cfg.get_bool("train.verbose", false) == false);
}

TEST_CASE("parse errors carry the origin and line number") {
    auto expect_message = [](const std::string& text, const std::string& needle) {
        try {
            Config::parse_string(text, "test.ini");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            INFO(e.what());
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_message("[a]\nkey_without_value\n", "test.ini:2");
    expect_message("[unterminated\n", "test.ini:1");
    expect_message("key = 1\n", "outside any [section]");
    expect_message("[a]\n= 3\n", "empty key");
    expect_message("[]\n", "empty section");
}

TEST_CASE("type errors name the offending key") {
    const Config cfg = Config::parse_string("[a]\nx = fast\ny = 1.5\n");
    REQUIRE_THROWS_AS(cfg.get_double("a.x"), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_int("a.y"), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_bool("a.x"), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_string("a.missing"), ConfigError);
    REQUIRE_THROWS_AS(cfg.get_int_list("a.y"), ConfigError);
}

TEST_CASE("overrides replace or add keys") {
    Config cfg = Config::parse_string(kSample);
    cfg.set_override("surrogate.nx=64");
    cfg.set_override("ensemble.members = 10");
    REQUIRE(cfg.get_int("surrogate.nx") == 64);
    REQUIRE(cfg.get_int("ensemble.members") == 10);
    REQUIRE_THROWS_AS(cfg.set_override("no_equals"), ConfigError);
    REQUIRE_THROWS_AS(cfg.set_override("nodot=3"), ConfigError);
}

TEST_CASE("the config hash tracks content, not layout") {
    const Config a = Config::parse_string(kSample);
    const Config b = Config::parse_string(
        "[train]\nname=baseline run\nuse_dropout=true\nmax_epochs=200\nlearning_rate=1e-3\n"
        "[surrogate]\nny=64\ntau_list=1, 2.5, 10\nnx=32\n");
    REQUIRE(a.hash() == b.hash());
    REQUIRE(a.hash_hex() == b.hash_hex());
    REQUIRE(a.hash_hex().size() == 16);

    Config c = a;
    c.set_override("surrogate.nx=33");
    REQUIRE(c.hash() != a.hash());

    // Frozen digest of a canonical one-entry config (FNV-1a over "a.k=v\n").
    const Config tiny = Config::parse_string("[a]\nk = v\n");
    REQUIRE(tiny.hash() == 0x4438349d85ea517cull);
}

TEST_CASE("file parsing reports the path in errors") {
    const auto path = std::filesystem::temp_directory_path() / "shred_cfg_test.ini";
    {
        std::ofstream os(path);
        os << "[a]\nbad line\n";
    }
    try {
        Config::parse_file(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find(path.string() + ":2") != std::string::npos);
    }
    std::filesystem::remove(path);
    REQUIRE_THROWS_AS(Config::parse_file(path), IoError);
}
