#include <doctest.h>

#include <set>
#include <sstream>

#include "maskforge/config.hpp"
#include "maskforge/errors.hpp"

using namespace maskforge;

namespace {

std::string nifti_block() {
    return "source=nifti\n"
           "data_dir=/tmp/somewhere\n"
           "label.Myo=205\nlabel.LA=420\nlabel.LV=500\nlabel.RA=550\n"
           "label.RV=600\nlabel.Ao=820\nlabel.PA=850\n";
}

}  // namespace

TEST_CASE("defaults carry the published profile") {
    RunConfig cfg;
    CHECK(cfg.iterations == 100000);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.lambda == 0.012);
    CHECK(cfg.patch_size == 32);
    CHECK(cfg.image_size == 256);
    CHECK(cfg.depth == 7);
    CHECK(cfg.base_channels == 64);
    CHECK(cfg.channel_cap == 512);
    CHECK(cfg.d_layers == 5);
    CHECK(cfg.ema_decay == 0.99);
    CHECK(cfg.loss_mode == "lse");
    CHECK(cfg.source == "phantom");
    CHECK(cfg.exclude_empty);
    CHECK(cfg.milestones == std::vector<int64_t>{0, 10000, 25000, 50000, 75000, 100000});
    CHECK_NOTHROW(cfg.validate());

    const std::string echo = echo_config(cfg);
    CHECK(echo.find("lr=0.00013\n") != std::string::npos);
    CHECK(echo.find("lambda=0.012\n") != std::string::npos);
    CHECK(echo.find("milestones=0,10000,25000,50000,75000,100000\n") != std::string::npos);
    CHECK(echo.find("phantom_count=200\n") != std::string::npos);
    CHECK(echo.find("data_dir") == std::string::npos);  // nifti-only keys stay hidden
}

TEST_CASE("config text parses with comments and whitespace") {
    const RunConfig cfg = parse_config(
        "# a comment line\n"
        "\n"
        "iterations = 500   # trailing comment\n"
        "  batch_size=4\n"
        "lr=0.001\n"
        "milestones=0, 100 ,500\n"
        "freeze_discriminator=true\n"
        "exclude_empty=false\n"
        "seed=99\n");
    CHECK(cfg.iterations == 500);
    CHECK(cfg.batch_size == 4);
    CHECK(cfg.lr == 0.001);
    CHECK(cfg.milestones == std::vector<int64_t>{0, 100, 500});
    CHECK(cfg.freeze_discriminator);
    CHECK(!cfg.exclude_empty);
    CHECK(cfg.seed == 99);
    // untouched keys keep defaults
    CHECK(cfg.depth == 7);

    // later lines override earlier ones
    CHECK(parse_config("lr=0.001\nlr=0.002\n").lr == 0.002);
}

TEST_CASE("parse errors carry the line number") {
    try {
        parse_config("iterations=10\nbatch_size=4\n\nbogus_key=1\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("config file line 4") != std::string::npos);
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("just a line without equals\n"), DataError);
    CHECK_THROWS_AS(parse_config("=value\n"), DataError);
    CHECK_THROWS_AS(parse_config("iterations=ten\n"), DataError);
    CHECK_THROWS_AS(parse_config("lr=fast\n"), DataError);
    CHECK_THROWS_AS(parse_config("exclude_empty=maybe\n"), DataError);
    CHECK_THROWS_AS(parse_config("batch_size=99999999999\n"), DataError);
}

TEST_CASE("label keys are validated against the structure table") {
    const RunConfig cfg = parse_config("label.Myo=205\nlabel.PA=850\n");
    CHECK(cfg.labels.at("Myo") == 205);
    CHECK(cfg.labels.at("PA") == 850);
    CHECK_THROWS_AS(parse_config("label.Bogus=3\n"), DataError);
    CHECK_THROWS_AS(parse_config("label.Myo=notanint\n"), DataError);
}

TEST_CASE("command line overrides beat the file") {
    const RunConfig cfg =
        resolve_config("batch_size=8\nlr=0.5\n", {"batch_size=4", "seed=123"});
    CHECK(cfg.batch_size == 4);
    CHECK(cfg.lr == 0.5);
    CHECK(cfg.seed == 123);

    CHECK_THROWS_AS(resolve_config("", {"no_equals_here"}), DataError);
    try {
        resolve_config("", {"bogus=1"});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("command line") != std::string::npos);
    }
    // resolve validates the final result
    CHECK_THROWS_AS(resolve_config("lr=-1\n", {}), ContractError);
}

TEST_CASE("validation rejects out-of-contract values") {
    auto expect_invalid = [](const std::string& text) {
        RunConfig cfg = parse_config(text);
        CHECK_THROWS(cfg.validate());
    };
    expect_invalid("iterations=0\n");
    expect_invalid("batch_size=0\n");
    expect_invalid("lambda=-0.1\n");
    expect_invalid("patch_size=1\n");
    expect_invalid("image_size=4\n");
    expect_invalid("ema_decay=1\n");
    expect_invalid("loss_mode=hinge\n");
    expect_invalid("grid_samples=20\n");  // exceeds default holdout 16
    expect_invalid("milestones=200000\n");
    expect_invalid("source=csv\n");
    expect_invalid("phantom_count=10\n");  // must exceed holdout
    expect_invalid("base_channels=128\nchannel_cap=64\n");
}

TEST_CASE("nifti source demands its inputs") {
    CHECK_THROWS_AS(parse_config("source=nifti\n").validate(), DataError);
    CHECK_THROWS_AS(parse_config("source=nifti\ndata_dir=/tmp/x\n").validate(), DataError);
    CHECK_NOTHROW(parse_config(nifti_block()).validate());
    // colliding label values
    RunConfig collide = parse_config(nifti_block());
    collide.labels["LA"] = 205;
    CHECK_THROWS_AS(collide.validate(), ContractError);
    RunConfig blank_sel = parse_config(nifti_block() + "selection=,\n");
    CHECK_THROWS_AS(blank_sel.validate(), ContractError);
}

TEST_CASE("echo lists every effective key exactly once and round-trips") {
    for (const std::string& text : {std::string(""), nifti_block() + "exclude_empty=false\n"}) {
        const RunConfig cfg = parse_config(text);
        const std::string echo = echo_config(cfg);

        std::set<std::string> keys;
        std::istringstream in(echo);
        std::string line;
        size_t lines = 0;
        while (std::getline(in, line)) {
            ++lines;
            const auto eq = line.find('=');
            REQUIRE(eq != std::string::npos);
            CHECK(keys.insert(line.substr(0, eq)).second);  // unique
        }
        CHECK(keys.size() == lines);

        // parsing the echo reproduces the same effective config
        const RunConfig back = parse_config(echo);
        CHECK(echo_config(back) == echo);
    }
    const std::string nifti_echo = echo_config(parse_config(nifti_block()));
    CHECK(nifti_echo.find("exclude_empty=1\n") != std::string::npos);
    CHECK(nifti_echo.find("label.Myo=205\n") != std::string::npos);
    CHECK(nifti_echo.find("phantom_count") == std::string::npos);
}

TEST_CASE("csv splitting trims and drops empties") {
    CHECK(split_csv("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv("") == std::vector<std::string>{});
    CHECK(split_csv(" , ,") == std::vector<std::string>{});
    CHECK(split_csv("WH") == std::vector<std::string>{"WH"});
}
