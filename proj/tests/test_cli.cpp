// Exit-code contract of the command-line tool, exercised through the real
// binary (path supplied via NORMGRAD_BIN).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

namespace {

int run_cli(const std::string& args) {
    const char* bin = std::getenv("NORMGRAD_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "NORMGRAD_BIN must point at the CLI binary");
    const std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("verify subcommands exit 0 on passing checks") {
    CHECK(run_cli("verify theorem1 --trials 25 --hmax 32 --seed 7") == 0);
    CHECK(run_cli("verify theorem2 --trials 100 --H 32 --seed 7") == 0);
    CHECK(run_cli("gradcheck --variant detachnorm --H 6 --trials 5") == 0);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("verify theorem1 --bogus-flag") == 2);
    CHECK(run_cli("train") == 2);                              // missing --config
    CHECK(run_cli("train --config missing_config.json") == 2);  // missing file
    CHECK(run_cli("gradcheck --variant rmsnorm") == 2);
}

TEST_CASE("help exits 0") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("train --help") == 0);
}

TEST_CASE("train and compare run a tiny config end to end") {
    namespace fs = std::filesystem;
    fs::create_directories("cli_tmp");
    {
        std::ofstream os("cli_tmp/cfg.json");
        os << R"({
  "variant": "layernorm-simple",
  "depth": 1,
  "width": 8,
  "optimizer": {"type": "adam", "lr": 0.01},
  "epochs": 2,
  "batch_size": 16,
  "seed": 7,
  "dataset": {"kind": "blobs", "classes": 3, "per_class": 20, "dim": 4, "spread": 0.15},
  "eps": 1e-5,
  "out_dir": "cli_tmp/out"
})";
    }
    CHECK(run_cli("train --config cli_tmp/cfg.json") == 0);
    CHECK(fs::exists("cli_tmp/out/run-layernorm-simple.csv"));
    CHECK(fs::exists("cli_tmp/out/run-layernorm-simple.json"));

    CHECK(run_cli("compare --config cli_tmp/cfg.json --variants layernorm,nonorm") == 0);
    CHECK(fs::exists("cli_tmp/out/compare.csv"));
    CHECK(fs::exists("cli_tmp/out/compare.md"));

    CHECK(run_cli("compare --config cli_tmp/cfg.json --variants bogus") == 2);

    std::error_code ec;
    fs::remove_all("cli_tmp", ec);
}
