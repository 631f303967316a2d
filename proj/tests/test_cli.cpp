#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kBin = SISLAB_BIN;

int run_cmd(const std::string& args, const fs::path& stdout_file = {},
            const fs::path& stderr_file = {}) {
    std::string cmd = kBin + " " + args;
    if (!stdout_file.empty()) cmd += " >" + stdout_file.string();
    if (!stderr_file.empty()) cmd += " 2>" + stderr_file.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::path("cli_scratch") / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    std::string str() const { return dir.string(); }
};

const std::string kParams =
    "--beta 0.5 --gamma 0.2 --b 0.05 --K 1 --sigma 0.1 --I0 0.5";

}  // namespace

TEST_CASE("simulate smoke run writes a trajectory CSV and a manifest") {
    Scratch s("simulate");
    const int rc = run_cmd("simulate " + kParams +
                               " --T 10 --dt 0.001 --scheme sd --seed 42 --out " + s.str(),
                           s.dir / "stdout.txt");
    CHECK(rc == 0);
    REQUIRE(fs::exists(s.dir / "trajectory.csv"));
    const std::string csv = slurp(s.dir / "trajectory.csv");
    CHECK(csv.rfind("t,I,internal,scheme\n", 0) == 0);
    REQUIRE(fs::exists(s.dir / "run_manifest.json"));
    const std::string manifest = slurp(s.dir / "run_manifest.json");
    CHECK(manifest.find("\"master_seed\": 42") != std::string::npos);
    CHECK(manifest.find("\"experiment\": \"simulate\"") != std::string::npos);
}

TEST_CASE("missing I0 exits 3 and names the key") {
    Scratch s("missing_i0");
    const int rc = run_cmd(
        "simulate --beta 0.5 --gamma 0.2 --b 0.05 --K 1 --sigma 0.1 --T 1 --dt 0.01 "
        "--scheme sd --out " + s.str(),
        s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 3);
    CHECK(slurp(s.dir / "err.txt").find("I0") != std::string::npos);
}

TEST_CASE("I0 outside (0,K) exits 3 with the open-interval constraint") {
    Scratch s("bad_i0");
    const int rc = run_cmd("simulate --beta 0.5 --gamma 0.2 --b 0.05 --K 1 --sigma 0.1 "
                           "--I0 1.5 --T 1 --dt 0.01 --scheme sd --out " + s.str(),
                           s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 3);
    const std::string err = slurp(s.dir / "err.txt");
    CHECK(err.find("I0") != std::string::npos);
    CHECK(err.find("(0,K)") != std::string::npos);
}

TEST_CASE("unknown flag exits 2") {
    Scratch s("unknown_flag");
    const int rc = run_cmd("simulate " + kParams + " --T 1 --dt 0.01 --scheme sd --frobnicate 3",
                           s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 2);
}

TEST_CASE("unknown config key exits 2 and names the key") {
    Scratch s("unknown_key");
    const fs::path cfg = s.dir / "config.json";
    std::ofstream(cfg) << R"({"params":{"beta":0.5,"gamma":0.2,"b":0.05,"K":1,)"
                       << R"("sigma":0.1,"I0":0.5},"grid":{"T":1,"dt":0.01},)"
                       << R"("scheme":"sd","typo_key":1})";
    const int rc = run_cmd("simulate --config " + cfg.string() + " --out " + s.str(),
                           s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 2);
    CHECK(slurp(s.dir / "err.txt").find("typo_key") != std::string::npos);
}

TEST_CASE("flags override config values") {
    Scratch s("override");
    const fs::path cfg = s.dir / "config.json";
    std::ofstream(cfg) << R"({"experiment":"simulate","params":{"beta":0.5,"gamma":0.2,)"
                       << R"("b":0.05,"K":1,"sigma":0.1,"I0":0.5},)"
                       << R"("grid":{"T":1,"dt":0.01},"scheme":"sd","master_seed":1})";
    const int rc = run_cmd("--config " + cfg.string() + " --seed 99 --out " + s.str(),
                           s.dir / "out.txt");
    CHECK(rc == 0);
    CHECK(slurp(s.dir / "run_manifest.json").find("\"master_seed\": 99") != std::string::npos);
}

TEST_CASE("convergence run twice with the same seed is byte identical") {
    Scratch a("conv_a");
    Scratch b("conv_b");
    const std::string args = "convergence " + kParams +
                             " --T 0.5 --dt-list 0.0625,0.03125,0.015625 --n-paths 100 "
                             "--seed 7 --scheme sd --out ";
    CHECK(run_cmd(args + a.str(), a.dir / "stdout.txt") == 0);
    CHECK(run_cmd(args + b.str(), b.dir / "stdout.txt") == 0);
    CHECK(slurp(a.dir / "convergence.csv") == slurp(b.dir / "convergence.csv"));

    // Thread counts must not leak into the artifacts either.
    Scratch c("conv_c");
    CHECK(run_cmd(args + c.str() + " --threads 8", c.dir / "stdout.txt") == 0);
    CHECK(slurp(a.dir / "convergence.csv") == slurp(c.dir / "convergence.csv"));
}

TEST_CASE("stability run with conditions unmet exits 0 and flags NOT_APPLICABLE") {
    Scratch s("stability_na");
    const int rc = run_cmd("stability " + kParams +
                               " --T 5 --dt 0.01 --n-paths 50 --seed 3 --out " + s.str(),
                           s.dir / "stdout.txt");
    CHECK(rc == 0);
    CHECK(slurp(s.dir / "stdout.txt").find("NOT_APPLICABLE") != std::string::npos);
}

TEST_CASE("bench emits the documented column set") {
    Scratch s("bench");
    const int rc = run_cmd("bench " + kParams +
                               " --T 0.5 --dt-list 0.125,0.0625 --n-paths 100 --seed 5 --out " +
                               s.str(),
                           s.dir / "stdout.txt");
    CHECK(rc == 0);
    const std::string csv = slurp(s.dir / "bench.csv");
    CHECK(csv.rfind("scheme,dt,error,ci_half,order_fit_slope,order_fit_intercept,"
                    "n_paths,seed,wall_seconds\n",
                    0) == 0);
}

TEST_CASE("json format emits the report mirror") {
    Scratch s("json_fmt");
    const int rc = run_cmd("convergence " + kParams +
                               " --T 0.5 --dt-list 0.0625,0.03125 --n-paths 100 --seed 7 "
                               "--scheme sd --format both --out " + s.str(),
                           s.dir / "stdout.txt");
    CHECK(rc == 0);
    CHECK(fs::exists(s.dir / "convergence.csv"));
    const std::string j = slurp(s.dir / "convergence.json");
    CHECK(j.find("\"fitted_order\"") != std::string::npos);
}

TEST_CASE("non-dyadic convergence chain exits 3") {
    Scratch s("non_dyadic");
    const int rc = run_cmd("convergence " + kParams +
                               " --T 0.5 --dt-list 0.1,0.03 --n-paths 100 --seed 7 --out " +
                               s.str(),
                           s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 3);
    CHECK(slurp(s.dir / "err.txt").find("dyadic") != std::string::npos);
}

TEST_CASE("engine failure budget maps to exit 5") {
    Scratch s("engine_fail");
    const int rc = run_cmd(
        "convergence --beta 0.5 --gamma 0.2 --b 0.05 --K 1 --sigma 3 --I0 0.9 "
        "--T 8 --dt-list 0.5,0.25 --n-paths 100 --seed 23 --scheme em --out " + s.str(),
        s.dir / "out.txt", s.dir / "err.txt");
    CHECK(rc == 5);
}
