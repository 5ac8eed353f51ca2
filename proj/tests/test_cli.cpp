#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/sha.h>

#include "psfunmix/cli.hpp"

namespace fs = std::filesystem;
using psfunmix::cli::run;

namespace {

const std::string kData = PSFUNMIX_DATA_DIR;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("psfunmix_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& s) const { return (path / s).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

void put(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

nlohmann::json manifest(const std::string& dir) { return nlohmann::json::parse(slurp(dir + "/manifest.json")); }

std::string sha256(const std::string& data) {
    unsigned char d[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), d);
    std::ostringstream os;
    for (unsigned char c : d) os << std::hex << (c >> 4) << (c & 15);
    return os.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "psf-unmix");
    return run(args);
}

void check_hashes(const std::string& dir) {
    const auto m = manifest(dir);
    REQUIRE(m["outputs"].is_array());
    for (const auto& o : m["outputs"]) {
        const std::string p = dir + "/" + o["path"].get<std::string>();
        REQUIRE(fs::exists(p));
        CHECK(sha256(slurp(p)) == o["sha256"].get<std::string>());
    }
}

const char* kTinyMap = R"(schema_version = 1
kernel = "u-laplace"
u = [1.0, 20.0]
n_samples = 300
theta_grid = [0.02, 0.05]
delta_grid = [0.1, 0.4]
[lipschitz]
probes = 4
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 64") {
    CHECK(cli({}) == 64);
    CHECK(cli({"frobnicate"}) == 64);
    CHECK(cli({"check", "--bogus"}) == 64);
    CHECK(cli({"check", "--threads", "many"}) == 64);
}

TEST_CASE("missing config exits 1 and names the path") {
    TempDir d("missing");
    CHECK(cli({"radius-map", "--config", d / "nope.toml", "--out", d / "o"}) == 1);
    const auto m = manifest(d / "o");
    CHECK(m["status"] == "error");
    CHECK(m["error"]["message"].get<std::string>().find("nope.toml") != std::string::npos);
}

TEST_CASE("config validation: schema version, unknown keys, types") {
    TempDir d("schema");
    put(d / "a.toml", "n_samples = 100\n");
    CHECK(cli({"coherence", "--config", d / "a.toml", "--out", d / "o"}) == 1);
    put(d / "b.toml", "schema_version = 2\n");
    CHECK(cli({"coherence", "--config", d / "b.toml", "--out", d / "o"}) == 1);
    put(d / "c.toml", "schema_version = 1\nn_sampels = 100\n");
    CHECK(cli({"coherence", "--config", d / "c.toml", "--out", d / "o"}) == 1);
    CHECK(manifest(d / "o")["error"]["message"].get<std::string>().find("n_sampels") != std::string::npos);
    put(d / "e.toml", "schema_version = 1\nn_samples = \"lots\"\n");
    CHECK(cli({"coherence", "--config", d / "e.toml", "--out", d / "o"}) == 1);
    put(d / "f.toml", "schema_version = 1\nn_samples = [\n");
    CHECK(cli({"coherence", "--config", d / "f.toml", "--out", d / "o"}) == 1);
    put(d / "g.toml", "schema_version = 1\nkernel = \"voigt\"\n");
    CHECK(cli({"coherence", "--config", d / "g.toml", "--out", d / "o"}) == 1);
}

TEST_CASE("check passes and writes a manifest") {
    TempDir d("check");
    CHECK(cli({"check", "--out", d / "o", "--seed", "3"}) == 0);
    const auto m = manifest(d / "o");
    CHECK(m["status"] == "ok");
    CHECK(m["seed"] == 3);
    CHECK(m["subcommand"] == "check");
    CHECK(m.contains("version"));
    CHECK(m["timings_s"].contains("self_test"));
    check_hashes(d / "o");
}

TEST_CASE("radius-map emits one CSV per kernel, reproducibly") {
    TempDir d("map");
    put(d / "map.toml", kTinyMap);
    REQUIRE(cli({"radius-map", "--config", d / "map.toml", "--out", d / "a", "--threads", "1"}) == 0);
    REQUIRE(cli({"radius-map", "--config", d / "map.toml", "--out", d / "b", "--threads", "2"}) == 0);
    for (const char* f : {"radius_map_u-laplace-u1.csv", "radius_map_u-laplace-u20.csv"}) {
        REQUIRE(fs::exists(d / (std::string("a/") + f)));
        CHECK(slurp(d / (std::string("a/") + f)) == slurp(d / (std::string("b/") + f)));
    }
    check_hashes(d / "a");
    const auto m = manifest(d / "a");
    CHECK(m["config"]["n_samples"] == 300);
    CHECK(m["config"]["half_width"] == 1.0);  // defaults are echoed
    CHECK(m["config"]["lipschitz.probes"] == 4);
}

TEST_CASE("monte-carlo and mse-snr are deterministic for a seed") {
    TempDir d("mc");
    put(d / "mc.toml", R"(schema_version = 1
kernels = ["u-laplace:2"]
n_samples = 300
n_trials = 3
epsilon_grid = [1e-4, 1e-3]
sc_probes = 2
[lipschitz]
probes = 2
)");
    REQUIRE(cli({"monte-carlo", "--config", d / "mc.toml", "--out", d / "a", "--seed", "5"}) == 0);
    REQUIRE(cli({"monte-carlo", "--config", d / "mc.toml", "--out", d / "b", "--seed", "5", "--threads", "3"}) == 0);
    CHECK(slurp(d / "a/monte_carlo_u-laplace-u2.csv") == slurp(d / "b/monte_carlo_u-laplace-u2.csv"));
    check_hashes(d / "a");

    put(d / "mse.toml", R"(schema_version = 1
kernel = "u-laplace"
u = [2.0]
n_samples = 300
n_trials = 3
snr_grid = [10, 20]
)");
    REQUIRE(cli({"mse-snr", "--config", d / "mse.toml", "--out", d / "c", "--seed", "8"}) == 0);
    REQUIRE(cli({"mse-snr", "--config", d / "mse.toml", "--out", d / "e", "--seed", "8"}) == 0);
    CHECK(slurp(d / "c/mse_snr.csv") == slurp(d / "e/mse_snr.csv"));
    REQUIRE(cli({"mse-snr", "--config", d / "mse.toml", "--out", d / "f", "--seed", "9"}) == 0);
    CHECK(slurp(d / "c/mse_snr.csv") != slurp(d / "f/mse_snr.csv"));
}

TEST_CASE("coherence and radius subcommands") {
    TempDir d("coh");
    put(d / "c.toml", "schema_version = 1\nkernel = \"gaussian\"\nn_samples = 400\ntheta_i = 0.02\ndelta = 0.1\n");
    REQUIRE(cli({"coherence", "--config", d / "c.toml", "--out", d / "a"}) == 0);
    const auto j = nlohmann::json::parse(slurp(d / "a/coherence.json"));
    CHECK(j["orders"].size() == 3);
    CHECK(j["theta_j"] == 0.02);
    check_hashes(d / "a");
    put(d / "r.toml", "schema_version = 1\nkernel = \"u-laplace\"\nu = 20.0\nn_samples = 500\n"
                      "support = [[-0.25], [0.25]]\ntheta_star = [0.05, 0.05]\n");
    REQUIRE(cli({"radius", "--config", d / "r.toml", "--out", d / "b"}) == 0);
    const auto r = nlohmann::json::parse(slurp(d / "b/radius.json"));
    CHECK(r["kernel"] == "u-laplace(u=20)");
    CHECK(r["constants"].contains("epsilon0"));
    CHECK(r.contains("epsilon0_noiseless"));
    put(d / "bad.toml", "schema_version = 1\nkernel = \"u-laplace\"\nu = [1.0, 2.0]\n");
    CHECK(cli({"radius", "--config", d / "bad.toml", "--out", d / "c"}) == 1);
}

TEST_CASE("synth-spectrum then fit recovers the temperature") {
    TempDir d("libs");
    put(d / "s.toml", "schema_version = 1\nseed = 2\nlines = \"" + kData + "/synthetic_lines.csv\"\npartition = \"" +
                          kData + "/synthetic_partitions.json\"\n");
    REQUIRE(cli({"synth-spectrum", "--config", d / "s.toml", "--out", d / "s"}) == 0);
    REQUIRE(cli({"fit", "--spectrum", d / "s/spectrum.csv", "--lines", kData + "/synthetic_lines.csv", "--partition",
                 kData + "/synthetic_partitions.json", "--window", "256.1:266.5", "--profile", "lorentzian", "--out",
                 d / "f"}) == 0);
    const auto rep = nlohmann::json::parse(slurp(d / "f/fit_report.json"));
    CHECK(rep["boltzmann"]["temperature_k"].get<double>() == doctest::Approx(1e4).epsilon(0.01));
    CHECK(rep["concentrations"]["Al I"].get<double>() == doctest::Approx(0.915).epsilon(0.02));
    CHECK(rep["relative_fit_error"].get<double>() < 0.1);
    check_hashes(d / "f");
    CHECK(slurp(d / "f/fitted_curve.csv").rfind("wavelength_nm,observed,fitted,Al I,Cu I,Fe I,Mg I\n", 0) == 0);

    // Malformed spectrum: exit 1 with a line number.
    put(d / "bad.csv", "wavelength_nm,intensity\n256.1,1\n256.2,x\n");
    CHECK(cli({"fit", "--spectrum", d / "bad.csv", "--lines", kData + "/synthetic_lines.csv", "--partition",
               kData + "/synthetic_partitions.json", "--out", d / "g"}) == 1);
    CHECK(manifest(d / "g")["error"]["message"].get<std::string>().find("line 3") != std::string::npos);
    CHECK(cli({"fit", "--out", d / "h"}) == 1);
}

}
