#include "lunatrn/config.hpp"
#include "lunatrn/detect.hpp"

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace lunatrn;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

// Run the CLI, capturing stdout+stderr.
CommandResult run_cli(const std::string& args) {
    const std::string cmd = std::string(LUNATRN_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    CommandResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) {
        res.output += buf.data();
    }
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// A fast config: few trials, short trajectory, synthetic catalog.
std::string small_config_json(int trials, int seed) {
    std::ostringstream os;
    os << R"({
  "trials": )"
       << trials << R"(,
  "seed": )"
       << seed << R"(,
  "duration_s": 125.0,
  "dt_s": 2.5,
  "profile": "lunanet",
  "profiles_file": ")"
       << LUNATRN_CONFIG_DIR << R"(/profiles.json",
  "compare": {"profiles": ["lunanet", "trinary"], "brightness": [-0.3, 0.0, 0.3], "trials": 2},
  "catalog": {"synthetic": {"seed": 42, "count": 60}}
})";
    return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "config.json";
    std::ofstream out(p);
    out << body;
    return p;
}

}  // namespace

TEST_CASE("cli run produces csvs and a manifest, and is reproducible") {
    const fs::path dir = fresh_dir("lunatrn_cli_run");
    const fs::path cfg = write_config(dir, small_config_json(2, 7));

    const auto out1 = dir / "out1";
    const auto r1 = run_cli("run --config " + cfg.string() + " --out " + out1.string());
    CHECK(r1.exit_code == 0);
    CHECK(fs::exists(out1 / "steps.csv"));
    CHECK(fs::exists(out1 / "summary.csv"));
    CHECK(fs::exists(out1 / "manifest.json"));

    SUBCASE("second run with the same config is byte-identical") {
        const auto out2 = dir / "out2";
        const auto r2 = run_cli("run --config " + cfg.string() + " --out " + out2.string());
        CHECK(r2.exit_code == 0);
        CHECK(slurp(out1 / "steps.csv") == slurp(out2 / "steps.csv"));
        CHECK(slurp(out1 / "summary.csv") == slurp(out2 / "summary.csv"));
    }

    SUBCASE("replaying the manifest reproduces the outputs") {
        const auto out3 = dir / "out3";
        const auto r3 = run_cli("run --config " + (out1 / "manifest.json").string() + " --out " +
                                out3.string());
        CHECK(r3.exit_code == 0);
        CHECK(slurp(out1 / "steps.csv") == slurp(out3 / "steps.csv"));
        CHECK(slurp(out1 / "summary.csv") == slurp(out3 / "summary.csv"));
    }

    SUBCASE("seed override changes the outputs") {
        const auto out4 = dir / "out4";
        const auto r4 = run_cli("run --config " + cfg.string() + " --seed 99 --out " +
                                out4.string());
        CHECK(r4.exit_code == 0);
        CHECK(slurp(out1 / "steps.csv") != slurp(out4 / "steps.csv"));
    }
}

TEST_CASE("cli error mapping") {
    const fs::path dir = fresh_dir("lunatrn_cli_err");

    SUBCASE("dt_s = 0 exits 1 and names the key") {
        std::string body = small_config_json(1, 1);
        const auto pos = body.find("\"dt_s\": 2.5");
        REQUIRE(pos != std::string::npos);
        body.replace(pos, 11, "\"dt_s\": 0.0");
        const fs::path cfg = write_config(dir, body);
        const auto r = run_cli("run --config " + cfg.string() + " --out " + (dir / "o").string());
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("dt_s") != std::string::npos);
    }

    SUBCASE("unknown profile exits 1") {
        const fs::path cfg = write_config(dir, small_config_json(1, 1));
        const auto r = run_cli("run --config " + cfg.string() + " --profile nope --out " +
                               (dir / "o2").string());
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("nope") != std::string::npos);
    }

    SUBCASE("missing config file exits 2") {
        const auto r = run_cli("run --config /nonexistent/cfg.json --out " + (dir / "o3").string());
        CHECK(r.exit_code == 2);
    }

    SUBCASE("missing catalog file exits 2") {
        const fs::path cfg = write_config(dir, small_config_json(1, 1));
        const auto r = run_cli("run --config " + cfg.string() + " --catalog /nonexistent/cat.csv" +
                               " --out " + (dir / "o4").string());
        CHECK(r.exit_code == 2);
    }
}

TEST_CASE("cli compare emits the 2x3 grid") {
    const fs::path dir = fresh_dir("lunatrn_cli_cmp");
    const fs::path cfg = write_config(dir, small_config_json(2, 3));
    const auto out = dir / "cmp";
    const auto r = run_cli("compare --config " + cfg.string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
    const std::string csv = slurp(out / "compare_summary.csv");
    // Header + 6 cells.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find("lunanet,-0.3,2,") != std::string::npos);
    CHECK(csv.find("trinary,0.3,2,") != std::string::npos);
    CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("cli detect prints one line per crater") {
    const fs::path dir = fresh_dir("lunatrn_cli_det");

    SUBCASE("blank mask prints nothing, exits 0") {
        const PredictionMask blank(64, 64);
        const fs::path p = dir / "blank.pgm";
        write_pgm(blank, p.string());
        const auto r = run_cli("detect " + p.string());
        CHECK(r.exit_code == 0);
        CHECK(r.output.empty());
    }

    SUBCASE("three rings give three lines") {
        const PredictionMask mask = render_rim_mask(
            {{Vec2(40.0, 40.0), 10.0}, {Vec2(128.0, 60.0), 20.0}, {Vec2(70.0, 180.0), 30.0}},
            256, 256, 2.0, 255);
        const fs::path p = dir / "rings.pgm";
        write_pgm(mask, p.string());
        const auto r = run_cli("detect " + p.string());
        CHECK(r.exit_code == 0);
        CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 3);
        // Each line is u,v,major_px,minor_px,theta_rad.
        std::istringstream lines(r.output);
        std::string line;
        while (std::getline(lines, line)) {
            CHECK(std::count(line.begin(), line.end(), ',') == 4);
        }
    }

    SUBCASE("truncated pgm exits 2") {
        const fs::path p = dir / "trunc.pgm";
        std::ofstream out(p, std::ios::binary);
        out << "P5\n64 64\n255\nnot-enough-bytes";
        out.close();
        const auto r = run_cli("detect " + p.string());
        CHECK(r.exit_code == 2);
    }
}
