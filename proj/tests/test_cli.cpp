#include "support.hpp"

#include "tbd/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace tbd;

namespace {

const char* const kSmallConfig = R"(scenario.roi = 0,0,10,10
scenario.grid_rows = 10
scenario.grid_cols = 10
scenario.steps = 6
scenario.object_count = 2
scenario.birth_steps = 1,2
scenario.death_steps = 5,inf
scenario.spawn_box = 3,3,7,7
engine.particles = 150
run.runs = 2
)";

struct Workspace {
    fs::path dir;

    explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("tbd_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "small.cfg") << kSmallConfig;
    }
    ~Workspace() { fs::remove_all(dir); }

    [[nodiscard]] fs::path operator/(const std::string& name) const { return dir / name; }

    int run(const std::string& args) const {
        const std::string cmd = std::string(TBD_BP_EXE) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    [[nodiscard]] std::string small_cfg() const { return "--config " + (dir / "small.cfg").string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("simulate writes one truth and one measurement file per run, deterministically") {
    Workspace ws("simulate");
    REQUIRE(ws.run("simulate " + ws.small_cfg() + " --out " + (ws / "a").string()) == 0);
    REQUIRE(ws.run("simulate " + ws.small_cfg() + " --out " + (ws / "b").string()) == 0);
    for (int run = 0; run < 2; ++run) {
        const std::string t = "truth_run" + std::to_string(run) + ".csv";
        const std::string m = "measurements_run" + std::to_string(run) + ".tbdz";
        REQUIRE(fs::exists(ws / "a" / t));
        REQUIRE(fs::exists(ws / "a" / m));
        CHECK(slurp(ws / "a" / t) == slurp(ws / "b" / t));
        CHECK(slurp(ws / "a" / m) == slurp(ws / "b" / m));
        const auto frames = read_measurements(ws / "a" / m);
        CHECK(frames.size() == 6);
        CHECK(frames[0].geometry().rows == 10);
    }
    CHECK_FALSE(fs::exists(ws / "a" / "truth_run2.csv"));
    CHECK(slurp(ws / "a" / "truth_run0.csv") != slurp(ws / "a" / "truth_run1.csv"));
    CHECK(fs::exists(ws / "a" / "config.resolved"));

    REQUIRE(ws.run("simulate " + ws.small_cfg() + " --seed 5 --out " + (ws / "c").string()) == 0);
    CHECK(slurp(ws / "a" / "truth_run0.csv") != slurp(ws / "c" / "truth_run0.csv"));
}

TEST_CASE("default simulation produces five distinct objects") {
    Workspace ws("defaults");
    REQUIRE(ws.run("simulate --runs 1 --out " + ws.dir.string()) == 0);
    const auto truth = read_truth_csv(ws / "truth_run0.csv", 50);
    std::set<int> ids;
    for (int k = 1; k <= 50; ++k) {
        for (const auto& o : truth.at(k)) ids.insert(o.id);
    }
    CHECK(ids.size() == 5);
    CHECK(truth.at(25).size() == 5);
}

TEST_CASE("track over zero images declares nothing") {
    Workspace ws("track_zero");
    MeasurementImage blank(GridGeometry{10, 10, Vec2::Ones(), Vec2::Zero()}, 2);
    write_measurements(ws / "zero.tbdz", std::vector<MeasurementImage>(6, blank));
    REQUIRE(ws.run("track " + ws.small_cfg() + " --out " + ws.dir.string() + " " + (ws / "zero.tbdz").string()) == 0);
    for (const auto& r : read_estimates_csv(ws / "estimates.csv")) CHECK_FALSE(r.declared);
}

TEST_CASE("track is deterministic and rejects a geometry mismatch") {
    Workspace ws("track");
    REQUIRE(ws.run("simulate " + ws.small_cfg() + " --out " + ws.dir.string()) == 0);
    REQUIRE(ws.run("track " + ws.small_cfg() + " --out " + ws.dir.string()) == 0);
    const std::string first = slurp(ws / "estimates.csv");
    REQUIRE(ws.run("track " + ws.small_cfg() + " --threads 2 --out " + ws.dir.string()) == 0);
    CHECK(slurp(ws / "estimates.csv") == first);
    const auto rows = read_estimates_csv(ws / "estimates.csv");
    CHECK_FALSE(rows.empty());
    for (const auto& r : rows) {
        CHECK(r.run < 2);
        CHECK(r.k >= 1);
        CHECK(r.k <= 6);
        CHECK(r.declared == (r.existence > 0.5));
    }

    MeasurementImage wrong(GridGeometry{4, 4, Vec2::Ones(), Vec2::Zero()}, 2);
    write_measurements(ws / "wrong.tbdz", std::vector<MeasurementImage>(6, wrong));
    CHECK(ws.run("track " + ws.small_cfg() + " --out " + ws.dir.string() + " " + (ws / "wrong.tbdz").string()) == 3);
    std::ofstream(ws / "garbage.tbdz") << "not a measurement file";
    CHECK(ws.run("track " + ws.small_cfg() + " --out " + ws.dir.string() + " " + (ws / "garbage.tbdz").string()) == 3);
}

TEST_CASE("evaluate: perfect estimates score zero, no estimates score the miss penalty") {
    Workspace ws("evaluate");
    REQUIRE(ws.run("simulate " + ws.small_cfg() + " --runs 1 --out " + ws.dir.string()) == 0);
    const auto truth = read_truth_csv(ws / "truth_run0.csv", 6);

    std::vector<EstimateRow> perfect;
    for (int k = 1; k <= 6; ++k) {
        for (const auto& o : truth.at(k)) {
            EstimateRow r;
            r.k = k;
            r.label = o.id;
            r.existence = 1.0;
            r.state = o.state;
            r.declared = true;
            perfect.push_back(r);
        }
    }
    {
        std::ofstream os(ws / "perfect.csv");
        write_estimates_csv(os, perfect);
    }
    const std::string args = "evaluate " + ws.small_cfg() + " --runs 1 --out " + ws.dir.string() + " --truth " +
                             (ws / "truth_run0.csv").string() + " --estimates ";
    REQUIRE(ws.run(args + (ws / "perfect.csv").string()) == 0);
    auto metrics = read_csv(ws / "metrics.csv");
    REQUIRE(metrics.rows.size() == 6);
    const auto g = metrics.column("gospa");
    for (const auto& row : metrics.rows) CHECK(parse_double(row[g]) == 0.0);

    {
        std::ofstream os(ws / "none.csv");
        write_estimates_csv(os, {});
    }
    REQUIRE(ws.run(args + (ws / "none.csv").string()) == 0);
    metrics = read_csv(ws / "metrics.csv");
    for (std::size_t i = 0; i < 6; ++i) {
        const double n = static_cast<double>(truth.at(static_cast<int>(i) + 1).size());
        CHECK(parse_double(metrics.rows[i][g]) == doctest::Approx(std::sqrt(0.5 * n)));
    }
    const auto agg = read_csv(ws / "aggregate.csv");
    CHECK(agg.rows.size() == 6);

    // An estimate for a run without a truth file.
    perfect[0].run = 3;
    {
        std::ofstream os(ws / "stray.csv");
        write_estimates_csv(os, perfect);
    }
    CHECK(ws.run(args + (ws / "stray.csv").string()) == 3);
    // Missing config file, then truth longer than the configured number of steps.
    CHECK(ws.run("evaluate --runs 1 --out " + ws.dir.string() + " --truth " + (ws / "truth_run0.csv").string() +
                 " --estimates " + (ws / "none.csv").string() + " --config " + (ws / "short.cfg").string()) == 2);
    std::ofstream(ws / "short.cfg") << kSmallConfig << "scenario.steps = 4\n";
    CHECK(ws.run("evaluate --runs 1 --out " + ws.dir.string() + " --truth " + (ws / "truth_run0.csv").string() +
                 " --estimates " + (ws / "none.csv").string() + " --config " + (ws / "short.cfg").string()) == 3);
}

TEST_CASE("all is reproducible byte for byte") {
    Workspace ws("all");
    REQUIRE(ws.run("all " + ws.small_cfg() + " --out " + (ws / "a").string()) == 0);
    REQUIRE(ws.run("all " + ws.small_cfg() + " --threads 2 --out " + (ws / "b").string()) == 0);
    for (const char* f : {"metrics.csv", "aggregate.csv", "estimates.csv", "truth_run1.csv"}) {
        CHECK(slurp(ws / "a" / f) == slurp(ws / "b" / f));
    }
    CHECK(read_csv(ws / "a" / "metrics.csv").rows.size() == 12);
}

TEST_CASE("sweep writes one result set per value") {
    Workspace ws("sweep");
    const std::string base = "sweep " + ws.small_cfg() + " --runs 2 --out " + ws.dir.string();
    REQUIRE(ws.run(base + " --axis L --values 1,2") == 0);
    CHECK(fs::exists(ws / "aggregate_L_1.csv"));
    CHECK(fs::exists(ws / "aggregate_L_2.csv"));
    CHECK(fs::exists(ws / "metrics_L_2.csv"));
    const auto summary = read_csv(ws / "sweep_L.csv");
    CHECK(summary.rows.size() == 2);
    CHECK(summary.column("mean_gospa") == 1);

    REQUIRE(ws.run(base + " --axis sigma_s_sq --values 0.5,1") == 0);
    CHECK(fs::exists(ws / "aggregate_sigma_s_sq_0.5.csv"));
    CHECK(fs::exists(ws / "aggregate_sigma_s_sq_1.csv"));
    CHECK(read_csv(ws / "aggregate_sigma_s_sq_1.csv").rows.size() == 6);

    CHECK(ws.run(base + " --axis L --values ''") == 2);
    CHECK(ws.run(base + " --axis brightness --values 1") == 2);
    CHECK(ws.run(base + " --axis L --values 1.5") == 2);
}

TEST_CASE("configuration and usage errors exit with code 2") {
    Workspace ws("errors");
    std::ofstream(ws / "bad.cfg") << "scenario.gamma = 60\n";
    CHECK(ws.run("all --config " + (ws / "bad.cfg").string() + " --out " + ws.dir.string()) == 2);
    CHECK(slurp(ws / "log.txt").find("scenario.gamma") != std::string::npos);
    CHECK(ws.run("frobnicate") == 2);
    CHECK(ws.run("") == 2);
    CHECK(ws.run("simulate --runs 0 --out " + ws.dir.string()) == 2);
    CHECK(ws.run("simulate --help") == 0);
}
