#include "support.hpp"

#include "tbd/experiment.hpp"

#include <doctest.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <sstream>

using namespace tbd;

namespace {

RunConfig small_config() {
    RunConfig cfg = parse_config(R"(
scenario.roi = 0,0,10,10
scenario.grid_rows = 10
scenario.grid_cols = 10
scenario.steps = 6
scenario.object_count = 2
scenario.birth_steps = 1,2
scenario.death_steps = 5,inf
scenario.spawn_box = 3,3,7,7
engine.particles = 150
run.runs = 3
)");
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// number formatting

TEST_CASE("format_double round-trips bit-exactly") {
    Rng rng(1);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 20000; ++i) {
        const double v = std::bit_cast<double>(bits(rng));
        if (!std::isfinite(v)) continue;
        CHECK(std::bit_cast<std::uint64_t>(parse_double(format_double(v))) == std::bit_cast<std::uint64_t>(v));
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(60.0) == "60");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::isinf(parse_double("inf")));
}

TEST_CASE("parsers are strict") {
    CHECK(parse_double(" 2.5 ") == 2.5);
    CHECK_THROWS_AS(parse_double("2.5x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
    CHECK(parse_int("-7") == -7);
    CHECK_THROWS_AS(parse_int("3.0"), std::invalid_argument);
    CHECK(parse_u64("18446744073709551615") == std::numeric_limits<std::uint64_t>::max());
    CHECK_THROWS_AS(parse_u64("-1"), std::invalid_argument);
}

TEST_CASE("split and trim") {
    const auto parts = split(" a, b ,,c ", ',');
    REQUIRE(parts.size() == 4);
    CHECK(parts[0] == "a");
    CHECK(parts[1] == "b");
    CHECK(parts[2].empty());
    CHECK(parts[3] == "c");
}

// ---------------------------------------------------------------------------
// measurement container

TEST_CASE("measurement files round-trip bit-exactly with a little-endian header") {
    GridGeometry g{3, 4, Vec2(0.5, 2.0), Vec2(-1.0, 7.25)};
    Rng rng(2);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<MeasurementImage> frames;
    for (int k = 0; k < 5; ++k) {
        MeasurementImage z(g, 2);
        for (double& v : z.values()) v = n01(rng) * 1e3;
        frames.push_back(z);
    }
    std::stringstream ss;
    write_measurements(ss, frames);
    const std::string bytes = ss.str();
    CHECK(bytes.size() == 4 + 5 * 4 + 4 * 8 + 5 * 12 * 2 * 8);
    CHECK(bytes.substr(0, 4) == "TBDZ");
    CHECK(bytes.substr(4, 4) == std::string("\x01\x00\x00\x00", 4));
    CHECK(bytes.substr(8, 4) == std::string("\x03\x00\x00\x00", 4));   // rows
    CHECK(bytes.substr(12, 4) == std::string("\x04\x00\x00\x00", 4));  // cols
    CHECK(bytes.substr(20, 4) == std::string("\x05\x00\x00\x00", 4));  // K

    const auto back = read_measurements(ss);
    REQUIRE(back.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(back[k].geometry() == g);
        CHECK(back[k].d() == 2);
        const auto a = frames[k].values();
        const auto b = back[k].values();
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(a[i]) == std::bit_cast<std::uint64_t>(b[i]));
    }
    // (k, row, col, component) order: the second value of frame 0 is cell 0, component 1.
    double v = 0.0;
    std::memcpy(&v, bytes.data() + 56 + 8, 8);
    CHECK(v == frames[0].cell(0)[1]);

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::istringstream is(bad);
        CHECK_THROWS_AS(read_measurements(is), FormatMismatch);
    }
    SUBCASE("bad version") {
        std::string bad = bytes;
        bad[4] = 2;
        std::istringstream is(bad);
        CHECK_THROWS_AS(read_measurements(is), FormatMismatch);
    }
    SUBCASE("truncated") {
        std::istringstream is(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(read_measurements(is), FormatMismatch);
    }
    SUBCASE("trailing bytes") {
        std::istringstream is(bytes + "x");
        CHECK_THROWS_AS(read_measurements(is), FormatMismatch);
    }
}

TEST_CASE("writing frames with different geometries is rejected") {
    MeasurementImage a(GridGeometry{2, 2, Vec2::Ones(), Vec2::Zero()}, 2);
    MeasurementImage b(GridGeometry{2, 3, Vec2::Ones(), Vec2::Zero()}, 2);
    std::stringstream ss;
    CHECK_THROWS_AS(write_measurements(ss, {a, b}), FormatMismatch);
    CHECK_THROWS_AS(write_measurements(ss, {}), FormatMismatch);
}

// ---------------------------------------------------------------------------
// CSV

TEST_CASE("truth and estimate CSVs round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "tbd_io_test";
    std::filesystem::create_directories(dir);
    ScenarioConfig sc;
    sc.steps = 12;
    Rng rng(3);
    const auto truth = generate_truth(sc, rng);
    {
        std::ofstream os(dir / "truth.csv");
        write_truth_csv(os, 4, truth);
    }
    const auto back = read_truth_csv(dir / "truth.csv", 12);
    REQUIRE(back.step_count() == 12);
    for (int k = 1; k <= 12; ++k) {
        REQUIRE(back.at(k).size() == truth.at(k).size());
        for (std::size_t i = 0; i < truth.at(k).size(); ++i) {
            CHECK(back.at(k)[i].id == truth.at(k)[i].id);
            CHECK(back.at(k)[i].state.p == truth.at(k)[i].state.p);
            CHECK(back.at(k)[i].state.v == truth.at(k)[i].state.v);
            CHECK(back.at(k)[i].state.gamma == truth.at(k)[i].state.gamma);
        }
    }
    CHECK_THROWS_AS(read_truth_csv(dir / "truth.csv", 5), LengthMismatch);

    std::vector<EstimateRow> rows;
    for (int i = 0; i < 20; ++i) {
        EstimateRow r;
        r.run = static_cast<std::size_t>(i % 3);
        r.k = 1 + i;
        r.label = 100 + i;
        r.existence = 1.0 / (i + 3.0);
        r.state.p = Vec2(i * 0.1, -i / 7.0);
        r.state.v = Vec2(1e-9 * i, 2.0);
        r.state.gamma = 60.0 + i / 3.0;
        r.declared = i % 2 == 0;
        rows.push_back(r);
    }
    {
        std::ofstream os(dir / "est.csv");
        write_estimates_csv(os, rows);
    }
    const auto est = read_estimates_csv(dir / "est.csv");
    REQUIRE(est.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(est[i].run == rows[i].run);
        CHECK(est[i].k == rows[i].k);
        CHECK(est[i].label == rows[i].label);
        CHECK(est[i].existence == rows[i].existence);
        CHECK(est[i].state.p == rows[i].state.p);
        CHECK(est[i].state.v == rows[i].state.v);
        CHECK(est[i].state.gamma == rows[i].state.gamma);
        CHECK(est[i].declared == rows[i].declared);
    }
    {
        std::ofstream os(dir / "broken.csv");
        os << "run,k,label,px\n0,1,2,3\n";
    }
    CHECK_THROWS_AS(read_estimates_csv(dir / "broken.csv"), FormatMismatch);
    std::filesystem::remove_all(dir);
}

TEST_CASE("metrics and aggregate CSV headers") {
    std::ostringstream m, a;
    write_metrics_csv(m, {{2, 3, 0.5, 0.25, 0.5, 0.0}});
    CHECK(m.str() == "run,k,gospa,localization,missed,false\n2,3,0.5,0.25,0.5,0\n");
    write_aggregate_csv(a, {{1, 0.75, 0.125}});
    CHECK(a.str() == "k,mean_gospa,stderr\n1,0.75,0.125\n");
}

TEST_CASE("CSV reader rejects ragged rows and missing columns") {
    std::istringstream ragged("a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), FormatMismatch);
    std::istringstream ok("a,b\n1,2\n");
    const auto t = read_csv(ok);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(static_cast<void>(t.column("c")), FormatMismatch);
}

// ---------------------------------------------------------------------------
// configuration

TEST_CASE("default configuration carries the experiment constants") {
    const RunConfig cfg = parse_config("");
    CHECK(cfg.scenario.roi_max == Vec2(32, 32));
    CHECK(cfg.scenario.grid_rows == 32);
    CHECK(cfg.scenario.grid_cols == 32);
    CHECK(cfg.scenario.steps == 50);
    CHECK(cfg.scenario.gamma0 == 60.0);
    CHECK(cfg.scenario.sigma_s_sq == 0.5);
    CHECK(cfg.scenario.sigma_eps_sq == 1.0);
    CHECK(cfg.scenario.q_pv == 1e-3);
    CHECK(cfg.scenario.q_gamma == 1e-4);
    CHECK(cfg.survival == 0.999);
    CHECK(cfg.birth.p_birth == 1e-5);
    CHECK(cfg.engine.particles_per_po == 3000);
    CHECK(cfg.engine.iterations == 2);
    CHECK(cfg.engine.declare_threshold == 0.5);
    CHECK(cfg.engine.prune_threshold == 1e-3);
    CHECK(cfg.gospa.cutoff == 1.0);
    CHECK(cfg.gospa.order == 2.0);
    CHECK(cfg.runs == 400);

    const Models m = cfg.models();
    CHECK(m.birth.gamma_max == 120.0);
    CHECK(m.birth.detect_threshold == doctest::Approx(6.7250).epsilon(1e-4));
    CHECK(m.birth.p_birth == 1e-5);
    CHECK(m.motion.survival == 0.999);
    CHECK(m.psf.noise_cov.isApprox(Eigen::Matrix2d::Identity()));
}

TEST_CASE("config parsing sets every key and round-trips through format_config") {
    const std::string text = R"(# comment line
scenario.roi = 0,0,64,32   # trailing comment
scenario.grid_cols = 64
scenario.gamma0 = 80
scenario.layout_seed = 17
scenario.death_steps = 31, 36, 41, 46, never
psf.sigma_s_sq = 1.5
motion.survival = 0.99
birth.rate = 1
birth.gamma_max = 150
birth.detect_threshold = 5.5
engine.iterations = 1
engine.gate_radius = none
engine.max_pos = 40
gospa.cutoff = 2
run.runs = 50
run.base_seed = 99
run.output_dir = results/a
run.threads = 2
)";
    const RunConfig cfg = parse_config(text);
    CHECK(cfg.scenario.roi_max == Vec2(64, 32));
    CHECK(cfg.scenario.grid_cols == 64);
    CHECK(cfg.scenario.gamma0 == 80.0);
    CHECK(cfg.scenario.layout_seed == 17u);
    CHECK(cfg.scenario.death_steps.back() == kNeverDies);
    CHECK(cfg.scenario.sigma_s_sq == 1.5);
    CHECK(cfg.engine.iterations == 1);
    CHECK(cfg.engine.gate.mode == GateRadius::Mode::disabled);
    CHECK(cfg.engine.max_pos == 40u);
    CHECK(cfg.runs == 50);
    CHECK(cfg.base_seed == 99);
    CHECK(cfg.output_dir == "results/a");
    const Models m = cfg.models();
    CHECK(m.birth.p_birth == 0.5);
    CHECK(m.birth.gamma_max == 150.0);
    CHECK(m.birth.detect_threshold == 5.5);
    CHECK(m.psf.sigma_s_sq == 1.5);

    const std::string formatted = format_config(cfg);
    CHECK(format_config(parse_config(formatted)) == formatted);
    CHECK(format_config(parse_config(format_config(RunConfig{}))) == format_config(RunConfig{}));
    for (const auto& key : config_keys()) CHECK(formatted.find(key + " = ") != std::string::npos);
}

TEST_CASE("config errors are collected and name the field") {
    try {
        parse_config("scenario.gamm0 = 60\nengine.particles = many\nno equals sign\n");
        FAIL("expected ConfigInvalid");
    } catch (const ConfigInvalid& e) {
        const std::string msg = e.what();
        CHECK(msg.find("scenario.gamm0") != std::string::npos);
        CHECK(msg.find("engine.particles") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("run.runs = 0"), ConfigInvalid);
    CHECK_THROWS_AS(parse_config("engine.prune_threshold = 0.7"), ConfigInvalid);
    CHECK_THROWS_AS(parse_config("scenario.object_count = 3"), ConfigInvalid);
    CHECK_THROWS_AS(parse_config("birth.rate = -1"), ConfigInvalid);
    CHECK_THROWS_AS(load_config("/nonexistent/tbd.cfg"), ConfigInvalid);
}

// ---------------------------------------------------------------------------
// experiment plumbing

TEST_CASE("seed derivation") {
    const RunSeeds s = derive_seeds(20230501, 7);
    CHECK(s.run == (20230501ULL ^ splitmix64(7)));
    CHECK(s.simulation == splitmix64(s.run ^ kSimulationStream));
    CHECK(s.tracking == splitmix64(s.run ^ kTrackingStream));
    CHECK(derive_seeds(20230501, 8).run != s.run);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
    for (std::size_t threads : {1u, 3u}) {
        std::vector<std::atomic<int>> hits(100);
        parallel_for(100, threads, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
        CHECK_THROWS_AS(parallel_for(10, threads,
                                     [](std::size_t i) {
                                         if (i == 4) throw FormatMismatch("boom");
                                     }),
                        FormatMismatch);
    }
}

TEST_CASE("aggregate computes the mean and standard error per step") {
    const std::vector<MetricsRow> rows{{0, 1, 1.0, 0, 0, 0}, {1, 1, 2.0, 0, 0, 0}, {2, 1, 4.0, 0, 0, 0},
                                       {0, 2, 0.5, 0, 0, 0}};
    const auto agg = aggregate(rows, 2);
    REQUIRE(agg.size() == 2);
    CHECK(agg[0].mean_gospa == doctest::Approx(7.0 / 3.0));
    CHECK(agg[0].stderr_gospa == doctest::Approx(std::sqrt((16.0 / 9 + 1.0 / 9 + 25.0 / 9) / 2.0 / 3.0)));
    CHECK(agg[1].mean_gospa == 0.5);
    CHECK(agg[1].stderr_gospa == 0.0);
    CHECK_THROWS_AS(aggregate(rows, 1), LengthMismatch);
}

TEST_CASE("evaluate_rows scores only declared rows") {
    GroundTruth truth;
    truth.steps.resize(2);
    truth.steps[0] = {{0, {Vec2(1, 1), Vec2::Zero(), 60.0}}};
    EstimateRow hit;
    hit.k = 1;
    hit.state.p = Vec2(1, 1);
    hit.declared = true;
    EstimateRow hidden = hit;
    hidden.k = 2;
    hidden.declared = false;
    const std::vector<EstimateRow> rows{hit, hidden};
    const auto m = evaluate_rows(0, truth, rows, GospaConfig{});
    REQUIRE(m.size() == 2);
    CHECK(m[0].gospa == 0.0);
    CHECK(m[1].gospa == 0.0);
    hidden.k = 3;
    const std::vector<EstimateRow> bad{hidden};
    CHECK_THROWS_AS(evaluate_rows(0, truth, bad, GospaConfig{}), LengthMismatch);
}

TEST_CASE("track_run output") {
    const RunConfig cfg = small_config();
    SUBCASE("zero images produce no declared rows") {
        std::vector<MeasurementImage> frames(6, MeasurementImage(cfg.scenario.geometry(), 2));
        const auto out = track_run(cfg, 0, frames);
        for (const auto& r : out.rows) CHECK_FALSE(r.declared);
    }
    SUBCASE("one row per surviving PO per step") {
        const Simulation sim = simulate_run(cfg, 1);
        const auto out = track_run(cfg, 1, sim.images);
        Tracker tracker(cfg.models(), cfg.engine, derive_seeds(cfg.base_seed, 1).tracking);
        std::size_t expected = 0;
        for (const auto& z : sim.images) expected += tracker.process(z).pos.size();
        CHECK(out.rows.size() == expected);
        CHECK(expected > 0);
    }
    SUBCASE("geometry mismatch") {
        std::vector<MeasurementImage> frames(2, MeasurementImage(GridGeometry{4, 4, Vec2::Ones(), Vec2::Zero()}, 2));
        CHECK_THROWS_AS(track_run(cfg, 0, frames), FormatMismatch);
    }
}

TEST_CASE("experiments are deterministic and independent of the thread count") {
    RunConfig cfg = small_config();
    const auto a = run_experiment(cfg);
    cfg.threads = 3;
    const auto b = run_experiment(cfg);
    REQUIRE(a.metrics.size() == 18);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].run == b.metrics[i].run);
        CHECK(a.metrics[i].k == b.metrics[i].k);
        CHECK(a.metrics[i].gospa == b.metrics[i].gospa);
    }
    CHECK(a.run_mean_gospa.size() == 3);
}

TEST_CASE("sweep axes") {
    RunConfig cfg;
    apply_axis(cfg, "gamma0", 40.0);
    CHECK(cfg.scenario.gamma0 == 40.0);
    CHECK(cfg.models().birth.gamma_max == 80.0);
    apply_axis(cfg, "sigma_s_sq", 1.0);
    CHECK(cfg.scenario.sigma_s_sq == 1.0);
    apply_axis(cfg, "L", 1.0);
    CHECK(cfg.engine.iterations == 1);
    CHECK_THROWS_AS(apply_axis(cfg, "L", 1.5), ConfigInvalid);
    CHECK_THROWS_AS(apply_axis(cfg, "sigma_eps", 1.0), UnknownAxis);
}

TEST_CASE("shipped configs parse and describe the full experiment") {
    const RunConfig full = load_config(std::filesystem::path(TBD_CONFIG_DIR) / "full.cfg");
    const RunConfig desk = load_config(std::filesystem::path(TBD_CONFIG_DIR) / "desk.cfg");
    CHECK(full.runs == 400);
    CHECK(desk.runs == 50);
    const RunConfig defaults = parse_config("");
    for (const RunConfig* cfg : {&full, &desk}) {
        RunConfig same = *cfg;
        same.runs = defaults.runs;
        same.output_dir = defaults.output_dir;
        CHECK(format_config(same) == format_config(defaults));
    }
}
