#include "tbd/cli.hpp"

#include "tbd/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace tbd {

namespace {

struct Options {
    std::string config;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::string axis;
    std::string values;
    std::vector<std::string> measurements;
    std::vector<std::string> truth;
    std::string estimates;
};

RunConfig resolve_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
    if (o.runs) cfg.runs = *o.runs;
    if (o.seed) cfg.base_seed = *o.seed;
    if (o.out) cfg.output_dir = *o.out;
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();
    return cfg;
}

fs::path prepare_output(const RunConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.resolved") << format_config(cfg);
    return dir;
}

fs::path truth_path(const fs::path& dir, std::size_t run) { return dir / ("truth_run" + std::to_string(run) + ".csv"); }

fs::path measurement_path(const fs::path& dir, std::size_t run) {
    return dir / ("measurements_run" + std::to_string(run) + ".tbdz");
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& write) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write(os);
}

void write_simulation(const fs::path& dir, std::size_t run, const Simulation& sim) {
    write_file(truth_path(dir, run), [&](std::ostream& os) { write_truth_csv(os, run, sim.truth); });
    write_measurements(measurement_path(dir, run), sim.images);
}

std::vector<EstimateRow> flatten(std::vector<std::vector<EstimateRow>>& per_run) {
    std::vector<EstimateRow> rows;
    for (auto& r : per_run) rows.insert(rows.end(), r.begin(), r.end());
    return rows;
}

void write_metrics(const fs::path& dir, const std::string& suffix, const std::vector<MetricsRow>& metrics,
                   const std::vector<AggregateRow>& agg) {
    write_file(dir / ("metrics" + suffix + ".csv"), [&](std::ostream& os) { write_metrics_csv(os, metrics); });
    write_file(dir / ("aggregate" + suffix + ".csv"), [&](std::ostream& os) { write_aggregate_csv(os, agg); });
}

int cmd_simulate(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_output(cfg);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run) { write_simulation(dir, run, simulate_run(cfg, run)); });
    std::cout << "simulated " << cfg.runs << " runs into " << dir.string() << "\n";
    return 0;
}

int cmd_track(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_output(cfg);
    std::vector<fs::path> inputs;
    if (o.measurements.empty()) {
        for (std::size_t run = 0; run < cfg.runs; ++run) inputs.push_back(measurement_path(dir, run));
    } else {
        inputs.assign(o.measurements.begin(), o.measurements.end());
    }
    std::vector<std::vector<EstimateRow>> per_run(inputs.size());
    parallel_for(inputs.size(), cfg.threads, [&](std::size_t run) {
        per_run[run] = track_run(cfg, run, read_measurements(inputs[run])).rows;
    });
    const auto rows = flatten(per_run);
    write_file(dir / "estimates.csv", [&](std::ostream& os) { write_estimates_csv(os, rows); });
    std::cout << "tracked " << inputs.size() << " runs into " << (dir / "estimates.csv").string() << "\n";
    return 0;
}

int cmd_evaluate(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_output(cfg);
    std::vector<fs::path> truth_files;
    if (o.truth.empty()) {
        for (std::size_t run = 0; run < cfg.runs; ++run) truth_files.push_back(truth_path(dir, run));
    } else {
        truth_files.assign(o.truth.begin(), o.truth.end());
    }
    const fs::path est_path = o.estimates.empty() ? dir / "estimates.csv" : fs::path(o.estimates);
    const auto estimates = read_estimates_csv(est_path);

    std::vector<std::vector<EstimateRow>> by_run(truth_files.size());
    for (const auto& r : estimates) {
        if (r.run >= truth_files.size()) {
            throw LengthMismatch("estimates reference run " + std::to_string(r.run) + " but only " +
                                 std::to_string(truth_files.size()) + " truth files were given");
        }
        by_run[r.run].push_back(r);
    }
    std::vector<MetricsRow> metrics;
    for (std::size_t run = 0; run < truth_files.size(); ++run) {
        const GroundTruth truth = read_truth_csv(truth_files[run], cfg.scenario.steps);
        const auto rows = evaluate_rows(run, truth, by_run[run], cfg.gospa);
        metrics.insert(metrics.end(), rows.begin(), rows.end());
    }
    write_metrics(dir, "", metrics, aggregate(metrics, cfg.scenario.steps));
    std::cout << "evaluated " << truth_files.size() << " runs into " << (dir / "metrics.csv").string() << "\n";
    return 0;
}

int cmd_all(const Options& o) {
    const RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_output(cfg);
    std::vector<std::vector<EstimateRow>> per_run(cfg.runs);
    std::vector<std::vector<MetricsRow>> metrics_per_run(cfg.runs);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run) {
        const Simulation sim = simulate_run(cfg, run);
        write_simulation(dir, run, sim);
        per_run[run] = track_run(cfg, run, sim.images).rows;
        metrics_per_run[run] = evaluate_rows(run, sim.truth, per_run[run], cfg.gospa);
    });
    const auto rows = flatten(per_run);
    write_file(dir / "estimates.csv", [&](std::ostream& os) { write_estimates_csv(os, rows); });
    std::vector<MetricsRow> metrics;
    for (const auto& m : metrics_per_run) metrics.insert(metrics.end(), m.begin(), m.end());
    write_metrics(dir, "", metrics, aggregate(metrics, cfg.scenario.steps));
    std::cout << "completed " << cfg.runs << " runs into " << dir.string() << "\n";
    return 0;
}

int cmd_sweep(const Options& o) {
    const RunConfig base = resolve_config(o);
    if (o.axis.empty()) throw ConfigInvalid("sweep needs --axis");
    const auto axes = sweep_axes();
    if (std::find(axes.begin(), axes.end(), o.axis) == axes.end()) {
        throw UnknownAxis("unknown sweep axis '" + o.axis + "' (expected gamma0, sigma_s_sq or L)");
    }
    std::vector<double> values;
    if (!trim(o.values).empty()) {
        for (auto v : split(o.values, ',')) {
            try {
                values.push_back(parse_double(v));
            } catch (const std::invalid_argument& e) {
                throw ConfigInvalid(std::string("--values: ") + e.what());
            }
        }
    }
    if (values.empty()) throw ConfigInvalid("sweep needs a non-empty --values list");

    const fs::path dir = prepare_output(base);
    std::ostringstream summary;
    summary << "value,mean_gospa,stderr\n";
    for (double value : values) {
        RunConfig cfg = base;
        apply_axis(cfg, o.axis, value);
        cfg.validate();
        const ExperimentResult r = run_experiment(cfg);
        const std::string suffix = "_" + o.axis + "_" + format_double(value);
        write_metrics(dir, suffix, r.metrics, r.aggregate);

        double mean = 0.0;
        for (double x : r.run_mean_gospa) mean += x;
        const double n = static_cast<double>(r.run_mean_gospa.size());
        mean /= n;
        double ss = 0.0;
        for (double x : r.run_mean_gospa) ss += (x - mean) * (x - mean);
        const double se = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
        summary << format_double(value) << ',' << format_double(mean) << ',' << format_double(se) << '\n';
        std::cout << o.axis << " = " << format_double(value) << ": mean GOSPA " << mean << " +- " << se << "\n";
    }
    write_file(dir / ("sweep_" + o.axis + ".csv"), [&](std::ostream& os) { os << summary.str(); });
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Track-before-detect belief propagation tracker: simulate, track, evaluate and sweep"};
    app.require_subcommand(1);
    Options o;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key = value configuration file (defaults when omitted)");
        sub->add_option("--runs", o.runs, "override run.runs");
        sub->add_option("--seed", o.seed, "override run.base_seed");
        sub->add_option("--out", o.out, "override run.output_dir");
        sub->add_option("--threads", o.threads, "override run.threads");
    };

    auto* simulate_cmd = app.add_subcommand("simulate", "write truth CSVs and measurement files per run");
    add_common(simulate_cmd);
    auto* track_cmd = app.add_subcommand("track", "run the tracker over measurement files");
    add_common(track_cmd);
    track_cmd->add_option("measurements", o.measurements, "measurement files in run order (default: output dir)");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "GOSPA of estimates against truth");
    add_common(evaluate_cmd);
    evaluate_cmd->add_option("--truth", o.truth, "truth CSVs in run order (default: output dir)");
    evaluate_cmd->add_option("--estimates", o.estimates, "estimates CSV (default: <out>/estimates.csv)");
    auto* sweep_cmd = app.add_subcommand("sweep", "aggregate GOSPA for each value of one parameter");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--axis", o.axis, "gamma0 | sigma_s_sq | L");
    sweep_cmd->add_option("--values", o.values, "comma-separated values");
    auto* all_cmd = app.add_subcommand("all", "simulate, track and evaluate in one pass");
    add_common(all_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate_cmd->parsed()) return cmd_simulate(o);
        if (track_cmd->parsed()) return cmd_track(o);
        if (evaluate_cmd->parsed()) return cmd_evaluate(o);
        if (sweep_cmd->parsed()) return cmd_sweep(o);
        if (all_cmd->parsed()) return cmd_all(o);
    } catch (const ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownAxis& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatMismatch& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const LengthMismatch& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace tbd
