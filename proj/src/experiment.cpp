#include "tbd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace tbd {

RunSeeds derive_seeds(std::uint64_t base_seed, std::size_t run_index) {
    RunSeeds s;
    s.run = base_seed ^ splitmix64(static_cast<std::uint64_t>(run_index));
    s.simulation = splitmix64(s.run ^ kSimulationStream);
    s.tracking = splitmix64(s.run ^ kTrackingStream);
    return s;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        while (!failed.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

Simulation simulate_run(const RunConfig& cfg, std::size_t run) {
    Rng rng(derive_seeds(cfg.base_seed, run).simulation);
    return simulate(cfg.scenario, rng);
}

TrackOutput track_run(const RunConfig& cfg, std::size_t run, const std::vector<MeasurementImage>& frames) {
    const GridGeometry expected = cfg.scenario.geometry();
    const Models models = cfg.models();
    for (const auto& z : frames) {
        if (!(z.geometry() == expected) || z.d() != models.psf.d) {
            throw FormatMismatch("measurement geometry does not match the configured grid");
        }
        z.validate();
    }
    Tracker tracker(models, cfg.engine, derive_seeds(cfg.base_seed, run).tracking);
    TrackOutput out;
    for (const auto& z : frames) {
        const StepResult& r = tracker.process(z);
        out.message_loop_seconds += r.stats.message_loop_seconds;
        for (const auto& po : r.pos) {
            EstimateRow row;
            row.run = run;
            row.k = tracker.time();
            row.label = po.label;
            row.existence = po.existence;
            row.state = weighted_mean_state(po.spatial);
            row.declared = po.existence > cfg.engine.declare_threshold;
            out.rows.push_back(row);
        }
    }
    return out;
}

std::vector<std::vector<Vec2>> declared_positions(std::span<const EstimateRow> rows, int steps) {
    std::vector<std::vector<Vec2>> out(static_cast<std::size_t>(steps));
    for (const auto& r : rows) {
        if (r.k < 1 || r.k > steps) {
            throw LengthMismatch("estimate at step " + std::to_string(r.k) + " outside 1.." + std::to_string(steps));
        }
        if (r.declared) out[static_cast<std::size_t>(r.k - 1)].push_back(r.state.p);
    }
    return out;
}

std::vector<MetricsRow> evaluate_rows(std::size_t run, const GroundTruth& truth, std::span<const EstimateRow> rows,
                                      const GospaConfig& cfg) {
    const auto per_step = evaluate_run(truth, declared_positions(rows, truth.step_count()), cfg);
    std::vector<MetricsRow> out;
    out.reserve(per_step.size());
    for (std::size_t i = 0; i < per_step.size(); ++i) {
        const auto& g = per_step[i];
        out.push_back({run, static_cast<int>(i + 1), g.total, g.localization, g.missed_cost, g.false_cost});
    }
    return out;
}

std::vector<AggregateRow> aggregate(std::span<const MetricsRow> metrics, int steps) {
    std::vector<std::vector<double>> by_k(static_cast<std::size_t>(steps));
    for (const auto& m : metrics) {
        if (m.k < 1 || m.k > steps) throw LengthMismatch("metrics row at step " + std::to_string(m.k));
        by_k[static_cast<std::size_t>(m.k - 1)].push_back(m.gospa);
    }
    std::vector<AggregateRow> out;
    for (int k = 1; k <= steps; ++k) {
        const auto& v = by_k[static_cast<std::size_t>(k - 1)];
        AggregateRow row{k, 0.0, 0.0};
        if (!v.empty()) {
            double sum = 0.0;
            for (double x : v) sum += x;
            row.mean_gospa = sum / static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - row.mean_gospa) * (x - row.mean_gospa);
                const double n = static_cast<double>(v.size());
                row.stderr_gospa = std::sqrt(ss / (n - 1.0) / n);
            }
        }
        out.push_back(row);
    }
    return out;
}

ExperimentResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<MetricsRow>> per_run(cfg.runs);
    std::vector<double> seconds(cfg.runs, 0.0);
    parallel_for(cfg.runs, cfg.threads, [&](std::size_t run) {
        const Simulation sim = simulate_run(cfg, run);
        const TrackOutput tracked = track_run(cfg, run, sim.images);
        per_run[run] = evaluate_rows(run, sim.truth, tracked.rows, cfg.gospa);
        seconds[run] = tracked.message_loop_seconds;
    });

    ExperimentResult result;
    for (std::size_t run = 0; run < cfg.runs; ++run) {
        double sum = 0.0;
        for (const auto& m : per_run[run]) sum += m.gospa;
        result.run_mean_gospa.push_back(sum / static_cast<double>(per_run[run].size()));
        result.message_loop_seconds += seconds[run];
        result.metrics.insert(result.metrics.end(), per_run[run].begin(), per_run[run].end());
    }
    result.aggregate = aggregate(result.metrics, cfg.scenario.steps);
    return result;
}

std::vector<std::string> sweep_axes() { return {"gamma0", "sigma_s_sq", "L"}; }

void apply_axis(RunConfig& cfg, const std::string& axis, double value) {
    if (axis == "gamma0") {
        cfg.scenario.gamma0 = value;
    } else if (axis == "sigma_s_sq") {
        cfg.scenario.sigma_s_sq = value;
    } else if (axis == "L") {
        if (!(value >= 1.0) || value != std::floor(value)) throw ConfigInvalid("L must be a positive integer");
        cfg.engine.iterations = static_cast<std::size_t>(value);
    } else {
        throw UnknownAxis("unknown sweep axis '" + axis + "' (expected gamma0, sigma_s_sq or L)");
    }
}

}  // namespace tbd
