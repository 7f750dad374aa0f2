#pragma once

#include "tbd/config.hpp"
#include "tbd/io.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tbd {

/// Seeds of one Monte-Carlo run.
///   run        = base_seed XOR splitmix64(run_index)
///   simulation = splitmix64(run ^ kSimulationStream)
///   tracking   = splitmix64(run ^ kTrackingStream)
struct RunSeeds {
    std::uint64_t run = 0;
    std::uint64_t simulation = 0;
    std::uint64_t tracking = 0;
};

inline constexpr std::uint64_t kSimulationStream = 0x53494d554c415445ULL;  // "SIMULATE"
inline constexpr std::uint64_t kTrackingStream = 0x545241434b494e47ULL;    // "TRACKING"

RunSeeds derive_seeds(std::uint64_t base_seed, std::size_t run_index);

/// Calls fn(i) for i in [0, n) on up to `threads` workers. The first exception
/// thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

Simulation simulate_run(const RunConfig& cfg, std::size_t run);

struct TrackOutput {
    std::vector<EstimateRow> rows;  // every surviving PO at every step
    double message_loop_seconds = 0.0;
};

/// Runs the tracker over one run's frames. Throws FormatMismatch when the
/// frames disagree with the configured grid.
TrackOutput track_run(const RunConfig& cfg, std::size_t run, const std::vector<MeasurementImage>& frames);

/// Declared positions per step k = 1..steps from rows of a single run.
std::vector<std::vector<Vec2>> declared_positions(std::span<const EstimateRow> rows, int steps);

std::vector<MetricsRow> evaluate_rows(std::size_t run, const GroundTruth& truth, std::span<const EstimateRow> rows,
                                      const GospaConfig& cfg);

/// Per-step mean and standard error (n - 1 denominator) across runs.
std::vector<AggregateRow> aggregate(std::span<const MetricsRow> metrics, int steps);

struct ExperimentResult {
    std::vector<MetricsRow> metrics;       // run-major, then k
    std::vector<AggregateRow> aggregate;
    std::vector<double> run_mean_gospa;    // time-averaged GOSPA of each run
    double message_loop_seconds = 0.0;     // summed over runs
};

/// simulate -> track -> evaluate for every run, in memory.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Axis names accepted by apply_axis.
std::vector<std::string> sweep_axes();

/// Sets gamma0, sigma_s_sq or L (engine iterations). Throws UnknownAxis.
void apply_axis(RunConfig& cfg, const std::string& axis, double value);

}  // namespace tbd
