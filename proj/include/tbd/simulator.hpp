#pragma once

#include "tbd/core.hpp"
#include "tbd/models.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace tbd {

inline constexpr int kNeverDies = std::numeric_limits<int>::max();

/// Ground-truth scenario and sensor parameters. Defaults reproduce the
/// five-object, 50-step, 32 x 32 pixel experiment.
struct ScenarioConfig {
    Vec2 roi_min{0.0, 0.0};
    Vec2 roi_max{32.0, 32.0};
    std::size_t grid_rows = 32;
    std::size_t grid_cols = 32;
    int steps = 50;
    std::size_t object_count = 5;
    std::vector<int> birth_steps{1, 5, 10, 15, 20};
    std::vector<int> death_steps{31, 36, 41, 46, kNeverDies};
    Vec2 spawn_min{8.0, 8.0};
    Vec2 spawn_max{24.0, 24.0};
    double gamma0 = 60.0;
    double sigma_s_sq = 0.5;
    double sigma_eps_sq = 1.0;
    double q_pv = 1e-3;
    double q_gamma = 1e-4;
    double init_velocity_var = 1e-2;
    /// When set, spawn positions and velocities come from this seed instead of
    /// the run's stream, so every run shares one layout.
    std::optional<std::uint64_t> layout_seed;

    void validate() const;
    [[nodiscard]] GridGeometry geometry() const;
    [[nodiscard]] PsfModel psf() const;
    [[nodiscard]] MotionModel truth_motion() const;
};

struct TruthObject {
    int id = 0;
    KinematicState state;
};

/// Objects alive at each step k = 1..K (steps[k - 1]).
struct GroundTruth {
    std::vector<std::vector<TruthObject>> steps;

    [[nodiscard]] int step_count() const { return static_cast<int>(steps.size()); }
    [[nodiscard]] const std::vector<TruthObject>& at(int k) const { return steps.at(static_cast<std::size_t>(k - 1)); }
};

GroundTruth generate_truth(const ScenarioConfig& cfg, Rng& rng);

/// z_j = sum over alive objects of h_{j,n} + eps_j with independent Gaussian draws.
MeasurementImage render_measurement(std::span<const TruthObject> alive, const PsfModel& psf,
                                    const GridGeometry& geometry, Rng& rng);

struct Simulation {
    GroundTruth truth;
    std::vector<MeasurementImage> images;  // images[k - 1]
};

/// Truth first, then all frames, from a single stream.
Simulation simulate(const ScenarioConfig& cfg, Rng& rng);

}  // namespace tbd
