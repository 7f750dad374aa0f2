#pragma once

#include "tbd/core.hpp"
#include "tbd/simulator.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace tbd {

/// GOSPA with alpha = 2 (the decomposable form).
struct GospaConfig {
    double cutoff = 1.0;
    double order = 2.0;

    void validate() const;
};

/// Components are pre-root sums; total = (localization + missed + false)^(1/p).
struct GospaResult {
    double total = 0.0;
    double localization = 0.0;
    double missed_cost = 0.0;
    double false_cost = 0.0;
    std::size_t missed_count = 0;
    std::size_t false_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> assignment;  // (truth, estimate)
};

/// Minimum-cost assignment of every row to a distinct column (rows <= cols)
/// by shortest augmenting paths. Returns the column of each row.
std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost);

GospaResult gospa(std::span<const Vec2> truth, std::span<const Vec2> estimates, const GospaConfig& cfg);

/// Exhaustive enumeration over partial assignments; |truth| + |estimates| <= 14.
GospaResult gospa_bruteforce(std::span<const Vec2> truth, std::span<const Vec2> estimates, const GospaConfig& cfg);

/// Position-only GOSPA for each step k = 1..K.
std::vector<GospaResult> evaluate_run(const GroundTruth& truth, const std::vector<std::vector<Vec2>>& estimates,
                                      const GospaConfig& cfg);

}  // namespace tbd
