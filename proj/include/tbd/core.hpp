#pragma once

#include "tbd/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace tbd {

using Vec2 = Eigen::Vector2d;
using Rng = std::mt19937_64;

/// Position [m], velocity [m/step] and intensity of one object.
struct KinematicState {
    Vec2 p = Vec2::Zero();
    Vec2 v = Vec2::Zero();
    double gamma = 0.0;

    [[nodiscard]] bool valid() const;
};

/// Weighted particle cloud. Weights are kept in the log domain.
struct ParticleSet {
    std::vector<KinematicState> particles;
    std::vector<double> log_weights;

    [[nodiscard]] std::size_t size() const { return particles.size(); }
    [[nodiscard]] bool empty() const { return particles.empty(); }
    [[nodiscard]] bool is_normalized(double tol = 1e-9) const;

    /// Equal weights -ln(n) over the given particles.
    static ParticleSet uniform(std::vector<KinematicState> particles);
};

/// A hypothesised object: existence probability plus the spatial pdf given
/// existence. The non-existence branch is carried only as 1 - existence.
struct PotentialObject {
    std::int64_t label = 0;
    double existence = 0.0;
    ParticleSet spatial;
    int born_at = 0;
    std::optional<std::size_t> origin_cell;
};

/// Regular grid of data cells. Cell j = row * cols + col; row grows along y.
struct GridGeometry {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec2 cell_extent = Vec2::Ones();
    Vec2 origin = Vec2::Zero();

    [[nodiscard]] std::size_t cell_count() const { return rows * cols; }
    [[nodiscard]] std::size_t index(std::size_t row, std::size_t col) const { return row * cols + col; }
    [[nodiscard]] std::size_t row_of(std::size_t j) const { return j / cols; }
    [[nodiscard]] std::size_t col_of(std::size_t j) const { return j % cols; }
    [[nodiscard]] Vec2 cell_center(std::size_t j) const;
    [[nodiscard]] Vec2 cell_min(std::size_t j) const;
    [[nodiscard]] Vec2 extent() const;
    [[nodiscard]] bool contains(const Vec2& p) const;

    bool operator==(const GridGeometry& other) const;
};

/// One frame of raw sensor data: a d-vector per cell.
class MeasurementImage {
public:
    MeasurementImage() = default;
    MeasurementImage(GridGeometry geometry, std::size_t d);

    [[nodiscard]] const GridGeometry& geometry() const { return geometry_; }
    [[nodiscard]] std::size_t d() const { return d_; }
    [[nodiscard]] std::size_t cell_count() const { return geometry_.cell_count(); }

    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> cell(std::size_t j) const {
        return {values_.data() + j * d_, static_cast<Eigen::Index>(d_)};
    }
    [[nodiscard]] Eigen::Map<Eigen::VectorXd> cell(std::size_t j) {
        return {values_.data() + j * d_, static_cast<Eigen::Index>(d_)};
    }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::span<double> values() { return values_; }

    /// Throws FormatMismatch if any entry is non-finite.
    void validate() const;

private:
    GridGeometry geometry_;
    std::size_t d_ = 0;
    std::vector<double> values_;
};

struct GaussianMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// log(sum(exp(values))); -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> values);

/// Shifts log-weights so that they sum to one in the linear domain.
ParticleSet normalize(ParticleSet ps);

/// Systematic (low-variance) resampling indices for normalized log-weights.
std::vector<std::size_t> systematic_indices(std::span<const double> log_weights, std::size_t count, Rng& rng);

ParticleSet resample(const ParticleSet& ps, std::size_t count, Rng& rng);

struct WeightedMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd second_moment;
};

/// Weighted first and (non-central) second moment of f over a normalized set.
template <typename F>
WeightedMoments weighted_moments(const ParticleSet& ps, F&& f) {
    WeightedMoments out;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double w = std::exp(ps.log_weights[i]);
        const Eigen::VectorXd y = f(ps.particles[i]);
        if (i == 0) {
            out.mean = Eigen::VectorXd::Zero(y.size());
            out.second_moment = Eigen::MatrixXd::Zero(y.size(), y.size());
        }
        out.mean += w * y;
        out.second_moment += w * y * y.transpose();
    }
    return out;
}

/// MMSE state of a normalized set.
KinematicState weighted_mean_state(const ParticleSet& ps);

/// 64-bit splitmix finalizer, used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tbd
