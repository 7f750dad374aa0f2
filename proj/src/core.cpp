#include "tbd/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tbd {

bool KinematicState::valid() const {
    return p.allFinite() && v.allFinite() && std::isfinite(gamma) && gamma >= 0.0;
}

bool ParticleSet::is_normalized(double tol) const {
    if (particles.empty() || particles.size() != log_weights.size()) return false;
    return std::abs(log_sum_exp(log_weights)) <= tol;
}

ParticleSet ParticleSet::uniform(std::vector<KinematicState> particles) {
    ParticleSet ps;
    const double lw = -std::log(static_cast<double>(particles.size()));
    ps.log_weights.assign(particles.size(), lw);
    ps.particles = std::move(particles);
    return ps;
}

Vec2 GridGeometry::cell_min(std::size_t j) const {
    return origin + Vec2(static_cast<double>(col_of(j)) * cell_extent.x(),
                         static_cast<double>(row_of(j)) * cell_extent.y());
}

Vec2 GridGeometry::cell_center(std::size_t j) const {
    return cell_min(j) + 0.5 * cell_extent;
}

Vec2 GridGeometry::extent() const {
    return Vec2(static_cast<double>(cols) * cell_extent.x(), static_cast<double>(rows) * cell_extent.y());
}

bool GridGeometry::contains(const Vec2& p) const {
    const Vec2 hi = origin + extent();
    return p.x() >= origin.x() && p.y() >= origin.y() && p.x() <= hi.x() && p.y() <= hi.y();
}

bool GridGeometry::operator==(const GridGeometry& other) const {
    return rows == other.rows && cols == other.cols && cell_extent == other.cell_extent && origin == other.origin;
}

MeasurementImage::MeasurementImage(GridGeometry geometry, std::size_t d)
    : geometry_(geometry), d_(d), values_(geometry.cell_count() * d, 0.0) {}

void MeasurementImage::validate() const {
    if (values_.size() != geometry_.cell_count() * d_) {
        throw FormatMismatch("measurement image size does not match its geometry");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw FormatMismatch("measurement image contains a non-finite value");
    }
}

double log_sum_exp(std::span<const double> values) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (values.empty()) return neg_inf;
    const double hi = *std::max_element(values.begin(), values.end());
    if (hi == neg_inf) return neg_inf;
    if (hi == std::numeric_limits<double>::infinity()) return hi;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - hi);
    return hi + std::log(sum);
}

ParticleSet normalize(ParticleSet ps) {
    const double total = log_sum_exp(ps.log_weights);
    if (!std::isfinite(total)) throw AllWeightsDegenerate();
    for (double& lw : ps.log_weights) lw -= total;
    return ps;
}

std::vector<std::size_t> systematic_indices(std::span<const double> log_weights, std::size_t count, Rng& rng) {
    const double total = log_sum_exp(log_weights);
    if (!std::isfinite(total)) throw AllWeightsDegenerate();

    std::vector<double> cumulative(log_weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        acc += std::exp(log_weights[i] - total);
        cumulative[i] = acc;
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double step = acc / static_cast<double>(count);
    double u = unit(rng) * step;

    std::vector<std::size_t> out;
    out.reserve(count);
    std::size_t i = 0;
    const std::size_t last = log_weights.size() - 1;
    for (std::size_t m = 0; m < count; ++m) {
        while (i < last && cumulative[i] <= u) ++i;
        out.push_back(i);
        u += step;
    }
    return out;
}

ParticleSet resample(const ParticleSet& ps, std::size_t count, Rng& rng) {
    const auto idx = systematic_indices(ps.log_weights, count, rng);
    std::vector<KinematicState> particles;
    particles.reserve(count);
    for (std::size_t i : idx) particles.push_back(ps.particles[i]);
    return ParticleSet::uniform(std::move(particles));
}

KinematicState weighted_mean_state(const ParticleSet& ps) {
    KinematicState mean;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double w = std::exp(ps.log_weights[i]);
        mean.p += w * ps.particles[i].p;
        mean.v += w * ps.particles[i].v;
        mean.gamma += w * ps.particles[i].gamma;
    }
    return mean;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace tbd
