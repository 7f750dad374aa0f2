#pragma once

// Test-side helpers. Formulas here are written out independently of the
// library so that they can serve as oracles.

#include "tbd/core.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace tbd::test {

/// gamma / (2 pi s2) * exp(-|p - c|^2 / (2 s2)), written out long-hand.
inline double kernel_oracle(double gamma, double px, double py, double cx, double cy, double s2) {
    const double dx = px - cx;
    const double dy = py - cy;
    return gamma / (2.0 * std::numbers::pi * s2) * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
}

/// log N(z; m, S) for 2-vectors with a closed-form 2 x 2 inverse.
inline double log_normal2(double z0, double z1, double m0, double m1, double s00, double s01, double s11) {
    const double det = s00 * s11 - s01 * s01;
    const double a = z0 - m0;
    const double b = z1 - m1;
    const double quad = (s11 * a * a - 2.0 * s01 * a * b + s00 * b * b) / det;
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
}

inline ParticleSet gaussian_cloud(std::size_t n, const Vec2& mean, double sd, double gamma, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<KinematicState> particles(n);
    for (auto& x : particles) {
        x.p = mean + sd * Vec2(n01(rng), n01(rng));
        x.v = Vec2::Zero();
        x.gamma = gamma;
    }
    return ParticleSet::uniform(std::move(particles));
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Standard error of the mean with the n - 1 denominator.
inline double stderr_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double n = static_cast<double>(v.size());
    return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace tbd::test
