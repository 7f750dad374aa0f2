#pragma once

#include "tbd/core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tbd {

/// Near-constant-velocity motion per axis plus a random walk on intensity.
struct MotionModel {
    double q_pv = 1e-3;     // driving-noise variance, per axis
    double q_gamma = 1e-4;  // intensity random-walk variance
    double dt = 1.0;
    double survival = 0.999;

    void validate() const;
};

/// p' = p + v dt + n_p, v' = v + n_v with the discretized white-acceleration
/// covariance q [[dt^3/3, dt^2/2], [dt^2/2, dt]] per axis; gamma' = max(gamma + n_g, 0).
KinematicState motion_sample(const KinematicState& x, const MotionModel& m, Rng& rng);

/// Point-spread model of the contribution h_j of one object to cell j.
///
/// cov:  C_j(x) = k_j(x) I_d  with  k_j(x) = gamma / (2 pi s^2) exp(-|p - p_j|^2 / (2 s^2))
/// mean: mu_j(x) = mean_offset + mean_gain * k_j(x)
///
/// The default mean is zero. The offset/gain terms exist so that models with a
/// nonzero contribution mean can be exercised through the same code paths.
struct PsfModel {
    double sigma_s_sq = 0.5;
    std::size_t d = 2;
    Eigen::MatrixXd noise_cov = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd mean_offset = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd mean_gain = Eigen::VectorXd::Zero(2);

    /// Zero-mean model with C_eps = sigma_eps_sq * I_d.
    static PsfModel isotropic(double sigma_s_sq, double sigma_eps_sq, std::size_t d = 2);

    void validate() const;

    [[nodiscard]] double kernel(const KinematicState& x, const Vec2& cell_center) const;
    [[nodiscard]] bool has_mean() const;
};

Eigen::MatrixXd psf_cov(const KinematicState& x, std::size_t j, const PsfModel& psf, const GridGeometry& geometry);
Eigen::VectorXd psf_mean(const KinematicState& x, std::size_t j, const PsfModel& psf, const GridGeometry& geometry);

/// log N(z; mean, cov). Throws SingularCovariance when cov is not positive definite.
double gaussian_log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Exact log-likelihood of cell j given a fixed set of existing objects.
double loglik_given_states(const Eigen::VectorXd& z_j, std::span<const KinematicState> states, const PsfModel& psf,
                           const GridGeometry& geometry, std::size_t j);

struct BirthModel {
    double p_birth = 1e-5;
    double gamma_max = 120.0;
    double v_var = 1e-2;
    double detect_threshold = 0.0;

    void validate() const;

    /// 1.5 * sqrt(gamma0 / (2 pi sigma_s_sq) + sigma_eps_sq)
    static double default_threshold(double gamma0, double sigma_s_sq, double sigma_eps_sq);
};

/// Cells whose Euclidean norm exceeds the detection threshold, ascending.
std::vector<std::size_t> birth_candidates(const MeasurementImage& z, const BirthModel& b);

/// Draw from the per-cell birth pdf: uniform position inside the cell,
/// Gaussian velocity, uniform intensity on [0, gamma_max].
KinematicState birth_sample(std::size_t j, const BirthModel& b, const GridGeometry& geometry, Rng& rng);

/// Birth probability of a cell from its expected number of new objects.
double birth_prob_from_rate(double mu_bj);

}  // namespace tbd
