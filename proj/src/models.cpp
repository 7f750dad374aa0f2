#include "tbd/models.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace tbd {

void MotionModel::validate() const {
    if (!(q_pv > 0.0)) throw ConfigInvalid("motion.q_pv must be > 0");
    if (!(q_gamma > 0.0)) throw ConfigInvalid("motion.q_gamma must be > 0");
    if (!(dt > 0.0)) throw ConfigInvalid("motion.dt must be > 0");
    if (!(survival > 0.0 && survival <= 1.0)) throw ConfigInvalid("motion.survival must be in (0, 1]");
}

KinematicState motion_sample(const KinematicState& x, const MotionModel& m, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double dt = m.dt;
    // Cholesky factor of q [[dt^3/3, dt^2/2], [dt^2/2, dt]].
    const double l11 = std::sqrt(dt * dt * dt / 3.0);
    const double l21 = (dt * dt / 2.0) / l11;
    const double l22 = std::sqrt(dt - l21 * l21);
    const double sq = std::sqrt(m.q_pv);

    KinematicState out;
    for (int axis = 0; axis < 2; ++axis) {
        const double e1 = n01(rng);
        const double e2 = n01(rng);
        out.p[axis] = x.p[axis] + x.v[axis] * dt + sq * l11 * e1;
        out.v[axis] = x.v[axis] + sq * (l21 * e1 + l22 * e2);
    }
    out.gamma = std::max(x.gamma + std::sqrt(m.q_gamma) * n01(rng), 0.0);
    return out;
}

PsfModel PsfModel::isotropic(double sigma_s_sq, double sigma_eps_sq, std::size_t d) {
    PsfModel psf;
    psf.sigma_s_sq = sigma_s_sq;
    psf.d = d;
    psf.noise_cov = sigma_eps_sq * Eigen::MatrixXd::Identity(d, d);
    psf.mean_offset = Eigen::VectorXd::Zero(d);
    psf.mean_gain = Eigen::VectorXd::Zero(d);
    return psf;
}

void PsfModel::validate() const {
    if (!(sigma_s_sq > 0.0)) throw ConfigInvalid("psf.sigma_s_sq must be > 0");
    if (d == 0) throw ConfigInvalid("psf.d must be >= 1");
    const auto n = static_cast<Eigen::Index>(d);
    if (noise_cov.rows() != n || noise_cov.cols() != n) throw ConfigInvalid("psf.noise_cov must be d x d");
    if ((noise_cov - noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ConfigInvalid("psf.noise_cov must be symmetric");
    }
    if (Eigen::LLT<Eigen::MatrixXd>(noise_cov).info() != Eigen::Success) {
        throw ConfigInvalid("psf.noise_cov must be positive definite");
    }
    if (mean_offset.size() != n || mean_gain.size() != n) throw ConfigInvalid("psf mean terms must have length d");
}

double PsfModel::kernel(const KinematicState& x, const Vec2& cell_center) const {
    const double dist_sq = (x.p - cell_center).squaredNorm();
    return x.gamma / (2.0 * std::numbers::pi * sigma_s_sq) * std::exp(-dist_sq / (2.0 * sigma_s_sq));
}

bool PsfModel::has_mean() const {
    return !mean_offset.isZero(0.0) || !mean_gain.isZero(0.0);
}

Eigen::MatrixXd psf_cov(const KinematicState& x, std::size_t j, const PsfModel& psf, const GridGeometry& geometry) {
    const auto n = static_cast<Eigen::Index>(psf.d);
    return psf.kernel(x, geometry.cell_center(j)) * Eigen::MatrixXd::Identity(n, n);
}

Eigen::VectorXd psf_mean(const KinematicState& x, std::size_t j, const PsfModel& psf, const GridGeometry& geometry) {
    if (!psf.has_mean()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(psf.d));
    return psf.mean_offset + psf.mean_gain * psf.kernel(x, geometry.cell_center(j));
}

double gaussian_log_density(const Eigen::VectorXd& z, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw SingularCovariance("covariance is not positive definite");
    const Eigen::VectorXd diff = z - mean;
    const Eigen::VectorXd white = llt.matrixL().solve(diff);
    const auto& lower = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(lower(i, i));
    const double dim = static_cast<double>(z.size());
    return -0.5 * (dim * std::log(2.0 * std::numbers::pi) + log_det + white.squaredNorm());
}

double loglik_given_states(const Eigen::VectorXd& z_j, std::span<const KinematicState> states, const PsfModel& psf,
                           const GridGeometry& geometry, std::size_t j) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(psf.d));
    Eigen::MatrixXd cov = psf.noise_cov;
    for (const auto& x : states) {
        mean += psf_mean(x, j, psf, geometry);
        cov += psf_cov(x, j, psf, geometry);
    }
    return gaussian_log_density(z_j, mean, cov);
}

void BirthModel::validate() const {
    if (!(p_birth > 0.0 && p_birth < 1.0)) throw ConfigInvalid("birth.p_birth must be in (0, 1)");
    if (!(gamma_max > 0.0)) throw ConfigInvalid("birth.gamma_max must be > 0");
    if (!(v_var > 0.0)) throw ConfigInvalid("birth.v_var must be > 0");
    if (!(detect_threshold >= 0.0)) throw ConfigInvalid("birth.detect_threshold must be >= 0");
}

double BirthModel::default_threshold(double gamma0, double sigma_s_sq, double sigma_eps_sq) {
    return 1.5 * std::sqrt(gamma0 / (2.0 * std::numbers::pi * sigma_s_sq) + sigma_eps_sq);
}

std::vector<std::size_t> birth_candidates(const MeasurementImage& z, const BirthModel& b) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < z.cell_count(); ++j) {
        if (z.cell(j).norm() > b.detect_threshold) out.push_back(j);
    }
    return out;
}

KinematicState birth_sample(std::size_t j, const BirthModel& b, const GridGeometry& geometry, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> vel(0.0, std::sqrt(b.v_var));
    const Vec2 lo = geometry.cell_min(j);
    KinematicState x;
    x.p = Vec2(lo.x() + unit(rng) * geometry.cell_extent.x(), lo.y() + unit(rng) * geometry.cell_extent.y());
    x.v = Vec2(vel(rng), vel(rng));
    x.gamma = unit(rng) * b.gamma_max;
    return x;
}

double birth_prob_from_rate(double mu_bj) {
    if (!(mu_bj >= 0.0)) throw NegativeRate("expected birth count must be >= 0, got " + std::to_string(mu_bj));
    return mu_bj / (mu_bj + 1.0);
}

}  // namespace tbd
