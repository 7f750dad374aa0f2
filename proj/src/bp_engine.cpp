#include "tbd/bp_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace tbd {

namespace {

constexpr double kJitter = 1e-12;
constexpr std::size_t kNoCell = detail::all_cells;

double existence_from_log_masses(double log_present, double log_absent) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    if (log_present == neg_inf && log_absent == neg_inf) throw AllWeightsDegenerate("both existence branches vanished");
    if (log_present == neg_inf) return 0.0;
    if (log_absent == neg_inf) return 1.0;
    return 1.0 / (1.0 + std::exp(log_absent - log_present));
}

}  // namespace

// ---------------------------------------------------------------------------
// MomentTable

MomentTable::MomentTable(std::size_t cells, std::size_t d)
    : d_(d),
      total_mu_(cells, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))),
      total_spread_(cells, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))) {}

std::size_t MomentTable::add(std::vector<std::size_t> cells, std::vector<CellMoments> moments) {
    if (cells.size() != moments.size()) throw LengthMismatch("MomentTable::add: cells and moments differ in length");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        total_mu_[cells[i]] += moments[i].mu;
        total_spread_[cells[i]] += moments[i].spread();
    }
    pos_.push_back({std::move(cells), std::move(moments)});
    return pos_.size() - 1;
}

const CellMoments* MomentTable::own(std::size_t po, std::size_t cell) const {
    const auto& cells = pos_[po].cells;
    const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
    if (it == cells.end() || *it != cell) return nullptr;
    return &pos_[po].moments[static_cast<std::size_t>(it - cells.begin())];
}

Eigen::VectorXd MomentTable::loo_mean(std::size_t po, std::size_t cell) const {
    const CellMoments* m = own(po, cell);
    return m ? Eigen::VectorXd(total_mu_[cell] - m->mu) : total_mu_[cell];
}

Eigen::MatrixXd MomentTable::loo_spread(std::size_t po, std::size_t cell) const {
    const CellMoments* m = own(po, cell);
    return m ? Eigen::MatrixXd(total_spread_[cell] - m->spread()) : total_spread_[cell];
}

// ---------------------------------------------------------------------------
// Configuration

double GateRadius::resolve(const PsfModel& psf, const GridGeometry& geometry) const {
    switch (mode) {
    case Mode::automatic:
        return 4.0 * std::sqrt(psf.sigma_s_sq) + geometry.cell_extent.norm();
    case Mode::fixed:
        return meters;
    case Mode::disabled:
        break;
    }
    return std::numeric_limits<double>::infinity();
}

void EngineConfig::validate() const {
    if (iterations < 1) throw ConfigInvalid("engine.iterations must be >= 1");
    if (particles_per_po < 1) throw ConfigInvalid("engine.particles must be >= 1");
    if (!(prune_threshold > 0.0 && prune_threshold < declare_threshold && declare_threshold <= 1.0)) {
        throw ConfigInvalid("engine thresholds must satisfy 0 < prune_threshold < declare_threshold <= 1");
    }
    if (gate.mode == GateRadius::Mode::fixed && !(gate.meters > 0.0)) {
        throw ConfigInvalid("engine.gate_radius must be > 0");
    }
    if (max_pos && *max_pos < 1) throw ConfigInvalid("engine.max_pos must be >= 1");
}

// ---------------------------------------------------------------------------
// KappaLogs

KappaLogs::KappaLogs(std::vector<std::size_t> gated_cells, std::size_t particles)
    : cells(std::move(gated_cells)),
      particle_count(particles),
      present(cells.size() * particles, 0.0),
      absent(cells.size(), 0.0),
      present_total(particles, 0.0) {}

std::optional<std::size_t> KappaLogs::local_index(std::size_t cell) const {
    const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
    if (it == cells.end() || *it != cell) return std::nullopt;
    return static_cast<std::size_t>(it - cells.begin());
}

void KappaLogs::finalize() {
    std::fill(present_total.begin(), present_total.end(), 0.0);
    absent_total = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto row = present_row(c);
        for (std::size_t p = 0; p < particle_count; ++p) present_total[p] += row[p];
        absent_total += absent[c];
    }
}

// ---------------------------------------------------------------------------
// detail

namespace detail {

KappaCell::KappaCell(const Eigen::VectorXd& z_j, const Eigen::VectorXd& loo_mean, const Eigen::MatrixXd& loo_spread,
                     const PsfModel& psf)
    : d_(psf.d) {
    const auto n = static_cast<Eigen::Index>(d_);
    Eigen::MatrixXd base = psf.noise_cov + loo_spread;
    base = 0.5 * (base + base.transpose());
    base += kJitter * Eigen::MatrixXd::Identity(n, n);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(base);
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
        throw SingularCovariance("assembled kappa covariance is not positive definite");
    }
    eig_ = eig.eigenvalues();
    const Eigen::MatrixXd& basis = eig.eigenvectors();
    const Eigen::VectorXd centred = z_j - loo_mean;

    const_term_ = static_cast<double>(d_) * std::log(2.0 * std::numbers::pi);
    const Eigen::VectorXd white = basis.transpose() * centred;
    double log_det = 0.0;
    double quad = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        log_det += std::log(eig_[i]);
        quad += white[i] * white[i] / eig_[i];
    }
    absent_ = -0.5 * (const_term_ + log_det + quad);

    resid_ = basis.transpose() * (centred - psf.mean_offset);
    gain_ = basis.transpose() * psf.mean_gain;
}

double KappaCell::present(double k) const {
    double det = 1.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double var = eig_[ii] + k;
        const double r = resid_[ii] - gain_[ii] * k;
        det *= var;
        quad += r * r / var;
    }
    return -0.5 * (const_term_ + std::log(det) + quad);
}

std::vector<std::size_t> gated_cells(const Vec2& centre, double radius, const GridGeometry& geometry) {
    std::vector<std::size_t> out;
    if (!std::isfinite(radius)) {
        out.resize(geometry.cell_count());
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    if (!centre.allFinite()) return out;
    const auto clamp_index = [](double v, std::size_t n) -> long {
        return std::clamp(static_cast<long>(std::floor(v)), 0L, static_cast<long>(n) - 1);
    };
    const Vec2 rel_lo = (centre - geometry.origin).array() - radius;
    const Vec2 rel_hi = (centre - geometry.origin).array() + radius;
    if (rel_hi.x() < 0.0 || rel_hi.y() < 0.0) return out;
    const Vec2 ext = geometry.extent();
    if (rel_lo.x() > ext.x() || rel_lo.y() > ext.y()) return out;

    const long c0 = clamp_index(rel_lo.x() / geometry.cell_extent.x(), geometry.cols);
    const long c1 = clamp_index(rel_hi.x() / geometry.cell_extent.x(), geometry.cols);
    const long r0 = clamp_index(rel_lo.y() / geometry.cell_extent.y(), geometry.rows);
    const long r1 = clamp_index(rel_hi.y() / geometry.cell_extent.y(), geometry.rows);
    const double r_sq = radius * radius;
    for (long row = r0; row <= r1; ++row) {
        for (long col = c0; col <= c1; ++col) {
            const std::size_t j = geometry.index(static_cast<std::size_t>(row), static_cast<std::size_t>(col));
            if ((geometry.cell_center(j) - centre).squaredNorm() <= r_sq) out.push_back(j);
        }
    }
    return out;
}

double beta_weights(const AlphaMessage& alpha, const KappaLogs* logs, std::size_t local, std::vector<double>& out) {
    const auto& lw = alpha.spatial.log_weights;
    if (logs == nullptr) {
        out.assign(lw.begin(), lw.end());
        return alpha.existence_mass;
    }
    const std::size_t n = lw.size();
    out.resize(n);
    const bool leave_out = local != kNoCell;
    if (leave_out) {
        const auto row = logs->present_row(local);
        for (std::size_t p = 0; p < n; ++p) out[p] = lw[p] + (logs->present_total[p] - row[p]);
    } else {
        for (std::size_t p = 0; p < n; ++p) out[p] = lw[p] + logs->present_total[p];
    }
    const double spatial_mass = log_sum_exp(out);
    if (!std::isfinite(spatial_mass)) throw AllWeightsDegenerate("beta message underflowed; gating too tight?");
    for (double& v : out) v -= spatial_mass;

    const double absent = logs->absent_total - (leave_out ? logs->absent[local] : 0.0);
    const double log_present = std::log(alpha.existence_mass) + spatial_mass;
    const double log_absent = std::log1p(-alpha.existence_mass) + absent;
    return existence_from_log_masses(log_present, log_absent);
}

CellMoments moments_from_kernel(double existence, std::span<const double> kernel, std::span<const double> log_weights,
                                const PsfModel& psf) {
    const auto n = static_cast<Eigen::Index>(psf.d);
    double e1 = 0.0;
    double e2 = 0.0;
    const bool mean = psf.has_mean();
    for (std::size_t p = 0; p < kernel.size(); ++p) {
        const double w = std::exp(log_weights[p]);
        e1 += w * kernel[p];
        if (mean) e2 += w * kernel[p] * kernel[p];
    }
    CellMoments m;
    if (!mean) {
        m.mu = Eigen::VectorXd::Zero(n);
        m.r = existence * e1 * Eigen::MatrixXd::Identity(n, n);
        return m;
    }
    const Eigen::VectorXd& c = psf.mean_offset;
    const Eigen::VectorXd& g = psf.mean_gain;
    m.mu = existence * (c + g * e1);
    m.r = existence * (e1 * Eigen::MatrixXd::Identity(n, n) + c * c.transpose() +
                       e1 * (c * g.transpose() + g * c.transpose()) + e2 * g * g.transpose());
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

AlphaMessage predict(const PotentialObject& po, const MotionModel& m, Rng& rng) {
    AlphaMessage alpha;
    alpha.existence_mass = m.survival * po.existence;
    ParticleSet drawn = resample(po.spatial, po.spatial.size(), rng);
    for (auto& x : drawn.particles) x = motion_sample(x, m, rng);
    alpha.spatial = std::move(drawn);
    return alpha;
}

std::vector<NewPo> inject_new_pos(const MeasurementImage& z, const BirthModel& b, const EngineConfig& cfg,
                                  LabelAllocator& labels, Rng& rng) {
    std::vector<NewPo> out;
    for (std::size_t j : birth_candidates(z, b)) {
        std::vector<KinematicState> particles;
        particles.reserve(cfg.particles_per_po);
        for (std::size_t p = 0; p < cfg.particles_per_po; ++p) {
            particles.push_back(birth_sample(j, b, z.geometry(), rng));
        }
        NewPo po;
        po.alpha.existence_mass = b.p_birth;
        po.alpha.spatial = ParticleSet::uniform(std::move(particles));
        po.origin_cell = j;
        po.label = labels.next();
        out.push_back(std::move(po));
    }
    return out;
}

CellMoments compute_moments(const BetaMessage& beta, const ParticleSet& particles, const PsfModel& psf,
                            const GridGeometry& geometry, std::size_t j) {
    const Vec2 centre = geometry.cell_center(j);
    std::vector<double> kernel(particles.size());
    for (std::size_t p = 0; p < particles.size(); ++p) kernel[p] = psf.kernel(particles.particles[p], centre);
    return detail::moments_from_kernel(beta.existence_mass, kernel, beta.spatial_log_weights, psf);
}

double kappa_eval(const Eigen::VectorXd& z_j, const std::optional<GaussianMoments>& own,
                  const Eigen::VectorXd& loo_mean, const Eigen::MatrixXd& loo_spread, const PsfModel& psf) {
    const auto n = static_cast<Eigen::Index>(psf.d);
    Eigen::VectorXd mean = loo_mean;
    Eigen::MatrixXd cov = psf.noise_cov + loo_spread + kJitter * Eigen::MatrixXd::Identity(n, n);
    if (own) {
        mean += own->mean;
        cov += own->cov;
    }
    return gaussian_log_density(z_j, mean, 0.5 * (cov + cov.transpose()));
}

BetaMessage beta_update(const AlphaMessage& alpha, const KappaLogs& logs, std::size_t j) {
    BetaMessage beta;
    const std::size_t local = logs.local_index(j).value_or(kNoCell);
    beta.existence_mass = detail::beta_weights(alpha, &logs, local, beta.spatial_log_weights);
    return beta;
}

Belief compute_beliefs(const AlphaMessage& alpha, const KappaLogs& logs) {
    Belief b;
    b.spatial.particles = alpha.spatial.particles;
    b.existence = detail::beta_weights(alpha, &logs, kNoCell, b.spatial.log_weights);
    return b;
}

std::vector<Estimate> declare_and_estimate(std::span<const PotentialObject> pos, const EngineConfig& cfg) {
    std::vector<Estimate> out;
    for (const auto& po : pos) {
        if (po.existence > cfg.declare_threshold) {
            out.push_back({po.label, po.existence, weighted_mean_state(po.spatial)});
        }
    }
    return out;
}

std::vector<PotentialObject> prune(std::vector<PotentialObject> pos, const EngineConfig& cfg) {
    std::erase_if(pos, [&](const PotentialObject& po) { return po.existence < cfg.prune_threshold; });
    if (cfg.max_pos && pos.size() > *cfg.max_pos) {
        std::vector<std::size_t> order(pos.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return pos[a].existence > pos[b].existence; });
        order.resize(*cfg.max_pos);
        std::sort(order.begin(), order.end());
        std::vector<PotentialObject> kept;
        kept.reserve(order.size());
        for (std::size_t i : order) kept.push_back(std::move(pos[i]));
        pos = std::move(kept);
    }
    return pos;
}

// ---------------------------------------------------------------------------
// step

namespace {

struct Node {
    AlphaMessage alpha;
    std::int64_t label = 0;
    int born_at = 0;
    std::optional<std::size_t> origin_cell;

    std::vector<std::size_t> cells;
    std::vector<double> kernel;  // cells.size() rows of particle count
    KappaLogs logs;
};

void prepare(Node& node, double radius, const PsfModel& psf, const GridGeometry& geometry) {
    const auto& ps = node.alpha.spatial;
    const Vec2 centre = weighted_mean_state(ps).p;
    node.cells = detail::gated_cells(centre, radius, geometry);
    const std::size_t n = ps.size();
    node.kernel.resize(node.cells.size() * n);
    for (std::size_t c = 0; c < node.cells.size(); ++c) {
        const Vec2 cell_centre = geometry.cell_center(node.cells[c]);
        double* row = node.kernel.data() + c * n;
        for (std::size_t p = 0; p < n; ++p) row[p] = psf.kernel(ps.particles[p], cell_centre);
    }
}

std::vector<CellMoments> node_moments(const Node& node, bool first_iteration, const PsfModel& psf,
                                      std::vector<double>& scratch) {
    const std::size_t n = node.alpha.spatial.size();
    std::vector<CellMoments> out;
    out.reserve(node.cells.size());
    double existence = 0.0;
    if (first_iteration) existence = detail::beta_weights(node.alpha, nullptr, kNoCell, scratch);
    for (std::size_t c = 0; c < node.cells.size(); ++c) {
        if (!first_iteration) existence = detail::beta_weights(node.alpha, &node.logs, c, scratch);
        out.push_back(detail::moments_from_kernel(existence, {node.kernel.data() + c * n, n}, scratch, psf));
    }
    return out;
}

void node_kappa(Node& node, std::size_t index, const MomentTable& table, const MeasurementImage& z,
                const PsfModel& psf) {
    const std::size_t n = node.alpha.spatial.size();
    node.logs = KappaLogs(node.cells, n);
    for (std::size_t c = 0; c < node.cells.size(); ++c) {
        const std::size_t j = node.cells[c];
        const CellMoments& own = table.own_at(index, c);
        const Eigen::VectorXd loo_mean = table.total_mu(j) - own.mu;
        const Eigen::MatrixXd loo_spread = table.total_spread(j) - own.spread();
        const detail::KappaCell cell(z.cell(j), loo_mean, loo_spread, psf);
        node.logs.absent[c] = cell.absent();
        const double* kernel = node.kernel.data() + c * n;
        auto row = node.logs.present_row(c);
        for (std::size_t p = 0; p < n; ++p) row[p] = cell.present(kernel[p]);
    }
    node.logs.finalize();
}

}  // namespace

StepResult step(std::span<const PotentialObject> previous, const MeasurementImage& z, int k, const Models& models,
                const EngineConfig& cfg, LabelAllocator& labels, Rng& rng) {
    StepResult result;
    const GridGeometry& geometry = z.geometry();
    if (z.d() != models.psf.d) throw FormatMismatch("measurement dimension does not match the PSF model");

    std::vector<Node> nodes;
    nodes.reserve(previous.size());
    for (const auto& po : previous) {
        Node node;
        node.alpha = predict(po, models.motion, rng);
        node.label = po.label;
        node.born_at = po.born_at;
        node.origin_cell = po.origin_cell;
        nodes.push_back(std::move(node));
    }
    result.stats.legacy_count = nodes.size();
    for (auto& fresh : inject_new_pos(z, models.birth, cfg, labels, rng)) {
        Node node;
        node.alpha = std::move(fresh.alpha);
        node.label = fresh.label;
        node.born_at = k;
        node.origin_cell = fresh.origin_cell;
        nodes.push_back(std::move(node));
    }
    result.stats.new_count = nodes.size() - result.stats.legacy_count;

    const auto t0 = std::chrono::steady_clock::now();
    const double radius = cfg.gate.resolve(models.psf, geometry);
    for (auto& node : nodes) {
        prepare(node, radius, models.psf, geometry);
        result.stats.gated_cells += node.cells.size();
    }

    std::vector<double> scratch;
    for (std::size_t ell = 1; ell <= cfg.iterations; ++ell) {
        MomentTable table(geometry.cell_count(), models.psf.d);
        for (const auto& node : nodes) table.add(node.cells, node_moments(node, ell == 1, models.psf, scratch));
        for (std::size_t i = 0; i < nodes.size(); ++i) node_kappa(nodes[i], i, table, z, models.psf);
    }

    result.pos.reserve(nodes.size());
    for (auto& node : nodes) {
        Belief belief = compute_beliefs(node.alpha, node.logs);
        PotentialObject po;
        po.label = node.label;
        po.existence = belief.existence;
        po.spatial = resample(belief.spatial, cfg.particles_per_po, rng);
        po.born_at = node.born_at;
        po.origin_cell = node.origin_cell;
        result.pos.push_back(std::move(po));
    }
    result.stats.message_loop_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    result.estimates = declare_and_estimate(result.pos, cfg);
    result.pos = prune(std::move(result.pos), cfg);
    return result;
}

Tracker::Tracker(Models models, EngineConfig cfg, std::uint64_t seed)
    : models_(std::move(models)), cfg_(std::move(cfg)), rng_(seed) {
    models_.motion.validate();
    models_.psf.validate();
    models_.birth.validate();
    cfg_.validate();
}

const StepResult& Tracker::process(const MeasurementImage& z) {
    ++k_;
    last_ = step(pos_, z, k_, models_, cfg_, labels_, rng_);
    pos_ = last_.pos;
    return last_;
}

}  // namespace tbd
