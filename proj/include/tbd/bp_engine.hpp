#pragma once

#include "tbd/core.hpp"
#include "tbd/models.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace tbd {

/// Prediction (or birth) message of one PO. The r = 0 branch is the scalar
/// mass 1 - existence_mass; the dummy pdf it multiplies cancels everywhere.
struct AlphaMessage {
    double existence_mass = 0.0;
    ParticleSet spatial;
};

/// Variable-to-factor message. Particles are shared with the PO's alpha message.
struct BetaMessage {
    double existence_mass = 0.0;
    std::vector<double> spatial_log_weights;
};

/// Matched moments contributed by one PO to one cell.
struct CellMoments {
    Eigen::VectorXd mu;
    Eigen::MatrixXd r;

    [[nodiscard]] Eigen::MatrixXd spread() const { return r - mu * mu.transpose(); }
};

/// Per-(PO, cell) moments plus per-cell totals. Leave-one-out sums are
/// formed as total minus own term.
class MomentTable {
public:
    MomentTable(std::size_t cells, std::size_t d);

    /// Registers a PO's moments over its (ascending) cell list; returns the PO index.
    std::size_t add(std::vector<std::size_t> cells, std::vector<CellMoments> moments);

    [[nodiscard]] std::size_t po_count() const { return pos_.size(); }
    [[nodiscard]] std::size_t cell_count() const { return total_mu_.size(); }
    [[nodiscard]] std::span<const std::size_t> cells_of(std::size_t po) const { return pos_[po].cells; }
    [[nodiscard]] const CellMoments& own_at(std::size_t po, std::size_t local) const { return pos_[po].moments[local]; }
    /// nullptr when the PO does not touch the cell.
    [[nodiscard]] const CellMoments* own(std::size_t po, std::size_t cell) const;

    [[nodiscard]] const Eigen::VectorXd& total_mu(std::size_t cell) const { return total_mu_[cell]; }
    [[nodiscard]] const Eigen::MatrixXd& total_spread(std::size_t cell) const { return total_spread_[cell]; }

    [[nodiscard]] Eigen::VectorXd loo_mean(std::size_t po, std::size_t cell) const;
    [[nodiscard]] Eigen::MatrixXd loo_spread(std::size_t po, std::size_t cell) const;

private:
    struct Entry {
        std::vector<std::size_t> cells;
        std::vector<CellMoments> moments;
    };
    std::size_t d_;
    std::vector<Entry> pos_;
    std::vector<Eigen::VectorXd> total_mu_;
    std::vector<Eigen::MatrixXd> total_spread_;
};

/// Gate around the PO's cloud mean. automatic = 4 sigma_S + cell diagonal.
struct GateRadius {
    enum class Mode { automatic, fixed, disabled };
    Mode mode = Mode::automatic;
    double meters = 0.0;

    static GateRadius disabled() { return {Mode::disabled, 0.0}; }
    static GateRadius fixed(double m) { return {Mode::fixed, m}; }
    /// +inf when disabled.
    [[nodiscard]] double resolve(const PsfModel& psf, const GridGeometry& geometry) const;
};

struct EngineConfig {
    std::size_t iterations = 2;
    std::size_t particles_per_po = 3000;
    double declare_threshold = 0.5;
    double prune_threshold = 1e-3;
    GateRadius gate;
    std::optional<std::size_t> max_pos;

    void validate() const;
};

/// log kappa values of one PO over its gated cells, for r = 1 at every alpha
/// particle and for r = 0. Cells outside the gate contribute identical factors
/// to both branches and are left out.
struct KappaLogs {
    std::vector<std::size_t> cells;
    std::size_t particle_count = 0;
    std::vector<double> present;        // cells.size() rows of particle_count
    std::vector<double> absent;         // one per cell
    std::vector<double> present_total;  // S(x_p) = sum over cells
    double absent_total = 0.0;

    KappaLogs() = default;
    KappaLogs(std::vector<std::size_t> gated_cells, std::size_t particles);

    [[nodiscard]] std::span<const double> present_row(std::size_t local) const {
        return {present.data() + local * particle_count, particle_count};
    }
    [[nodiscard]] std::span<double> present_row(std::size_t local) {
        return {present.data() + local * particle_count, particle_count};
    }
    [[nodiscard]] std::optional<std::size_t> local_index(std::size_t cell) const;

    /// Recomputes present_total and absent_total from the rows.
    void finalize();
};

class LabelAllocator {
public:
    explicit LabelAllocator(std::int64_t first = 1) : next_(first) {}
    std::int64_t next() { return next_++; }
    [[nodiscard]] std::int64_t peek() const { return next_; }

private:
    std::int64_t next_;
};

struct NewPo {
    AlphaMessage alpha;
    std::size_t origin_cell = 0;
    std::int64_t label = 0;
};

/// Prediction message of a legacy PO: resample, then propagate every particle.
AlphaMessage predict(const PotentialObject& po, const MotionModel& m, Rng& rng);

/// One new PO per birth-candidate cell.
std::vector<NewPo> inject_new_pos(const MeasurementImage& z, const BirthModel& b, const EngineConfig& cfg,
                                  LabelAllocator& labels, Rng& rng);

/// mu_nj and R_nj for one cell; both carry the beta existence mass as a factor.
CellMoments compute_moments(const BetaMessage& beta, const ParticleSet& particles, const PsfModel& psf,
                            const GridGeometry& geometry, std::size_t j);

/// log of the moment-matched kappa for r = 1 (own given) or r = 0 (own absent).
double kappa_eval(const Eigen::VectorXd& z_j, const std::optional<GaussianMoments>& own,
                  const Eigen::VectorXd& loo_mean, const Eigen::MatrixXd& loo_spread, const PsfModel& psf);

/// Extrinsic message towards cell j: alpha times every other cell's kappa.
BetaMessage beta_update(const AlphaMessage& alpha, const KappaLogs& logs, std::size_t j);

struct Belief {
    double existence = 0.0;
    ParticleSet spatial;  // weighted, over the alpha particles
};

Belief compute_beliefs(const AlphaMessage& alpha, const KappaLogs& logs);

struct Estimate {
    std::int64_t label = 0;
    double existence = 0.0;
    KinematicState state;
};

/// POs with existence > declare_threshold and their MMSE states.
std::vector<Estimate> declare_and_estimate(std::span<const PotentialObject> pos, const EngineConfig& cfg);

/// Drops POs with existence < prune_threshold, then applies max_pos.
std::vector<PotentialObject> prune(std::vector<PotentialObject> pos, const EngineConfig& cfg);

struct Models {
    MotionModel motion;
    PsfModel psf;
    BirthModel birth;
};

struct StepStats {
    std::size_t legacy_count = 0;
    std::size_t new_count = 0;
    std::size_t gated_cells = 0;  // summed over POs
    double message_loop_seconds = 0.0;
};

struct StepResult {
    std::vector<PotentialObject> pos;
    std::vector<Estimate> estimates;
    StepStats stats;
};

/// One full filter step at time k.
StepResult step(std::span<const PotentialObject> previous, const MeasurementImage& z, int k, const Models& models,
                const EngineConfig& cfg, LabelAllocator& labels, Rng& rng);

/// Stateful wrapper around step().
class Tracker {
public:
    Tracker(Models models, EngineConfig cfg, std::uint64_t seed);

    const StepResult& process(const MeasurementImage& z);

    [[nodiscard]] const std::vector<PotentialObject>& pos() const { return pos_; }
    [[nodiscard]] int time() const { return k_; }
    [[nodiscard]] const Models& models() const { return models_; }
    [[nodiscard]] const EngineConfig& config() const { return cfg_; }

private:
    Models models_;
    EngineConfig cfg_;
    Rng rng_;
    LabelAllocator labels_;
    std::vector<PotentialObject> pos_;
    StepResult last_;
    int k_ = 0;
};

namespace detail {

/// Gaussian log-density of z under mean m + offset(k) and covariance
/// k I + B, evaluated in the eigenbasis of B so that every particle costs O(d).
class KappaCell {
public:
    KappaCell(const Eigen::VectorXd& z_j, const Eigen::VectorXd& loo_mean, const Eigen::MatrixXd& loo_spread,
              const PsfModel& psf);

    [[nodiscard]] double absent() const { return absent_; }
    /// r = 1 with own kernel value k.
    [[nodiscard]] double present(double k) const;

private:
    std::size_t d_;
    Eigen::VectorXd eig_;     // eigenvalues of C_eps + loo spread
    Eigen::VectorXd resid_;   // U^T (z - loo_mean - offset)
    Eigen::VectorXd gain_;    // U^T gain
    double absent_ = 0.0;
    double const_term_ = 0.0;
};

/// Cells whose centre lies within radius of centre, ascending.
std::vector<std::size_t> gated_cells(const Vec2& centre, double radius, const GridGeometry& geometry);

inline constexpr std::size_t all_cells = std::numeric_limits<std::size_t>::max();

/// Fills out with normalized log-weights of alpha times every kappa except
/// logs.cells[local] (local = all_cells keeps the full product; logs = nullptr
/// gives alpha itself) and returns the matching existence mass.
double beta_weights(const AlphaMessage& alpha, const KappaLogs* logs, std::size_t local, std::vector<double>& out);

CellMoments moments_from_kernel(double existence, std::span<const double> kernel, std::span<const double> log_weights,
                                const PsfModel& psf);

}  // namespace detail

}  // namespace tbd
