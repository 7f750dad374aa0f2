#include "tbd/simulator.hpp"

#include <cmath>
#include <string>

namespace tbd {

void ScenarioConfig::validate() const {
    if (!(roi_max.x() > roi_min.x() && roi_max.y() > roi_min.y())) throw ConfigInvalid("scenario.roi is empty");
    if (grid_rows == 0 || grid_cols == 0) throw ConfigInvalid("scenario.grid_rows/grid_cols must be >= 1");
    if (steps < 1) throw ConfigInvalid("scenario.steps must be >= 1");
    if (birth_steps.size() != object_count) throw ConfigInvalid("scenario.birth_steps must have object_count entries");
    if (death_steps.size() != object_count) throw ConfigInvalid("scenario.death_steps must have object_count entries");
    for (std::size_t i = 0; i < object_count; ++i) {
        if (birth_steps[i] < 1) throw ConfigInvalid("scenario.birth_steps entries must be >= 1");
        if (!(birth_steps[i] < death_steps[i])) {
            throw ConfigInvalid("scenario: birth step must precede death step for object " + std::to_string(i));
        }
    }
    if (!(spawn_min.x() <= spawn_max.x() && spawn_min.y() <= spawn_max.y())) {
        throw ConfigInvalid("scenario.spawn_box is inverted");
    }
    if (spawn_min.x() < roi_min.x() || spawn_min.y() < roi_min.y() || spawn_max.x() > roi_max.x() ||
        spawn_max.y() > roi_max.y()) {
        throw ConfigInvalid("scenario.spawn_box must lie inside scenario.roi");
    }
    if (!(gamma0 >= 0.0)) throw ConfigInvalid("scenario.gamma0 must be >= 0");
    if (!(sigma_s_sq > 0.0)) throw ConfigInvalid("psf.sigma_s_sq must be > 0");
    if (!(sigma_eps_sq > 0.0)) throw ConfigInvalid("psf.sigma_eps_sq must be > 0");
    if (!(q_pv >= 0.0) || !(q_gamma >= 0.0)) throw ConfigInvalid("scenario motion noise must be >= 0");
    if (!(init_velocity_var >= 0.0)) throw ConfigInvalid("scenario.init_velocity_var must be >= 0");
}

GridGeometry ScenarioConfig::geometry() const {
    GridGeometry g;
    g.rows = grid_rows;
    g.cols = grid_cols;
    g.origin = roi_min;
    const Vec2 size = roi_max - roi_min;
    g.cell_extent = Vec2(size.x() / static_cast<double>(grid_cols), size.y() / static_cast<double>(grid_rows));
    return g;
}

PsfModel ScenarioConfig::psf() const {
    return PsfModel::isotropic(sigma_s_sq, sigma_eps_sq);
}

MotionModel ScenarioConfig::truth_motion() const {
    MotionModel m;
    m.q_pv = q_pv;
    m.q_gamma = q_gamma;
    return m;
}

GroundTruth generate_truth(const ScenarioConfig& cfg, Rng& rng) {
    GroundTruth truth;
    truth.steps.resize(static_cast<std::size_t>(cfg.steps));

    std::optional<Rng> layout_rng;
    if (cfg.layout_seed) layout_rng.emplace(*cfg.layout_seed);
    Rng& spawn_rng = layout_rng ? *layout_rng : rng;

    std::uniform_real_distribution<double> ux(cfg.spawn_min.x(), cfg.spawn_max.x());
    std::uniform_real_distribution<double> uy(cfg.spawn_min.y(), cfg.spawn_max.y());
    std::normal_distribution<double> vel(0.0, std::sqrt(cfg.init_velocity_var));
    std::vector<KinematicState> initial(cfg.object_count);
    for (auto& x : initial) {
        x.p = Vec2(ux(spawn_rng), uy(spawn_rng));
        x.v = Vec2(vel(spawn_rng), vel(spawn_rng));
        x.gamma = cfg.gamma0;
    }

    const MotionModel motion = cfg.truth_motion();
    const GridGeometry roi = cfg.geometry();
    for (std::size_t i = 0; i < cfg.object_count; ++i) {
        KinematicState x = initial[i];
        const int last = std::min(cfg.death_steps[i] - 1, cfg.steps);
        for (int k = cfg.birth_steps[i]; k <= last; ++k) {
            if (k > cfg.birth_steps[i]) x = motion_sample(x, motion, rng);
            if (!roi.contains(x.p)) break;
            truth.steps[static_cast<std::size_t>(k - 1)].push_back({static_cast<int>(i), x});
        }
    }
    return truth;
}

MeasurementImage render_measurement(std::span<const TruthObject> alive, const PsfModel& psf,
                                    const GridGeometry& geometry, Rng& rng) {
    MeasurementImage z(geometry, psf.d);
    std::normal_distribution<double> n01(0.0, 1.0);
    const Eigen::MatrixXd noise_factor = Eigen::LLT<Eigen::MatrixXd>(psf.noise_cov).matrixL();
    const auto d = static_cast<Eigen::Index>(psf.d);
    Eigen::VectorXd e(d);
    for (std::size_t j = 0; j < geometry.cell_count(); ++j) {
        auto cell = z.cell(j);
        for (Eigen::Index i = 0; i < d; ++i) e[i] = n01(rng);
        cell = noise_factor * e;
        for (const auto& obj : alive) {
            const double k = psf.kernel(obj.state, geometry.cell_center(j));
            const double sd = std::sqrt(k);
            const Eigen::VectorXd mean = psf_mean(obj.state, j, psf, geometry);
            for (Eigen::Index i = 0; i < d; ++i) cell[i] += mean[i] + sd * n01(rng);
        }
    }
    return z;
}

Simulation simulate(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    Simulation sim;
    sim.truth = generate_truth(cfg, rng);
    const PsfModel psf = cfg.psf();
    const GridGeometry geometry = cfg.geometry();
    sim.images.reserve(sim.truth.steps.size());
    for (const auto& alive : sim.truth.steps) sim.images.push_back(render_measurement(alive, psf, geometry, rng));
    return sim;
}

}  // namespace tbd
