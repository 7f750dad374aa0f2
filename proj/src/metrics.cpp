#include "tbd/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace tbd {

void GospaConfig::validate() const {
    if (!(cutoff > 0.0)) throw ConfigInvalid("gospa.cutoff must be > 0");
    if (!(order >= 1.0)) throw ConfigInvalid("gospa.order must be >= 1");
}

std::vector<std::size_t> solve_assignment(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    const auto m = static_cast<std::size_t>(cost.cols());
    if (n > m) throw LengthMismatch("solve_assignment needs rows <= cols");
    if (n == 0) return {};

    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is the virtual start of each augmenting path.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> min_v(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = row_of_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < min_v[j]) {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if (min_v[j] < delta) {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> col_of_row(n);
    for (std::size_t j = 1; j <= m; ++j) {
        if (row_of_col[j] != 0) col_of_row[row_of_col[j] - 1] = j - 1;
    }
    return col_of_row;
}

namespace {

GospaResult finish(GospaResult r, std::size_t truth_count, std::size_t estimate_count, const GospaConfig& cfg) {
    const double half = std::pow(cfg.cutoff, cfg.order) / 2.0;
    r.missed_count = truth_count - r.assignment.size();
    r.false_count = estimate_count - r.assignment.size();
    r.missed_cost = half * static_cast<double>(r.missed_count);
    r.false_cost = half * static_cast<double>(r.false_count);
    r.total = std::pow(r.localization + r.missed_cost + r.false_cost, 1.0 / cfg.order);
    return r;
}

}  // namespace

GospaResult gospa(std::span<const Vec2> truth, std::span<const Vec2> estimates, const GospaConfig& cfg) {
    const std::size_t n = truth.size();
    const std::size_t m = estimates.size();
    const std::size_t size = std::max(n, m);
    const double cut_p = std::pow(cfg.cutoff, cfg.order);

    GospaResult r;
    if (size == 0) return finish(r, 0, 0, cfg);

    // Square problem: real pairs cost min(d^p, c^p); padding costs c^p / 2.
    const auto s = static_cast<Eigen::Index>(size);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(s, s, cut_p / 2.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double dp = std::pow((truth[i] - estimates[j]).norm(), cfg.order);
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::min(dp, cut_p);
        }
    }
    const auto cols = solve_assignment(cost);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = cols[i];
        if (j >= m) continue;
        const double dist = (truth[i] - estimates[j]).norm();
        if (dist < cfg.cutoff) {
            r.localization += std::pow(dist, cfg.order);
            r.assignment.emplace_back(i, j);
        }
    }
    return finish(r, n, m, cfg);
}

namespace {

struct Search {
    std::span<const Vec2> truth;
    std::span<const Vec2> estimates;
    const GospaConfig& cfg;
    std::vector<bool> taken;
    std::vector<std::pair<std::size_t, std::size_t>> current;
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, std::size_t>> best_assignment;
    double best_localization = 0.0;

    void run(std::size_t i, double localization) {
        if (i == truth.size()) {
            const double half = std::pow(cfg.cutoff, cfg.order) / 2.0;
            const double unmatched = static_cast<double>(truth.size() + estimates.size() - 2 * current.size());
            const double total = localization + half * unmatched;
            if (total < best) {
                best = total;
                best_assignment = current;
                best_localization = localization;
            }
            return;
        }
        run(i + 1, localization);
        for (std::size_t j = 0; j < estimates.size(); ++j) {
            if (taken[j]) continue;
            const double dist = (truth[i] - estimates[j]).norm();
            if (!(dist < cfg.cutoff)) continue;
            taken[j] = true;
            current.emplace_back(i, j);
            run(i + 1, localization + std::pow(dist, cfg.order));
            current.pop_back();
            taken[j] = false;
        }
    }
};

}  // namespace

GospaResult gospa_bruteforce(std::span<const Vec2> truth, std::span<const Vec2> estimates, const GospaConfig& cfg) {
    if (truth.size() + estimates.size() > 14) {
        throw TooLarge("gospa_bruteforce supports at most 14 points in total, got " +
                       std::to_string(truth.size() + estimates.size()));
    }
    Search search{truth, estimates, cfg, std::vector<bool>(estimates.size(), false), {}};
    search.run(0, 0.0);
    GospaResult r;
    r.localization = search.best_localization;
    r.assignment = search.best_assignment;
    return finish(r, truth.size(), estimates.size(), cfg);
}

std::vector<GospaResult> evaluate_run(const GroundTruth& truth, const std::vector<std::vector<Vec2>>& estimates,
                                      const GospaConfig& cfg) {
    if (static_cast<std::size_t>(truth.step_count()) != estimates.size()) {
        throw LengthMismatch("truth has " + std::to_string(truth.step_count()) + " steps, estimates have " +
                             std::to_string(estimates.size()));
    }
    std::vector<GospaResult> out;
    out.reserve(estimates.size());
    for (int k = 1; k <= truth.step_count(); ++k) {
        std::vector<Vec2> points;
        for (const auto& obj : truth.at(k)) points.push_back(obj.state.p);
        out.push_back(gospa(points, estimates[static_cast<std::size_t>(k - 1)], cfg));
    }
    return out;
}

}  // namespace tbd
