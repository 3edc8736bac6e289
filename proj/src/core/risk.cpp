#include "core/risk.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "core/conditioner.hpp"
#include "core/error.hpp"

namespace lgcd {

namespace {

void check(const Eigen::MatrixXd& returns, const BacktestOptions& o) {
    if (returns.cols() < 2) {
        throw ValidationError("returns need a portfolio column and at least one component column");
    }
    if (o.warmup < 100) {
        throw ValidationError("warmup must be at least 100 days");
    }
    if (static_cast<std::size_t>(returns.rows()) <= o.warmup) {
        throw ValidationError(fmt::format("{} rows leave no days after a warmup of {}", returns.rows(), o.warmup));
    }
    if (o.levels.empty()) {
        throw ValidationError("need at least one VaR level");
    }
    for (double a : o.levels) {
        if (!(a > 0.0 && a < 1.0)) {
            throw ValidationError(fmt::format("VaR level {} outside (0,1)", a));
        }
    }
    if (o.policy == PlanPolicy::periodic && o.period == 0) {
        throw ValidationError("periodic bandwidth policy needs a positive period");
    }
    if (o.window != 0 && o.window < 100) {
        throw ValidationError("rolling window must hold at least 100 rows");
    }
    if (!returns.allFinite()) {
        throw ValidationError("returns contain non-finite values");
    }
}

// Rows (portfolio_s, components_{s-1}) for s in [first, last).
Dataset lagged_window(const Eigen::MatrixXd& returns, std::size_t first, std::size_t last) {
    const auto m = returns.cols();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(last - first), m);
    for (std::size_t s = first; s < last; ++s) {
        const auto r = static_cast<Eigen::Index>(s - first);
        x(r, 0) = returns(static_cast<Eigen::Index>(s), 0);
        x.block(r, 1, 1, m - 1) = returns.block(static_cast<Eigen::Index>(s - 1), 1, 1, m - 1);
    }
    return Dataset(std::move(x));
}

} // namespace

BacktestReport var_backtest(const Eigen::MatrixXd& returns, const BacktestOptions& options) {
    check(returns, options);
    const std::size_t n = static_cast<std::size_t>(returns.rows());
    const std::size_t m = static_cast<std::size_t>(returns.cols());
    BacktestReport report;
    report.levels = options.levels;
    report.exceedances.assign(options.levels.size(), 0);
    report.n_eval = n - options.warmup;

    std::vector<std::size_t> cond(m - 1);
    for (std::size_t c = 0; c < cond.size(); ++c) {
        cond[c] = c + 1;
    }
    const Partition part{{0}, cond};
    std::optional<BandwidthPlan> plan;
    std::size_t plan_day = 0;

    for (std::size_t t = options.warmup; t < n; ++t) {
        const std::size_t first = options.window == 0 ? 1 : std::max<std::size_t>(1, t - options.window);
        const Dataset window = lagged_window(returns, first, t);
        const bool reselect = !plan || (options.policy == PlanPolicy::periodic && t - plan_day >= options.period);
        DayRecord day;
        day.day = t;
        day.realized = returns(static_cast<Eigen::Index>(t), 0);
        try {
            if (reselect) {
                plan = select_bandwidths(PseudoSample(window), options.bandwidth);
                plan_day = t;
            }
            std::vector<double> x2(m - 1);
            for (std::size_t c = 0; c + 1 < m; ++c) {
                x2[c] = returns(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(c + 1));
            }
            GridOptions grid;
            grid.grid_size = options.grid_points;
            const ConditionalDensity cd = ConditionalEstimator(window, part, *plan).estimate(x2, grid);
            for (std::size_t l = 0; l < options.levels.size(); ++l) {
                const double q = conditional_quantile(cd, options.levels[l]).value;
                day.var.push_back(q);
                day.exceeded.push_back(day.realized < q);
            }
        } catch (const NoLocalMassError&) {
            day.skipped = true;
            day.var.clear();
            day.exceeded.clear();
            ++report.skipped;
        }
        if (!day.skipped) {
            for (std::size_t l = 0; l < options.levels.size(); ++l) {
                report.exceedances[l] += day.exceeded[l] ? 1 : 0;
            }
        }
        report.days.push_back(std::move(day));
    }
    const std::size_t used = report.n_eval - report.skipped;
    for (std::size_t l = 0; l < options.levels.size(); ++l) {
        report.exceed_proportion.push_back(
            used == 0 ? 0.0 : static_cast<double>(report.exceedances[l]) / static_cast<double>(used));
    }
    return report;
}

std::pair<double, double> wilson_interval(double proportion, std::size_t trials, double z) {
    if (trials == 0) {
        throw ValidationError("Wilson interval needs at least one trial");
    }
    const double nn = static_cast<double>(trials);
    const double ph = proportion;
    const double z2 = z * z;
    const double centre = (ph + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    const double half = z / (1.0 + z2 / nn) * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn));
    return {centre - half, centre + half};
}

} // namespace lgcd
