#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/bandwidth.hpp"

namespace lgcd {

enum class PlanPolicy { frozen, periodic };

struct BacktestOptions {
    std::size_t warmup = 500;
    std::vector<double> levels = {0.005, 0.01, 0.05};
    PlanPolicy policy = PlanPolicy::frozen;
    // Reselection period in days for PlanPolicy::periodic.
    std::size_t period = 0;
    // 0 keeps an expanding window; otherwise the fit uses the last `window` rows.
    std::size_t window = 0;
    std::size_t grid_points = 1000;
    BandwidthOptions bandwidth;
};

struct DayRecord {
    std::size_t day = 0;
    bool skipped = false;
    double realized = 0.0;
    // One entry per level: lower-tail return quantile and whether it was breached.
    std::vector<double> var;
    std::vector<bool> exceeded;
};

struct BacktestReport {
    std::vector<double> levels;
    std::vector<double> exceed_proportion;
    std::vector<std::size_t> exceedances;
    std::size_t n_eval = 0;
    std::size_t skipped = 0;
    std::string method = "lgde";
    std::vector<DayRecord> days;
};

// Column 0 holds portfolio returns, the rest component returns. On day t the
// model is fitted to pairs (portfolio_s, components_{s-1}) seen before t and
// conditioned on components_{t-1}.
BacktestReport var_backtest(const Eigen::MatrixXd& returns, const BacktestOptions& options = {});

// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(double proportion, std::size_t trials, double z = 1.959963984540054);

} // namespace lgcd
