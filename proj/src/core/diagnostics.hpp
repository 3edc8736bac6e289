#pragma once

#include <span>
#include <vector>

#include "core/bandwidth.hpp"
#include "core/data_model.hpp"

namespace lgcd {

// Columns (X_t, X_{t-l1}, X_{t-l2}, ...) for t = max lag .. n-1.
Dataset lag_embed(std::span<const double> series, std::span<const std::size_t> lags);

struct LocalCovCurve {
    // Diagonal coordinates in pseudo scale and mapped back through the X_t marginal.
    std::vector<double> z;
    std::vector<double> points;
    // Local correlation of the pair at (z, z).
    std::vector<double> unconditional;
    // Off-diagonal of the conditional covariance at (z, z) given x_cond.
    std::vector<double> conditional;
};

struct PartialCovOptions {
    std::size_t lag = 2;
    std::vector<std::size_t> given_lags = {1};
    std::vector<double> x_cond = {5.0};
    std::size_t diag_points = 21;
    double z_min = -2.0;
    double z_max = 2.0;
    BandwidthOptions bandwidth;
};

LocalCovCurve partial_local_cov(std::span<const double> series, const PartialCovOptions& options = {});

} // namespace lgcd
