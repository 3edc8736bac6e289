#include "core/diagnostics.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "core/conditioner.hpp"
#include "core/error.hpp"
#include "core/normal.hpp"

namespace lgcd {

Dataset lag_embed(std::span<const double> series, std::span<const std::size_t> lags) {
    if (lags.empty()) {
        throw ValidationError("lag_embed needs at least one lag");
    }
    const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
    if (std::find(lags.begin(), lags.end(), std::size_t{0}) != lags.end()) {
        throw ValidationError("lags must be positive");
    }
    if (series.size() <= max_lag + kMinEstimationRows) {
        throw ValidationError(fmt::format("series of length {} is too short for lag {}", series.size(), max_lag));
    }
    const std::size_t rows = series.size() - max_lag;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lags.size() + 1));
    std::vector<std::string> names{"X_t"};
    for (std::size_t l : lags) {
        names.push_back(fmt::format("X_t-{}", l));
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + max_lag;
        x(static_cast<Eigen::Index>(r), 0) = series[t];
        for (std::size_t c = 0; c < lags.size(); ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c + 1)) = series[t - lags[c]];
        }
    }
    return Dataset(std::move(x), std::move(names));
}

LocalCovCurve partial_local_cov(std::span<const double> series, const PartialCovOptions& options) {
    if (options.given_lags.size() != options.x_cond.size()) {
        throw ValidationError("need one conditioning value per given lag");
    }
    if (options.diag_points < 2) {
        throw ValidationError("need at least two diagonal points");
    }
    std::vector<std::size_t> lags{options.lag};
    for (std::size_t g : options.given_lags) {
        if (g == options.lag) {
            throw ValidationError("given lag coincides with the pair lag");
        }
        lags.push_back(g);
    }
    const Dataset ds = lag_embed(series, lags);
    std::vector<std::size_t> cond;
    for (std::size_t c = 0; c < options.given_lags.size(); ++c) {
        cond.push_back(c + 2);
    }
    const PseudoSample ps(ds);
    const BandwidthPlan plan = select_bandwidths(ps, options.bandwidth);
    const ConditionalEstimator est(ds, Partition{{0, 1}, cond}, plan);

    std::vector<double> z_cond;
    for (std::size_t c = 0; c < cond.size(); ++c) {
        z_cond.push_back(est.pseudo().z_at(cond[c], options.x_cond[c]).z);
    }

    LocalCovCurve curve;
    const PairFit& pair = est.field().fit(0, 1);
    const std::size_t np = options.diag_points;
    for (std::size_t i = 0; i < np; ++i) {
        const double z = options.z_min + (options.z_max - options.z_min) * static_cast<double>(i) /
                                              static_cast<double>(np - 1);
        curve.z.push_back(z);
        curve.points.push_back(est.pseudo().model(0).quantile(norm_cdf(z)));
        curve.unconditional.push_back(pair.rho_at(z, z));
        if (cond.empty()) {
            curve.conditional.push_back(curve.unconditional.back());
            continue;
        }
        Eigen::VectorXd zz(static_cast<Eigen::Index>(2 + cond.size()));
        zz(0) = z;
        zz(1) = z;
        for (std::size_t c = 0; c < cond.size(); ++c) {
            zz(static_cast<Eigen::Index>(2 + c)) = z_cond[c];
        }
        curve.conditional.push_back(est.params_at(zz).sigma(0, 1));
    }
    return curve;
}

} // namespace lgcd
