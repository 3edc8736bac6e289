#include "core/conditioner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "core/error.hpp"
#include "core/normal.hpp"
#include "core/parallel.hpp"

namespace lgcd {

namespace {

std::pair<std::size_t, std::size_t> key(std::size_t i, std::size_t j) {
    return i < j ? std::make_pair(i, j) : std::make_pair(j, i);
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 1) {
        return m(0, 0);
    }
    if (m.rows() == 2) {
        // Unit diagonal: eigenvalues 1 +/- |r|.
        if (m(0, 0) == 1.0 && m(1, 1) == 1.0) {
            return 1.0 - std::abs(m(0, 1));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void clamp_off_diagonal(Eigen::MatrixXd& r) {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < r.cols(); ++j) {
            const double v = std::clamp(0.5 * (r(i, j) + r(j, i)), -kRhoBound, kRhoBound);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
}

} // namespace

PairwiseField::PairwiseField(const PseudoSample& ps, const BandwidthPlan& plan, std::span<const std::size_t> vars)
    : vars_(vars.begin(), vars.end()) {
    for (std::size_t a = 0; a < vars_.size(); ++a) {
        for (std::size_t b = a + 1; b < vars_.size(); ++b) {
            const auto [i, j] = key(vars_[a], vars_[b]);
            if (i == j) {
                throw ContractError("variable listed twice in pairwise field");
            }
            fits_.emplace(std::make_pair(i, j), PairFit(i, j, ps.column(i), ps.column(j), plan.get(i, j)));
        }
    }
}

const PairFit& PairwiseField::fit(std::size_t i, std::size_t j) const {
    const auto it = fits_.find(key(i, j));
    if (it == fits_.end()) {
        throw ContractError(fmt::format("missing pair fit ({},{})", i, j));
    }
    return it->second;
}

double PairwiseField::rho(std::size_t i, std::size_t j, double zi, double zj) const {
    const PairFit& f = fit(i, j);
    return f.i() == i ? f.rho_at(zi, zj) : f.rho_at(zj, zi);
}

LocalCorrMatrix repair_correlation(Eigen::MatrixXd R) {
    if (R.rows() != R.cols()) {
        throw ContractError("correlation matrix must be square");
    }
    clamp_off_diagonal(R);
    if (min_eigenvalue(R) >= kMinEigenvalue) {
        return {std::move(R), false};
    }
    const Eigen::Index p = R.rows();
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
        const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(2.0 * kMinEigenvalue);
        Eigen::MatrixXd clipped = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
        const Eigen::VectorXd scale = clipped.diagonal().cwiseSqrt().cwiseInverse();
        R = scale.asDiagonal() * clipped * scale.asDiagonal();
        clamp_off_diagonal(R);
        if (min_eigenvalue(R) >= kMinEigenvalue) {
            return {std::move(R), true};
        }
    }
    // Shrinking the off-diagonal towards zero always ends at the identity.
    const Eigen::MatrixXd start = R;
    for (int step = 1; step <= 1000; ++step) {
        const double keep = 1.0 - static_cast<double>(step) / 1000.0;
        R = keep * start + (1.0 - keep) * Eigen::MatrixXd::Identity(p, p);
        clamp_off_diagonal(R);
        if (min_eigenvalue(R) >= kMinEigenvalue) {
            break;
        }
    }
    return {std::move(R), true};
}

LocalCorrMatrix assemble_R(const PairwiseField& field, std::span<const std::size_t> vars, const Eigen::VectorXd& z) {
    const auto p = static_cast<Eigen::Index>(vars.size());
    if (z.size() != p) {
        throw ContractError("evaluation point does not match variable list");
    }
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = a + 1; b < p; ++b) {
            const double r = field.rho(vars[static_cast<std::size_t>(a)], vars[static_cast<std::size_t>(b)], z(a), z(b));
            R(a, b) = r;
            R(b, a) = r;
        }
    }
    return repair_correlation(std::move(R));
}

ConditionalGaussianParams condition(const LocalCorrMatrix& R, const Eigen::VectorXd& z2, const Partition& part) {
    const auto k = static_cast<Eigen::Index>(part.k());
    const auto m = static_cast<Eigen::Index>(part.m());
    if (z2.size() != m) {
        throw ContractError("conditioning vector has the wrong length");
    }
    Eigen::MatrixXd r11(k, k), r12(k, m), r22(m, m);
    for (Eigen::Index a = 0; a < k; ++a) {
        const auto ia = static_cast<Eigen::Index>(part.response[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < k; ++b) {
            r11(a, b) = R.R(ia, static_cast<Eigen::Index>(part.response[static_cast<std::size_t>(b)]));
        }
        for (Eigen::Index b = 0; b < m; ++b) {
            r12(a, b) = R.R(ia, static_cast<Eigen::Index>(part.conditioning[static_cast<std::size_t>(b)]));
        }
    }
    for (Eigen::Index a = 0; a < m; ++a) {
        const auto ia = static_cast<Eigen::Index>(part.conditioning[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < m; ++b) {
            r22(a, b) = R.R(ia, static_cast<Eigen::Index>(part.conditioning[static_cast<std::size_t>(b)]));
        }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(r22);
    if (llt.info() != Eigen::Success) {
        throw NumericError("conditioning block of the local correlation matrix is not positive definite");
    }
    ConditionalGaussianParams out;
    out.mu = r12 * llt.solve(z2);
    const Eigen::MatrixXd s = r11 - r12 * llt.solve(r12.transpose());
    out.sigma = 0.5 * (s + s.transpose());
    const Eigen::LLT<Eigen::MatrixXd> check(out.sigma);
    if (check.info() != Eigen::Success) {
        throw NumericError("conditional covariance is not positive definite");
    }
    return out;
}

double gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
    const auto k = x.size();
    if (k == 1) {
        const double var = sigma(0, 0);
        const double d = x(0) - mu(0);
        return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw NumericError("covariance is not positive definite");
    }
    const Eigen::VectorXd d = x - mu;
    const Eigen::VectorXd y = llt.matrixL().solve(d);
    const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
    const double log_det = 2.0 * diag.array().log().sum();
    return std::exp(-0.5 * y.squaredNorm() - 0.5 * log_det -
                    0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi));
}

std::vector<double> trapezoid_weights(std::span<const double> axis) {
    std::vector<double> w(axis.size(), 0.0);
    for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
        const double half = 0.5 * (axis[i + 1] - axis[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    return w;
}

namespace {

// Flat-index decoding for row-major tensor grids.
std::vector<std::size_t> unravel(std::size_t idx, const std::vector<std::vector<double>>& axes) {
    std::vector<std::size_t> out(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
        out[d] = idx % axes[d].size();
        idx /= axes[d].size();
    }
    return out;
}

double tensor_integral(const std::vector<std::vector<double>>& axes, std::span<const double> values) {
    std::vector<std::vector<double>> weights;
    for (const auto& axis : axes) {
        weights.push_back(trapezoid_weights(axis));
    }
    double sum = 0.0;
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
        const auto pos = unravel(idx, axes);
        double w = 1.0;
        for (std::size_t d = 0; d < axes.size(); ++d) {
            w *= weights[d][pos[d]];
        }
        sum += w * values[idx];
    }
    return sum;
}

} // namespace

std::vector<double> ConditionalDensity::point(std::size_t idx) const {
    const auto pos = unravel(idx, axes);
    std::vector<double> out(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        out[d] = axes[d][pos[d]];
    }
    return out;
}

double ConditionalDensity::integral() const { return tensor_integral(axes, values); }

namespace {

Partition validated(Partition part, const Dataset& ds) {
    require_estimable(ds);
    return make_partition(std::move(part.response), std::move(part.conditioning), ds.p());
}

} // namespace

ConditionalEstimator::ConditionalEstimator(const Dataset& ds, Partition part, const BandwidthPlan& plan)
    : part_(validated(std::move(part), ds)), plan_(plan), ps_(ds),
      vars_([this] {
          std::vector<std::size_t> v = part_.response;
          v.insert(v.end(), part_.conditioning.begin(), part_.conditioning.end());
          return v;
      }()),
      field_(ps_, plan_, vars_) {}

std::vector<std::vector<double>> ConditionalEstimator::default_axes(std::size_t points) const {
    if (points < 2) {
        throw ValidationError("grid needs at least two points per axis");
    }
    std::vector<std::vector<double>> axes;
    for (const std::size_t r : part_.response) {
        const auto& model = ps_.model(r);
        const double lo = model.quantile(0.001);
        const double hi = model.quantile(0.999);
        std::vector<double> axis(points);
        for (std::size_t i = 0; i < points; ++i) {
            axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        }
        axis.back() = hi;
        axes.push_back(std::move(axis));
    }
    return axes;
}

ConditionalGaussianParams ConditionalEstimator::params_at(const Eigen::VectorXd& z, bool* repaired) const {
    const LocalCorrMatrix R = assemble_R(field_, vars_, z);
    if (repaired != nullptr) {
        *repaired = R.psd_repaired;
    }
    const auto k = static_cast<Eigen::Index>(part_.k());
    std::vector<std::size_t> resp(part_.k());
    std::vector<std::size_t> cond(part_.m());
    for (std::size_t i = 0; i < resp.size(); ++i) {
        resp[i] = i;
    }
    for (std::size_t i = 0; i < cond.size(); ++i) {
        cond[i] = part_.k() + i;
    }
    return condition(R, z.tail(z.size() - k), Partition{resp, cond});
}

ConditionalDensity ConditionalEstimator::estimate(std::span<const double> x2, const GridOptions& grid) const {
    const std::size_t k = part_.k();
    const std::size_t m = part_.m();
    if (x2.size() != m) {
        throw ValidationError(fmt::format("expected {} conditioning values, got {}", m, x2.size()));
    }
    ConditionalDensity cd;
    cd.conditioning_point.assign(x2.begin(), x2.end());
    for (std::size_t c = 0; c < m; ++c) {
        if (!std::isfinite(x2[c])) {
            throw ValidationError("conditioning value is not finite");
        }
        const ZValue zv = ps_.z_at(part_.conditioning[c], x2[c]);
        if (zv.clamped) {
            throw NoLocalMassError(fmt::format("no local mass: conditioning value {} for '{}' lies outside the support",
                                               x2[c], ps_.source().names()[part_.conditioning[c]]));
        }
        cd.conditioning_z.push_back(zv.z);
    }

    if (!grid.axes.empty()) {
        if (grid.axes.size() != k) {
            throw ValidationError(fmt::format("expected {} grid axes, got {}", k, grid.axes.size()));
        }
        for (const auto& axis : grid.axes) {
            if (axis.size() < 2 || !std::is_sorted(axis.begin(), axis.end()) ||
                std::adjacent_find(axis.begin(), axis.end()) != axis.end()) {
                throw ValidationError("grid axes need at least two strictly increasing points");
            }
        }
        cd.axes = grid.axes;
    } else {
        if (k >= 3) {
            throw UnsupportedError("grid normalization refused for three or more response variables; "
                                   "supply explicit grid axes");
        }
        const std::size_t points = grid.grid_size != 0 ? grid.grid_size : (k == 1 ? 2000 : 100);
        cd.axes = default_axes(points);
    }

    // Per response axis: pseudo value and marginal factor f(x) / phi(z).
    std::vector<std::vector<double>> axis_z(k);
    std::vector<std::vector<double>> axis_factor(k);
    std::vector<std::vector<char>> axis_clamped(k);
    for (std::size_t r = 0; r < k; ++r) {
        const auto& axis = cd.axes[r];
        axis_z[r].resize(axis.size());
        axis_factor[r].resize(axis.size());
        axis_clamped[r].resize(axis.size());
        const std::size_t var = part_.response[r];
        parallel_for(axis.size(), [&](std::size_t i) {
            const ZValue zv = ps_.z_at(var, axis[i]);
            axis_z[r][i] = zv.z;
            axis_clamped[r][i] = zv.clamped ? 1 : 0;
            axis_factor[r][i] = ps_.model(var).density(axis[i]) / norm_pdf(zv.z);
        });
    }

    // Conditioning block of R does not move with the response point.
    const auto p = static_cast<Eigen::Index>(k + m);
    Eigen::MatrixXd base = Eigen::MatrixXd::Identity(p, p);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const double r = field_.rho(part_.conditioning[a], part_.conditioning[b], cd.conditioning_z[a],
                                        cd.conditioning_z[b]);
            const auto ia = static_cast<Eigen::Index>(k + a);
            const auto ib = static_cast<Eigen::Index>(k + b);
            base(ia, ib) = r;
            base(ib, ia) = r;
        }
    }

    std::size_t total = 1;
    for (const auto& axis : cd.axes) {
        total *= axis.size();
    }
    cd.values.assign(total, 0.0);
    cd.params.resize(total);
    std::vector<char> repaired(total, 0);
    std::vector<char> clamped(total, 0);
    std::vector<char> no_mass(total, 0);
    Eigen::VectorXd z2(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        z2(static_cast<Eigen::Index>(c)) = cd.conditioning_z[c];
    }
    std::vector<std::size_t> resp(k);
    std::vector<std::size_t> cond(m);
    for (std::size_t i = 0; i < k; ++i) {
        resp[i] = i;
    }
    for (std::size_t i = 0; i < m; ++i) {
        cond[i] = k + i;
    }
    const Partition local{resp, cond};

    parallel_for(total, [&](std::size_t idx) {
        const auto pos = unravel(idx, cd.axes);
        Eigen::VectorXd z(p);
        double factor = 1.0;
        bool any_clamped = false;
        for (std::size_t r = 0; r < k; ++r) {
            z(static_cast<Eigen::Index>(r)) = axis_z[r][pos[r]];
            factor *= axis_factor[r][pos[r]];
            any_clamped = any_clamped || axis_clamped[r][pos[r]] != 0;
        }
        z.tail(static_cast<Eigen::Index>(m)) = z2;
        Eigen::MatrixXd R = base;
        try {
            for (std::size_t r = 0; r < k; ++r) {
                const auto ir = static_cast<Eigen::Index>(r);
                for (std::size_t s = r + 1; s < k + m; ++s) {
                    const auto is = static_cast<Eigen::Index>(s);
                    const double v = field_.rho(vars_[r], vars_[s], z(ir), z(is));
                    R(ir, is) = v;
                    R(is, ir) = v;
                }
            }
        } catch (const NoLocalMassError&) {
            // The data say nothing about this response point; it carries no mass.
            no_mass[idx] = 1;
            return;
        }
        const LocalCorrMatrix lr = repair_correlation(std::move(R));
        ConditionalGaussianParams params = condition(lr, z2, local);
        const Eigen::VectorXd z1 = z.head(static_cast<Eigen::Index>(k));
        cd.values[idx] = gaussian_density(z1, params.mu, params.sigma) * factor;
        cd.params[idx] = std::move(params);
        repaired[idx] = lr.psd_repaired ? 1 : 0;
        clamped[idx] = any_clamped ? 1 : 0;
    });

    for (std::size_t i = 0; i < total; ++i) {
        cd.no_local_mass += no_mass[i] != 0 ? 1 : 0;
    }
    if (cd.no_local_mass == total) {
        throw NoLocalMassError("no local mass at any response grid point");
    }
    cd.normalizer = tensor_integral(cd.axes, cd.values);
    if (!(cd.normalizer > 0.0) || !std::isfinite(cd.normalizer)) {
        throw NumericError("conditional density estimate has no mass on the grid");
    }
    for (double& v : cd.values) {
        v /= cd.normalizer;
    }
    for (std::size_t i = 0; i < total; ++i) {
        cd.psd_repaired += repaired[i] != 0 ? 1 : 0;
        cd.clamped += clamped[i] != 0 ? 1 : 0;
    }
    return cd;
}

ConditionalDensity estimate_conditional(const Dataset& ds, const Partition& part, const BandwidthPlan& plan,
                                        std::span<const double> x2, const GridOptions& grid) {
    return ConditionalEstimator(ds, part, plan).estimate(x2, grid);
}

QuantileResult conditional_quantile(const ConditionalDensity& cd, double alpha) {
    if (cd.k() != 1) {
        throw UnsupportedError("conditional quantiles need a single response variable");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("quantile level must lie in (0,1)");
    }
    const auto& x = cd.axes[0];
    const auto& f = cd.values;
    const std::size_t n = x.size();
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        cum[i] = cum[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    }
    if (alpha <= cum[1]) {
        return {x.front(), true};
    }
    if (alpha >= cum[n - 2]) {
        return {x.back(), true};
    }
    const auto it = std::lower_bound(cum.begin(), cum.end(), alpha);
    const auto i = static_cast<std::size_t>(it - cum.begin());
    const double span = cum[i] - cum[i - 1];
    const double frac = span > 0.0 ? (alpha - cum[i - 1]) / span : 1.0;
    return {x[i - 1] + frac * (x[i] - x[i - 1]), false};
}

} // namespace lgcd
