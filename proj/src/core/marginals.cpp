#include "core/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "core/error.hpp"
#include "core/normal.hpp"

namespace lgcd {

double sorted_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) {
        throw ContractError("quantile of empty sample");
    }
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

double standard_deviation(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / (n - 1.0));
}

} // namespace

double silverman_bandwidth(std::span<const double> sample) {
    if (sample.size() < 2) {
        throw ValidationError("bandwidth needs at least two observations");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double sd = standard_deviation(sorted);
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    double spread = 0.0;
    if (sd > 0.0 && iqr > 0.0) {
        spread = std::min(sd, iqr / 1.34);
    } else if (sd > 0.0) {
        spread = sd;
    } else if (iqr > 0.0) {
        spread = iqr / 1.34;
    } else {
        throw ValidationError("cannot fit a marginal to a constant column");
    }
    return 0.9 * spread * std::pow(static_cast<double>(sample.size()), -0.2);
}

MarginalModel::MarginalModel(std::span<const double> sample) : sorted_(sample.begin(), sample.end()) {
    if (sorted_.size() < kMinEstimationRows) {
        throw ValidationError(fmt::format("marginal fit needs at least {} observations", kMinEstimationRows));
    }
    std::sort(sorted_.begin(), sorted_.end());
    h_ = silverman_bandwidth(sorted_);
    sd_ = standard_deviation(sorted_);
}

double MarginalModel::density(double x) const {
    const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - kWindow * h_);
    const auto hi = std::upper_bound(lo, sorted_.end(), x + kWindow * h_);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
        const double u = (x - *it) / h_;
        sum += std::exp(-0.5 * u * u);
    }
    return sum * kInvSqrt2Pi / (static_cast<double>(sorted_.size()) * h_);
}

double MarginalModel::cdf(double x) const {
    const auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), x - kWindow * h_);
    const auto hi = std::upper_bound(lo, sorted_.end(), x + kWindow * h_);
    // Points left of the window contribute exactly one.
    double sum = static_cast<double>(lo - sorted_.begin());
    for (auto it = lo; it != hi; ++it) {
        sum += norm_cdf((x - *it) / h_);
    }
    return sum / static_cast<double>(sorted_.size());
}

double MarginalModel::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0)) {
        throw NumericError("marginal quantile requires probability in (0,1)");
    }
    double lo = sorted_.front() - h_;
    while (cdf(lo) > prob) {
        lo -= 4.0 * h_;
    }
    double hi = sorted_.back() + h_;
    while (cdf(hi) < prob) {
        hi += 4.0 * h_;
    }
    // Newton steps inside a shrinking bracket, bisection when a step leaves it.
    double x = 0.5 * (lo + hi);
    const double tol = 1e-13 * (1.0 + std::abs(lo) + std::abs(hi));
    for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
        const double f = cdf(x) - prob;
        if (f == 0.0) {
            return x;
        }
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double d = density(x);
        double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (next == x) {
            break;
        }
        x = next;
    }
    return x;
}

ZValue MarginalModel::z_of_x(double x) const {
    double u = cdf(x);
    bool clamped = false;
    if (u < kCdfClamp) {
        u = kCdfClamp;
        clamped = true;
    } else if (u > 1.0 - kCdfClamp) {
        u = 1.0 - kCdfClamp;
        clamped = true;
    }
    return {norm_quantile(u), clamped};
}

double MarginalModel::x_of_z(double z) const {
    const double u = std::clamp(norm_cdf(z), kCdfClamp, 1.0 - kCdfClamp);
    return quantile(u);
}

MarginalModel fit_marginal(std::span<const double> column) { return MarginalModel(column); }

std::vector<double> midranks(std::span<const double> column) {
    const std::size_t n = column.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && column[order[j]] == column[order[i]]) {
            ++j;
        }
        // Positions i..j-1 share the average of ranks i+1..j.
        const double rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            ranks[order[t]] = rank;
        }
        i = j;
    }
    return ranks;
}

PseudoSample::PseudoSample(const Dataset& ds) : source_(ds), z_(ds.n(), ds.p()) {
    const std::size_t n = ds.n();
    const double denom = static_cast<double>(n) + 1.0;
    lookup_x_.resize(ds.p());
    lookup_z_.resize(ds.p());
    for (std::size_t j = 0; j < ds.p(); ++j) {
        const auto col = ds.column(j);
        const auto ranks = midranks(col);
        for (std::size_t i = 0; i < n; ++i) {
            z_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = norm_quantile(ranks[i] / denom);
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
        for (std::size_t idx : order) {
            if (lookup_x_[j].empty() || lookup_x_[j].back() != col[idx]) {
                lookup_x_[j].push_back(col[idx]);
                lookup_z_[j].push_back(z_(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(j)));
            }
        }
    }
    if (n >= kMinEstimationRows) {
        models_.reserve(ds.p());
        for (std::size_t j = 0; j < ds.p(); ++j) {
            models_.emplace_back(ds.column(j));
        }
    }
}

const MarginalModel& PseudoSample::model(std::size_t col) const {
    if (models_.empty()) {
        throw ValidationError(fmt::format("marginal models need at least {} observations", kMinEstimationRows));
    }
    return models_.at(col);
}

ZValue PseudoSample::z_at(std::size_t col, double x) const {
    const auto& xs = lookup_x_.at(col);
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    if (it != xs.end() && *it == x) {
        return {lookup_z_[col][static_cast<std::size_t>(it - xs.begin())], false};
    }
    return model(col).z_of_x(x);
}

PseudoSample pseudo_normalize(const Dataset& ds) { return PseudoSample(ds); }

} // namespace lgcd
