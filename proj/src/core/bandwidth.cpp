#include "core/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "core/error.hpp"
#include "core/local_likelihood.hpp"
#include "core/parallel.hpp"

namespace lgcd {

namespace {

std::pair<std::size_t, std::size_t> key(std::size_t i, std::size_t j) {
    return i < j ? std::make_pair(i, j) : std::make_pair(j, i);
}

} // namespace

BandwidthPlan BandwidthPlan::fixed(std::size_t p, double h) {
    BandwidthPlan plan(BandwidthStrategy::fixed);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i + 1; j < p; ++j) {
            plan.set(i, j, h);
        }
    }
    return plan;
}

void BandwidthPlan::set(std::size_t i, std::size_t j, double h) {
    if (i == j) {
        throw ContractError("bandwidth pair needs two distinct variables");
    }
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw ValidationError(fmt::format("bandwidth must be positive, got {}", h));
    }
    per_pair_[key(i, j)] = h;
}

double BandwidthPlan::get(std::size_t i, std::size_t j) const {
    const auto it = per_pair_.find(key(i, j));
    if (it == per_pair_.end()) {
        throw ContractError(fmt::format("no bandwidth for pair ({},{})", i, j));
    }
    return it->second;
}

bool BandwidthPlan::contains(std::size_t i, std::size_t j) const { return per_pair_.contains(key(i, j)); }

CvResult cv_objective(std::span<const double> x1, std::span<const double> x2, double h) {
    const std::size_t n = x1.size();
    if (n < kMinEstimationRows) {
        throw ValidationError(fmt::format("cross-validation needs at least {} observations", kMinEstimationRows));
    }
    if (!(h > 0.0)) {
        throw ValidationError("bandwidth must be positive");
    }
    const Bandwidth2 hh{h, h};
    std::vector<std::optional<double>> terms(n);
    parallel_for(n, [&](std::size_t t) {
        const Point2 z{x1[t], x2[t]};
        try {
            const LocalSums sums = accumulate_local(x1, x2, z, hh, t);
            const RhoFit fit = maximize_local(LocalObjective(sums, z, hh));
            terms[t] = log_psi2(z, fit.rho);
        } catch (const NoLocalMassError&) {
            terms[t] = std::nullopt;
        }
    });
    CvResult out;
    double sum = 0.0;
    for (const auto& term : terms) {
        if (term) {
            sum += *term;
            ++out.used;
        } else {
            ++out.skipped;
        }
    }
    if (10 * out.skipped > n) {
        throw NumericError(fmt::format("cross-validation skipped {} of {} observations (no local mass)",
                                       out.skipped, n));
    }
    out.value = sum / static_cast<double>(out.used);
    return out;
}

std::vector<double> bandwidth_grid() {
    std::vector<double> grid(kBandwidthGridPoints);
    const double lo = std::log(kBandwidthMin);
    const double hi = std::log(kBandwidthMax);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double frac = static_cast<double>(g) / static_cast<double>(grid.size() - 1);
        grid[g] = std::exp(lo + frac * (hi - lo));
    }
    grid.front() = kBandwidthMin;
    grid.back() = kBandwidthMax;
    return grid;
}

BandwidthSearch search_bandwidth(std::span<const double> x1, std::span<const double> x2) {
    BandwidthSearch out;
    const auto grid = bandwidth_grid();
    auto evaluate = [&](double h) {
        const double v = cv_objective(x1, x2, h).value;
        out.evaluated.emplace_back(h, v);
        return v;
    };
    std::size_t best = 0;
    std::vector<double> values;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        values.push_back(evaluate(grid[g]));
        if (values[g] > values[best]) {
            best = g;
        }
    }

    // Golden section in log h over the bracket around the best grid point.
    constexpr double kInvPhi = 0.6180339887498948482045868343656381177203091798058;
    double lo = std::log(grid[best == 0 ? 0 : best - 1]);
    double hi = std::log(grid[std::min(best + 1, grid.size() - 1)]);
    double c = hi - kInvPhi * (hi - lo);
    double d = lo + kInvPhi * (hi - lo);
    double fc = evaluate(std::exp(c));
    double fd = evaluate(std::exp(d));
    while (hi - lo > 0.01) {
        if (fc >= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - kInvPhi * (hi - lo);
            fc = evaluate(std::exp(c));
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + kInvPhi * (hi - lo);
            fd = evaluate(std::exp(d));
        }
    }

    // Best evaluated point; ties go to the smaller bandwidth.
    out.h = out.evaluated.front().first;
    out.cv = out.evaluated.front().second;
    for (const auto& [h, v] : out.evaluated) {
        if (v > out.cv || (v == out.cv && h < out.h)) {
            out.h = h;
            out.cv = v;
        }
    }
    out.h = std::clamp(out.h, kBandwidthMin, kBandwidthMax);
    return out;
}

BandwidthPlan select_bandwidths(const PseudoSample& ps, const BandwidthOptions& options,
                                std::span<const std::size_t> columns) {
    std::vector<std::size_t> cols(columns.begin(), columns.end());
    if (cols.empty()) {
        cols.resize(ps.p());
        std::iota(cols.begin(), cols.end(), std::size_t{0});
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < cols.size(); ++a) {
        for (std::size_t b = a + 1; b < cols.size(); ++b) {
            pairs.push_back(key(cols[a], cols[b]));
        }
    }
    BandwidthPlan plan(options.strategy);
    if (options.strategy == BandwidthStrategy::fixed) {
        for (const auto& [i, j] : pairs) {
            plan.set(i, j, options.fixed_h);
        }
        return plan;
    }
    std::vector<double> chosen(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        chosen[k] = search_bandwidth(ps.column(pairs[k].first), ps.column(pairs[k].second)).h;
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        plan.set(pairs[k].first, pairs[k].second, chosen[k]);
    }
    return plan;
}

} // namespace lgcd
