#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "core/marginals.hpp"

namespace lgcd {

enum class BandwidthStrategy { cv, fixed };

inline constexpr double kBandwidthMin = 0.2;
inline constexpr double kBandwidthMax = 3.0;
inline constexpr std::size_t kBandwidthGridPoints = 15;

// One scalar bandwidth per unordered variable pair.
class BandwidthPlan {
public:
    BandwidthPlan() = default;
    explicit BandwidthPlan(BandwidthStrategy strategy) : strategy_(strategy) {}

    static BandwidthPlan fixed(std::size_t p, double h);

    void set(std::size_t i, std::size_t j, double h);
    // Throws ContractError when the pair is missing.
    double get(std::size_t i, std::size_t j) const;
    bool contains(std::size_t i, std::size_t j) const;

    BandwidthStrategy strategy() const { return strategy_; }
    // Pairs keyed with i < j, in ascending order.
    const std::map<std::pair<std::size_t, std::size_t>, double>& pairs() const { return per_pair_; }

    bool operator==(const BandwidthPlan&) const = default;

private:
    BandwidthStrategy strategy_ = BandwidthStrategy::fixed;
    std::map<std::pair<std::size_t, std::size_t>, double> per_pair_;
};

struct CvResult {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
};

// Leave-one-out likelihood cross-validation: the mean over t of
// log psi2(Z_t, rho_(-t)(Z_t)). Terms whose fit has no local mass are skipped;
// more than 10% skipped is an error.
CvResult cv_objective(std::span<const double> x1, std::span<const double> x2, double h);

struct BandwidthSearch {
    double h = 0.0;
    double cv = 0.0;
    // Every evaluated (h, CV) pair, grid first then refinement.
    std::vector<std::pair<double, double>> evaluated;
};

// Log-spaced grid of 15 points on [0.2, 3], then one golden-section pass
// between the neighbours of the best grid point. Returns the best evaluated h.
BandwidthSearch search_bandwidth(std::span<const double> x1, std::span<const double> x2);

std::vector<double> bandwidth_grid();

struct BandwidthOptions {
    BandwidthStrategy strategy = BandwidthStrategy::cv;
    double fixed_h = 1.0;
};

// Plan over every pair of the listed columns (all columns when empty).
BandwidthPlan select_bandwidths(const PseudoSample& ps, const BandwidthOptions& options = {},
                                std::span<const std::size_t> columns = {});

} // namespace lgcd
