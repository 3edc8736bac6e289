#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/bandwidth.hpp"
#include "core/data_model.hpp"
#include "core/local_likelihood.hpp"
#include "core/marginals.hpp"

namespace lgcd {

inline constexpr double kMinEigenvalue = 1e-6;

// Fitted local correlation functions for every pair of a set of variables.
class PairwiseField {
public:
    PairwiseField(const PseudoSample& ps, const BandwidthPlan& plan, std::span<const std::size_t> vars);

    const std::vector<std::size_t>& vars() const { return vars_; }
    // Throws ContractError when the pair was not fitted.
    const PairFit& fit(std::size_t i, std::size_t j) const;
    // Local correlation of variables i and j evaluated at (z_i, z_j).
    double rho(std::size_t i, std::size_t j, double zi, double zj) const;

private:
    std::vector<std::size_t> vars_;
    std::map<std::pair<std::size_t, std::size_t>, PairFit> fits_;
};

struct LocalCorrMatrix {
    Eigen::MatrixXd R;
    bool psd_repaired = false;
};

// Leaves R alone when its smallest eigenvalue is at least 1e-6. Otherwise
// clips the spectrum at 1e-6 and rescales to a unit diagonal, repeating (and
// finally shrinking towards the identity) until the bound and |r_ij| <= 0.995
// both hold.
LocalCorrMatrix repair_correlation(Eigen::MatrixXd R);

// R over `vars` (in that order) at the pseudo point z, which is aligned with vars.
LocalCorrMatrix assemble_R(const PairwiseField& field, std::span<const std::size_t> vars,
                           const Eigen::VectorXd& z);

struct ConditionalGaussianParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
};

// mu = R12 R22^-1 z2, Sigma = R11 - R12 R22^-1 R21. Partition indices refer
// to rows/columns of R.
ConditionalGaussianParams condition(const LocalCorrMatrix& R, const Eigen::VectorXd& z2, const Partition& part);

// k-variate normal density.
double gaussian_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma);

// Trapezoid weights of a 1-D grid.
std::vector<double> trapezoid_weights(std::span<const double> axis);

// Normalized estimate of f(x1 | X2 = x2) on a tensor grid of response points.
// Values are stored row-major with the last response axis varying fastest.
struct ConditionalDensity {
    std::vector<std::vector<double>> axes;
    std::vector<double> values;
    double normalizer = 0.0;
    std::vector<ConditionalGaussianParams> params;
    std::vector<double> conditioning_point;
    std::vector<double> conditioning_z;
    std::size_t psd_repaired = 0;
    std::size_t clamped = 0;
    // Response grid points where a pair fit had no data nearby; their value is 0.
    std::size_t no_local_mass = 0;

    std::size_t k() const { return axes.size(); }
    std::size_t size() const { return values.size(); }
    double psd_repaired_fraction() const {
        return values.empty() ? 0.0 : static_cast<double>(psd_repaired) / static_cast<double>(values.size());
    }
    // Response coordinates of flat grid index idx.
    std::vector<double> point(std::size_t idx) const;
    // Trapezoid integral of the stored values.
    double integral() const;
};

struct GridOptions {
    // Points per response axis; 0 means 2000 for k = 1 and 100 for k = 2.
    std::size_t grid_size = 0;
    // Caller-supplied axes, one per response variable. Required when k >= 3.
    std::vector<std::vector<double>> axes;
};

// Fitted pieces that do not depend on the conditioning value: pseudo sample,
// marginals and the pairwise correlation field over response + conditioning
// variables.
class ConditionalEstimator {
public:
    ConditionalEstimator(const Dataset& ds, Partition part, const BandwidthPlan& plan);

    const Partition& partition() const { return part_; }
    const PseudoSample& pseudo() const { return ps_; }
    const PairwiseField& field() const { return field_; }
    const BandwidthPlan& plan() const { return plan_; }

    ConditionalDensity estimate(std::span<const double> x2, const GridOptions& grid = {}) const;

    // Local Gaussian parameters at a pseudo point ordered response first.
    ConditionalGaussianParams params_at(const Eigen::VectorXd& z, bool* repaired = nullptr) const;

    // Default response axes: [F^-1(0.001), F^-1(0.999)] of each response marginal.
    std::vector<std::vector<double>> default_axes(std::size_t points_per_axis) const;

private:
    Partition part_;
    BandwidthPlan plan_;
    PseudoSample ps_;
    std::vector<std::size_t> vars_;
    PairwiseField field_;
};

ConditionalDensity estimate_conditional(const Dataset& ds, const Partition& part, const BandwidthPlan& plan,
                                        std::span<const double> x2, const GridOptions& grid = {});

struct QuantileResult {
    double value = 0.0;
    bool extrapolated = false;
};

// Smallest grid x whose cumulative trapezoid mass reaches alpha, linearly
// interpolated. Targets in the outermost grid cells return that endpoint and
// set the extrapolation flag.
QuantileResult conditional_quantile(const ConditionalDensity& cd, double alpha);

} // namespace lgcd
