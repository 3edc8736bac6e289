#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/data_model.hpp"

namespace lgcd {

// F-hat is clamped to this distance from 0 and 1 before taking the normal quantile.
inline constexpr double kCdfClamp = 1e-12;

struct ZValue {
    double z = 0.0;
    bool clamped = false;
};

// Gaussian-kernel estimate of a univariate density. The CDF is the exact
// integral of the kernel sum and the quantile inverts it numerically.
class MarginalModel {
public:
    explicit MarginalModel(std::span<const double> sample);

    double density(double x) const;
    double cdf(double x) const;
    double quantile(double prob) const;

    ZValue z_of_x(double x) const;
    double x_of_z(double z) const;

    double bandwidth() const { return h_; }
    double sample_min() const { return sorted_.front(); }
    double sample_max() const { return sorted_.back(); }
    double sample_sd() const { return sd_; }
    std::size_t size() const { return sorted_.size(); }

private:
    // Kernel contributions are summed only over sample points inside
    // x +/- kWindow * h; the rest are below 1e-22 each.
    static constexpr double kWindow = 10.0;

    std::vector<double> sorted_;
    double h_ = 0.0;
    double sd_ = 0.0;
};

MarginalModel fit_marginal(std::span<const double> column);

// Silverman's rule: 0.9 * min(sd, IQR/1.34) * n^(-1/5).
double silverman_bandwidth(std::span<const double> sample);

// Type-7 sample quantile of an already sorted sample.
double sorted_quantile(std::span<const double> sorted, double prob);

// Midranks of a column, 1-based.
std::vector<double> midranks(std::span<const double> column);

// Marginally standard-normal version of a dataset: z = Phi^-1(R / (n + 1))
// with midranks R. Keeps the per-column lookup from raw value to pseudo
// value, and KDE marginals when the sample is large enough to fit them.
class PseudoSample {
public:
    explicit PseudoSample(const Dataset& ds);

    const Eigen::MatrixXd& z_values() const { return z_; }
    std::span<const double> column(std::size_t col) const {
        return {z_.col(static_cast<Eigen::Index>(col)).data(), static_cast<std::size_t>(z_.rows())};
    }
    std::size_t n() const { return static_cast<std::size_t>(z_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(z_.cols()); }
    const Dataset& source() const { return source_; }

    bool has_models() const { return !models_.empty(); }
    const MarginalModel& model(std::size_t col) const;

    // Pseudo value of x in column col: the rank-based value when x is one of
    // the sample values, otherwise Phi^-1 of the KDE CDF.
    ZValue z_at(std::size_t col, double x) const;

private:
    Dataset source_;
    Eigen::MatrixXd z_;
    // Per column: distinct sorted raw values and their pseudo values.
    std::vector<std::vector<double>> lookup_x_;
    std::vector<std::vector<double>> lookup_z_;
    std::vector<MarginalModel> models_;
};

PseudoSample pseudo_normalize(const Dataset& ds);

} // namespace lgcd
