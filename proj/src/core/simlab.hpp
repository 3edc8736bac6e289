#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/conditioner.hpp"
#include "core/data_model.hpp"

namespace lgcd {

enum class Family {
    gaussian_copula,
    joe_copula,
    t_copula,
    multivariate_t,
    lognormal_t10_plus_indep_t5,
    nonlinear_ar1,
};

enum class Margin { std_normal, std_exponential, lognormal };

std::string to_string(Family f);
std::string to_string(Margin m);
std::optional<Family> parse_family(const std::string& s);
std::optional<Margin> parse_margin(const std::string& s);

// Parameters of every family; each family reads the fields it needs.
//   gaussian_copula: rho (equicorrelation)
//   joe_copula: theta
//   t_copula / multivariate_t: rho, dof
//   lognormal_t10_plus_indep_t5: rho for the t(10) copula of (X1, X2),
//     rho2 for the t(5) block X3..Xp
//   nonlinear_ar1: X_t = ar * X_{t-1} + ar_sqrt * sqrt|X_{t-1}| + N(0,1)
struct SimParams {
    double theta = 3.83;
    double rho = 0.5;
    double dof = 4.0;
    double rho2 = 0.5;
    double ar = 0.8;
    double ar_sqrt = 0.5;
};

struct SimSpec {
    Family family = Family::gaussian_copula;
    SimParams params;
    Margin margins = Margin::std_normal;
    std::size_t dim = 2;
    std::size_t n = 500;
    RngSeed seed;
};

void validate(const SimSpec& spec);

Dataset sample(const SimSpec& spec);

// Equally spaced grid over [F^-1(0.001), F^-1(0.999)] of the true marginal of X1.
std::vector<double> truth_grid(const SimSpec& spec, std::size_t points = 2000);

// True density of X1 given (X2, ..., Xp) = x2 at each grid point.
std::vector<double> true_conditional(const SimSpec& spec, std::span<const double> x2, std::span<const double> grid);

// Trapezoid integral of (estimate - truth)^2 over the grid.
double ise(std::span<const double> grid, std::span<const double> estimate, std::span<const double> truth);
double ise(const ConditionalDensity& estimate, std::span<const double> truth);

// Ratio of product-Gaussian KDEs (joint over conditioning marginal) with
// normal-reference bandwidths, renormalized on the grid. Single response only.
std::vector<double> naive_kernel_conditional(const Dataset& ds, const Partition& part, std::span<const double> x2,
                                             std::span<const double> grid);

enum class Method { lgde, naive };

std::string to_string(Method m);
std::optional<Method> parse_method(const std::string& s);

struct IseReport {
    std::vector<double> per_replicate;
    double mean_ise = 0.0;
    std::size_t p = 0;
    std::size_t n = 0;
    Method method = Method::lgde;

    double median_ise() const;
};

struct BenchOptions {
    std::size_t replicates = 20;
    std::size_t grid_points = 2000;
    Method method = Method::lgde;
};

// Replicate r samples with seed + r, estimates X1 | X2..Xp = x2 and scores it
// against the true conditional on the truth grid.
IseReport ise_bench(const SimSpec& spec, std::span<const double> x2, const BenchOptions& options);

// Kendall's tau-b in O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

} // namespace lgcd
