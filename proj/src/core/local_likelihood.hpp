#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace lgcd {

// Parameter space for the local correlation.
inline constexpr double kRhoBound = 0.995;

struct Point2 {
    double z1 = 0.0;
    double z2 = 0.0;
};

struct Bandwidth2 {
    double h1 = 1.0;
    double h2 = 1.0;
};

// Standardized bivariate normal density with correlation rho.
double psi2(Point2 z, double rho);
double log_psi2(Point2 z, double rho);

// d log psi2 / d rho.
double score_u(Point2 z, double rho);

// Integral of the product Gaussian kernel centred at z against psi2, i.e. the
// N(0, [[1 + h1^2, rho], [rho, 1 + h2^2]]) density at z.
double penalty_integral(Point2 z, double rho, Bandwidth2 h);
double penalty_integral_drho(Point2 z, double rho, Bandwidth2 h);
double penalty_integral_drho2(Point2 z, double rho, Bandwidth2 h);

inline constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

// Kernel-weighted sufficient statistics of the local log-likelihood at z.
// The Gaussian log-density is quadratic in the data, so these four sums fix
// the data term for every rho.
struct LocalSums {
    double s0 = 0.0;   // sum K_h(Z_t - z)
    double s11 = 0.0;  // sum K_h(Z_t - z) Z_t1^2
    double s22 = 0.0;  // sum K_h(Z_t - z) Z_t2^2
    double s12 = 0.0;  // sum K_h(Z_t - z) Z_t1 Z_t2
    std::size_t count = 0;
};

// Throws NoLocalMassError when no datum lies within 10 bandwidths of z in
// both coordinates or the total weight underflows. Index `skip` is left out.
LocalSums accumulate_local(std::span<const double> x1, std::span<const double> x2, Point2 z, Bandwidth2 h,
                           std::size_t skip = kNoSkip);

// Local log-likelihood at z as a function of rho, with analytic derivatives.
class LocalObjective {
public:
    LocalObjective(const LocalSums& sums, Point2 z, Bandwidth2 h) : sums_(sums), z_(z), h_(h) {}

    double value(double rho) const;
    double d1(double rho) const;
    double d2(double rho) const;

private:
    LocalSums sums_;
    Point2 z_;
    Bandwidth2 h_;
};

double local_loglik(std::span<const double> x1, std::span<const double> x2, Point2 z, double rho, Bandwidth2 h);

struct RhoFit {
    double rho = 0.0;
    bool boundary = false;
    double objective = 0.0;
    double gradient = 0.0;
};

// Maximizes the objective over [-kRhoBound, kRhoBound]: guarded Newton from
// -0.5, 0 and 0.5, golden-section fallback, best start kept.
RhoFit maximize_local(const LocalObjective& objective);

RhoFit fit_rho(std::span<const double> x1, std::span<const double> x2, Point2 z, Bandwidth2 h);

// Local correlation function of one variable pair, estimated from its pseudo
// observations with a fixed bandwidth.
class PairFit {
public:
    PairFit(std::size_t i, std::size_t j, std::span<const double> zi, std::span<const double> zj, double h);

    std::size_t i() const { return i_; }
    std::size_t j() const { return j_; }
    double h() const { return h_; }

    RhoFit fit_at(double zi, double zj) const;
    double rho_at(double zi, double zj) const { return fit_at(zi, zj).rho; }

private:
    std::size_t i_;
    std::size_t j_;
    std::vector<double> zi_;
    std::vector<double> zj_;
    double h_;
};

} // namespace lgcd
