#include "core/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "core/bandwidth.hpp"
#include "core/error.hpp"
#include "core/normal.hpp"
#include "core/parallel.hpp"

namespace lgcd {

std::string to_string(Family f) {
    switch (f) {
    case Family::gaussian_copula: return "gaussian_copula";
    case Family::joe_copula: return "joe_copula";
    case Family::t_copula: return "t_copula";
    case Family::multivariate_t: return "multivariate_t";
    case Family::lognormal_t10_plus_indep_t5: return "lognormal_t10_plus_indep_t5";
    case Family::nonlinear_ar1: return "nonlinear_ar1";
    }
    return "unknown";
}

std::string to_string(Margin m) {
    switch (m) {
    case Margin::std_normal: return "std_normal";
    case Margin::std_exponential: return "std_exponential";
    case Margin::lognormal: return "lognormal";
    }
    return "unknown";
}

std::string to_string(Method m) { return m == Method::lgde ? "lgde" : "naive"; }

std::optional<Family> parse_family(const std::string& s) {
    for (auto f : {Family::gaussian_copula, Family::joe_copula, Family::t_copula, Family::multivariate_t,
                   Family::lognormal_t10_plus_indep_t5, Family::nonlinear_ar1}) {
        if (to_string(f) == s) {
            return f;
        }
    }
    return std::nullopt;
}

std::optional<Margin> parse_margin(const std::string& s) {
    for (auto m : {Margin::std_normal, Margin::std_exponential, Margin::lognormal}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    return std::nullopt;
}

std::optional<Method> parse_method(const std::string& s) {
    if (s == "lgde") {
        return Method::lgde;
    }
    if (s == "naive") {
        return Method::naive;
    }
    return std::nullopt;
}

namespace {

constexpr std::size_t kArBurnIn = 500;

// ---- margins -------------------------------------------------------------

// Inverse CDF from a uniform and its complement; the smaller of the two is
// used so upper tails keep their precision.
double margin_quantile(Margin m, double u, double sf) {
    const double z = u < 0.5 ? norm_quantile(u) : -norm_quantile(sf);
    switch (m) {
    case Margin::std_normal: return z;
    case Margin::std_exponential: return u < 0.5 ? -std::log1p(-u) : -std::log(sf);
    case Margin::lognormal: return std::exp(z);
    }
    return z;
}

double margin_cdf(Margin m, double x) {
    switch (m) {
    case Margin::std_normal: return norm_cdf(x);
    case Margin::std_exponential: return x <= 0.0 ? 0.0 : -std::expm1(-x);
    case Margin::lognormal: return x <= 0.0 ? 0.0 : norm_cdf(std::log(x));
    }
    return 0.0;
}

double margin_sf(Margin m, double x) {
    switch (m) {
    case Margin::std_normal: return norm_cdf(-x);
    case Margin::std_exponential: return x <= 0.0 ? 1.0 : std::exp(-x);
    case Margin::lognormal: return x <= 0.0 ? 1.0 : norm_cdf(-std::log(x));
    }
    return 1.0;
}

double margin_pdf(Margin m, double x) {
    switch (m) {
    case Margin::std_normal: return norm_pdf(x);
    case Margin::std_exponential: return x < 0.0 ? 0.0 : std::exp(-x);
    case Margin::lognormal: return x <= 0.0 ? 0.0 : norm_pdf(std::log(x)) / x;
    }
    return 0.0;
}

// Standard normal score of a margin value, computed on the accurate side.
double margin_to_z(Margin m, double x) {
    if (m == Margin::std_normal) {
        return x;
    }
    if (m == Margin::lognormal) {
        return std::log(x);
    }
    const double u = margin_cdf(m, x);
    return u < 0.5 ? norm_quantile(u) : -norm_quantile(margin_sf(m, x));
}

// ---- Joe copula ----------------------------------------------------------

double log_sum_exp(std::span<const double> terms) {
    const double mx = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(mx)) {
        return mx;
    }
    double s = 0.0;
    for (double t : terms) {
        s += std::exp(t - mx);
    }
    return mx + std::log(s);
}

// Generator psi(t) = 1 - (1 - e^-t)^(1/theta) and its derivatives. With
// x = e^-t and w = 1 - x, the j-th derivative of w^a is a sum of
// c_ji x^i w^(a-i); applying d/dt = -x d/dx to one term gives
// -i x^i w^(a-i) + (a-i) x^(i+1) w^(a-i-1). All c_ji share one sign.
class JoeGenerator {
public:
    JoeGenerator(double theta, std::size_t max_order) : theta_(theta), alpha_(1.0 / theta) {
        coef_.push_back({1.0});
        for (std::size_t j = 1; j <= max_order; ++j) {
            const auto& prev = coef_.back();
            std::vector<double> next(j + 1, 0.0);
            for (std::size_t i = 0; i < prev.size(); ++i) {
                next[i] += -static_cast<double>(i) * prev[i];
                next[i + 1] += (alpha_ - static_cast<double>(i)) * prev[i];
            }
            coef_.push_back(std::move(next));
        }
    }

    // phi(u) = -log(1 - (1-u)^theta), from the survival value 1 - u.
    double phi_from_sf(double sf) const { return -std::log1p(-std::pow(sf, theta_)); }

    // 1 - psi(t).
    double sf_of_t(double t) const { return std::pow(-std::expm1(-t), alpha_); }

    // log |psi^(j)(t)| for j >= 1.
    double log_abs_deriv(std::size_t j, double t) const {
        const auto& c = coef_.at(j);
        const double log_w = std::log(-std::expm1(-t));
        std::vector<double> terms;
        for (std::size_t i = 1; i < c.size(); ++i) {
            if (c[i] == 0.0) {
                continue;
            }
            const double di = static_cast<double>(i);
            terms.push_back(std::log(std::abs(c[i])) - di * t + (alpha_ - di) * log_w);
        }
        return log_sum_exp(terms);
    }

    // log |phi'(u)| = log theta + (theta-1) log(1-u) - log(1 - (1-u)^theta).
    double log_abs_phi_prime(double sf) const {
        return std::log(theta_) + (theta_ - 1.0) * std::log(sf) - std::log1p(-std::pow(sf, theta_));
    }

    // Solves C(u_k | previous) = v for t_k = phi(u_k), where s is the sum of
    // phi over the previous coordinates and order = k - 1.
    double conditional_inverse(std::size_t order, double s, double v) const {
        const double base = log_abs_deriv(order, s);
        const double log_v = std::log(v);
        auto f = [&](double y) { return log_abs_deriv(order, s + std::exp(y)) - base - log_v; };
        double lo = -80.0;
        double hi = 8.0;
        const double flo = f(lo);
        const double fhi = f(hi);
        if (flo <= 0.0) {
            return std::exp(lo);
        }
        if (fhi >= 0.0) {
            return std::exp(hi);
        }
        std::uintmax_t iters = 200;
        const auto root = boost::math::tools::toms748_solve(
            f, lo, hi, flo, fhi,
            [](double a, double b) { return std::abs(b - a) <= 1e-10 * (1.0 + std::abs(a)); }, iters);
        return std::exp(0.5 * (root.first + root.second));
    }

private:
    double theta_;
    double alpha_;
    std::vector<std::vector<double>> coef_;
};

// ---- shared helpers ------------------------------------------------------

Eigen::MatrixXd equicorrelation(std::size_t p, double rho) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p), rho);
    r.diagonal().setOnes();
    return r;
}

Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& r) {
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) {
        throw ValidationError("correlation matrix is not positive definite");
    }
    return llt.matrixL();
}

Eigen::VectorXd correlated_normals(Rng& rng, const Eigen::MatrixXd& chol) {
    Eigen::VectorXd e(chol.rows());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        e(i) = rng.normal();
    }
    return chol * e;
}

double t_cdf(double nu, double x) {
    return boost::math::cdf(boost::math::students_t_distribution<double>(nu), x);
}

double t_sf(double nu, double x) {
    return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(nu), x));
}

double t_quantile(double nu, double p) {
    return boost::math::quantile(boost::math::students_t_distribution<double>(nu), p);
}

double t_log_pdf(double nu, double x) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi) -
           0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

// Density of the first coordinate of an equicorrelated multivariate t (dof
// nu, correlation rho, dimension 1 + q2.size()) given the rest equal q2.
double t_conditional_log_pdf(double nu, double rho, double q1, std::span<const double> q2) {
    const std::size_t m = q2.size();
    const Eigen::MatrixXd r22 = equicorrelation(m, rho);
    const Eigen::RowVectorXd r12 = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(m), rho);
    const Eigen::Map<const Eigen::VectorXd> v(q2.data(), static_cast<Eigen::Index>(m));
    const Eigen::LLT<Eigen::MatrixXd> llt(r22);
    const double mu = r12 * llt.solve(v);
    const double schur = 1.0 - (r12 * llt.solve(r12.transpose()))(0, 0);
    const double d2 = v.dot(llt.solve(v));
    const double nu_c = nu + static_cast<double>(m);
    const double scale = std::sqrt((nu + d2) / nu_c * schur);
    return t_log_pdf(nu_c, (q1 - mu) / scale) - std::log(scale);
}

double gaussian_conditional_pdf(double rho, double z1, std::span<const double> z2) {
    const std::size_t m = z2.size();
    const Eigen::MatrixXd r22 = equicorrelation(m, rho);
    const Eigen::RowVectorXd r12 = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(m), rho);
    const Eigen::Map<const Eigen::VectorXd> v(z2.data(), static_cast<Eigen::Index>(m));
    const Eigen::LLT<Eigen::MatrixXd> llt(r22);
    const double mu = r12 * llt.solve(v);
    const double var = 1.0 - (r12 * llt.solve(r12.transpose()))(0, 0);
    const double sd = std::sqrt(var);
    return norm_pdf((z1 - mu) / sd) / sd;
}

} // namespace

void validate(const SimSpec& spec) {
    const auto& pr = spec.params;
    if (spec.n == 0) {
        throw ValidationError("sample size must be positive");
    }
    switch (spec.family) {
    case Family::gaussian_copula:
        if (spec.dim < 2) {
            throw ValidationError("gaussian_copula needs dim >= 2");
        }
        cholesky_or_throw(equicorrelation(spec.dim, pr.rho));
        break;
    case Family::joe_copula:
        if (spec.dim < 2) {
            throw ValidationError("joe_copula needs dim >= 2");
        }
        if (!(pr.theta >= 1.0) || !std::isfinite(pr.theta)) {
            throw ValidationError("joe_copula needs theta >= 1");
        }
        break;
    case Family::t_copula:
    case Family::multivariate_t:
        if (spec.dim < 2) {
            throw ValidationError("t families need dim >= 2");
        }
        if (!(pr.dof > 0.0)) {
            throw ValidationError("degrees of freedom must be positive");
        }
        cholesky_or_throw(equicorrelation(spec.dim, pr.rho));
        break;
    case Family::lognormal_t10_plus_indep_t5:
        if (spec.dim < 2) {
            throw ValidationError("lognormal_t10_plus_indep_t5 needs dim >= 2");
        }
        cholesky_or_throw(equicorrelation(2, pr.rho));
        if (spec.dim > 2) {
            cholesky_or_throw(equicorrelation(spec.dim - 2, pr.rho2));
        }
        break;
    case Family::nonlinear_ar1:
        if (spec.dim != 1) {
            throw ValidationError("nonlinear_ar1 produces a single series (dim = 1)");
        }
        if (!std::isfinite(pr.ar) || !std::isfinite(pr.ar_sqrt)) {
            throw ValidationError("AR coefficients must be finite");
        }
        break;
    }
}

Dataset sample(const SimSpec& spec) {
    validate(spec);
    const std::size_t n = spec.n;
    const std::size_t p = spec.dim;
    const auto& pr = spec.params;
    Rng rng(spec.seed.value);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));

    switch (spec.family) {
    case Family::gaussian_copula: {
        const Eigen::MatrixXd chol = cholesky_or_throw(equicorrelation(p, pr.rho));
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd z = correlated_normals(rng, chol);
            for (std::size_t j = 0; j < p; ++j) {
                const double zj = z(static_cast<Eigen::Index>(j));
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    spec.margins == Margin::std_normal ? zj : margin_quantile(spec.margins, norm_cdf(zj), norm_cdf(-zj));
            }
        }
        break;
    }
    case Family::joe_copula: {
        const JoeGenerator gen(pr.theta, p);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double v = rng.uniform();
                double sf;
                if (j == 0) {
                    sf = 1.0 - v;
                    s = gen.phi_from_sf(sf);
                } else {
                    const double t = gen.conditional_inverse(j, s, v);
                    sf = gen.sf_of_t(t);
                    s += t;
                }
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    margin_quantile(spec.margins, 1.0 - sf, sf);
            }
        }
        break;
    }
    case Family::t_copula:
    case Family::multivariate_t: {
        const Eigen::MatrixXd chol = cholesky_or_throw(equicorrelation(p, pr.rho));
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd z = correlated_normals(rng, chol);
            const double scale = std::sqrt(rng.chi_square(pr.dof) / pr.dof);
            for (std::size_t j = 0; j < p; ++j) {
                const double t = z(static_cast<Eigen::Index>(j)) / scale;
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    spec.family == Family::multivariate_t
                        ? t
                        : margin_quantile(spec.margins, t_cdf(pr.dof, t), t_sf(pr.dof, t));
            }
        }
        break;
    }
    case Family::lognormal_t10_plus_indep_t5: {
        const Eigen::MatrixXd chol_a = cholesky_or_throw(equicorrelation(2, pr.rho));
        const Eigen::MatrixXd chol_b = p > 2 ? cholesky_or_throw(equicorrelation(p - 2, pr.rho2)) : Eigen::MatrixXd();
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::VectorXd za = correlated_normals(rng, chol_a);
            const double sa = std::sqrt(rng.chi_square(10.0) / 10.0);
            for (std::size_t j = 0; j < 2; ++j) {
                const double t = za(static_cast<Eigen::Index>(j)) / sa;
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    margin_quantile(Margin::lognormal, t_cdf(10.0, t), t_sf(10.0, t));
            }
            if (p > 2) {
                const Eigen::VectorXd zb = correlated_normals(rng, chol_b);
                const double sb = std::sqrt(rng.chi_square(5.0) / 5.0);
                for (std::size_t j = 2; j < p; ++j) {
                    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        zb(static_cast<Eigen::Index>(j - 2)) / sb;
                }
            }
        }
        break;
    }
    case Family::nonlinear_ar1: {
        double prev = 0.0;
        for (std::size_t t = 0; t < kArBurnIn + n; ++t) {
            const double next = pr.ar * prev + pr.ar_sqrt * std::sqrt(std::abs(prev)) + rng.normal();
            if (t >= kArBurnIn) {
                x(static_cast<Eigen::Index>(t - kArBurnIn), 0) = next;
            }
            prev = next;
        }
        return Dataset(std::move(x), {"X"});
    }
    }
    return Dataset(std::move(x));
}

std::vector<double> truth_grid(const SimSpec& spec, std::size_t points) {
    if (points < 2) {
        throw ValidationError("grid needs at least two points");
    }
    double lo = 0.0;
    double hi = 0.0;
    switch (spec.family) {
    case Family::gaussian_copula:
    case Family::joe_copula:
    case Family::t_copula:
        lo = margin_quantile(spec.margins, 0.001, 0.999);
        hi = margin_quantile(spec.margins, 0.999, 0.001);
        break;
    case Family::multivariate_t:
        lo = t_quantile(spec.params.dof, 0.001);
        hi = t_quantile(spec.params.dof, 0.999);
        break;
    case Family::lognormal_t10_plus_indep_t5:
        lo = margin_quantile(Margin::lognormal, 0.001, 0.999);
        hi = margin_quantile(Margin::lognormal, 0.999, 0.001);
        break;
    case Family::nonlinear_ar1:
        throw UnsupportedError("no true conditional for nonlinear_ar1");
    }
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    grid.back() = hi;
    return grid;
}

std::vector<double> true_conditional(const SimSpec& spec, std::span<const double> x2, std::span<const double> grid) {
    validate(spec);
    const auto& pr = spec.params;
    if (spec.family == Family::nonlinear_ar1) {
        throw UnsupportedError("no true conditional for nonlinear_ar1");
    }
    if (x2.size() + 1 != spec.dim) {
        throw ValidationError(fmt::format("expected {} conditioning values, got {}", spec.dim - 1, x2.size()));
    }
    std::vector<double> out(grid.size(), 0.0);
    switch (spec.family) {
    case Family::gaussian_copula: {
        std::vector<double> z2;
        for (double v : x2) {
            z2.push_back(margin_to_z(spec.margins, v));
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double f1 = margin_pdf(spec.margins, grid[g]);
            if (f1 <= 0.0) {
                continue;
            }
            const double z1 = margin_to_z(spec.margins, grid[g]);
            out[g] = gaussian_conditional_pdf(pr.rho, z1, z2) * f1 / norm_pdf(z1);
        }
        break;
    }
    case Family::joe_copula: {
        const JoeGenerator gen(pr.theta, spec.dim);
        double s2 = 0.0;
        for (double v : x2) {
            const double sf = margin_sf(spec.margins, v);
            if (!(sf > 0.0 && sf < 1.0)) {
                throw ValidationError("conditioning value outside the margin's support");
            }
            s2 += gen.phi_from_sf(sf);
        }
        const double log_den = gen.log_abs_deriv(spec.dim - 1, s2);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double f1 = margin_pdf(spec.margins, grid[g]);
            const double sf1 = margin_sf(spec.margins, grid[g]);
            if (f1 <= 0.0 || !(sf1 > 0.0 && sf1 < 1.0)) {
                continue;
            }
            const double t1 = gen.phi_from_sf(sf1);
            out[g] = std::exp(gen.log_abs_deriv(spec.dim, s2 + t1) - log_den + gen.log_abs_phi_prime(sf1)) * f1;
        }
        break;
    }
    case Family::t_copula:
    case Family::lognormal_t10_plus_indep_t5: {
        const bool mixed = spec.family == Family::lognormal_t10_plus_indep_t5;
        const double nu = mixed ? 10.0 : pr.dof;
        const Margin margin = mixed ? Margin::lognormal : spec.margins;
        // Only X2 carries information about X1 in the mixed design.
        const std::size_t used = mixed ? 1 : x2.size();
        std::vector<double> q2;
        for (std::size_t c = 0; c < used; ++c) {
            const double u = margin_cdf(margin, x2[c]);
            const double sf = margin_sf(margin, x2[c]);
            q2.push_back(u < 0.5 ? t_quantile(nu, u) : -t_quantile(nu, sf));
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double f1 = margin_pdf(margin, grid[g]);
            if (f1 <= 0.0) {
                continue;
            }
            const double u = margin_cdf(margin, grid[g]);
            const double sf = margin_sf(margin, grid[g]);
            const double q1 = u < 0.5 ? t_quantile(nu, u) : -t_quantile(nu, sf);
            out[g] = std::exp(t_conditional_log_pdf(nu, pr.rho, q1, q2) - t_log_pdf(nu, q1)) * f1;
        }
        break;
    }
    case Family::multivariate_t:
        for (std::size_t g = 0; g < grid.size(); ++g) {
            out[g] = std::exp(t_conditional_log_pdf(pr.dof, pr.rho, grid[g], x2));
        }
        break;
    case Family::nonlinear_ar1:
        break;
    }
    return out;
}

double ise(std::span<const double> grid, std::span<const double> estimate, std::span<const double> truth) {
    if (grid.size() != estimate.size() || grid.size() != truth.size() || grid.size() < 2) {
        throw ContractError("ISE needs estimate and truth on the same grid");
    }
    std::vector<double> sq(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = estimate[i] - truth[i];
        sq[i] = d * d;
    }
    const auto w = trapezoid_weights(grid);
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sum += w[i] * sq[i];
    }
    return sum;
}

double ise(const ConditionalDensity& estimate, std::span<const double> truth) {
    if (estimate.k() != 1) {
        throw ContractError("ISE is defined for a single response variable");
    }
    return ise(estimate.axes[0], estimate.values, truth);
}

std::vector<double> naive_kernel_conditional(const Dataset& ds, const Partition& part, std::span<const double> x2,
                                             std::span<const double> grid) {
    require_estimable(ds);
    const Partition checked = make_partition(part.response, part.conditioning, ds.p());
    if (checked.k() != 1) {
        throw UnsupportedError("naive kernel conditional supports a single response variable");
    }
    const std::size_t d = checked.k() + checked.m();
    if (d > 4) {
        throw UnsupportedError("naive kernel conditional is limited to four variables");
    }
    if (x2.size() != checked.m()) {
        throw ValidationError("conditioning vector has the wrong length");
    }
    const std::size_t n = ds.n();
    auto bandwidth = [&](std::size_t col) {
        const auto c = ds.column(col);
        return silverman_bandwidth(c);
    };
    const std::size_t resp = checked.response[0];
    const double h1 = bandwidth(resp);
    std::vector<double> hc;
    for (std::size_t c : checked.conditioning) {
        hc.push_back(bandwidth(c));
    }
    // Conditioning-kernel weight of every observation.
    std::vector<double> w(n);
    double denom = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double e = 0.0;
        double scale = 1.0;
        for (std::size_t c = 0; c < checked.m(); ++c) {
            const double u = (x2[c] - ds(t, checked.conditioning[c])) / hc[c];
            e += u * u;
            scale *= kInvSqrt2Pi / hc[c];
        }
        w[t] = scale * std::exp(-0.5 * e);
        denom += w[t];
    }
    denom /= static_cast<double>(n);
    if (denom < 1e-300) {
        throw NumericError("conditioning point outside support");
    }
    std::vector<double> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
        double joint = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            if (w[t] == 0.0) {
                continue;
            }
            const double u = (grid[g] - ds(t, resp)) / h1;
            joint += w[t] * kInvSqrt2Pi / h1 * std::exp(-0.5 * u * u);
        }
        out[g] = joint / static_cast<double>(n) / denom;
    });
    const auto wts = trapezoid_weights(grid);
    double total = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        total += wts[g] * out[g];
    }
    if (!(total > 0.0)) {
        throw NumericError("naive kernel estimate has no mass on the grid");
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double IseReport::median_ise() const {
    if (per_replicate.empty()) {
        return 0.0;
    }
    std::vector<double> v = per_replicate;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

IseReport ise_bench(const SimSpec& spec, std::span<const double> x2, const BenchOptions& options) {
    validate(spec);
    if (options.replicates == 0) {
        throw ValidationError("need at least one replicate");
    }
    const auto grid = truth_grid(spec, options.grid_points);
    const auto truth = true_conditional(spec, x2, grid);
    IseReport report;
    report.p = spec.dim;
    report.n = spec.n;
    report.method = options.method;
    report.per_replicate.resize(options.replicates);
    std::vector<std::size_t> cond(spec.dim - 1);
    std::iota(cond.begin(), cond.end(), std::size_t{1});
    const Partition part{{0}, cond};
    parallel_for(options.replicates, [&](std::size_t r) {
        SimSpec rep = spec;
        rep.seed = spec.seed.derive(r);
        const Dataset ds = sample(rep);
        if (options.method == Method::naive) {
            report.per_replicate[r] = ise(grid, naive_kernel_conditional(ds, part, x2, grid), truth);
            return;
        }
        const PseudoSample ps(ds);
        const BandwidthPlan plan = select_bandwidths(ps);
        GridOptions go;
        go.axes = {grid};
        const ConditionalDensity cd = ConditionalEstimator(ds, part, plan).estimate(x2, go);
        report.per_replicate[r] = ise(cd, truth);
    });
    report.mean_ise = std::accumulate(report.per_replicate.begin(), report.per_replicate.end(), 0.0) /
                      static_cast<double>(report.per_replicate.size());
    return report;
}

namespace {

// Sorts v in place and returns the number of inversions.
std::int64_t count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) {
        return 0;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = count_swaps(v, buf, lo, mid) + count_swaps(v, buf, mid, hi);
    std::size_t i = lo;
    std::size_t j = mid;
    std::size_t k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = v[j++];
        } else {
            buf[k++] = v[i++];
        }
    }
    while (i < mid) {
        buf[k++] = v[i++];
    }
    while (j < hi) {
        buf[k++] = v[j++];
    }
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

std::int64_t tied_pairs_sorted(std::span<const double> v) {
    std::int64_t total = 0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i + 1;
        while (j < v.size() && v[j] == v[i]) {
            ++j;
        }
        const auto run = static_cast<std::int64_t>(j - i);
        total += run * (run - 1) / 2;
        i = j;
    }
    return total;
}

} // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("Kendall's tau needs two equally long samples of size >= 2");
    }
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const std::int64_t tx = tied_pairs_sorted(xs);
    std::int64_t txy = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) {
            ++j;
        }
        const auto run = static_cast<std::int64_t>(j - i);
        txy += run * (run - 1) / 2;
        i = j;
    }
    std::vector<double> buf(n);
    const std::int64_t swaps = count_swaps(ys, buf, 0, n);
    const std::int64_t ty = tied_pairs_sorted(ys);
    const double num = static_cast<double>(n0 - tx - ty + txy - 2 * swaps);
    const double den = std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
    return num / den;
}

} // namespace lgcd
