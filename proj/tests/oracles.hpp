#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library, so agreement is evidence rather than tautology.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Standard normal quantile by bisection on erfc; slow but independent.
inline double Phi_inv(double p) {
    double lo = -40.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (Phi(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double bvn(double x, double y, double s11, double s22, double s12) {
    const double det = s11 * s22 - s12 * s12;
    const double q = (s22 * x * x - 2.0 * s12 * x * y + s11 * y * y) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    struct Rec {
        const std::function<double(double)>& f;
        double run(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m);
            const double rm = 0.5 * (m + b);
            const double flm = f(lm);
            const double frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double diff = left + right - whole;
            if (depth <= 0 || std::abs(diff) <= 15.0 * tol) {
                return left + right + diff / 15.0;
            }
            return run(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   run(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return Rec{f}.run(a, b, fa, fm, fb, whole, tol, depth);
}

// Iterated adaptive Simpson over a rectangle.
inline double simpson2(const std::function<double(double, double)>& f, double ax, double bx, double ay, double by,
                       double tol) {
    return simpson(
        [&](double x) { return simpson([&](double y) { return f(x, y); }, ay, by, tol * 0.1); }, ax, bx, tol);
}

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Five-point stencil; truncation error O(h^4).
inline double central_diff5(const std::function<double(double)>& f, double x, double h = 1e-3) {
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12.0 * h);
}

// Adaptive Simpson on equal pieces of [a, b]; keeps narrow peaks from being
// skipped by the first coarse estimate.
inline double simpson_pieces(const std::function<double(double)>& f, double a, double b, int pieces, double tol) {
    double total = 0.0;
    const double w = (b - a) / pieces;
    for (int i = 0; i < pieces; ++i) {
        total += simpson(f, a + i * w, a + (i + 1) * w, tol / pieces);
    }
    return total;
}

// Hand-rolled generator for property tests: every case is reproducible from its index.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : eng_(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }

private:
    std::mt19937_64 eng_;
};

// n draws of a bivariate normal with unit variances and correlation rho.
inline Eigen::MatrixXd bivariate_normal(std::size_t n, double rho, std::uint64_t seed) {
    Gen g(seed);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    const double c = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double a = g.normal();
        const double b = g.normal();
        x(i, 0) = a;
        x(i, 1) = rho * a + c * b;
    }
    return x;
}

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        s += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
    }
    return s;
}

// Numerical maximiser of a unimodal-or-not scalar function by dense scan and
// golden refinement; used to cross-check the library's optimiser.
inline double argmax_scan(const std::function<double(double)>& f, double lo, double hi, int points = 2001) {
    double best_x = lo;
    double best_f = f(lo);
    for (int i = 1; i < points; ++i) {
        const double x = lo + (hi - lo) * i / (points - 1);
        const double v = f(x);
        if (v > best_f) {
            best_f = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - (hi - lo) / (points - 1));
    double b = std::min(hi, best_x + (hi - lo) / (points - 1));
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
        const double c = b - r * (b - a);
        const double d = a + r * (b - a);
        if (f(c) >= f(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    return 0.5 * (a + b);
}

} // namespace oracle
