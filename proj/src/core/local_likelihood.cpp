#include "core/local_likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "core/error.hpp"

namespace lgcd {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112352797227949472756;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Local mass requires a datum within this many bandwidths of z.
constexpr double kMassRadius = 10.0;
constexpr double kMinWeight = 1e-300;
// exp(-x) is exactly zero in double precision beyond this.
constexpr double kUnderflowExponent = 745.2;

void check_rho(double rho) {
    if (!(std::abs(rho) < 1.0)) {
        throw NumericError(fmt::format("correlation {} outside (-1,1)", rho));
    }
}

void check_h(Bandwidth2 h) {
    if (!(h.h1 > 0.0 && h.h2 > 0.0)) {
        throw NumericError("bandwidths must be positive");
    }
}

struct PenaltyTerms {
    double g;  // density value
    double q;  // d log g / d rho
    double dq; // d q / d rho
};

PenaltyTerms penalty_terms(Point2 z, double rho, Bandwidth2 h) {
    check_rho(rho);
    check_h(h);
    const double a = 1.0 + h.h1 * h.h1;
    const double b = 1.0 + h.h2 * h.h2;
    const double c = rho;
    const double cross = z.z1 * z.z2;
    const double det = a * b - c * c;
    const double quad = (b * z.z1 * z.z1 + a * z.z2 * z.z2) - 2.0 * c * cross;
    const double g = std::exp(-0.5 * quad / det) / (kTwoPi * std::sqrt(det));
    const double pnum = cross * det - c * quad;
    const double q = c / det + pnum / (det * det);
    const double dq = (det + 2.0 * c * c) / (det * det) + (4.0 * c * pnum - quad * det) / (det * det * det);
    return {g, q, dq};
}

} // namespace

double log_psi2(Point2 z, double rho) {
    check_rho(rho);
    const double s = 1.0 - rho * rho;
    const double quad = (z.z1 * z.z1 + z.z2 * z.z2) - 2.0 * rho * z.z1 * z.z2;
    return -kLog2Pi - 0.5 * std::log(s) - 0.5 * quad / s;
}

double psi2(Point2 z, double rho) { return std::exp(log_psi2(z, rho)); }

double score_u(Point2 z, double rho) {
    check_rho(rho);
    const double s = 1.0 - rho * rho;
    const double sq = z.z1 * z.z1 + z.z2 * z.z2;
    return rho / s + (z.z1 * z.z2 * (1.0 + rho * rho) - rho * sq) / (s * s);
}

double penalty_integral(Point2 z, double rho, Bandwidth2 h) { return penalty_terms(z, rho, h).g; }

double penalty_integral_drho(Point2 z, double rho, Bandwidth2 h) {
    const auto t = penalty_terms(z, rho, h);
    return t.g * t.q;
}

double penalty_integral_drho2(Point2 z, double rho, Bandwidth2 h) {
    const auto t = penalty_terms(z, rho, h);
    return t.g * (t.q * t.q + t.dq);
}

LocalSums accumulate_local(std::span<const double> x1, std::span<const double> x2, Point2 z, Bandwidth2 h,
                           std::size_t skip) {
    check_h(h);
    if (x1.size() != x2.size()) {
        throw ContractError("pair columns differ in length");
    }
    const double inv_h1 = 1.0 / h.h1;
    const double inv_h2 = 1.0 / h.h2;
    LocalSums s;
    bool near = false;
    for (std::size_t t = 0; t < x1.size(); ++t) {
        if (t == skip) {
            continue;
        }
        ++s.count;
        const double a = (x1[t] - z.z1) * inv_h1;
        const double b = (x2[t] - z.z2) * inv_h2;
        if (std::abs(a) <= kMassRadius && std::abs(b) <= kMassRadius) {
            near = true;
        }
        const double e = 0.5 * (a * a + b * b);
        if (e > kUnderflowExponent) {
            continue;
        }
        const double w = std::exp(-e);
        s.s0 += w;
        s.s11 += w * x1[t] * x1[t];
        s.s22 += w * x2[t] * x2[t];
        s.s12 += w * (x1[t] * x2[t]);
    }
    const double norm = 1.0 / (kTwoPi * h.h1 * h.h2);
    s.s0 *= norm;
    s.s11 *= norm;
    s.s22 *= norm;
    s.s12 *= norm;
    if (s.count == 0 || !near || s.s0 < kMinWeight) {
        throw NoLocalMassError(fmt::format("no local mass near ({:.6g}, {:.6g})", z.z1, z.z2));
    }
    return s;
}

double LocalObjective::value(double rho) const {
    check_rho(rho);
    const double s = 1.0 - rho * rho;
    const double inv_n = 1.0 / static_cast<double>(sums_.count);
    const double data = sums_.s0 * (-kLog2Pi - 0.5 * std::log(s)) -
                        ((sums_.s11 + sums_.s22) - 2.0 * rho * sums_.s12) / (2.0 * s);
    return inv_n * data - penalty_integral(z_, rho, h_);
}

double LocalObjective::d1(double rho) const {
    check_rho(rho);
    const double s = 1.0 - rho * rho;
    const double inv_n = 1.0 / static_cast<double>(sums_.count);
    const double m = sums_.s11 + sums_.s22;
    const double data = sums_.s0 * rho / s + (sums_.s12 * (1.0 + rho * rho) - rho * m) / (s * s);
    return inv_n * data - penalty_integral_drho(z_, rho, h_);
}

double LocalObjective::d2(double rho) const {
    check_rho(rho);
    const double s = 1.0 - rho * rho;
    const double inv_n = 1.0 / static_cast<double>(sums_.count);
    const double m = sums_.s11 + sums_.s22;
    const double lin = sums_.s12 * (1.0 + rho * rho) - rho * m;
    const double data = sums_.s0 * (1.0 + rho * rho) / (s * s) + (2.0 * rho * sums_.s12 - m) / (s * s) +
                        4.0 * rho * lin / (s * s * s);
    return inv_n * data - penalty_integral_drho2(z_, rho, h_);
}

double local_loglik(std::span<const double> x1, std::span<const double> x2, Point2 z, double rho, Bandwidth2 h) {
    return LocalObjective(accumulate_local(x1, x2, z, h), z, h).value(rho);
}

namespace {

struct Ascent {
    double x;
    double fx;
    bool converged;
};

Ascent newton_ascent(const LocalObjective& f, double start) {
    double x = start;
    double fx = f.value(x);
    for (int iter = 0; iter < 100; ++iter) {
        const double g = f.d1(x);
        if (g == 0.0) {
            return {x, fx, true};
        }
        if ((x >= kRhoBound && g > 0.0) || (x <= -kRhoBound && g < 0.0)) {
            return {x, fx, true};
        }
        const double hess = f.d2(x);
        double step = hess < 0.0 ? -g / hess : (g > 0.0 ? 0.25 : -0.25);
        step = std::clamp(step, -0.5, 0.5);
        double cand = x;
        double fc = fx;
        bool improved = false;
        for (int bt = 0; bt < 60; ++bt) {
            cand = std::clamp(x + step, -kRhoBound, kRhoBound);
            fc = f.value(cand);
            if (fc >= fx) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) {
            return {x, fx, false};
        }
        const double moved = std::abs(cand - x);
        x = cand;
        fx = fc;
        if (moved <= 1e-14) {
            return {x, fx, true};
        }
    }
    return {x, fx, false};
}

Ascent golden_section(const LocalObjective& f, double lo, double hi) {
    constexpr double kInvPhi = 0.6180339887498948482045868343656381177203091798058;
    double c = hi - kInvPhi * (hi - lo);
    double d = lo + kInvPhi * (hi - lo);
    double fc = f.value(c);
    double fd = f.value(d);
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
        if (fc >= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - kInvPhi * (hi - lo);
            fc = f.value(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + kInvPhi * (hi - lo);
            fd = f.value(d);
        }
    }
    const double x = fc >= fd ? c : d;
    return {x, f.value(x), true};
}

RhoFit finish(const LocalObjective& f, const Ascent& a) {
    const double g = f.d1(a.x);
    const bool boundary = (a.x >= kRhoBound && g > 0.0) || (a.x <= -kRhoBound && g < 0.0);
    return {a.x, boundary, a.fx, g};
}

RhoFit ascend_from(const LocalObjective& f, double start) {
    Ascent a = newton_ascent(f, start);
    if (!a.converged) {
        const double g = f.d1(a.x);
        const bool at_edge = (a.x >= kRhoBound && g > 0.0) || (a.x <= -kRhoBound && g < 0.0);
        if (!at_edge && std::abs(g) > 1e-9) {
            const Ascent golden =
                golden_section(f, std::max(-kRhoBound, a.x - 0.1), std::min(kRhoBound, a.x + 0.1));
            Ascent polished = newton_ascent(f, golden.x);
            a = polished.fx >= golden.fx ? polished : golden;
        }
    }
    return finish(f, a);
}

} // namespace

RhoFit maximize_local(const LocalObjective& objective) {
    constexpr std::array<double, 3> kStarts{-0.5, 0.0, 0.5};
    std::array<RhoFit, 3> fits{};
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < kStarts.size(); ++s) {
        fits[s] = ascend_from(objective, kStarts[s]);
        best = std::max(best, fits[s].objective);
    }
    // Among starts within 1e-12 of the best objective, keep the smallest |rho|;
    // a remaining exact tie goes to the larger objective.
    const RhoFit* chosen = nullptr;
    for (const auto& fit : fits) {
        if (!(fit.objective >= best - 1e-12)) {
            continue;
        }
        if (chosen == nullptr || std::abs(fit.rho) < std::abs(chosen->rho) ||
            (std::abs(fit.rho) == std::abs(chosen->rho) && fit.objective > chosen->objective)) {
            chosen = &fit;
        }
    }
    if (chosen == nullptr) {
        throw NumericError("local likelihood is not finite");
    }
    return *chosen;
}

RhoFit fit_rho(std::span<const double> x1, std::span<const double> x2, Point2 z, Bandwidth2 h) {
    const LocalSums sums = accumulate_local(x1, x2, z, h);
    return maximize_local(LocalObjective(sums, z, h));
}

PairFit::PairFit(std::size_t i, std::size_t j, std::span<const double> zi, std::span<const double> zj, double h)
    : i_(i), j_(j), zi_(zi.begin(), zi.end()), zj_(zj.begin(), zj.end()), h_(h) {
    if (!(h > 0.0)) {
        throw ValidationError("pair bandwidth must be positive");
    }
    if (zi_.size() != zj_.size()) {
        throw ContractError("pair columns differ in length");
    }
}

RhoFit PairFit::fit_at(double zi, double zj) const {
    return fit_rho(zi_, zj_, Point2{zi, zj}, Bandwidth2{h_, h_});
}

} // namespace lgcd
