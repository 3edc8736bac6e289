#include <doctest.h>

#include <numbers>

#include "core/error.hpp"
#include "core/local_likelihood.hpp"
#include "core/marginals.hpp"
#include "oracles.hpp"

using namespace lgcd;

namespace {

double oracle_psi2(double z1, double z2, double rho) { return oracle::bvn(z1, z2, 1.0, 1.0, rho); }

struct Columns {
    std::vector<double> a, b;
};

Columns columns(const Eigen::MatrixXd& m) {
    Columns c;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        c.a.push_back(m(i, 0));
        c.b.push_back(m(i, 1));
    }
    return c;
}

} // namespace

TEST_CASE("psi2 values") {
    const double inv2pi = 1.0 / (2.0 * std::numbers::pi);
    CHECK(psi2({0, 0}, 0.0) == doctest::Approx(inv2pi).epsilon(1e-15));
    CHECK(psi2({0, 0}, 0.0) == doctest::Approx(0.159155).epsilon(1e-6));
    for (double r : {-0.9, -0.3, 0.4, 0.99}) {
        CHECK(psi2({0, 0}, r) == doctest::Approx(inv2pi / std::sqrt(1 - r * r)).epsilon(1e-14));
    }
    CHECK(psi2({1, 1}, 0.5) == doctest::Approx(0.094354).epsilon(1e-5));
    CHECK(psi2({1, 1}, 0.5) == doctest::Approx(oracle_psi2(1, 1, 0.5)).epsilon(1e-14));
    CHECK(std::log(psi2({0.3, -1.2}, 0.7)) == doctest::Approx(log_psi2({0.3, -1.2}, 0.7)).epsilon(1e-14));
    CHECK_THROWS_AS(psi2({0, 0}, 1.0), NumericError);
    CHECK_THROWS_AS(score_u({0, 0}, -1.0), NumericError);
}

TEST_CASE("score function values and finite differences") {
    CHECK(score_u({1, 2}, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(score_u({0, 0}, 0.5) == doctest::Approx(0.5 / 0.75).epsilon(1e-14));
    oracle::Gen g(17);
    for (int i = 0; i < 100; ++i) {
        const Point2 z{g.uniform(-3, 3), g.uniform(-3, 3)};
        const double r = g.uniform(-0.95, 0.95);
        const double fd = oracle::central_diff([&](double t) { return std::log(oracle_psi2(z.z1, z.z2, t)); }, r, 1e-6);
        CHECK(std::abs(score_u(z, r) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("penalty integral against quadrature") {
    const double v = penalty_integral({0, 0}, 0.0, {1, 1});
    CHECK(v == doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-14));
    const double q = oracle::simpson2(
        [](double y1, double y2) { return oracle::phi(y1) * oracle::phi(y2) * oracle_psi2(y1, y2, 0.0); }, -12, 12,
        -12, 12, 1e-12);
    CHECK(std::abs(v - q) < 1e-8);
    CHECK(std::abs(v - 0.0795775) < 1e-7);
}

TEST_CASE("penalty integral tends to psi2 as the bandwidth shrinks") {
    const Point2 z{0.4, -0.8};
    for (double r : {-0.6, 0.2, 0.9}) {
        CHECK(penalty_integral(z, r, {1e-5, 1e-5}) == doctest::Approx(psi2(z, r)).epsilon(1e-8));
    }
    CHECK_THROWS_AS(penalty_integral(z, 0.1, {0.0, 1.0}), NumericError);
}

TEST_CASE("penalty derivatives match finite differences") {
    oracle::Gen g(23);
    for (int i = 0; i < 50; ++i) {
        const Point2 z{g.uniform(-2.5, 2.5), g.uniform(-2.5, 2.5)};
        const Bandwidth2 h{g.uniform(0.2, 2), g.uniform(0.2, 2)};
        const double r = g.uniform(-0.9, 0.9);
        const double d1 = oracle::central_diff([&](double t) { return penalty_integral(z, t, h); }, r, 1e-5);
        const double d2 = oracle::central_diff([&](double t) { return penalty_integral_drho(z, t, h); }, r, 1e-5);
        CHECK(std::abs(penalty_integral_drho(z, r, h) - d1) < 1e-8);
        CHECK(std::abs(penalty_integral_drho2(z, r, h) - d2) < 1e-7);
    }
}

TEST_CASE("local log-likelihood with one datum") {
    const Point2 z{0.3, -0.4};
    const std::vector<double> a{z.z1}, b{z.z2};
    const Bandwidth2 h{1, 1};
    for (double r : {-0.5, 0.0, 0.7}) {
        const double expected =
            std::log(oracle_psi2(z.z1, z.z2, r)) / (2.0 * std::numbers::pi) - penalty_integral(z, r, h);
        CHECK(local_loglik(a, b, z, r, h) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("local log-likelihood equals the direct kernel sum") {
    const auto c = columns(oracle::bivariate_normal(60, 0.3, 2));
    const Point2 z{0.2, 0.5};
    const Bandwidth2 h{0.7, 0.9};
    for (double r : {-0.8, -0.1, 0.45, 0.99}) {
        double sum = 0.0;
        for (std::size_t t = 0; t < c.a.size(); ++t) {
            const double k = oracle::phi((c.a[t] - z.z1) / h.h1) * oracle::phi((c.b[t] - z.z2) / h.h2) / (h.h1 * h.h2);
            sum += k * std::log(oracle_psi2(c.a[t], c.b[t], r));
        }
        const double expected = sum / static_cast<double>(c.a.size()) - oracle::bvn(z.z1, z.z2, 1 + h.h1 * h.h1, 1 + h.h2 * h.h2, r);
        CHECK(local_loglik(c.a, c.b, z, r, h) == doctest::Approx(expected).epsilon(1e-11));
    }
}

TEST_CASE("objective derivatives") {
    const auto c = columns(oracle::bivariate_normal(200, -0.4, 5));
    const Point2 z{-0.5, 1.1};
    const Bandwidth2 h{0.6, 0.6};
    const LocalObjective obj(accumulate_local(c.a, c.b, z, h), z, h);
    for (double r = -0.9; r <= 0.9; r += 0.15) {
        CHECK(obj.value(r) == doctest::Approx(local_loglik(c.a, c.b, z, r, h)).epsilon(1e-12));
        // weighted score form
        double ws = 0.0;
        for (std::size_t t = 0; t < c.a.size(); ++t) {
            const double k = oracle::phi((c.a[t] - z.z1) / h.h1) * oracle::phi((c.b[t] - z.z2) / h.h2) / (h.h1 * h.h2);
            ws += k * score_u({c.a[t], c.b[t]}, r);
        }
        const double score_form = ws / static_cast<double>(c.a.size()) - penalty_integral_drho(z, r, h);
        CHECK(std::abs(obj.d1(r) - score_form) < 1e-6);
        CHECK(std::abs(obj.d1(r) - oracle::central_diff([&](double t) { return obj.value(t); }, r, 1e-6)) < 1e-6);
        CHECK(std::abs(obj.d2(r) - oracle::central_diff([&](double t) { return obj.d1(t); }, r, 1e-6)) < 1e-5);
    }
}

TEST_CASE("fit matches a dense scan of the objective") {
    oracle::Gen g(31);
    for (int i = 0; i < 30; ++i) {
        const auto c = columns(oracle::bivariate_normal(80, g.uniform(-0.9, 0.9), 100 + i));
        const Point2 z{g.uniform(-1.5, 1.5), g.uniform(-1.5, 1.5)};
        const Bandwidth2 h{g.uniform(0.3, 1.5), 0};
        const Bandwidth2 hh{h.h1, h.h1};
        const RhoFit fit = fit_rho(c.a, c.b, z, hh);
        const LocalObjective obj(accumulate_local(c.a, c.b, z, hh), z, hh);
        const double best = oracle::argmax_scan([&](double r) { return obj.value(r); }, -kRhoBound, kRhoBound);
        CHECK(fit.objective >= obj.value(best) - 1e-10);
        CHECK(std::abs(fit.rho) <= kRhoBound);
        if (!fit.boundary) {
            CHECK(std::abs(fit.gradient) < 1e-6);
            CHECK(std::abs(obj.d1(fit.rho)) < 1e-6);
        }
    }
}

TEST_CASE("gaussian data recovers the correlation") {
    const auto c = columns(oracle::bivariate_normal(5000, 0.5, 77));
    for (double z1 : {-1.0, 0.0, 1.0}) {
        for (double z2 : {-1.0, 0.0, 1.0}) {
            const double r = fit_rho(c.a, c.b, {z1, z2}, {0.5, 0.5}).rho;
            CHECK(r >= 0.4);
            CHECK(r <= 0.6);
        }
    }
    const auto ind = columns(oracle::bivariate_normal(5000, 0.0, 78));
    CHECK(std::abs(fit_rho(ind.a, ind.b, {0, 0}, {0.5, 0.5}).rho) < 0.1);
}

TEST_CASE("no local mass far from the data") {
    const auto c = columns(oracle::bivariate_normal(100, 0.5, 3));
    CHECK_THROWS_AS(fit_rho(c.a, c.b, {40.0, 0.0}, {0.5, 0.5}), NoLocalMassError);
    try {
        fit_rho(c.a, c.b, {0.0, -40.0}, {0.5, 0.5});
    } catch (const NoLocalMassError& e) {
        CHECK(std::string(e.what()).find("no local mass") != std::string::npos);
    }
}

TEST_CASE("sign equivariance and exchange symmetry are exact") {
    oracle::Gen g(41);
    for (int i = 0; i < 25; ++i) {
        auto c = columns(oracle::bivariate_normal(150, g.uniform(-0.8, 0.8), 500 + i));
        const Point2 z{g.uniform(-1.5, 1.5), g.uniform(-1.5, 1.5)};
        const double h = g.uniform(0.3, 1.2);
        const double r = fit_rho(c.a, c.b, z, {h, h}).rho;
        std::vector<double> neg(c.b.size());
        for (std::size_t t = 0; t < neg.size(); ++t) {
            neg[t] = -c.b[t];
        }
        CHECK(fit_rho(c.a, neg, {z.z1, -z.z2}, {h, h}).rho == -r);
        CHECK(fit_rho(c.b, c.a, {z.z2, z.z1}, {h, h}).rho == r);
    }
}

TEST_CASE("large bandwidth gives the global unit-variance likelihood maximiser") {
    const Dataset ds(oracle::bivariate_normal(300, 0.6, 12));
    const PseudoSample ps(ds);
    const auto a = ps.column(0);
    const auto b = ps.column(1);
    const double global = oracle::argmax_scan(
        [&](double r) {
            double s = 0.0;
            for (std::size_t t = 0; t < a.size(); ++t) {
                s += std::log(oracle_psi2(a[t], b[t], r));
            }
            return s;
        },
        -0.99, 0.99);
    const double local = fit_rho(a, b, {0.3, -0.2}, {100, 100}).rho;
    CHECK(std::abs(local - global) < 1e-3);
}

TEST_CASE("pair fit evaluates with a common bandwidth") {
    const auto c = columns(oracle::bivariate_normal(200, 0.2, 9));
    const PairFit pf(0, 1, c.a, c.b, 0.8);
    CHECK(pf.rho_at(0.1, 0.2) == fit_rho(c.a, c.b, {0.1, 0.2}, {0.8, 0.8}).rho);
    CHECK(pf.h() == 0.8);
}
