#include <doctest.h>

#include <algorithm>

#include "core/error.hpp"
#include "core/marginals.hpp"
#include "core/normal.hpp"
#include "oracles.hpp"

using namespace lgcd;

namespace {

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
    oracle::Gen g(seed);
    std::vector<double> x(n);
    for (auto& v : x) {
        v = g.normal();
    }
    return x;
}

} // namespace

TEST_CASE("rank transform of three values") {
    Eigen::MatrixXd m(3, 2);
    m << 5.0, 2.0, 1.0, 2.0, 3.0, 7.0;
    const PseudoSample ps{Dataset(m)};
    CHECK(ps.column(0)[0] == doctest::Approx(oracle::Phi_inv(0.75)).epsilon(1e-12));
    CHECK(ps.column(0)[0] == doctest::Approx(0.67449).epsilon(1e-5));
    CHECK(ps.column(0)[1] == doctest::Approx(-0.67449).epsilon(1e-5));
    CHECK(ps.column(0)[2] == 0.0);
    // ties get midranks
    CHECK(ps.column(1)[0] == doctest::Approx(oracle::Phi_inv(0.375)).epsilon(1e-12));
    CHECK(ps.column(1)[1] == ps.column(1)[0]);
    CHECK(ps.column(1)[2] == doctest::Approx(oracle::Phi_inv(0.75)).epsilon(1e-12));
}

TEST_CASE("rank transform is idempotent and sorted columns are the normal scores") {
    const std::size_t n = 50;
    oracle::Gen g(3);
    Eigen::MatrixXd m(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        m(static_cast<Eigen::Index>(i), 0) = g.normal();
        m(static_cast<Eigen::Index>(i), 1) = g.uniform(0, 1);
    }
    const PseudoSample ps{Dataset(m)};
    std::vector<double> col(ps.column(0).begin(), ps.column(0).end());
    std::sort(col.begin(), col.end());
    for (std::size_t r = 0; r < n; ++r) {
        CHECK(col[r] == doctest::Approx(oracle::Phi_inv(static_cast<double>(r + 1) / (n + 1))).epsilon(1e-12));
    }
    const PseudoSample again(Dataset(ps.z_values()));
    CHECK((again.z_values().array() == ps.z_values().array()).all());
}

TEST_CASE("pseudo columns have roughly standard moments") {
    const auto x = normal_sample(400, 8);
    Eigen::MatrixXd m(400, 2);
    for (int i = 0; i < 400; ++i) {
        m(i, 0) = std::exp(x[static_cast<std::size_t>(i)]);
        m(i, 1) = x[static_cast<std::size_t>((i * 7) % 400)] * 3.0;
    }
    const PseudoSample ps{Dataset(m)};
    for (std::size_t c = 0; c < 2; ++c) {
        double s = 0.0, s2 = 0.0;
        for (double v : ps.column(c)) {
            s += v;
            s2 += v * v;
        }
        const double mean = s / 400.0;
        const double var = s2 / 400.0 - mean * mean;
        CHECK(std::abs(mean) <= 4.0 / std::sqrt(400.0));
        CHECK(var >= 0.8);
        CHECK(var <= 1.1);
    }
}

TEST_CASE("rank invariance under increasing maps") {
    Eigen::MatrixXd m = oracle::bivariate_normal(200, 0.4, 21);
    Eigen::MatrixXd g = m;
    g.col(0) = m.col(0).array().exp();
    g.col(1) = m.col(1).array().pow(3) + 2.0 * m.col(1).array();
    const PseudoSample a(Dataset{m}), b(Dataset{g});
    CHECK((a.z_values().array() == b.z_values().array()).all());
}

TEST_CASE("silverman bandwidth formula") {
    const auto x = normal_sample(300, 4);
    std::vector<double> s = x;
    std::sort(s.begin(), s.end());
    double mean = 0.0;
    for (double v : s) {
        mean += v;
    }
    mean /= 300.0;
    double ss = 0.0;
    for (double v : s) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / 299.0);
    auto q = [&](double p) {
        const double pos = p * 299.0;
        const auto lo = static_cast<std::size_t>(pos);
        return s[lo] + (pos - lo) * (s[lo + 1] - s[lo]);
    };
    const double iqr = q(0.75) - q(0.25);
    const double expected = 0.9 * std::min(sd, iqr / 1.34) * std::pow(300.0, -0.2);
    CHECK(silverman_bandwidth(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kde density, cdf and quantile") {
    const auto x = normal_sample(10000, 5);
    const MarginalModel m(x);
    CHECK(m.density(0.0) >= 0.37);
    CHECK(m.density(0.0) <= 0.43);
    CHECK(m.cdf(1e6) == 1.0);
    CHECK(m.cdf(-1e6) == 0.0);

    // exact cdf equals the integral of the density
    const double lo = m.sample_min() - 5 * m.sample_sd();
    for (double t : {-2.0, -0.3, 0.0, 1.7}) {
        const double integral = oracle::simpson([&](double u) { return m.density(u); }, lo, t, 1e-11);
        CHECK(m.cdf(t) == doctest::Approx(integral).epsilon(1e-7));
    }
}

TEST_CASE("kde integrates to one and is monotone") {
    const auto x = normal_sample(500, 6);
    const MarginalModel m(x);
    const double a = m.sample_min() - 5 * m.sample_sd();
    const double b = m.sample_max() + 5 * m.sample_sd();
    const double total = oracle::simpson([&](double u) { return m.density(u); }, a, b, 1e-10);
    CHECK(std::abs(total - 1.0) < 1e-6);
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = a + (b - a) * i / 999.0;
        CHECK(m.density(t) >= 0.0);
        const double c = m.cdf(t);
        CHECK(c >= prev);
        prev = c;
    }
    // strictly increasing inside the sample range
    std::vector<double> s = x;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] > s[i - 1]) {
            CHECK(m.cdf(s[i]) > m.cdf(s[i - 1]));
        }
    }
    for (double v : s) {
        CHECK(std::abs(m.quantile(m.cdf(v)) - v) < 1e-8);
    }
}

TEST_CASE("median of a symmetric sample") {
    std::vector<double> x;
    for (int i = 1; i <= 30; ++i) {
        x.push_back(3.0 + i * 0.37);
        x.push_back(3.0 - i * 0.37);
    }
    const MarginalModel m(x);
    CHECK(std::abs(m.quantile(0.5) - 3.0) < 1e-6);
    CHECK(std::abs(m.z_of_x(3.0).z) < 1e-9);
}

TEST_CASE("z_of_x inverse pair and clamping") {
    const auto x = normal_sample(300, 7);
    const MarginalModel m(x);
    for (double t = -2.0; t <= 2.0; t += 0.25) {
        CHECK(std::abs(m.x_of_z(m.z_of_x(t).z) - t) < 1e-6);
    }
    const ZValue far = m.z_of_x(-1e3);
    CHECK(far.clamped);
    CHECK(far.z == doctest::Approx(norm_quantile(kCdfClamp)));
    CHECK_FALSE(m.z_of_x(0.1).clamped);
}

TEST_CASE("hybrid pseudo value uses ranks on sample points") {
    const Dataset ds(oracle::bivariate_normal(100, 0.3, 9));
    const PseudoSample ps(ds);
    for (std::size_t i = 0; i < 100; i += 7) {
        CHECK(ps.z_at(0, ds(i, 0)).z == ps.column(0)[i]);
    }
    const double off = 0.5 * (ds(0, 0) + ds(1, 0)) + 1e-7;
    CHECK(ps.z_at(0, off).z == ps.model(0).z_of_x(off).z);
}

TEST_CASE("marginal fit needs data") {
    const auto x = normal_sample(10, 1);
    CHECK_THROWS_AS(MarginalModel{x}, ValidationError);
    std::vector<double> c(30, 2.0);
    CHECK_THROWS_AS(silverman_bandwidth(c), ValidationError);
}
