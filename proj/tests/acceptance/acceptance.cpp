// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "core/bandwidth.hpp"
#include "core/conditioner.hpp"
#include "core/diagnostics.hpp"
#include "core/error.hpp"
#include "core/local_likelihood.hpp"
#include "core/risk.hpp"
#include "core/simlab.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace lgcd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SimSpec make_spec(Family f, std::size_t dim, std::size_t n, std::uint64_t seed, Margin m = Margin::std_normal) {
    SimSpec s;
    s.family = f;
    s.dim = dim;
    s.n = n;
    s.seed = RngSeed{seed};
    s.margins = m;
    return s;
}

Outcome gaussian_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset ds(oracle::bivariate_normal(5000, 0.5, 2024));
    const PseudoSample ps(ds);
    const BandwidthPlan plan = select_bandwidths(ps);
    const PairFit fit(0, 1, ps.column(0), ps.column(1), plan.get(0, 1));
    double lo = 1.0, hi = -1.0;
    for (double a : {-1.0, 0.0, 1.0}) {
        for (double b : {-1.0, 0.0, 1.0}) {
            const double r = fit.rho_at(a, b);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
    }
    const double x2[] = {1.0};
    const ConditionalDensity cd = estimate_conditional(ds, Partition{{0}, {1}}, plan, x2);
    std::vector<double> truth;
    for (double x : cd.axes[0]) {
        truth.push_back(oracle::phi((x - 0.5) / std::sqrt(0.75)) / std::sqrt(0.75));
    }
    const double err = ise(cd, truth);
    const double secs = seconds_since(t0);
    return {lo >= 0.4 && hi <= 0.6 && err < 0.01 && secs < 60.0,
            fmt::format("rho-hat in [{:.4f}, {:.4f}], ISE {:.2e}, {:.1f} s", lo, hi, err, secs)};
}

Outcome fraction_identity() {
    oracle::Gen g(11);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double z1 = g.uniform(-4, 4), z2 = g.uniform(-4, 4), rho = g.uniform(-0.99, 0.99);
        LocalCorrMatrix R;
        R.R = Eigen::Matrix2d{{1.0, rho}, {rho, 1.0}};
        const auto params = condition(R, Eigen::VectorXd::Constant(1, z2), Partition{{0}, {1}});
        const double lhs = gaussian_density(Eigen::VectorXd::Constant(1, z1), params.mu, params.sigma) * oracle::phi(z2);
        worst = std::max(worst, std::abs(lhs - psi2({z1, z2}, rho)));
    }
    return {worst <= 1e-12, fmt::format("max abs difference {:.2e} over 1000 points", worst)};
}

Outcome penalty_oracle() {
    oracle::Gen g(12);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Point2 z{g.uniform(-2.5, 2.5), g.uniform(-2.5, 2.5)};
        const double rho = g.uniform(-0.95, 0.95);
        const Bandwidth2 h{g.uniform(0.2, 2.0), g.uniform(0.2, 2.0)};
        // psi2 factors as phi(y1) times the N(rho y1, 1 - rho^2) density of y2.
        const double s = std::sqrt(1.0 - rho * rho);
        auto inner = [&](double y1) {
            auto f = [&](double y2) {
                return oracle::phi((y2 - z.z2) / h.h2) / h.h2 * oracle::phi((y2 - rho * y1) / s) / s;
            };
            return oracle::phi((y1 - z.z1) / h.h1) / h.h1 * oracle::phi(y1) *
                   oracle::simpson_pieces(f, rho * y1 - 10 * s, rho * y1 + 10 * s, 20, 1e-13);
        };
        const double quad = oracle::simpson_pieces(inner, -10.0, 10.0, 40, 1e-12);
        worst = std::max(worst, std::abs(quad - penalty_integral(z, rho, h)));
    }
    return {worst <= 1e-8, fmt::format("max abs difference {:.2e} over 100 cases", worst)};
}

Outcome score_stationarity() {
    oracle::Gen g(13);
    double worst_grad = 0.0, worst_score = 0.0;
    std::size_t interior = 0;
    for (int d = 0; d < 20; ++d) {
        const Eigen::MatrixXd x = oracle::bivariate_normal(500, g.uniform(-0.9, 0.9), 100 + d);
        std::vector<double> a(x.col(0).data(), x.col(0).data() + x.rows());
        std::vector<double> b(x.col(1).data(), x.col(1).data() + x.rows());
        for (int k = 0; k < 10; ++k) {
            const Point2 z{g.uniform(-2, 2), g.uniform(-2, 2)};
            const double h = g.uniform(0.3, 1.5);
            try {
                const RhoFit f = fit_rho(a, b, z, {h, h});
                if (!f.boundary) {
                    ++interior;
                    worst_grad = std::max(worst_grad, std::abs(f.gradient));
                }
            } catch (const std::exception&) {
                // No local mass at this point; nothing to check.
            }
        }
    }
    for (int i = 0; i < 200; ++i) {
        const Point2 z{g.uniform(-3, 3), g.uniform(-3, 3)};
        const double rho = g.uniform(-0.95, 0.95);
        const double fd =
            oracle::central_diff5([&](double r) { return std::log(oracle::bvn(z.z1, z.z2, 1, 1, r)); }, rho, 1e-4);
        worst_score = std::max(worst_score, std::abs(fd - score_u(z, rho)));
    }
    return {interior > 0 && worst_grad < 1e-6 && worst_score < 1e-6,
            fmt::format("{} interior fits, max |gradient| {:.2e}, max score error {:.2e}", interior, worst_grad,
                        worst_score)};
}

Outcome joe_calibration() {
    SimSpec s = make_spec(Family::joe_copula, 2, 100000, 5, Margin::std_exponential);
    s.params.theta = 3.83;
    const Dataset ds = sample(s);
    const double tau = kendall_tau(ds.column(0), ds.column(1));
    return {std::abs(tau - 0.60) <= 0.02, fmt::format("Kendall tau {:.4f}", tau)};
}

Outcome normalization() {
    oracle::Gen g(14);
    const Family families[] = {Family::gaussian_copula, Family::joe_copula, Family::t_copula, Family::multivariate_t,
                               Family::lognormal_t10_plus_indep_t5};
    double worst = 0.0;
    std::size_t runs = 0, attempts = 0;
    while (runs < 50 && attempts < 500) {
        ++attempts;
        const Family fam = families[g.index(5)];
        const std::size_t p = 2 + g.index(3);
        const Margin m = static_cast<Margin>(g.index(3));
        const Dataset ds = sample(make_spec(fam, p, 200 + g.index(300), 1000 + attempts, m));
        const std::size_t resp = g.index(p);
        std::vector<std::size_t> cond;
        for (std::size_t c = 0; c < p; ++c) {
            if (c != resp) {
                cond.push_back(c);
            }
        }
        const BandwidthPlan plan = BandwidthPlan::fixed(p, g.uniform(0.3, 1.5));
        // Condition on an observed row so the point is inside the support.
        const std::size_t row = g.index(ds.n());
        std::vector<double> x2;
        for (std::size_t c : cond) {
            x2.push_back(ds(row, c));
        }
        GridOptions grid;
        grid.grid_size = 200 + g.index(1000);
        try {
            const ConditionalDensity cd = estimate_conditional(ds, Partition{{resp}, cond}, plan, x2, grid);
            worst = std::max(worst, std::abs(oracle::trapezoid(cd.axes[0], cd.values) - 1.0));
            ++runs;
        } catch (const NoLocalMassError&) {
        }
    }
    return {runs == 50 && worst <= 1e-3, fmt::format("{} runs, max |integral - 1| {:.2e}", runs, worst)};
}

Outcome rank_invariance() {
    const Dataset ds = sample(make_spec(Family::t_copula, 3, 400, 15));
    Eigen::MatrixXd ex = ds.values().array().exp();
    const Dataset dx(ex);
    const BandwidthPlan a = select_bandwidths(PseudoSample(ds));
    const BandwidthPlan b = select_bandwidths(PseudoSample(dx));
    const std::vector<std::size_t> vars{0, 1, 2};
    const PairwiseField fa(PseudoSample(ds), a, vars);
    const PairwiseField fb(PseudoSample(dx), b, vars);
    bool same = a == b;
    std::size_t compared = 0;
    for (double u : {-1.5, -0.5, 0.0, 0.7, 1.9}) {
        for (double v : {-1.2, 0.0, 0.4, 1.3}) {
            for (auto [i, j] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
                same = same && fa.rho(i, j, u, v) == fb.rho(i, j, u, v);
                ++compared;
            }
        }
    }
    return {same, fmt::format("plans equal: {}, {} field values compared", a == b, compared)};
}

Outcome joe_tail_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    SimSpec s = make_spec(Family::joe_copula, 4, 250, 1, Margin::std_exponential);
    s.params.theta = 3.83;
    const std::vector<double> x2{3.0, 3.0, 3.0};
    BenchOptions o;
    o.replicates = 20;
    o.method = Method::lgde;
    const auto lg = ise_bench(s, x2, o);
    o.method = Method::naive;
    const auto nv = ise_bench(s, x2, o);
    const double secs = seconds_since(t0);
    return {lg.mean_ise < nv.mean_ise && secs < 900.0,
            fmt::format("mean ISE lgde {:.4g}, naive {:.4g}, {:.1f} s", lg.mean_ise, nv.mean_ise, secs)};
}

Outcome dimension_robustness() {
    const SimSpec s2 = make_spec(Family::lognormal_t10_plus_indep_t5, 2, 500, 1);
    const SimSpec s5 = make_spec(Family::lognormal_t10_plus_indep_t5, 5, 500, 1);
    BenchOptions o;
    o.replicates = 20;
    const auto r2 = ise_bench(s2, std::vector<double>{1.0}, o);
    const auto r5 = ise_bench(s5, std::vector<double>{1.0, 0.0, 0.0, 0.0}, o);
    const double m2 = r2.median_ise(), m5 = r5.median_ise();
    return {m5 <= 2.0 * m2, fmt::format("median ISE p=2 {:.4g}, p=5 {:.4g}, ratio {:.3f}", m2, m5, m5 / m2)};
}

Outcome partial_covariance() {
    double uncond = 0.0, cond = 0.0;
    std::size_t count = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SimSpec s = make_spec(Family::nonlinear_ar1, 1, 500, seed);
        s.params.ar = 0.8;
        s.params.ar_sqrt = 0.5;
        const Dataset ds = sample(s);
        const auto curve = partial_local_cov(ds.column(0));
        for (std::size_t i = 0; i < curve.z.size(); ++i) {
            uncond += curve.unconditional[i];
            cond += std::abs(curve.conditional[i]);
            ++count;
        }
    }
    uncond /= static_cast<double>(count);
    cond /= static_cast<double>(count);
    return {uncond > 0.5 && cond < 0.2,
            fmt::format("mean unconditional {:.4f}, mean |conditional| {:.4f}", uncond, cond)};
}

Outcome var_coverage() {
    oracle::Gen g(16);
    Eigen::MatrixXd r(1000, 4);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.cols(); ++j) {
            r(i, j) = g.normal();
        }
    }
    BacktestOptions o;
    o.warmup = 500;
    const auto rep = var_backtest(r, o);
    const std::size_t used = rep.n_eval - rep.skipped;
    const auto [lo, hi] = wilson_interval(0.05, used);
    const double p05 = rep.exceed_proportion[2];
    const bool mono = rep.exceed_proportion[0] <= rep.exceed_proportion[1] &&
                      rep.exceed_proportion[1] <= rep.exceed_proportion[2];
    return {p05 >= lo && p05 <= hi && mono,
            fmt::format("proportions {:.4f}/{:.4f}/{:.4f}, 95% interval [{:.4f}, {:.4f}], {} skipped",
                        rep.exceed_proportion[0], rep.exceed_proportion[1], p05, lo, hi, rep.skipped)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        out[e.path().filename().string()] = slurp(e.path());
    }
    return out;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / fmt::format("lgcd_acceptance_{}", ::getpid());
    fs::create_directories(root);
    const std::string cli = LGCD_CLI_PATH;
    const std::string data = (root / "sim" / "sample.csv").string();
    const std::string returns = (root / "ret" / "sample.csv").string();
    const std::string series = (root / "ar" / "sample.csv").string();
    auto run = [&](const std::string& args) {
        return std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    };
    if (run(fmt::format("--seed 3 --out {} simulate --family gaussian_copula --dim 3 --n 300", (root / "sim").string())) !=
            0 ||
        run(fmt::format("--seed 4 --out {} simulate --family gaussian_copula --rho 0 --dim 3 --n 260",
                        (root / "ret").string())) != 0 ||
        run(fmt::format("--seed 5 --out {} simulate --family nonlinear_ar1 --dim 1 --n 300", (root / "ar").string())) !=
            0) {
        return {false, "could not produce inputs"};
    }
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "--seed 9 simulate --family joe_copula --margin std_exponential --dim 3 --n 200"},
        {"transform", "transform --data " + data},
        {"bandwidth", "bandwidth --data " + data},
        {"predict", "--grid-size 300 predict --data " + data + " --response X1 --conditioning X2,X3 --at 0.5,-0.2"},
        {"ise-bench", "--seed 2 ise-bench --family gaussian_copula --n 200 --at 1 --replicates 3 --grid-points 400"},
        {"partial-cov", "partial-cov --data " + series + " --x-cond 1 --bandwidth 0.8"},
        {"var-backtest", "var-backtest --data " + returns + " --warmup 200 --grid-points 300"},
    };
    std::vector<std::string> mismatched;
    for (const auto& [name, args] : commands) {
        std::map<std::string, std::string> reference;
        bool ok = true;
        for (int threads : {1, 4, 8}) {
            const fs::path out = root / fmt::format("{}_{}", name, threads);
            if (run(fmt::format("--threads {} --out {} {}", threads, out.string(), args)) != 0) {
                ok = false;
                break;
            }
            const auto got = dir_contents(out);
            if (threads == 1) {
                reference = got;
                ok = got.count("manifest.json") == 1 && got.size() >= 2;
            } else if (got != reference) {
                ok = false;
            }
        }
        if (!ok) {
            mismatched.push_back(name);
        }
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    std::string detail = fmt::format("{} subcommands at 1/4/8 threads", commands.size());
    for (const auto& m : mismatched) {
        detail += " differs:" + m;
    }
    return {mismatched.empty(), detail};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gaussian oracle recovery", gaussian_recovery},
        {"fraction-of-gaussians identity", fraction_identity},
        {"penalty integral vs quadrature", penalty_oracle},
        {"score stationarity", score_stationarity},
        {"joe copula calibration", joe_calibration},
        {"normalization", normalization},
        {"rank invariance", rank_invariance},
        {"joe tail ordering (lgde vs naive)", joe_tail_ordering},
        {"dimension robustness", dimension_robustness},
        {"partial local covariance", partial_covariance},
        {"VaR nominal coverage", var_coverage},
        {"determinism across threads", determinism},
    };
    // Optional list of criterion numbers to run.
    std::vector<std::size_t> selected;
    for (int i = 1; i < argc; ++i) {
        selected.push_back(static_cast<std::size_t>(std::stoul(argv[i])));
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), i + 1) == selected.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        failed += o.pass ? 0 : 1;
        fmt::print("{} {:>2} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail,
                   seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
