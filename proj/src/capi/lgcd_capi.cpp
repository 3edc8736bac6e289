#include "lgcd/lgcd.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/bandwidth.hpp"
#include "core/conditioner.hpp"
#include "core/data_model.hpp"
#include "core/diagnostics.hpp"
#include "core/error.hpp"
#include "core/marginals.hpp"
#include "core/parallel.hpp"
#include "core/risk.hpp"
#include "core/simlab.hpp"

struct lgcd_dataset {
    lgcd::Dataset ds;
};

struct lgcd_plan {
    lgcd::BandwidthPlan plan;
};

struct lgcd_model {
    lgcd::ConditionalEstimator est;
};

struct lgcd_density {
    lgcd::ConditionalDensity cd;
};

struct lgcd_curve {
    lgcd::LocalCovCurve curve;
};

struct lgcd_report {
    lgcd::BacktestReport report;
};

namespace {

thread_local std::string g_last_error;

lgcd_status status_of(lgcd::ErrorKind kind) {
    switch (kind) {
    case lgcd::ErrorKind::validation: return LGCD_ERR_VALIDATION;
    case lgcd::ErrorKind::numeric: return LGCD_ERR_NUMERIC;
    case lgcd::ErrorKind::io: return LGCD_ERR_IO;
    case lgcd::ErrorKind::unsupported: return LGCD_ERR_UNSUPPORTED;
    case lgcd::ErrorKind::contract: return LGCD_ERR_CONTRACT;
    }
    return LGCD_ERR_CONTRACT;
}

template <class F>
lgcd_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return LGCD_OK;
    } catch (const lgcd::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return LGCD_ERR_NUMERIC;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return LGCD_ERR_CONTRACT;
    }
}

void require(bool ok, const char* what) {
    if (!ok) {
        throw lgcd::ContractError(what);
    }
}

lgcd::SimSpec to_spec(const lgcd_sim_spec* s) {
    require(s != nullptr, "null simulation spec");
    if (s->family < 0 || s->family > LGCD_NONLINEAR_AR1) {
        throw lgcd::ValidationError("unknown family");
    }
    if (s->margin < 0 || s->margin > LGCD_LOGNORMAL) {
        throw lgcd::ValidationError("unknown margin");
    }
    lgcd::SimSpec spec;
    spec.family = static_cast<lgcd::Family>(s->family);
    spec.margins = static_cast<lgcd::Margin>(s->margin);
    spec.dim = s->dim;
    spec.n = s->n;
    spec.seed = lgcd::RngSeed{s->seed};
    spec.params.theta = s->theta;
    spec.params.rho = s->rho;
    spec.params.dof = s->dof;
    spec.params.rho2 = s->rho2;
    spec.params.ar = s->ar;
    spec.params.ar_sqrt = s->ar_sqrt;
    return spec;
}

lgcd::BandwidthOptions bandwidth_options(int use_cv, double fixed_h) {
    lgcd::BandwidthOptions o;
    o.strategy = use_cv != 0 ? lgcd::BandwidthStrategy::cv : lgcd::BandwidthStrategy::fixed;
    o.fixed_h = fixed_h;
    return o;
}

} // namespace

extern "C" {

const char* lgcd_version(void) { return LGCD_VERSION_STRING; }

const char* lgcd_last_error(void) { return g_last_error.c_str(); }

void lgcd_set_threads(size_t threads) { lgcd::set_thread_count(static_cast<unsigned>(threads)); }

size_t lgcd_get_threads(void) { return lgcd::thread_count(); }

lgcd_status lgcd_dataset_create(const double* values, size_t n, size_t p, const char* const* names,
                                lgcd_dataset** out) {
    return guarded([&] {
        require(out != nullptr && (values != nullptr || n * p == 0), "null argument");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        for (size_t r = 0; r < n; ++r) {
            for (size_t c = 0; c < p; ++c) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * p + c];
            }
        }
        std::vector<std::string> labels;
        if (names != nullptr) {
            for (size_t c = 0; c < p; ++c) {
                require(names[c] != nullptr, "null column name");
                labels.emplace_back(names[c]);
            }
        } else {
            labels = lgcd::default_names(p);
        }
        *out = new lgcd_dataset{lgcd::Dataset(std::move(m), std::move(labels))};
    });
}

lgcd_status lgcd_dataset_load_csv(const char* path, lgcd_dataset** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        *out = new lgcd_dataset{lgcd::load_csv(path)};
    });
}

lgcd_status lgcd_dataset_parse_csv(const char* text, lgcd_dataset** out) {
    return guarded([&] {
        require(text != nullptr && out != nullptr, "null argument");
        *out = new lgcd_dataset{lgcd::parse_csv(text)};
    });
}

lgcd_status lgcd_dataset_write_csv(const lgcd_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds != nullptr && path != nullptr, "null argument");
        lgcd::write_csv(ds->ds, path);
    });
}

lgcd_status lgcd_dataset_to_csv(const lgcd_dataset* ds, char** out) {
    return guarded([&] {
        require(ds != nullptr && out != nullptr, "null argument");
        const std::string text = lgcd::to_csv(ds->ds);
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out = buf;
    });
}

size_t lgcd_dataset_rows(const lgcd_dataset* ds) { return ds != nullptr ? ds->ds.n() : 0; }

size_t lgcd_dataset_cols(const lgcd_dataset* ds) { return ds != nullptr ? ds->ds.p() : 0; }

const char* lgcd_dataset_name(const lgcd_dataset* ds, size_t col) {
    if (ds == nullptr || col >= ds->ds.p()) {
        return nullptr;
    }
    return ds->ds.names()[col].c_str();
}

lgcd_status lgcd_dataset_value(const lgcd_dataset* ds, size_t row, size_t col, double* out) {
    return guarded([&] {
        require(ds != nullptr && out != nullptr, "null argument");
        if (row >= ds->ds.n() || col >= ds->ds.p()) {
            throw lgcd::ValidationError("cell index out of range");
        }
        *out = ds->ds(row, col);
    });
}

lgcd_status lgcd_dataset_index_of(const lgcd_dataset* ds, const char* name, size_t* out) {
    return guarded([&] {
        require(ds != nullptr && name != nullptr && out != nullptr, "null argument");
        const auto idx = ds->ds.index_of(name);
        if (!idx) {
            throw lgcd::ValidationError(std::string("unknown variable '") + name + "'");
        }
        *out = *idx;
    });
}

void lgcd_dataset_free(lgcd_dataset* ds) { delete ds; }

void lgcd_string_free(char* s) { delete[] s; }

lgcd_status lgcd_pseudo_transform(const lgcd_dataset* ds, lgcd_dataset** out) {
    return guarded([&] {
        require(ds != nullptr && out != nullptr, "null argument");
        const lgcd::PseudoSample ps(ds->ds);
        *out = new lgcd_dataset{lgcd::Dataset(ps.z_values(), ds->ds.names())};
    });
}

lgcd_status lgcd_plan_select(const lgcd_dataset* ds, int use_cv, double fixed_h, lgcd_plan** out) {
    return guarded([&] {
        require(ds != nullptr && out != nullptr, "null argument");
        lgcd::require_estimable(ds->ds);
        const lgcd::PseudoSample ps(ds->ds);
        *out = new lgcd_plan{lgcd::select_bandwidths(ps, bandwidth_options(use_cv, fixed_h))};
    });
}

size_t lgcd_plan_pair_count(const lgcd_plan* plan) { return plan != nullptr ? plan->plan.pairs().size() : 0; }

lgcd_status lgcd_plan_pair(const lgcd_plan* plan, size_t index, size_t* i, size_t* j, double* h) {
    return guarded([&] {
        require(plan != nullptr && i != nullptr && j != nullptr && h != nullptr, "null argument");
        const auto& pairs = plan->plan.pairs();
        if (index >= pairs.size()) {
            throw lgcd::ValidationError("pair index out of range");
        }
        auto it = pairs.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(index));
        *i = it->first.first;
        *j = it->first.second;
        *h = it->second;
    });
}

lgcd_status lgcd_plan_get(const lgcd_plan* plan, size_t i, size_t j, double* h) {
    return guarded([&] {
        require(plan != nullptr && h != nullptr, "null argument");
        *h = plan->plan.get(i, j);
    });
}

void lgcd_plan_free(lgcd_plan* plan) { delete plan; }

lgcd_status lgcd_model_create(const lgcd_dataset* ds, const size_t* response, size_t k, const size_t* conditioning,
                              size_t m, const lgcd_plan* plan, lgcd_model** out) {
    return guarded([&] {
        require(ds != nullptr && plan != nullptr && out != nullptr, "null argument");
        require((response != nullptr || k == 0) && (conditioning != nullptr || m == 0), "null index list");
        lgcd::Partition part{{response, response + k}, {conditioning, conditioning + m}};
        *out = new lgcd_model{lgcd::ConditionalEstimator(ds->ds, std::move(part), plan->plan)};
    });
}

lgcd_status lgcd_model_estimate(const lgcd_model* model, const double* x2, size_t m, size_t grid_size,
                                lgcd_density** out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr && (x2 != nullptr || m == 0), "null argument");
        lgcd::GridOptions grid;
        grid.grid_size = grid_size;
        *out = new lgcd_density{model->est.estimate({x2, m}, grid)};
    });
}

lgcd_status lgcd_model_estimate_on(const lgcd_model* model, const double* x2, size_t m, const double* const* axes,
                                   const size_t* axis_sizes, size_t k, lgcd_density** out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr && (x2 != nullptr || m == 0), "null argument");
        require(axes != nullptr && axis_sizes != nullptr, "null axes");
        lgcd::GridOptions grid;
        for (size_t r = 0; r < k; ++r) {
            require(axes[r] != nullptr, "null axis");
            grid.axes.emplace_back(axes[r], axes[r] + axis_sizes[r]);
        }
        *out = new lgcd_density{model->est.estimate({x2, m}, grid)};
    });
}

lgcd_status lgcd_model_local_rho(const lgcd_model* model, size_t i, size_t j, double zi, double zj, double* out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr, "null argument");
        *out = model->est.field().rho(i, j, zi, zj);
    });
}

void lgcd_model_free(lgcd_model* model) { delete model; }

size_t lgcd_density_dims(const lgcd_density* d) { return d != nullptr ? d->cd.k() : 0; }

size_t lgcd_density_axis_size(const lgcd_density* d, size_t axis) {
    return d != nullptr && axis < d->cd.k() ? d->cd.axes[axis].size() : 0;
}

const double* lgcd_density_axis(const lgcd_density* d, size_t axis) {
    return d != nullptr && axis < d->cd.k() ? d->cd.axes[axis].data() : nullptr;
}

size_t lgcd_density_size(const lgcd_density* d) { return d != nullptr ? d->cd.size() : 0; }

const double* lgcd_density_values(const lgcd_density* d) { return d != nullptr ? d->cd.values.data() : nullptr; }

double lgcd_density_normalizer(const lgcd_density* d) { return d != nullptr ? d->cd.normalizer : 0.0; }

double lgcd_density_psd_repaired_fraction(const lgcd_density* d) {
    return d != nullptr ? d->cd.psd_repaired_fraction() : 0.0;
}

size_t lgcd_density_no_local_mass(const lgcd_density* d) { return d != nullptr ? d->cd.no_local_mass : 0; }

lgcd_status lgcd_density_quantile(const lgcd_density* d, double alpha, double* value, int* extrapolated) {
    return guarded([&] {
        require(d != nullptr && value != nullptr, "null argument");
        const auto q = lgcd::conditional_quantile(d->cd, alpha);
        *value = q.value;
        if (extrapolated != nullptr) {
            *extrapolated = q.extrapolated ? 1 : 0;
        }
    });
}

void lgcd_density_free(lgcd_density* d) { delete d; }

void lgcd_sim_spec_default(lgcd_sim_spec* spec) {
    if (spec == nullptr) {
        return;
    }
    const lgcd::SimSpec s;
    spec->family = static_cast<int>(s.family);
    spec->margin = static_cast<int>(s.margins);
    spec->dim = s.dim;
    spec->n = s.n;
    spec->seed = s.seed.value;
    spec->theta = s.params.theta;
    spec->rho = s.params.rho;
    spec->dof = s.params.dof;
    spec->rho2 = s.params.rho2;
    spec->ar = s.params.ar;
    spec->ar_sqrt = s.params.ar_sqrt;
}

lgcd_status lgcd_family_from_name(const char* name, int* out) {
    return guarded([&] {
        require(name != nullptr && out != nullptr, "null argument");
        const auto f = lgcd::parse_family(name);
        if (!f) {
            throw lgcd::ValidationError(std::string("unknown family '") + name + "'");
        }
        *out = static_cast<int>(*f);
    });
}

lgcd_status lgcd_margin_from_name(const char* name, int* out) {
    return guarded([&] {
        require(name != nullptr && out != nullptr, "null argument");
        const auto m = lgcd::parse_margin(name);
        if (!m) {
            throw lgcd::ValidationError(std::string("unknown margin '") + name + "'");
        }
        *out = static_cast<int>(*m);
    });
}

lgcd_status lgcd_method_from_name(const char* name, int* out) {
    return guarded([&] {
        require(name != nullptr && out != nullptr, "null argument");
        const auto m = lgcd::parse_method(name);
        if (!m) {
            throw lgcd::ValidationError(std::string("unknown method '") + name + "'");
        }
        *out = static_cast<int>(*m);
    });
}

const char* lgcd_family_name(int family) {
    static const char* names[] = {"gaussian_copula", "joe_copula", "t_copula", "multivariate_t",
                                  "lognormal_t10_plus_indep_t5", "nonlinear_ar1"};
    return family >= 0 && family <= LGCD_NONLINEAR_AR1 ? names[family] : nullptr;
}

const char* lgcd_margin_name(int margin) {
    static const char* names[] = {"std_normal", "std_exponential", "lognormal"};
    return margin >= 0 && margin <= LGCD_LOGNORMAL ? names[margin] : nullptr;
}

const char* lgcd_method_name(int method) {
    static const char* names[] = {"lgde", "naive"};
    return method >= 0 && method <= LGCD_METHOD_NAIVE ? names[method] : nullptr;
}

lgcd_status lgcd_simulate(const lgcd_sim_spec* spec, lgcd_dataset** out) {
    return guarded([&] {
        require(out != nullptr, "null argument");
        *out = new lgcd_dataset{lgcd::sample(to_spec(spec))};
    });
}

lgcd_status lgcd_truth_grid(const lgcd_sim_spec* spec, size_t points, double* out) {
    return guarded([&] {
        require(out != nullptr, "null argument");
        const auto grid = lgcd::truth_grid(to_spec(spec), points);
        std::copy(grid.begin(), grid.end(), out);
    });
}

lgcd_status lgcd_true_conditional(const lgcd_sim_spec* spec, const double* x2, size_t m, const double* grid,
                                  size_t points, double* out) {
    return guarded([&] {
        require(out != nullptr && grid != nullptr && (x2 != nullptr || m == 0), "null argument");
        const auto f = lgcd::true_conditional(to_spec(spec), {x2, m}, {grid, points});
        std::copy(f.begin(), f.end(), out);
    });
}

lgcd_status lgcd_ise_bench(const lgcd_sim_spec* spec, const double* x2, size_t m, size_t replicates,
                           size_t grid_points, int method, double* per_replicate, double* mean_ise) {
    return guarded([&] {
        require(per_replicate != nullptr && mean_ise != nullptr && (x2 != nullptr || m == 0), "null argument");
        if (method != LGCD_METHOD_LGDE && method != LGCD_METHOD_NAIVE) {
            throw lgcd::ValidationError("unknown method");
        }
        lgcd::BenchOptions opts;
        opts.replicates = replicates;
        opts.grid_points = grid_points;
        opts.method = static_cast<lgcd::Method>(method);
        const auto rep = lgcd::ise_bench(to_spec(spec), {x2, m}, opts);
        std::copy(rep.per_replicate.begin(), rep.per_replicate.end(), per_replicate);
        *mean_ise = rep.mean_ise;
    });
}

lgcd_status lgcd_kendall_tau(const double* x, const double* y, size_t n, double* out) {
    return guarded([&] {
        require(x != nullptr && y != nullptr && out != nullptr, "null argument");
        *out = lgcd::kendall_tau({x, n}, {y, n});
    });
}

lgcd_status lgcd_partial_cov(const double* series, size_t n, size_t lag, const size_t* given_lags,
                             const double* x_cond, size_t n_given, size_t diag_points, int use_cv, double fixed_h,
                             lgcd_curve** out) {
    return guarded([&] {
        require(series != nullptr && out != nullptr, "null argument");
        require((given_lags != nullptr && x_cond != nullptr) || n_given == 0, "null conditioning lists");
        lgcd::PartialCovOptions o;
        o.lag = lag;
        o.given_lags.assign(given_lags, given_lags + n_given);
        o.x_cond.assign(x_cond, x_cond + n_given);
        o.diag_points = diag_points;
        o.bandwidth = bandwidth_options(use_cv, fixed_h);
        *out = new lgcd_curve{lgcd::partial_local_cov({series, n}, o)};
    });
}

size_t lgcd_curve_size(const lgcd_curve* c) { return c != nullptr ? c->curve.z.size() : 0; }

const double* lgcd_curve_z(const lgcd_curve* c) { return c != nullptr ? c->curve.z.data() : nullptr; }

const double* lgcd_curve_points(const lgcd_curve* c) { return c != nullptr ? c->curve.points.data() : nullptr; }

const double* lgcd_curve_unconditional(const lgcd_curve* c) {
    return c != nullptr ? c->curve.unconditional.data() : nullptr;
}

const double* lgcd_curve_conditional(const lgcd_curve* c) {
    return c != nullptr ? c->curve.conditional.data() : nullptr;
}

void lgcd_curve_free(lgcd_curve* c) { delete c; }

void lgcd_backtest_options_default(lgcd_backtest_options* options) {
    if (options == nullptr) {
        return;
    }
    static const double kLevels[] = {0.005, 0.01, 0.05};
    const lgcd::BacktestOptions d;
    options->warmup = d.warmup;
    options->levels = kLevels;
    options->n_levels = 3;
    options->period = 0;
    options->window = d.window;
    options->grid_points = d.grid_points;
    options->use_cv = 1;
    options->fixed_h = 1.0;
}

lgcd_status lgcd_var_backtest(const lgcd_dataset* returns, const lgcd_backtest_options* options, lgcd_report** out) {
    return guarded([&] {
        require(returns != nullptr && options != nullptr && out != nullptr, "null argument");
        require(options->levels != nullptr || options->n_levels == 0, "null levels");
        lgcd::BacktestOptions o;
        o.warmup = options->warmup;
        o.levels.assign(options->levels, options->levels + options->n_levels);
        o.policy = options->period == 0 ? lgcd::PlanPolicy::frozen : lgcd::PlanPolicy::periodic;
        o.period = options->period;
        o.window = options->window;
        o.grid_points = options->grid_points;
        o.bandwidth = bandwidth_options(options->use_cv, options->fixed_h);
        *out = new lgcd_report{lgcd::var_backtest(returns->ds.values(), o)};
    });
}

size_t lgcd_report_levels(const lgcd_report* r) { return r != nullptr ? r->report.levels.size() : 0; }

double lgcd_report_level(const lgcd_report* r, size_t l) {
    return r != nullptr && l < r->report.levels.size() ? r->report.levels[l] : 0.0;
}

double lgcd_report_proportion(const lgcd_report* r, size_t l) {
    return r != nullptr && l < r->report.exceed_proportion.size() ? r->report.exceed_proportion[l] : 0.0;
}

size_t lgcd_report_n_eval(const lgcd_report* r) { return r != nullptr ? r->report.n_eval : 0; }

size_t lgcd_report_skipped(const lgcd_report* r) { return r != nullptr ? r->report.skipped : 0; }

size_t lgcd_report_days(const lgcd_report* r) { return r != nullptr ? r->report.days.size() : 0; }

lgcd_status lgcd_report_day(const lgcd_report* r, size_t index, size_t* day, int* skipped, double* realized) {
    return guarded([&] {
        require(r != nullptr && day != nullptr && skipped != nullptr && realized != nullptr, "null argument");
        if (index >= r->report.days.size()) {
            throw lgcd::ValidationError("day index out of range");
        }
        const auto& d = r->report.days[index];
        *day = d.day;
        *skipped = d.skipped ? 1 : 0;
        *realized = d.realized;
    });
}

lgcd_status lgcd_report_day_var(const lgcd_report* r, size_t index, size_t level, double* var, int* exceeded) {
    return guarded([&] {
        require(r != nullptr && var != nullptr && exceeded != nullptr, "null argument");
        if (index >= r->report.days.size()) {
            throw lgcd::ValidationError("day index out of range");
        }
        const auto& d = r->report.days[index];
        if (d.skipped) {
            throw lgcd::NumericError("day was skipped (no local mass)");
        }
        if (level >= d.var.size()) {
            throw lgcd::ValidationError("level index out of range");
        }
        *var = d.var[level];
        *exceeded = d.exceeded[level] ? 1 : 0;
    });
}

void lgcd_report_free(lgcd_report* r) { delete r; }

} // extern "C"
