#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "lgcd/lgcd.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

struct CliError {
    int code;
    std::string message;
};

int exit_code(lgcd_status s) {
    switch (s) {
    case LGCD_OK: return kExitOk;
    case LGCD_ERR_NUMERIC: return kExitNumeric;
    case LGCD_ERR_IO: return kExitIo;
    default: return kExitValidation;
    }
}

void check(lgcd_status s) {
    if (s != LGCD_OK) {
        throw CliError{exit_code(s), lgcd_last_error()};
    }
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};

using DatasetPtr = std::unique_ptr<lgcd_dataset, Deleter<lgcd_dataset, lgcd_dataset_free>>;
using PlanPtr = std::unique_ptr<lgcd_plan, Deleter<lgcd_plan, lgcd_plan_free>>;
using ModelPtr = std::unique_ptr<lgcd_model, Deleter<lgcd_model, lgcd_model_free>>;
using DensityPtr = std::unique_ptr<lgcd_density, Deleter<lgcd_density, lgcd_density_free>>;
using CurvePtr = std::unique_ptr<lgcd_curve, Deleter<lgcd_curve, lgcd_curve_free>>;
using ReportPtr = std::unique_ptr<lgcd_report, Deleter<lgcd_report, lgcd_report_free>>;

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<double> split_numbers(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& item : split(s)) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw CliError{kExitValidation, fmt::format("{}: '{}' is not a number", what, item)};
        }
    }
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    for (double v : split_numbers(s, what)) {
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
            throw CliError{kExitValidation, fmt::format("{}: expected non-negative integers", what)};
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CliError{kExitIo, fmt::format("cannot open '{}'", path)};
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", md[i]);
    }
    return hex;
}

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::size_t grid_size = 0;
    std::string config;
    std::string out = "lgcd-out";
};

// Everything a subcommand writes goes through here so outputs stay inside
// the output directory and end up next to a single manifest.
class Output {
public:
    explicit Output(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) {
            throw CliError{kExitIo, fmt::format("cannot create output directory '{}': {}", dir, ec.message())};
        }
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        f << text;
        if (!f) {
            throw CliError{kExitIo, fmt::format("cannot write '{}'", (dir_ / name).string())};
        }
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

private:
    fs::path dir_;
};

struct Context {
    Globals globals;
    ordered_json config = ordered_json::object();
    ordered_json inputs = ordered_json::object();

    void add_input(const std::string& path) { inputs[path] = sha256_file(path); }

    void write_manifest(const Output& out, const std::string& subcommand) const {
        ordered_json m;
        m["subcommand"] = subcommand;
        m["config"] = config;
        m["inputs"] = inputs;
        m["seed"] = globals.seed;
        m["version"] = lgcd_version();
        out.write("manifest.json", m.dump(2) + "\n");
    }
};

DatasetPtr load(Context& ctx, const std::string& path) {
    lgcd_dataset* ds = nullptr;
    check(lgcd_dataset_load_csv(path.c_str(), &ds));
    DatasetPtr owned(ds);
    ctx.add_input(path);
    return owned;
}

std::vector<std::size_t> resolve(const lgcd_dataset* ds, const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
        std::size_t i = 0;
        check(lgcd_dataset_index_of(ds, n.c_str(), &i));
        idx.push_back(i);
    }
    return idx;
}

// "cv" or a positive number.
std::optional<double> parse_bandwidth(const std::string& s) {
    if (s == "cv") {
        return std::nullopt;
    }
    const auto v = split_numbers(s, "--bandwidth");
    if (v.size() != 1 || !(v[0] > 0.0)) {
        throw CliError{kExitValidation, "--bandwidth expects 'cv' or a positive number"};
    }
    return v[0];
}

ordered_json plan_json(const lgcd_plan* plan) {
    ordered_json pairs = ordered_json::array();
    for (std::size_t k = 0; k < lgcd_plan_pair_count(plan); ++k) {
        std::size_t i = 0;
        std::size_t j = 0;
        double h = 0.0;
        check(lgcd_plan_pair(plan, k, &i, &j, &h));
        pairs.push_back({{"i", i}, {"j", j}, {"h", h}});
    }
    return ordered_json{{"pairs", pairs}};
}

// ---- subcommands ---------------------------------------------------------

struct TransformArgs {
    std::string data;
};

void run_transform(Context& ctx, const TransformArgs& a) {
    ctx.config = {{"data", a.data}};
    const DatasetPtr ds = load(ctx, a.data);
    lgcd_dataset* z = nullptr;
    check(lgcd_pseudo_transform(ds.get(), &z));
    const DatasetPtr zs(z);
    const Output out(ctx.globals.out);
    char* text = nullptr;
    check(lgcd_dataset_to_csv(zs.get(), &text));
    const std::string csv(text);
    lgcd_string_free(text);
    out.write("pseudo.csv", csv);
    ctx.write_manifest(out, "transform");
}

struct BandwidthArgs {
    std::string data;
    std::string columns;
    std::string bandwidth = "cv";
};

void run_bandwidth(Context& ctx, const BandwidthArgs& a) {
    ctx.config = {{"data", a.data}, {"columns", a.columns}, {"bandwidth", a.bandwidth}};
    DatasetPtr ds = load(ctx, a.data);
    const auto h = parse_bandwidth(a.bandwidth);
    std::vector<std::string> labels;
    if (!a.columns.empty()) {
        const auto idx = resolve(ds.get(), split(a.columns));
        std::vector<double> values;
        for (std::size_t r = 0; r < lgcd_dataset_rows(ds.get()); ++r) {
            for (std::size_t c : idx) {
                double v = 0.0;
                check(lgcd_dataset_value(ds.get(), r, c, &v));
                values.push_back(v);
            }
        }
        std::vector<const char*> names;
        for (std::size_t c : idx) {
            names.push_back(lgcd_dataset_name(ds.get(), c));
        }
        lgcd_dataset* sub = nullptr;
        check(lgcd_dataset_create(values.data(), lgcd_dataset_rows(ds.get()), idx.size(), names.data(), &sub));
        ds.reset(sub);
    }
    lgcd_plan* plan = nullptr;
    check(lgcd_plan_select(ds.get(), h ? 0 : 1, h.value_or(1.0), &plan));
    const PlanPtr owned(plan);
    ordered_json j = plan_json(plan);
    for (auto& pair : j["pairs"]) {
        pair["x"] = lgcd_dataset_name(ds.get(), pair["i"].get<std::size_t>());
        pair["y"] = lgcd_dataset_name(ds.get(), pair["j"].get<std::size_t>());
    }
    const std::string text = j.dump(2) + "\n";
    const Output out(ctx.globals.out);
    out.write("bandwidths.json", text);
    ctx.write_manifest(out, "bandwidth");
    std::cout << text;
}

struct PredictArgs {
    std::string data;
    std::string response;
    std::string conditioning;
    std::string at;
    std::string bandwidth = "cv";
};

void run_predict(Context& ctx, const PredictArgs& a) {
    ctx.config = {{"data", a.data},           {"response", a.response},
                  {"conditioning", a.conditioning}, {"at", a.at},
                  {"bandwidth", a.bandwidth}, {"grid_size", ctx.globals.grid_size}};
    const DatasetPtr ds = load(ctx, a.data);
    const auto resp = resolve(ds.get(), split(a.response));
    const auto cond = resolve(ds.get(), split(a.conditioning));
    const auto x2 = split_numbers(a.at, "--at");
    if (resp.empty()) {
        throw CliError{kExitValidation, "--response names no variable"};
    }
    const auto h = parse_bandwidth(a.bandwidth);

    // Bandwidths are only needed for the variables in the model.
    std::vector<std::size_t> used = resp;
    used.insert(used.end(), cond.begin(), cond.end());
    std::vector<double> values;
    std::vector<const char*> names;
    for (std::size_t c : used) {
        names.push_back(lgcd_dataset_name(ds.get(), c));
    }
    for (std::size_t r = 0; r < lgcd_dataset_rows(ds.get()); ++r) {
        for (std::size_t c : used) {
            double v = 0.0;
            check(lgcd_dataset_value(ds.get(), r, c, &v));
            values.push_back(v);
        }
    }
    lgcd_dataset* sub = nullptr;
    check(lgcd_dataset_create(values.data(), lgcd_dataset_rows(ds.get()), used.size(), names.data(), &sub));
    const DatasetPtr model_ds(sub);
    std::vector<std::size_t> r_idx(resp.size());
    std::vector<std::size_t> c_idx(cond.size());
    for (std::size_t i = 0; i < r_idx.size(); ++i) {
        r_idx[i] = i;
    }
    for (std::size_t i = 0; i < c_idx.size(); ++i) {
        c_idx[i] = resp.size() + i;
    }

    lgcd_plan* plan = nullptr;
    check(lgcd_plan_select(model_ds.get(), h ? 0 : 1, h.value_or(1.0), &plan));
    const PlanPtr plan_owned(plan);
    lgcd_model* model = nullptr;
    check(lgcd_model_create(model_ds.get(), r_idx.data(), r_idx.size(), c_idx.data(), c_idx.size(), plan, &model));
    const ModelPtr model_owned(model);
    lgcd_density* d = nullptr;
    check(lgcd_model_estimate(model, x2.data(), x2.size(), ctx.globals.grid_size, &d));
    const DensityPtr density(d);

    const std::size_t k = lgcd_density_dims(d);
    std::string csv;
    for (std::size_t r = 0; r < k; ++r) {
        csv += lgcd_dataset_name(model_ds.get(), r);
        csv += ',';
    }
    csv += "density\n";
    const double* vals = lgcd_density_values(d);
    const std::size_t total = lgcd_density_size(d);
    std::vector<std::size_t> pos(k, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (std::size_t r = k; r-- > 0;) {
            const std::size_t len = lgcd_density_axis_size(d, r);
            pos[r] = rem % len;
            rem /= len;
        }
        for (std::size_t r = 0; r < k; ++r) {
            csv += num(lgcd_density_axis(d, r)[pos[r]]);
            csv += ',';
        }
        csv += num(vals[idx]);
        csv += '\n';
    }

    ordered_json side;
    side["normalizer"] = lgcd_density_normalizer(d);
    side["psd_repaired_fraction"] = lgcd_density_psd_repaired_fraction(d);
    side["no_local_mass_points"] = lgcd_density_no_local_mass(d);
    side["bandwidths"] = plan_json(plan)["pairs"];
    side["conditioning_point"] = x2;
    const Output out(ctx.globals.out);
    out.write("density.csv", csv);
    out.write("density.json", side.dump(2) + "\n");
    ctx.write_manifest(out, "predict");
}

struct SimArgs {
    std::string family = "gaussian_copula";
    std::string margin = "std_normal";
    std::size_t dim = 2;
    std::size_t n = 500;
    std::optional<double> theta;
    std::optional<double> rho;
    std::optional<double> dof;
    std::optional<double> rho2;
    std::optional<double> ar;
    std::optional<double> ar_sqrt;
};

lgcd_sim_spec make_spec(const SimArgs& a, std::uint64_t seed) {
    lgcd_sim_spec s;
    lgcd_sim_spec_default(&s);
    check(lgcd_family_from_name(a.family.c_str(), &s.family));
    check(lgcd_margin_from_name(a.margin.c_str(), &s.margin));
    s.dim = a.dim;
    s.n = a.n;
    s.seed = seed;
    s.theta = a.theta.value_or(s.theta);
    s.rho = a.rho.value_or(s.rho);
    s.dof = a.dof.value_or(s.dof);
    s.rho2 = a.rho2.value_or(s.rho2);
    s.ar = a.ar.value_or(s.ar);
    s.ar_sqrt = a.ar_sqrt.value_or(s.ar_sqrt);
    return s;
}

ordered_json spec_json(const lgcd_sim_spec& s) {
    return {{"family", lgcd_family_name(s.family)},
            {"margin", lgcd_margin_name(s.margin)},
            {"dim", s.dim},
            {"n", s.n},
            {"theta", s.theta},
            {"rho", s.rho},
            {"dof", s.dof},
            {"rho2", s.rho2},
            {"ar", s.ar},
            {"ar_sqrt", s.ar_sqrt}};
}

void add_sim_options(CLI::App* app, SimArgs& a) {
    app->add_option("--family", a.family, "Distribution family")->capture_default_str();
    app->add_option("--margin", a.margin, "Marginal distribution for copula families")->capture_default_str();
    app->add_option("--dim", a.dim, "Number of variables")->capture_default_str();
    app->add_option("--n", a.n, "Sample size")->capture_default_str();
    app->add_option("--theta", a.theta, "Joe copula parameter");
    app->add_option("--rho", a.rho, "Equicorrelation");
    app->add_option("--dof", a.dof, "Degrees of freedom for t families");
    app->add_option("--rho2", a.rho2, "Equicorrelation of the t(5) block");
    app->add_option("--ar", a.ar, "Linear AR coefficient");
    app->add_option("--ar-sqrt", a.ar_sqrt, "Coefficient of sqrt|X_{t-1}|");
}

void run_simulate(Context& ctx, const SimArgs& a) {
    const lgcd_sim_spec s = make_spec(a, ctx.globals.seed);
    ctx.config = spec_json(s);
    lgcd_dataset* ds = nullptr;
    check(lgcd_simulate(&s, &ds));
    const DatasetPtr owned(ds);
    char* text = nullptr;
    check(lgcd_dataset_to_csv(ds, &text));
    const std::string csv(text);
    lgcd_string_free(text);
    const Output out(ctx.globals.out);
    out.write("sample.csv", csv);
    ctx.write_manifest(out, "simulate");
}

struct BenchArgs {
    SimArgs sim;
    std::string at;
    std::size_t replicates = 20;
    std::size_t grid_points = 2000;
    std::string method = "lgde";
};

void run_ise_bench(Context& ctx, const BenchArgs& a) {
    const lgcd_sim_spec s = make_spec(a.sim, ctx.globals.seed);
    int method = 0;
    check(lgcd_method_from_name(a.method.c_str(), &method));
    const auto x2 = split_numbers(a.at, "--at");
    ctx.config = spec_json(s);
    ctx.config["at"] = x2;
    ctx.config["replicates"] = a.replicates;
    ctx.config["grid_points"] = a.grid_points;
    ctx.config["method"] = a.method;
    std::vector<double> per(a.replicates);
    double mean = 0.0;
    check(lgcd_ise_bench(&s, x2.data(), x2.size(), a.replicates, a.grid_points, method, per.data(), &mean));
    std::string csv = "replicate,seed,ise\n";
    for (std::size_t r = 0; r < per.size(); ++r) {
        csv += fmt::format("{},{},{}\n", r, s.seed + r, num(per[r]));
    }
    const ordered_json summary{{"p", s.dim}, {"n", s.n}, {"method", a.method}, {"mean_ise", mean}};
    const Output out(ctx.globals.out);
    out.write("ise.csv", csv);
    out.write("ise_summary.json", summary.dump(2) + "\n");
    ctx.write_manifest(out, "ise-bench");
}

struct PartialArgs {
    std::string data;
    std::string column;
    std::size_t lag = 2;
    std::string given = "1";
    std::string x_cond = "5";
    std::size_t diag_points = 21;
    std::string bandwidth = "cv";
};

void run_partial_cov(Context& ctx, const PartialArgs& a) {
    ctx.config = {{"data", a.data},     {"column", a.column},           {"lag", a.lag},
                  {"given", a.given},   {"x_cond", a.x_cond},           {"diag_points", a.diag_points},
                  {"bandwidth", a.bandwidth}};
    const DatasetPtr ds = load(ctx, a.data);
    std::size_t col = 0;
    if (!a.column.empty()) {
        check(lgcd_dataset_index_of(ds.get(), a.column.c_str(), &col));
    }
    std::vector<double> series(lgcd_dataset_rows(ds.get()));
    for (std::size_t r = 0; r < series.size(); ++r) {
        check(lgcd_dataset_value(ds.get(), r, col, &series[r]));
    }
    const auto given = split_sizes(a.given, "--given");
    const auto xc = split_numbers(a.x_cond, "--x-cond");
    const auto h = parse_bandwidth(a.bandwidth);
    if (given.size() != xc.size()) {
        throw CliError{kExitValidation, "--given and --x-cond need the same number of entries"};
    }
    lgcd_curve* c = nullptr;
    check(lgcd_partial_cov(series.data(), series.size(), a.lag, given.data(), xc.data(), given.size(), a.diag_points,
                           h ? 0 : 1, h.value_or(1.0), &c));
    const CurvePtr curve(c);
    std::string csv = "z,point,unconditional,conditional\n";
    for (std::size_t i = 0; i < lgcd_curve_size(c); ++i) {
        csv += fmt::format("{},{},{},{}\n", num(lgcd_curve_z(c)[i]), num(lgcd_curve_points(c)[i]),
                           num(lgcd_curve_unconditional(c)[i]), num(lgcd_curve_conditional(c)[i]));
    }
    const Output out(ctx.globals.out);
    out.write("partial_cov.csv", csv);
    ctx.write_manifest(out, "partial-cov");
}

struct BacktestArgs {
    std::string data;
    std::string levels = "0.005,0.01,0.05";
    std::size_t warmup = 500;
    std::size_t period = 0;
    std::size_t window = 0;
    std::size_t grid_points = 1000;
    std::string bandwidth = "cv";
};

void run_var_backtest(Context& ctx, const BacktestArgs& a) {
    const auto levels = split_numbers(a.levels, "--levels");
    const std::size_t grid = ctx.globals.grid_size != 0 ? ctx.globals.grid_size : a.grid_points;
    ctx.config = {{"data", a.data},     {"levels", levels},  {"warmup", a.warmup},
                  {"period", a.period}, {"window", a.window}, {"grid_points", grid},
                  {"bandwidth", a.bandwidth}};
    const DatasetPtr ds = load(ctx, a.data);
    const auto h = parse_bandwidth(a.bandwidth);
    lgcd_backtest_options o;
    lgcd_backtest_options_default(&o);
    o.warmup = a.warmup;
    o.levels = levels.data();
    o.n_levels = levels.size();
    o.period = a.period;
    o.window = a.window;
    o.grid_points = grid;
    o.use_cv = h ? 0 : 1;
    o.fixed_h = h.value_or(1.0);
    lgcd_report* r = nullptr;
    check(lgcd_var_backtest(ds.get(), &o, &r));
    const ReportPtr report(r);

    ordered_json j;
    j["levels"] = levels;
    std::vector<double> props;
    for (std::size_t l = 0; l < lgcd_report_levels(r); ++l) {
        props.push_back(lgcd_report_proportion(r, l));
    }
    j["exceed_proportion"] = props;
    j["n_eval"] = lgcd_report_n_eval(r);
    j["skipped"] = lgcd_report_skipped(r);
    j["method"] = "lgde";
    j["plan_policy"] = a.period == 0 ? "frozen" : fmt::format("periodic({})", a.period);
    j["window"] = a.window == 0 ? "expanding" : fmt::format("rolling({})", a.window);

    std::string csv = "day,level,var,realized,exceeded\n";
    for (std::size_t i = 0; i < lgcd_report_days(r); ++i) {
        std::size_t day = 0;
        int skipped = 0;
        double realized = 0.0;
        check(lgcd_report_day(r, i, &day, &skipped, &realized));
        for (std::size_t l = 0; l < levels.size(); ++l) {
            if (skipped != 0) {
                csv += fmt::format("{},{},,{},skipped\n", day, num(levels[l]), num(realized));
                continue;
            }
            double var = 0.0;
            int exceeded = 0;
            check(lgcd_report_day_var(r, i, l, &var, &exceeded));
            csv += fmt::format("{},{},{},{},{}\n", day, num(levels[l]), num(var), num(realized), exceeded);
        }
    }
    const Output out(ctx.globals.out);
    out.write("backtest.json", j.dump(2) + "\n");
    out.write("backtest_days.csv", csv);
    ctx.write_manifest(out, "var-backtest");
}

// ---- config file ---------------------------------------------------------

std::string scalar_text(const ordered_json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_array()) {
        std::string s;
        for (const auto& item : v) {
            if (!s.empty()) {
                s += ',';
            }
            s += scalar_text(item);
        }
        return s;
    }
    if (v.is_number_float()) {
        return num(v.get<double>());
    }
    return v.dump();
}

// Fills options that were not given on the command line from the JSON
// object; keys are flag names without dashes, '_' standing for '-'.
void merge_config(const std::string& path, CLI::App& app, CLI::App* sub) {
    std::ifstream in(path);
    if (!in) {
        throw CliError{kExitIo, fmt::format("cannot open config '{}'", path)};
    }
    ordered_json cfg;
    try {
        cfg = ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw CliError{kExitValidation, fmt::format("config '{}' is not valid JSON: {}", path, e.what())};
    }
    if (!cfg.is_object()) {
        throw CliError{kExitValidation, "config must be a JSON object"};
    }
    for (const auto& [key, value] : cfg.items()) {
        std::string flag = "--" + key;
        for (char& ch : flag) {
            if (ch == '_') {
                ch = '-';
            }
        }
        if (flag == "--config" || flag == "--threads") {
            throw CliError{kExitValidation, fmt::format("config key '{}' is not allowed", key)};
        }
        CLI::Option* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr) {
            opt = app.get_option_no_throw(flag);
        }
        if (opt == nullptr) {
            throw CliError{kExitValidation, fmt::format("unknown config key '{}'", key)};
        }
        if (opt->count() == 0) {
            opt->add_result(scalar_text(value));
            opt->run_callback();
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Locally Gaussian conditional density estimation"};
    app.require_subcommand(1);
    Context ctx;
    auto& g = ctx.globals;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--grid-size", g.grid_size, "Grid points per response axis (0 = default)")->capture_default_str();
    app.add_option("--config", g.config, "JSON file with option values; explicit flags take precedence");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    TransformArgs ta;
    auto* transform = app.add_subcommand("transform", "Write pseudo-observations of a dataset");
    transform->add_option("--data", ta.data, "Input CSV")->required();

    BandwidthArgs ba;
    auto* bandwidth = app.add_subcommand("bandwidth", "Select pairwise bandwidths");
    bandwidth->add_option("--data", ba.data, "Input CSV")->required();
    bandwidth->add_option("--columns", ba.columns, "Comma-separated subset of columns");
    bandwidth->add_option("--bandwidth", ba.bandwidth, "'cv' or a fixed value")->capture_default_str();

    PredictArgs pa;
    auto* predict = app.add_subcommand("predict", "Estimate a conditional density on a grid");
    predict->add_option("--data", pa.data, "Input CSV")->required();
    predict->add_option("--response", pa.response, "Comma-separated response variables")->required();
    predict->add_option("--conditioning", pa.conditioning, "Comma-separated conditioning variables")->required();
    predict->add_option("--at", pa.at, "Comma-separated conditioning values")->required();
    predict->add_option("--bandwidth", pa.bandwidth, "'cv' or a fixed value")->capture_default_str();

    SimArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Draw a sample from a benchmark family");
    add_sim_options(simulate, sa);

    BenchArgs bench;
    auto* ise_bench = app.add_subcommand("ise-bench", "Integrated squared error against the true conditional");
    add_sim_options(ise_bench, bench.sim);
    ise_bench->add_option("--at", bench.at, "Comma-separated conditioning values")->required();
    ise_bench->add_option("--replicates", bench.replicates, "Number of replicates")->capture_default_str();
    ise_bench->add_option("--grid-points", bench.grid_points, "Truth grid size")->capture_default_str();
    ise_bench->add_option("--method", bench.method, "lgde or naive")->capture_default_str();

    PartialArgs pc;
    auto* partial = app.add_subcommand("partial-cov", "Partial local covariance of a time series");
    partial->add_option("--data", pc.data, "Input CSV")->required();
    partial->add_option("--column", pc.column, "Series column (default: first)");
    partial->add_option("--lag", pc.lag, "Lag l of the pair (X_t, X_{t-l})")->capture_default_str();
    partial->add_option("--given", pc.given, "Comma-separated intermediate lags")->capture_default_str();
    partial->add_option("--x-cond", pc.x_cond, "Values of the intermediate lags")->capture_default_str();
    partial->add_option("--diag-points", pc.diag_points, "Diagonal evaluation points")->capture_default_str();
    partial->add_option("--bandwidth", pc.bandwidth, "'cv' or a fixed value")->capture_default_str();

    BacktestArgs bt;
    auto* backtest = app.add_subcommand("var-backtest", "Backtest conditional Value-at-Risk");
    backtest->add_option("--data", bt.data, "Returns CSV, portfolio first")->required();
    backtest->add_option("--levels", bt.levels, "Comma-separated VaR levels")->capture_default_str();
    backtest->add_option("--warmup", bt.warmup, "Days before the first forecast")->capture_default_str();
    backtest->add_option("--period", bt.period, "Reselect bandwidths every N days (0 = frozen)")
        ->capture_default_str();
    backtest->add_option("--window", bt.window, "Rolling window length (0 = expanding)")->capture_default_str();
    backtest->add_option("--grid-points", bt.grid_points, "Grid size when --grid-size is not set")
        ->capture_default_str();
    backtest->add_option("--bandwidth", bt.bandwidth, "'cv' or a fixed value")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cerr, std::cerr);
        const CLI::App* failed = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << failed->help();
        return kExitValidation;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!g.config.empty()) {
            merge_config(g.config, app, sub);
        }
        lgcd_set_threads(g.threads);
        if (sub == transform) {
            run_transform(ctx, ta);
        } else if (sub == bandwidth) {
            run_bandwidth(ctx, ba);
        } else if (sub == predict) {
            run_predict(ctx, pa);
        } else if (sub == simulate) {
            run_simulate(ctx, sa);
        } else if (sub == ise_bench) {
            run_ise_bench(ctx, bench);
        } else if (sub == partial) {
            run_partial_cov(ctx, pc);
        } else {
            run_var_backtest(ctx, bt);
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
