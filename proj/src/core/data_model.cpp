#include "core/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "core/error.hpp"

namespace lgcd {

namespace {

std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty()) {
        return false;
    }
    const char* begin = s.data();
    if (*begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace

std::vector<std::string> default_names(std::size_t p) {
    std::vector<std::string> names;
    names.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        names.push_back(fmt::format("X{}", j + 1));
    }
    return names;
}

Dataset::Dataset(Eigen::MatrixXd values) : Dataset(values, default_names(values.cols())) {}

Dataset::Dataset(Eigen::MatrixXd values, std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names)) {
    if (names_.size() != p()) {
        throw ValidationError(fmt::format("expected {} column names, got {}", p(), names_.size()));
    }
    if (n() == 0 || p() == 0) {
        throw ValidationError("dataset is empty");
    }
    std::set<std::string> unique(names_.begin(), names_.end());
    if (unique.size() != names_.size()) {
        throw ValidationError("duplicate column name");
    }
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            if (!std::isfinite(values_(i, j))) {
                throw ValidationError(fmt::format("non-finite value at row {}, column {}", i + 1, j + 1));
            }
        }
        const double mean = values_.col(j).mean();
        const double ss = (values_.col(j).array() - mean).square().sum();
        if (!(ss > 0.0)) {
            throw ValidationError(fmt::format("constant column '{}'", names_[static_cast<std::size_t>(j)]));
        }
    }
}

std::vector<double> Dataset::column(std::size_t col) const {
    const auto c = values_.col(static_cast<Eigen::Index>(col));
    return {c.data(), c.data() + c.size()};
}

std::optional<std::size_t> Dataset::index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - names_.begin());
}

Dataset Dataset::select(std::span<const std::size_t> cols) const {
    Eigen::MatrixXd out(values_.rows(), static_cast<Eigen::Index>(cols.size()));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] >= p()) {
            throw ContractError(fmt::format("column index {} out of range", cols[c]));
        }
        out.col(static_cast<Eigen::Index>(c)) = values_.col(static_cast<Eigen::Index>(cols[c]));
        names.push_back(names_[cols[c]]);
    }
    return Dataset(std::move(out), std::move(names));
}

void require_estimable(const Dataset& ds) {
    if (ds.n() < kMinEstimationRows) {
        throw ValidationError(fmt::format("need at least {} observations, got {}", kMinEstimationRows, ds.n()));
    }
    if (ds.p() < 2) {
        throw ValidationError("need at least two variables");
    }
}

Partition make_partition(std::vector<std::size_t> response, std::vector<std::size_t> conditioning,
                         std::size_t p) {
    if (response.empty() || conditioning.empty()) {
        throw ValidationError("partition needs at least one response and one conditioning variable");
    }
    std::set<std::size_t> seen;
    for (const auto list : {&response, &conditioning}) {
        for (const std::size_t idx : *list) {
            if (idx >= p) {
                throw ValidationError(fmt::format("variable index {} out of range", idx));
            }
            if (!seen.insert(idx).second) {
                throw ValidationError("overlapping partition");
            }
        }
    }
    return Partition{std::move(response), std::move(conditioning)};
}

Partition make_partition(std::span<const std::string> response, std::span<const std::string> conditioning,
                         const Dataset& ds) {
    auto lookup = [&](std::span<const std::string> labels) {
        std::vector<std::size_t> idx;
        for (const auto& label : labels) {
            const auto found = ds.index_of(label);
            if (!found) {
                throw ValidationError(fmt::format("unknown variable '{}'", label));
            }
            idx.push_back(*found);
        }
        return idx;
    };
    return make_partition(lookup(response), lookup(conditioning), ds.p());
}

Dataset parse_csv(const std::string& text, bool header) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_csv_record(line);
        if (first) {
            width = fields.size();
            first = false;
            if (header) {
                for (auto& f : fields) {
                    names.push_back(trim(f));
                }
                continue;
            }
        }
        const std::size_t row = rows.size() + 1;
        if (fields.size() != width) {
            throw ParseError(fmt::format("row {} has {} fields, expected {}", row, fields.size(), width), row, 0);
        }
        std::vector<double> values(width);
        for (std::size_t c = 0; c < width; ++c) {
            if (!parse_double(fields[c], values[c])) {
                throw ParseError(fmt::format("non-numeric cell '{}' at ({},{})", trim(fields[c]), row, c + 1),
                                 row, c + 1);
            }
            if (!std::isfinite(values[c])) {
                throw ValidationError(fmt::format("non-finite value at ({},{})", row, c + 1));
            }
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw ValidationError("CSV contains no data rows");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    if (!header) {
        names = default_names(width);
    }
    return Dataset(std::move(m), std::move(names));
}

Dataset load_csv(const std::filesystem::path& path, bool header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), header);
}

std::string to_csv(const Dataset& ds) {
    std::string out;
    for (std::size_t j = 0; j < ds.p(); ++j) {
        const auto& name = ds.names()[j];
        const bool quote = name.find_first_of(",\"") != std::string::npos;
        if (j > 0) {
            out += ',';
        }
        if (quote) {
            std::string escaped;
            for (char c : name) {
                escaped += c;
                if (c == '"') {
                    escaped += '"';
                }
            }
            out += '"' + escaped + '"';
        } else {
            out += name;
        }
    }
    out += '\n';
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.p(); ++j) {
            if (j > 0) {
                out += ',';
            }
            out += fmt::format("{:.17g}", ds(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    }
    out << to_csv(ds);
}

RunConfig parse_config_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    static const std::set<std::string> known{"response", "conditioning", "bandwidth", "grid_size", "seed"};
    RunConfig cfg;
    try {
        for (const auto& [key, value] : j.items()) {
            if (!known.contains(key)) {
                throw ValidationError(fmt::format("unknown config key '{}'", key));
            }
        }
        if (j.contains("response")) {
            cfg.response = j.at("response").get<std::vector<std::string>>();
        }
        if (j.contains("conditioning")) {
            cfg.conditioning = j.at("conditioning").get<std::vector<std::string>>();
        }
        if (j.contains("bandwidth") && !j.at("bandwidth").is_null()) {
            const auto& bw = j.at("bandwidth");
            if (bw.is_string()) {
                if (bw.get<std::string>() != "cv") {
                    throw ValidationError("bandwidth must be a number or \"cv\"");
                }
            } else {
                cfg.bandwidth = bw.get<double>();
                if (!(*cfg.bandwidth > 0.0)) {
                    throw ValidationError("bandwidth must be positive");
                }
            }
        }
        if (j.contains("grid_size")) {
            cfg.grid_size = j.at("grid_size").get<std::size_t>();
        }
        if (j.contains("seed")) {
            cfg.seed = j.at("seed").get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("bad config value: {}", e.what()));
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(fmt::format("cannot open config '{}'", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_json(buf.str());
}

} // namespace lgcd
