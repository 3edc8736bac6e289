#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lgcd {

inline constexpr std::size_t kMinEstimationRows = 20;

// n x p table of finite observations with one label per column. Immutable
// once built; the constructor rejects non-finite cells and constant columns.
class Dataset {
public:
    Dataset(Eigen::MatrixXd values, std::vector<std::string> names);
    // Columns get default labels X1..Xp.
    explicit Dataset(Eigen::MatrixXd values);

    std::size_t n() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    double operator()(std::size_t row, std::size_t col) const {
        return values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    }
    std::vector<double> column(std::size_t col) const;

    std::optional<std::size_t> index_of(const std::string& name) const;

    // Keeps only the listed columns, in the listed order.
    Dataset select(std::span<const std::size_t> cols) const;

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> names_;
};

std::vector<std::string> default_names(std::size_t p);

// Estimation entry points need n >= 20 and p >= 2.
void require_estimable(const Dataset& ds);

// Response/conditioning split. Both lists keep the caller's order.
struct Partition {
    std::vector<std::size_t> response;
    std::vector<std::size_t> conditioning;

    std::size_t k() const { return response.size(); }
    std::size_t m() const { return conditioning.size(); }
};

Partition make_partition(std::span<const std::string> response,
                         std::span<const std::string> conditioning,
                         const Dataset& ds);
Partition make_partition(std::vector<std::size_t> response,
                         std::vector<std::size_t> conditioning,
                         std::size_t p);

struct RngSeed {
    std::uint64_t value = 0;

    RngSeed derive(std::uint64_t index) const { return RngSeed{value + index}; }
};

Dataset load_csv(const std::filesystem::path& path, bool header = true);
Dataset parse_csv(const std::string& text, bool header = true);
// Values are printed with 17 significant digits so reloading is exact.
void write_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv(const Dataset& ds);

// Options shared by the CLI and the JSON config file.
struct RunConfig {
    std::vector<std::string> response;
    std::vector<std::string> conditioning;
    std::optional<double> bandwidth;  // fixed bandwidth; unset means cross-validation
    std::optional<std::size_t> grid_size;
    std::optional<std::uint64_t> seed;
};

RunConfig parse_config_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

} // namespace lgcd
