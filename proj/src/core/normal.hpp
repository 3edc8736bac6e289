#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lgcd {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double norm_cdf(double z);
// Standard normal quantile; p must lie in (0, 1).
double norm_quantile(double p);

// Seeded uniform/normal stream built on mt19937_64 with explicit transforms,
// so draws do not depend on the standard library's distribution classes.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double normal() { return norm_quantile(uniform()); }

    // Chi-square draw with the given degrees of freedom, by inversion.
    double chi_square(double dof);

private:
    std::mt19937_64 engine_;
};

} // namespace lgcd
