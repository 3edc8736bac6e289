#include "core/normal.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "core/error.hpp"

namespace lgcd {

double norm_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw NumericError("normal quantile requires p in (0,1)");
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double Rng::chi_square(double dof) {
    return 2.0 * boost::math::gamma_p_inv(0.5 * dof, uniform());
}

} // namespace lgcd
