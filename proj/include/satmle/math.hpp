#pragma once

#include <algorithm>
#include <cmath>

namespace satmle {

inline double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp_unit(double u, double delta) {
    return std::clamp(u, delta, 1.0 - delta);
}

} // namespace satmle
