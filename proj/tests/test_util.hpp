#pragma once

#include <algorithm>
#include <cmath>

namespace hashtran::test {

// Central difference of f with respect to `param`, restoring it afterwards.
template <class F>
double central_difference(double &param, F &&f, double h = 1e-4) {
    const double saved = param;
    param = saved + h;
    const double up = f();
    param = saved - h;
    const double down = f();
    param = saved;
    return (up - down) / (2 * h);
}

// Relative error with an absolute floor, so vanishing gradients compare sanely.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

} // namespace hashtran::test
