#pragma once

#include "binn/common.hpp"

#include <functional>

namespace binn {

using VectorField = std::function<Vec(const Vec&)>;

// Classical RK4 for dy/dt = f(y) up to time tau.
inline Vec rk4_flow(const VectorField& f, const Vec& x, double tau, int steps = 64) {
    require(steps >= 16, "rk4_flow: need at least 16 steps");
    require(tau >= 0.0, "rk4_flow: horizon must be nonnegative");
    if (tau == 0.0) return x;
    const double h = tau / steps;
    Vec y = x;
    for (int s = 0; s < steps; ++s) {
        Vec k1 = f(y);
        Vec k2 = f(y + 0.5 * h * k1);
        Vec k3 = f(y + 0.5 * h * k2);
        Vec k4 = f(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

}  // namespace binn
