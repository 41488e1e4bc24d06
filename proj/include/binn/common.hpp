#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace binn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

inline void require_dim(const Vec& x, Eigen::Index n, const char* who) {
    if (x.size() != n)
        throw DimensionError(std::string(who) + ": expected dimension " + std::to_string(n) +
                             ", got " + std::to_string(x.size()));
}

// Coordinates closer than this are treated as equal.
inline constexpr double kDistinctTol = 1e-12;

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Right-continuous derivative: relu'(0) = 1.
inline double relu_d(double x) { return x >= 0.0 ? 1.0 : 0.0; }

// Hat function l0, supported on [0,2] with peak 1/2 at x = 1.
inline double hat(double x) {
    if (x <= 0.0 || x >= 2.0) return 0.0;
    return x <= 1.0 ? 0.5 * x : 1.0 - 0.5 * x;
}

inline double hat_d(double x) {
    if (x < 0.0 || x >= 2.0) return 0.0;
    return x < 1.0 ? 0.5 : -0.5;
}

// Literal ReLU composition of the hat; used by the flow oracle.
inline double hat_relu(double x) {
    return relu(-relu(0.5 * x) + 1.0) - relu(-relu(x) + 1.0);
}

// First branch: 1 on x<=0, 1-x/2 on [0,2], 0 beyond.
inline double hat_l1(double x) { return relu(-relu(0.5 * x) + 1.0); }
inline double hat_l1_d(double x) { return (x >= 0.0 && x < 2.0) ? -0.5 : 0.0; }

// Second branch: -1 on x<=0, x-1 on [0,1], 0 beyond.
inline double hat_l2(double x) { return -relu(-relu(x) + 1.0); }
inline double hat_l2_d(double x) { return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0; }

}  // namespace binn
