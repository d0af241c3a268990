#pragma once

#include <functional>
#include <span>

#include "noma/common.hpp"

namespace noma {

using Transform1D = std::function<cplx(cplx)>;
using Transform2D = std::function<cplx(cplx, cplx)>;

/// Euler-summation inversion settings.
struct Inversion1DConfig {
    double A = 23.0;     ///< discretization parameter; error bound e^{-A}/(1-e^{-A})
    int euler_terms = 15;
    int truncation = 15;

    double discretization_bound() const { return std::exp(-A) / (1.0 - std::exp(-A)); }
};

/// Two-dimensional trapezoidal inversion settings. Zero-valued T, c1, c2 mean "derive".
struct Inversion2DConfig {
    double T = 0.0;          ///< half-period; 0 -> period_factor * max(theta1, theta2)
    double period_factor = 0.8;
    int L = 256;             ///< truncation order before acceleration
    double c1 = 0.0;         ///< 0 -> A / (2T)
    double c2 = 0.0;         ///< 0 -> -ln(E_r / (1 - xi)) / (2T)
    double A = 23.0;
    double target_error = 1e-8;
    int eps_depth = 4;       ///< 2 * eps_depth + 1 partial sums feed the epsilon table

    /// Resolves T, c1, c2 for the given abscissae.
    Inversion2DConfig resolved(double theta1, double theta2) const;
};

template <class T>
struct Accelerated {
    T value;
    bool degraded = false; ///< epsilon table hit a near-singular difference
};

/// Wynn epsilon algorithm on an odd number (>= 3) of partial sums.
Accelerated<double> epsilon_accelerate(std::span<const double> partial_sums);
Accelerated<cplx> epsilon_accelerate(std::span<const cplx> partial_sums);

/// Abate-Whitt Euler-summation inversion of F at tau > 0.
/// Throws NumericalError when F returns a non-finite value.
double invert_1d(const Transform1D& F, double tau, const Inversion1DConfig& cfg = {});

struct Inversion2DResult {
    double value = 0.0;
    bool degraded = false;
};

/// Trapezoidal Bromwich inversion in two variables with epsilon-accelerated tail sums.
Inversion2DResult invert_2d(const Transform2D& F, double theta1, double theta2,
                            const Inversion2DConfig& cfg = {});

} // namespace noma
