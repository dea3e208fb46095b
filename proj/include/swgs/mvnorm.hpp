#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace swgs {

/// Rectangle probability with an absolute error bound.
struct RectangleProbability {
    double value = 0.0;
    double error_estimate = 0.0;
};

enum class MvnMethod {
    automatic,        ///< deterministic kernels for d <= 3, lattice QMC above
    quasi_monte_carlo ///< randomized lattice rule for every dimension
};

struct MvnOptions {
    double abs_tol = 1e-6;
    std::uint64_t seed = 0;
    MvnMethod method = MvnMethod::automatic;
    int shifts = 12;             ///< random lattice shifts used for the error estimate
    long max_points = 1L << 22;  ///< per shift
};

inline constexpr double kRootFindingTol = 1e-7;

double std_normal_pdf(double z);
double std_normal_cdf(double z);
/// Upper tail 1 - Phi(z), accurate for large z.
double std_normal_sf(double z);
/// Inverse of the standard normal cdf; throws DomainError outside (0, 1).
double std_normal_quantile(double p);

/// P(X > h, Y > k) for standard bivariate normal with correlation r.
/// Infinite limits are allowed.
double bvn_upper(double h, double k, double r);

/// P(a1 < X <= b1, a2 < Y <= b2) for standard bivariate normal with correlation r.
double bvn_rectangle(double a1, double b1, double a2, double b2, double r);

/// P(lower < X <= upper) for X ~ N(mean, cov).
///
/// Limits may be +-infinity. Dimensions up to three are integrated by
/// deterministic kernels (bivariate: Gauss-Legendre on the Sheppard/Drezner
/// representation; trivariate: adaptive Gauss-Kronrod over the first
/// coordinate of conditional bivariate probabilities). Higher dimensions use
/// the separation-of-variables transform with a randomly shifted, periodised
/// rank-1 lattice rule, refined until the error estimate is below abs_tol.
/// Deterministic for fixed inputs and seed.
RectangleProbability mvn_rectangle(std::span<const double> lower, std::span<const double> upper,
                                   const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                   const MvnOptions& options = {});

} // namespace swgs
