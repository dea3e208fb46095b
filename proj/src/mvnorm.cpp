#include "swgs/mvnorm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "swgs/error.hpp"
#include "swgs/rng.hpp"

namespace swgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Positive half of an n-point Gauss-Legendre rule, by Newton iteration on P_n.
struct HalfRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

HalfRule gauss_legendre_half(int n)
{
    HalfRule rule;
    for (int i = 1; i <= n / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes.push_back(x);
        rule.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
    }
    return rule;
}

const std::array<HalfRule, 3>& bvn_rules()
{
    static const std::array<HalfRule, 3> rules{gauss_legendre_half(6), gauss_legendre_half(12),
                                               gauss_legendre_half(20)};
    return rules;
}

// Richtmyer generating vector: fractional parts of sqrt(prime_j).
constexpr std::array<int, 40> kPrimes{2,   3,   5,   7,   11,  13,  17,  19,  23,  29,
                                      31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
                                      73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
                                      127, 131, 137, 139, 149, 151, 157, 163, 167, 173};

} // namespace

double std_normal_pdf(double z)
{
    return std::exp(-0.5 * z * z) / std::sqrt(kTwoPi);
}

double std_normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_sf(double z)
{
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double std_normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw DomainError("std_normal_quantile: p must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double CounterRng::normal()
{
    return std_normal_quantile(uniform());
}

// Genz's BVNU: Drezner-Wesolowsky for |r| < 0.925, otherwise the expansion
// about r = +-1 with Gauss-Legendre correction.
double bvn_upper(double h, double k, double r)
{
    if (h == kInf || k == kInf) return 0.0;
    if (h == -kInf) return k == -kInf ? 1.0 : std_normal_sf(k);
    if (k == -kInf) return std_normal_sf(h);

    const auto& rules = bvn_rules();
    const double ar = std::abs(r);
    const HalfRule& rule = ar < 0.3 ? rules[0] : (ar < 0.75 ? rules[1] : rules[2]);
    const std::size_t lg = rule.nodes.size();

    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r);
        for (std::size_t i = 0; i < lg; ++i) {
            const double x = rule.nodes[i], w = rule.weights[i];
            double sn = std::sin(asr * (1.0 - x) / 2.0);
            bvn += w * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            sn = std::sin(asr * (1.0 + x) / 2.0);
            bvn += w * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / (2.0 * kTwoPi) + std_normal_sf(h) * std_normal_sf(k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (ar < 1.0) {
            const double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 16.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0)
                bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(kTwoPi) * std_normal_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (std::size_t i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double xs = std::pow(a * (is * rule.nodes[i] + 1.0), 2);
                    const double rs = std::sqrt(1.0 - xs);
                    asr = -(bs / xs + hk) / 2.0;
                    if (asr > -100.0) {
                        const double sp = 1.0 + c * xs * (1.0 + d * xs);
                        const double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
                        bvn += a * rule.weights[i] * std::exp(asr) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / kTwoPi;
        }
        if (r > 0.0) {
            bvn += std_normal_sf(std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double L = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h) : std_normal_sf(h) - std_normal_sf(k);
            bvn = L - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

double bvn_rectangle(double a1, double b1, double a2, double b2, double r)
{
    if (!(a1 < b1) || !(a2 < b2)) return 0.0;
    const double p = bvn_upper(a1, a2, r) - bvn_upper(b1, a2, r) - bvn_upper(a1, b2, r) + bvn_upper(b1, b2, r);
    return std::clamp(p, 0.0, 1.0);
}

namespace {

// Standardised problem: correlation matrix and limits on the unit-variance scale.
struct Standardised {
    std::vector<double> a;
    std::vector<double> b;
    Eigen::MatrixXd corr;
};

double trivariate(const Standardised& s, double* error)
{
    const double r12 = s.corr(1, 0), r13 = s.corr(2, 0), r23 = s.corr(2, 1);
    const double s2 = std::sqrt(1.0 - r12 * r12);
    const double s3 = std::sqrt(1.0 - r13 * r13);
    const double rho = std::clamp((r23 - r12 * r13) / (s2 * s3), -1.0, 1.0);

    auto integrand = [&](double x) {
        const double a2 = (s.a[1] - r12 * x) / s2, b2 = (s.b[1] - r12 * x) / s2;
        const double a3 = (s.a[2] - r13 * x) / s3, b3 = (s.b[2] - r13 * x) / s3;
        return std_normal_pdf(x) * bvn_rectangle(a2, b2, a3, b3, rho);
    };

    constexpr double kTail = 10.0; // phi(10) ~ 7.7e-23
    const double lo = std::max(s.a[0], -kTail);
    const double hi = std::min(s.b[0], kTail);
    if (!(lo < hi)) {
        *error = 1e-15;
        return 0.0;
    }
    // Bisect panels until each Kronrod error estimate meets its share of an
    // absolute tolerance; a relative one stalls on negligible tail terms.
    double err_total = 0.0;
    std::function<double(double, double, double, int)> panel = [&](double a, double b, double tol, int depth) {
        double err = 0.0;
        const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 0, 0.0, &err);
        if (err <= tol || depth == 0) {
            err_total += err;
            return v;
        }
        const double mid = 0.5 * (a + b);
        return panel(a, mid, 0.5 * tol, depth - 1) + panel(mid, b, 0.5 * tol, depth - 1);
    };
    const double value = panel(lo, hi, 1e-14, 14);
    *error = err_total + 1e-15;
    return std::clamp(value, 0.0, 1.0);
}

struct LatticeIntegrand {
    const Standardised& s;
    Eigen::MatrixXd L;

    // Genz separation of variables; w holds d-1 coordinates in (0, 1).
    double operator()(const double* w, std::vector<double>& y) const
    {
        const auto d = static_cast<Eigen::Index>(s.a.size());
        double lower = std_normal_cdf(s.a[0] / L(0, 0));
        double upper = std_normal_cdf(s.b[0] / L(0, 0));
        double f = upper - lower;
        for (Eigen::Index i = 1; i < d; ++i) {
            if (f <= 0.0) return 0.0;
            const double u = std::clamp(lower + w[i - 1] * (upper - lower), 1e-300, 1.0 - 1e-16);
            y[static_cast<std::size_t>(i - 1)] = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
            double shift = 0.0;
            for (Eigen::Index j = 0; j < i; ++j) shift += L(i, j) * y[static_cast<std::size_t>(j)];
            lower = std_normal_cdf((s.a[static_cast<std::size_t>(i)] - shift) / L(i, i));
            upper = std_normal_cdf((s.b[static_cast<std::size_t>(i)] - shift) / L(i, i));
            f *= upper - lower;
        }
        return std::max(f, 0.0);
    }
};

RectangleProbability lattice_qmc(const Standardised& s, const MvnOptions& options)
{
    const auto d = s.a.size();
    Eigen::LLT<Eigen::MatrixXd> llt(s.corr);
    LatticeIntegrand integrand{s, llt.matrixL()};
    if (d == 1) {
        std::vector<double> unused;
        return {integrand(nullptr, unused), 0.0};
    }

    const std::size_t dim = d - 1;
    if (dim > kPrimes.size())
        throw ConstraintError("mvn_rectangle: dimension too large for the lattice generator");
    std::vector<double> z(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const double q = std::sqrt(static_cast<double>(kPrimes[j]));
        z[j] = q - std::floor(q);
    }

    CounterRng rng(stream_key(options.seed, {0x51ULL, static_cast<std::uint64_t>(d)}));
    const int M = std::max(options.shifts, 2);
    std::vector<std::vector<double>> shifts(static_cast<std::size_t>(M), std::vector<double>(dim));
    for (auto& sh : shifts)
        for (double& v : sh) v = rng.uniform();

    std::vector<double> w(dim), y(d);
    RectangleProbability best{0.0, 1.0};
    for (long n = 256; n <= options.max_points; n *= 2) {
        double mean = 0.0, m2 = 0.0;
        for (int k = 0; k < M; ++k) {
            const auto& sh = shifts[static_cast<std::size_t>(k)];
            double sum = 0.0;
            for (long i = 1; i <= n; ++i) {
                for (std::size_t j = 0; j < dim; ++j) {
                    double x = static_cast<double>(i) * z[j] + sh[j];
                    x -= std::floor(x);
                    w[j] = 1.0 - std::abs(2.0 * x - 1.0); // baker's transform
                }
                sum += integrand(w.data(), y);
            }
            const double est = sum / static_cast<double>(n);
            const double delta = est - mean;
            mean += delta / (k + 1);
            m2 += delta * (est - mean);
        }
        const double se = std::sqrt(m2 / (M - 1) / M);
        best = {std::clamp(mean, 0.0, 1.0), 3.0 * se};
        if (best.error_estimate <= options.abs_tol) break;
    }
    return best;
}

} // namespace

RectangleProbability mvn_rectangle(std::span<const double> lower, std::span<const double> upper,
                                   const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                   const MvnOptions& options)
{
    const std::size_t d = lower.size();
    if (d == 0 || upper.size() != d || static_cast<std::size_t>(mean.size()) != d ||
        static_cast<std::size_t>(cov.rows()) != d || static_cast<std::size_t>(cov.cols()) != d)
        throw ConstraintError("mvn_rectangle: inconsistent dimensions");
    for (std::size_t i = 0; i < d; ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]))
            throw ConstraintError("mvn_rectangle: NaN limit");
        if (!(lower[i] <= upper[i]))
            throw ConstraintError("mvn_rectangle: lower limit exceeds upper limit");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.cwiseAbs().maxCoeff())
        throw ConstraintError("mvn_rectangle: covariance is not symmetric positive definite");

    Standardised s;
    s.a.resize(d);
    s.b.resize(d);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    for (std::size_t i = 0; i < d; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        s.a[i] = (lower[i] - mean(ii)) / sd(ii);
        s.b[i] = (upper[i] - mean(ii)) / sd(ii);
        if (s.a[i] == s.b[i]) return {0.0, 0.0};
    }
    s.corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();

    if (options.method == MvnMethod::automatic && d <= 3) {
        if (d == 1) {
            const double p = s.a[0] > 0.0 ? std_normal_sf(s.a[0]) - std_normal_sf(s.b[0])
                                          : std_normal_cdf(s.b[0]) - std_normal_cdf(s.a[0]);
            return {std::clamp(p, 0.0, 1.0), 1e-16};
        }
        if (d == 2)
            return {bvn_rectangle(s.a[0], s.b[0], s.a[1], s.b[1], s.corr(1, 0)), 1e-14};
        double err = 0.0;
        const double p = trivariate(s, &err);
        return {p, err};
    }
    return lattice_qmc(s, options);
}

} // namespace swgs
