#include "swgs/analysis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "swgs/error.hpp"

namespace swgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRootValueTol = 1e-10;
constexpr double kMaxWidths = 20.0;

} // namespace

TrialResult make_trial_result(const GroupSequentialDesign& design, const StatisticCovariance& stats, int gamma,
                              double z)
{
    const int K = static_cast<int>(design.analyses());
    if (gamma < 1 || gamma > K)
        throw ConstraintError("result: gamma=" + std::to_string(gamma) + " outside 1.." + std::to_string(K));
    if (!std::isfinite(z))
        throw ConstraintError("result: z must be finite");
    const auto i = static_cast<std::size_t>(gamma - 1);
    const double f = design.boundaries().futility(i);
    const double e = design.boundaries().efficacy(i);

    TrialResult r;
    r.gamma = gamma;
    r.z = z;
    r.info = stats.information[i];
    r.tau_hat_mle = z / std::sqrt(r.info);
    if (gamma < K) {
        if (z <= f + kBoundaryTol)
            r.psi = 0;
        else if (z > e - kBoundaryTol)
            r.psi = 1;
        else
            throw ConstraintError("result: z=" + std::to_string(z) + " lies in the continuation region (" +
                                  std::to_string(f) + ", " + std::to_string(e) + "] of analysis " +
                                  std::to_string(gamma) + "; the trial would not have stopped");
    } else {
        r.psi = z > e ? 1 : 0;
    }
    return r;
}

NaiveInference naive_inference(const TrialResult& result, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("naive_inference: alpha must lie in (0, 1)");
    const double se = 1.0 / std::sqrt(result.info);
    return {result.tau_hat_mle, std_normal_sf(result.z),
            result.tau_hat_mle - std_normal_quantile(1.0 - alpha) * se};
}

StagewiseAnalyzer::StagewiseAnalyzer(GroupSequentialDesign design, MvnOptions options)
    : eval_(std::move(design), options)
{
}

TrialResult StagewiseAnalyzer::result(int gamma, double z) const
{
    return make_trial_result(eval_.design(), eval_.statistics(), gamma, z);
}

TrialResult StagewiseAnalyzer::result_from_estimate(int gamma, double tau_hat) const
{
    const int K = static_cast<int>(eval_.design().analyses());
    if (gamma < 1 || gamma > K) throw ConstraintError("result: gamma out of range");
    const double info = eval_.statistics().information[static_cast<std::size_t>(gamma - 1)];
    return result(gamma, tau_hat * std::sqrt(info));
}

double StagewiseAnalyzer::exceedance(double tau, int gamma, double z) const
{
    double e = 0.0;
    for (int j = 1; j < gamma; ++j)
        e += eval_.outcome_probability(tau, {j, 1}).value;
    e += eval_.stage_probability(tau, gamma, z, kInf).value;
    return std::min(e, 1.0);
}

double StagewiseAnalyzer::p_value(const TrialResult& result) const
{
    return exceedance(0.0, result.gamma, result.z);
}

double StagewiseAnalyzer::root(const TrialResult& result, double target) const
{
    if (!(target > 0.0 && target < 1.0)) throw DomainError("root: target must lie in (0, 1)");
    const double se = 1.0 / std::sqrt(result.info);
    auto g = [&](double tau) { return exceedance(tau, result.gamma, result.z) - target; };

    // E is increasing in tau: need g(lo) < 0 < g(hi).
    double width = 5.0;
    double lo = result.tau_hat_mle - width * se, hi = result.tau_hat_mle + width * se;
    double glo = g(lo), ghi = g(hi);
    while (glo > 0.0 || ghi < 0.0) {
        width *= 2.0;
        if (width > kMaxWidths + 1e-9)
            throw RootNotFoundError("root: E(tau) - " + std::to_string(target) + " not bracketed within +-" +
                                    std::to_string(kMaxWidths) + " standard errors of the MLE");
        if (glo > 0.0) {
            hi = lo;
            ghi = glo;
            lo = result.tau_hat_mle - width * se;
            glo = g(lo);
        }
        if (ghi < 0.0) {
            lo = hi;
            glo = ghi;
            hi = result.tau_hat_mle + width * se;
            ghi = g(hi);
        }
    }
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;

    // Secant steps inside the bracket; fall back to bisection when a step
    // leaves the bracket or fails to halve it.
    double x = lo, gx = glo;
    for (int iter = 0; iter < 200; ++iter) {
        const double prev_width = hi - lo;
        double cand = lo - glo * (hi - lo) / (ghi - glo);
        const double guard = 1e-3 * (hi - lo);
        if (!(cand > lo + guard && cand < hi - guard)) cand = 0.5 * (lo + hi);
        x = cand;
        gx = g(x);
        if (std::abs(gx) <= kRootValueTol || hi - lo <= 1e-12 * (1.0 + std::abs(x))) break;
        if (gx < 0.0) {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
        if (hi - lo > 0.5 * prev_width) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            x = mid;
            gx = gm;
            if (std::abs(gm) <= kRootValueTol) break;
            if (gm < 0.0) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
                ghi = gm;
            }
        }
    }
    if (std::abs(gx) > 1e-6)
        throw RootNotFoundError("root: iteration did not reach |E(tau) - target| <= 1e-6");
    return x;
}

InferenceReport StagewiseAnalyzer::infer(const TrialResult& result, double alpha) const
{
    const NaiveInference naive = naive_inference(result, alpha);
    InferenceReport report;
    report.estimate_naive = naive.estimate;
    report.p_naive = naive.p_value;
    report.ci_lower_naive = naive.ci_lower;
    report.p_so = p_value(result);
    report.estimate_so = root(result, 0.5);
    report.ci_lower_so = root(result, alpha);
    return report;
}

double stagewise_exceedance(double tau, int gamma, double z, const GroupSequentialDesign& design)
{
    return StagewiseAnalyzer(design).exceedance(tau, gamma, z);
}

double so_p_value(const TrialResult& result, const GroupSequentialDesign& design)
{
    return StagewiseAnalyzer(design).p_value(result);
}

double so_root(const TrialResult& result, double target, const GroupSequentialDesign& design)
{
    return StagewiseAnalyzer(design).root(result, target);
}

} // namespace swgs
