#pragma once

#include "swgs/model.hpp"
#include "swgs/oc.hpp"

namespace swgs {

/// Terminal observation of a completed trial: {Gamma, Z_Gamma} = {gamma, z}.
struct TrialResult {
    int gamma = 1;            ///< 1-based terminating analysis
    double z = 0.0;           ///< observed standardised statistic
    int psi = 0;              ///< 1 if H0 rejected
    double tau_hat_mle = 0.0; ///< GLS estimate at the terminating analysis
    double info = 0.0;        ///< information at the terminating analysis
};

struct NaiveInference {
    double estimate;
    double p_value;
    double ci_lower;
};

struct InferenceReport {
    double estimate_naive = 0.0;
    double p_naive = 0.0;
    double ci_lower_naive = 0.0;
    double estimate_so = 0.0;
    double p_so = 0.0;
    double ci_lower_so = 0.0;
};

/// Tolerance on boundary comparisons when checking membership in the set of
/// terminal outcomes.
inline constexpr double kBoundaryTol = 1e-12;

/// Builds a result from (gamma, z), deriving psi and the estimate; throws
/// ConstraintError when z lies in the continuation region (f_gamma, e_gamma]
/// of an interim analysis.
TrialResult make_trial_result(const GroupSequentialDesign& design, const StatisticCovariance& stats, int gamma,
                              double z);

/// tau_hat = tau_hat_gamma, p = 1 - Phi(z), lower = tau_hat - Phi^-1(1 - alpha) / sqrt(I).
NaiveInference naive_inference(const TrialResult& result, double alpha);

/// Stage-wise ordering inference for one design.
///
/// E(tau | gamma, z) is the probability, under tau, of an outcome at least
/// as extreme as (gamma, z): an efficacy stop at an earlier analysis, or
/// reaching analysis gamma with Z_gamma > z.
class StagewiseAnalyzer {
public:
    explicit StagewiseAnalyzer(GroupSequentialDesign design, MvnOptions options = {kRootFindingTol});

    const OcEvaluator& evaluator() const { return eval_; }
    const GroupSequentialDesign& design() const { return eval_.design(); }

    TrialResult result(int gamma, double z) const;
    TrialResult result_from_estimate(int gamma, double tau_hat) const;

    double exceedance(double tau, int gamma, double z) const;
    double p_value(const TrialResult& result) const;

    /// Solves E(tau | gamma, z) = target by bracketed bisection with secant
    /// steps. The bracket starts at tau_hat +- 5 I^-1/2 and doubles up to
    /// +-20 I^-1/2 before RootNotFoundError.
    double root(const TrialResult& result, double target) const;

    InferenceReport infer(const TrialResult& result, double alpha) const;

private:
    OcEvaluator eval_;
};

double stagewise_exceedance(double tau, int gamma, double z, const GroupSequentialDesign& design);
double so_p_value(const TrialResult& result, const GroupSequentialDesign& design);
double so_root(const TrialResult& result, double target, const GroupSequentialDesign& design);

} // namespace swgs
