#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "swgs/analysis.hpp"
#include "swgs/model.hpp"
#include "swgs/rng.hpp"

namespace swgs {

/// Responses of one period. `cluster_means` always holds the C cluster-period
/// means; `individual` (m x C) is filled only by individual-level generation.
struct PeriodData {
    int period = 0;
    Eigen::VectorXd cluster_means;
    Eigen::MatrixXd individual;
};

enum class GenerationLevel { cluster_means, individual };

/// Draws period t given periods 1..t-1 from the conditional normal
/// distribution of the model, building the covariance blocks from scratch.
/// `individual` works on all m*C responses and is meant for small checks.
PeriodData generate_next_period(const std::vector<PeriodData>& history, int t, const FixedEffects& effects,
                                const GroupSequentialDesign& design, CounterRng& rng,
                                GenerationLevel level = GenerationLevel::cluster_means);

struct GlsFit {
    Eigen::VectorXd beta; ///< intercept, dummies of observed periods 2..t, tau
    double tau_hat = 0.0;
    double info = 0.0;
    double z = 0.0;
};

/// GLS on cluster-period means of periods 1..t.
GlsFit gls_fit(const std::vector<PeriodData>& data, int t, const GroupSequentialDesign& design);

/// Trial simulator with the conditional-generation and GLS operators of a
/// design precomputed.
class TrialSimulator {
public:
    explicit TrialSimulator(GroupSequentialDesign design);

    const GroupSequentialDesign& design() const { return design_; }

    PeriodData next_period(const std::vector<PeriodData>& history, int t, const FixedEffects& effects,
                           CounterRng& rng) const;
    GlsFit fit(const std::vector<PeriodData>& data, std::size_t analysis) const;

    /// Runs the trial to its stopping analysis. Period t draws from the
    /// stream stream_key(key, {t}).
    TrialResult run_trial(const FixedEffects& effects, std::uint64_t key) const;

    /// Z statistics at every analysis of a trial that never stops early.
    Eigen::VectorXd all_statistics(const FixedEffects& effects, std::uint64_t key) const;

private:
    std::vector<PeriodData> draw_all(const FixedEffects& effects, std::uint64_t key, int through) const;

    GroupSequentialDesign design_;
    Eigen::MatrixXi treatment_;
    std::vector<Eigen::MatrixXd> regression_; ///< Sigma_{t,hist} Sigma_{hist,hist}^-1
    std::vector<Eigen::MatrixXd> cond_chol_;  ///< Cholesky factor of the conditional covariance
    std::vector<GlsOperator> gls_;            ///< one per analysis
};

TrialResult run_trial(const GroupSequentialDesign& design, const FixedEffects& effects, std::uint64_t key);

struct ReplicationMetrics {
    double tau = 0.0;
    long R = 0;
    double bias_naive = 0.0;
    double bias_so = 0.0;
    double rmse_naive = 0.0;
    double rmse_so = 0.0;
    double coverage_naive = 0.0;
    double coverage_so = 0.0;
    double se_bias_naive = 0.0;
    double se_bias_so = 0.0;
    double se_coverage_naive = 0.0;
    double se_coverage_so = 0.0;
    /// Fraction of replicates with tau_hat_SO <= tau (0.5 for a median-unbiased estimator).
    double so_below = 0.0;
    /// stop_freq[gamma-1][psi]
    std::vector<std::array<double, 2>> stop_freq;
};

struct StudyOptions {
    double alpha = 0.05;
    double mu = 0.0;
    std::vector<double> period_effects; ///< empty means all zero
    unsigned threads = 1;
};

/// Simulates R trials per tau and summarises naive and stage-wise inference.
std::vector<ReplicationMetrics> replicate_study(const GroupSequentialDesign& design,
                                                const std::vector<double>& tau_grid, long R,
                                                std::uint64_t seed, const StudyOptions& options = {});

/// Pairwise summation; the result depends only on the order of `values`.
double pairwise_sum(const double* values, std::size_t n);

} // namespace swgs
