#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "swgs/model.hpp"
#include "swgs/mvnorm.hpp"
#include "swgs/oc.hpp"

namespace swgs {

/// w1 ENM(0) + w2 ENM(delta) + w3 m C T.
double objective(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                 const MvnOptions& options = {});

struct PenalizedValue {
    double objective = 0.0;
    double penalized = 0.0;
    double type_i = 0.0;
    double power = 0.0;
    double enm_null = 0.0;
    double enm_alt = 0.0;
    bool feasible = false;
};

/// Objective plus M_SW times the relative excess of the type-I error over
/// alpha and of the type-II error over beta. Requires scenario.M_SW.
PenalizedValue evaluate_penalized(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                                  const MvnOptions& options = {});
double penalized_objective(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                           const MvnOptions& options = {});

/// Same, from raw parameters. Returns +inf when S puts every cluster in the
/// same switching period or the design is otherwise invalid.
double penalized_objective(const std::vector<int>& switching_times, int m, const StoppingBoundaries& boundaries,
                           const ScenarioSpec& scenario, const MvnOptions& options = {});

struct CEConfig {
    double rho = 0.01;
    long n_samples = 0; ///< 0: 10000 (C + 2K)
    int m_max = 0;      ///< 0: floor(10 M_SW / (C T))
    int max_iters = 100;
    int stall_window = 5;
    double smoothing = 1.0;
    std::uint64_t seed = 0;
    double sd_floor = 1e-4;
    double init_sd = 10.0;
    unsigned threads = 1;
    /// Slack on the constraints when deciding which candidates may be returned.
    ConstraintTolerance tolerance{1e-4, 1e-3};

    void validate() const;
};

/// Sampling distribution of the search. Index 0 of m_probs is m = 2;
/// index s-1 of s_probs[c] is S_c = s.
struct CEState {
    std::vector<double> m_probs;
    std::vector<std::vector<double>> s_probs;
    Eigen::VectorXd f_mean, f_sd;
    Eigen::VectorXd r_mean, r_sd;
    std::optional<GroupSequentialDesign> best;
    double best_objective = std::numeric_limits<double>::infinity();
};

struct TraceRow {
    int iteration = 0;
    double elite_quantile = 0.0;
    double best_objective = 0.0;
};

struct CEResult {
    GroupSequentialDesign design;
    OperatingCharacteristics oc;
    double objective = 0.0;
    std::vector<TraceRow> trace;
    CEState state;
    long evaluations = 0; ///< distinct candidates integrated
};

/// No feasible candidate was sampled. Carries the candidate with the
/// smallest penalized objective, if any was finite.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, std::optional<GroupSequentialDesign> best, double best_penalized,
                    std::vector<TraceRow> trace)
        : std::runtime_error(what), best_(std::move(best)), best_penalized_(best_penalized), trace_(std::move(trace))
    {
    }
    const std::optional<GroupSequentialDesign>& best() const { return best_; }
    double best_penalized() const { return best_penalized_; }
    const std::vector<TraceRow>& trace() const { return trace_; }

private:
    std::optional<GroupSequentialDesign> best_;
    double best_penalized_;
    std::vector<TraceRow> trace_;
};

/// Effective defaults for a scenario: n_samples, m_max filled in.
CEConfig resolve_config(const ScenarioSpec& scenario, CEConfig config);

/// Cross-entropy minimisation of the penalized objective over m, S and the
/// boundaries. Returns the sampled candidate with the smallest penalized
/// objective among those meeting the constraints up to config.tolerance.
/// The returned S is sorted ascending.
CEResult ce_optimize(const ScenarioSpec& scenario, const CEConfig& config = {},
                     const MvnOptions& options = {});

/// As-equal-as-possible numbers of clusters switching in periods 2..T,
/// remainder to the earliest periods.
std::vector<int> near_balanced_allocation(int C, int T);

struct FixedSampleReference {
    int m = 0;
    double M_SW = 0.0;
    double power = 0.0;
};

/// Smallest m giving single-analysis power >= 1 - beta at level alpha.
FixedSampleReference fixed_sample_reference(const ScenarioSpec& scenario,
                                            const std::optional<std::vector<int>>& switching_times = std::nullopt,
                                            int m_limit = 1000000);

/// Scenario with M_SW filled in from the fixed-sample reference if absent.
ScenarioSpec with_reference_size(ScenarioSpec scenario);

/// Distributions of S_1 and S_c (c >= 2) over 1..T+1.
struct AllocationTables {
    std::vector<double> first;
    std::vector<double> other;
};

/// Probability that independently drawn S_1, ..., S_C are non-decreasing.
/// Default tables: S_1 uniform on 1..t1, S_c uniform on 1..T+1.
double ordered_allocation_probability(int C, int T, int t1,
                                      const std::optional<AllocationTables>& tables = std::nullopt);

} // namespace swgs
