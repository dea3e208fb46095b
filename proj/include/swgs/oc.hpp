#pragma once

#include <vector>

#include "swgs/model.hpp"
#include "swgs/mvnorm.hpp"

namespace swgs {

/// Terminal outcome {Gamma = gamma, Psi = psi}; gamma is 1-based.
struct OutcomeLabel {
    int gamma = 1;
    int psi = 0;
};

struct Interval {
    double lower;
    double upper;
};

/// Limits of Z_i for outcome (gamma, psi): (f_i, e_i] before gamma,
/// (e_gamma, inf) on rejection, (-inf, f_gamma] on acceptance. i is 1-based.
Interval integration_limits(int i, OutcomeLabel outcome, const StoppingBoundaries& boundaries);

struct OutcomeRow {
    int gamma;
    int psi;
    double tau;
    double probability;
    double error_estimate;
};

struct OperatingCharacteristics {
    double type_i = 0.0;
    double power = 0.0;
    double enm_null = 0.0;
    double enm_alt = 0.0;
    double max_measurements = 0.0;
    std::vector<OutcomeRow> per_outcome;
    bool alpha_ok = false;
    bool power_ok = false;
    /// Sum of integrator error bounds over the terms of type_i / power.
    double integration_error = 0.0;

    bool feasible() const { return alpha_ok && power_ok; }
};

/// Operating characteristics of one design; caches the information sequence
/// and the covariance of the Z statistics.
class OcEvaluator {
public:
    explicit OcEvaluator(GroupSequentialDesign design, MvnOptions options = {});

    const GroupSequentialDesign& design() const { return design_; }
    const StatisticCovariance& statistics() const { return stats_; }
    const MvnOptions& options() const { return options_; }

    /// P(f_j < Z_j <= e_j for j < gamma, lower < Z_gamma <= upper | tau).
    RectangleProbability stage_probability(double tau, int gamma, double lower, double upper) const;

    RectangleProbability outcome_probability(double tau, OutcomeLabel outcome) const;
    double rejection_probability(double tau) const;
    double enm(double tau) const;
    std::vector<OutcomeRow> outcome_table(double tau) const;

private:
    GroupSequentialDesign design_;
    StatisticCovariance stats_;
    MvnOptions options_;
};

RectangleProbability outcome_probability(double tau, OutcomeLabel outcome, const GroupSequentialDesign& design,
                                         const MvnOptions& options = {});
double rejection_probability(double tau, const GroupSequentialDesign& design, const MvnOptions& options = {});
double enm(double tau, const GroupSequentialDesign& design, const MvnOptions& options = {});

/// Checks that scenario and design agree on C, T and the analysis schedule.
void check_compatible(const GroupSequentialDesign& design, const ScenarioSpec& scenario);

/// Slack on the constraint flags of summarize().
struct ConstraintTolerance {
    double alpha = 0.0;
    double power = 0.0;
};

/// Type-I error, power, ENM under tau = 0 and tau = delta, and the full
/// outcome table at both values.
OperatingCharacteristics summarize(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                                   const MvnOptions& options = {}, ConstraintTolerance tolerance = {});

} // namespace swgs
