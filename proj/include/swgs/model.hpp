#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace swgs {

/// Variance components of the cross-sectional Hussey-Hughes model
/// y_ijk = mu + pi_j + tau X_ij + c_i + e_ijk.
struct VarianceComponents {
    double sigma_c2 = 0.0; ///< cluster random-effect variance
    double sigma_e2 = 1.0; ///< residual variance

    void validate() const;
    friend bool operator==(const VarianceComponents&, const VarianceComponents&) = default;
};

/// Switching periods S_c in {1, ..., T+1}; T+1 means the cluster never
/// receives the intervention.
class AllocationSchedule {
public:
    AllocationSchedule(std::vector<int> switching_times, int periods);

    int clusters() const { return static_cast<int>(switching_.size()); }
    int periods() const { return periods_; }
    const std::vector<int>& switching_times() const { return switching_; }
    int switching_time(int cluster) const { return switching_[static_cast<std::size_t>(cluster)]; }
    int first_switch() const;

    friend bool operator==(const AllocationSchedule&, const AllocationSchedule&) = default;

private:
    std::vector<int> switching_;
    int periods_;
};

/// Periods after which the interim (and final) analyses take place.
class AnalysisSchedule {
public:
    AnalysisSchedule(std::vector<int> periods, int total_periods);

    std::size_t size() const { return periods_.size(); }
    int period(std::size_t i) const { return periods_[i]; }
    const std::vector<int>& periods() const { return periods_; }
    int first() const { return periods_.front(); }

    friend bool operator==(const AnalysisSchedule&, const AnalysisSchedule&) = default;

private:
    std::vector<int> periods_;
};

/// Futility bounds f and efficacy bounds e on the standardised Z scale.
///
/// The final futility and efficacy bound are one stored value, so
/// f_K == e_K holds by construction. Interim bounds may be infinite
/// (f_i = -inf disables futility stopping, e_i = +inf efficacy stopping).
class StoppingBoundaries {
public:
    /// `futility` has K entries; `interim_efficacy` has K-1 entries.
    StoppingBoundaries(std::vector<double> futility, std::vector<double> interim_efficacy);

    /// Builds from full-length f and e; requires f.back() == e.back().
    static StoppingBoundaries from_vectors(const std::vector<double>& futility,
                                           const std::vector<double>& efficacy);

    std::size_t size() const { return futility_.size(); }
    double futility(std::size_t i) const { return futility_[i]; }
    double efficacy(std::size_t i) const
    {
        return i + 1 == futility_.size() ? futility_.back() : interim_efficacy_[i];
    }
    double final_bound() const { return futility_.back(); }
    const std::vector<double>& futility_bounds() const { return futility_; }
    std::vector<double> efficacy_bounds() const;

    friend bool operator==(const StoppingBoundaries&, const StoppingBoundaries&) = default;

private:
    std::vector<double> futility_;
    std::vector<double> interim_efficacy_;
};

/// Complete group sequential stepped-wedge design {T, f, e, m, X(S)}.
class GroupSequentialDesign {
public:
    GroupSequentialDesign(AllocationSchedule allocation, AnalysisSchedule schedule,
                          StoppingBoundaries boundaries, int m, VarianceComponents vc);

    const AllocationSchedule& allocation() const { return allocation_; }
    const AnalysisSchedule& schedule() const { return schedule_; }
    const StoppingBoundaries& boundaries() const { return boundaries_; }
    int m() const { return m_; }
    const VarianceComponents& variance() const { return vc_; }

    int clusters() const { return allocation_.clusters(); }
    int periods() const { return allocation_.periods(); }
    std::size_t analyses() const { return schedule_.size(); }
    /// m * C * t_i, the measurements accrued by analysis i (0-based).
    double measurements_at(std::size_t i) const;
    double max_measurements() const;

    friend bool operator==(const GroupSequentialDesign&, const GroupSequentialDesign&) = default;

private:
    AllocationSchedule allocation_;
    AnalysisSchedule schedule_;
    StoppingBoundaries boundaries_;
    int m_;
    VarianceComponents vc_;
};

/// Design-stage inputs for one trial design scenario.
struct ScenarioSpec {
    int C = 0;
    int T = 0;
    double alpha = 0.05;
    double beta = 0.2; ///< type-II error rate, 1 - power
    double delta = 0.0;
    VarianceComponents vc;
    std::optional<double> M_SW;
    std::array<double, 3> weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<int> analysis_periods;
    std::optional<int> m;
    std::optional<std::vector<int>> switching_times;

    void validate() const;
    AnalysisSchedule schedule() const { return AnalysisSchedule(analysis_periods, T); }
};

/// Fixed effects beta = (mu, pi_2, ..., pi_T, tau); pi_1 = 0.
struct FixedEffects {
    double mu = 0.0;
    std::vector<double> period_effects; ///< pi_2, ..., pi_T
    double tau = 0.0;

    static FixedEffects zero_periods(int T, double tau);
    void validate(int T) const;
    Eigen::VectorXd beta() const;
};

Eigen::MatrixXi build_treatment_matrix(const AllocationSchedule& allocation);

/// Individual-level design matrix for the first t periods. Rows are ordered
/// period-major, (period j, cluster c, measurement k), so D_t is exactly the
/// leading block of rows of D_T. Columns: intercept, dummies for periods
/// 2..T, treatment (always last). Dummies of unobserved periods are zero.
Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXi& X, int m, int t);

/// Individual-level covariance for the first t periods, in the same row
/// order as build_design_matrix.
Eigen::MatrixXd build_covariance(int C, int m, int t, const VarianceComponents& vc);

/// Cluster-period mean design matrix (C * t rows, period-major).
Eigen::MatrixXd build_mean_design_matrix(const Eigen::MatrixXi& X, int t);

/// Covariance of cluster-period means: sigma_c2 + sigma_e2/m on the diagonal,
/// sigma_c2 between periods of the same cluster.
Eigen::MatrixXd build_mean_covariance(int C, int m, int t, const VarianceComponents& vc);

/// Generalised least squares operator for a design/covariance pair.
///
/// All-zero columns of D (dummies of periods not yet observed) are dropped;
/// the treatment column must survive. `weights` maps responses to the
/// estimates of the retained columns.
struct GlsOperator {
    std::vector<int> columns;
    Eigen::MatrixXd weights;
    double information = 0.0;

    Eigen::VectorXd estimate(const Eigen::VectorXd& y) const { return weights * y; }
    double treatment_estimate(const Eigen::VectorXd& y) const
    {
        return weights.row(weights.rows() - 1).dot(y);
    }
};

inline constexpr double kConditionLimit = 1e12;

GlsOperator make_gls_operator(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma);

/// Hussey-Hughes closed-form information for tau from the first t periods.
double information_closed_form(const Eigen::MatrixXi& X, int m, int t, const VarianceComponents& vc);

/// 1 / [(D' Sigma^-1 D)^-1]_{p,p}.
double information_generic(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma);

/// Joint distribution of (Z_1, ..., Z_K): E(Z_i) = tau * sqrt(I_i),
/// Cov(Z_i, Z_j) = sqrt(I_i / I_j) for i <= j.
struct StatisticCovariance {
    std::vector<double> information;
    Eigen::VectorXd sqrt_information;
    Eigen::MatrixXd lambda;
};

StatisticCovariance statistic_covariance(const std::vector<double>& information);
StatisticCovariance statistic_covariance(const GroupSequentialDesign& design);

} // namespace swgs
