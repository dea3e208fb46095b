#include "swgs/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "swgs/error.hpp"

namespace swgs {

void VarianceComponents::validate() const
{
    if (!(sigma_c2 >= 0.0) || !std::isfinite(sigma_c2))
        throw ConstraintError("sigma_c2 must be finite and >= 0");
    if (!(sigma_e2 > 0.0) || !std::isfinite(sigma_e2))
        throw ConstraintError("sigma_e2 must be finite and > 0");
}

AllocationSchedule::AllocationSchedule(std::vector<int> switching_times, int periods)
    : switching_(std::move(switching_times)), periods_(periods)
{
    const int C = clusters();
    if (C < 2)
        throw ConstraintError("allocation: at least two clusters required (C >= 2)");
    if (periods_ < 2)
        throw ConstraintError("allocation: at least two periods required (T >= 2)");
    for (int s : switching_) {
        if (s < 1 || s > periods_ + 1)
            throw ConstraintError("allocation: switching time " + std::to_string(s) +
                                  " outside {1, ..., T+1}");
    }
    std::set<int> distinct(switching_.begin(), switching_.end());
    if (distinct.size() < 2)
        throw ConstraintError("allocation: at least two distinct switching times required");
    // With two distinct values no period can hold every cluster's switch, but
    // keep the check explicit since it is the constraint the optimiser tests.
    for (int t = 1; t <= periods_; ++t) {
        if (std::all_of(switching_.begin(), switching_.end(), [t](int s) { return s == t; }))
            throw ConstraintError("allocation: all clusters switch in period " + std::to_string(t));
    }
}

int AllocationSchedule::first_switch() const
{
    return *std::min_element(switching_.begin(), switching_.end());
}

AnalysisSchedule::AnalysisSchedule(std::vector<int> periods, int total_periods)
    : periods_(std::move(periods))
{
    if (periods_.empty())
        throw ConstraintError("analysis schedule: at least one analysis required");
    for (std::size_t i = 0; i < periods_.size(); ++i) {
        if (periods_[i] < 1 || periods_[i] > total_periods)
            throw ConstraintError("analysis schedule: period " + std::to_string(periods_[i]) +
                                  " outside {1, ..., T}");
        if (i > 0 && periods_[i] <= periods_[i - 1])
            throw ConstraintError("analysis schedule: periods must be strictly increasing");
    }
    if (periods_.back() != total_periods)
        throw ConstraintError("analysis schedule: final analysis must be at period T");
}

StoppingBoundaries::StoppingBoundaries(std::vector<double> futility, std::vector<double> interim_efficacy)
    : futility_(std::move(futility)), interim_efficacy_(std::move(interim_efficacy))
{
    if (futility_.empty())
        throw ConstraintError("boundaries: at least one analysis required");
    if (interim_efficacy_.size() + 1 != futility_.size())
        throw ConstraintError("boundaries: futility and efficacy lengths differ");
    if (!std::isfinite(futility_.back()))
        throw ConstraintError("boundaries: final bound must be finite");
    for (std::size_t i = 0; i < interim_efficacy_.size(); ++i) {
        const double f = futility_[i];
        const double e = interim_efficacy_[i];
        if (std::isnan(f) || std::isnan(e) || f == HUGE_VAL || e == -HUGE_VAL)
            throw ConstraintError("boundaries: invalid bound at analysis " + std::to_string(i + 1));
        if (!(f < e))
            throw ConstraintError("boundaries: f_" + std::to_string(i + 1) + " < e_" +
                                  std::to_string(i + 1) + " violated");
    }
}

StoppingBoundaries StoppingBoundaries::from_vectors(const std::vector<double>& futility,
                                                    const std::vector<double>& efficacy)
{
    if (futility.size() != efficacy.size() || futility.empty())
        throw ConstraintError("boundaries: futility and efficacy lengths differ");
    if (futility.back() != efficacy.back())
        throw ConstraintError("boundaries: final futility and efficacy bounds must be equal");
    return StoppingBoundaries(futility, std::vector<double>(efficacy.begin(), efficacy.end() - 1));
}

std::vector<double> StoppingBoundaries::efficacy_bounds() const
{
    std::vector<double> e(interim_efficacy_);
    e.push_back(futility_.back());
    return e;
}

GroupSequentialDesign::GroupSequentialDesign(AllocationSchedule allocation, AnalysisSchedule schedule,
                                             StoppingBoundaries boundaries, int m, VarianceComponents vc)
    : allocation_(std::move(allocation)), schedule_(std::move(schedule)),
      boundaries_(std::move(boundaries)), m_(m), vc_(vc)
{
    vc_.validate();
    if (m_ < 2)
        throw ConstraintError("design: m must be >= 2");
    if (schedule_.periods().back() != allocation_.periods())
        throw ConstraintError("design: final analysis period differs from T");
    if (boundaries_.size() != schedule_.size())
        throw ConstraintError("design: number of boundaries differs from number of analyses");
    if (allocation_.first_switch() > schedule_.first())
        throw ConstraintError("design: no cluster receives the intervention by the first analysis "
                              "(min S_c <= t_1 violated)");
}

double GroupSequentialDesign::measurements_at(std::size_t i) const
{
    return static_cast<double>(m_) * clusters() * schedule_.period(i);
}

double GroupSequentialDesign::max_measurements() const
{
    return static_cast<double>(m_) * clusters() * periods();
}

void ScenarioSpec::validate() const
{
    if (C < 2) throw ConstraintError("scenario: C must be >= 2");
    if (T < 2) throw ConstraintError("scenario: T must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConstraintError("scenario: alpha must lie in (0, 1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ConstraintError("scenario: beta must lie in (0, 1)");
    if (!(delta > 0.0)) throw ConstraintError("scenario: delta must be > 0");
    vc.validate();
    for (double w : weights)
        if (!(w >= 0.0)) throw ConstraintError("scenario: weights must be >= 0");
    (void)schedule();
    if (M_SW && !(*M_SW > 0.0)) throw ConstraintError("scenario: M_SW must be > 0");
    if (m && *m < 2) throw ConstraintError("scenario: m must be >= 2");
    if (switching_times) {
        if (static_cast<int>(switching_times->size()) != C)
            throw ConstraintError("scenario: switching_times length differs from C");
        (void)AllocationSchedule(*switching_times, T);
    }
}

FixedEffects FixedEffects::zero_periods(int T, double tau)
{
    return FixedEffects{0.0, std::vector<double>(static_cast<std::size_t>(T - 1), 0.0), tau};
}

void FixedEffects::validate(int T) const
{
    if (static_cast<int>(period_effects.size()) != T - 1)
        throw ConstraintError("fixed effects: expected T-1 period effects");
}

Eigen::VectorXd FixedEffects::beta() const
{
    Eigen::VectorXd b(static_cast<Eigen::Index>(period_effects.size()) + 2);
    b(0) = mu;
    for (std::size_t j = 0; j < period_effects.size(); ++j)
        b(static_cast<Eigen::Index>(j) + 1) = period_effects[j];
    b(b.size() - 1) = tau;
    return b;
}

Eigen::MatrixXi build_treatment_matrix(const AllocationSchedule& allocation)
{
    const int C = allocation.clusters();
    const int T = allocation.periods();
    Eigen::MatrixXi X(C, T);
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t)
            X(c, t) = (t + 1 >= allocation.switching_time(c)) ? 1 : 0;
    return X;
}

namespace {

void check_period(const Eigen::MatrixXi& X, int t)
{
    if (t < 1 || t > X.cols())
        throw ConstraintError("period index t=" + std::to_string(t) + " outside {1, ..., T}");
}

} // namespace

Eigen::MatrixXd build_design_matrix(const Eigen::MatrixXi& X, int m, int t)
{
    check_period(X, t);
    const int C = static_cast<int>(X.rows());
    const int T = static_cast<int>(X.cols());
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m) * C * t, T + 1);
    Eigen::Index row = 0;
    for (int j = 0; j < t; ++j)
        for (int c = 0; c < C; ++c)
            for (int k = 0; k < m; ++k, ++row) {
                D(row, 0) = 1.0;
                if (j > 0) D(row, j) = 1.0;
                D(row, T) = X(c, j);
            }
    return D;
}

Eigen::MatrixXd build_covariance(int C, int m, int t, const VarianceComponents& vc)
{
    const Eigen::Index n = static_cast<Eigen::Index>(m) * C * t;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    auto cluster_of = [&](Eigen::Index r) { return (r / m) % C; };
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            if (cluster_of(a) == cluster_of(b))
                S(a, b) = vc.sigma_c2 + (a == b ? vc.sigma_e2 : 0.0);
    return S;
}

Eigen::MatrixXd build_mean_design_matrix(const Eigen::MatrixXi& X, int t)
{
    return build_design_matrix(X, 1, t);
}

Eigen::MatrixXd build_mean_covariance(int C, int m, int t, const VarianceComponents& vc)
{
    const Eigen::Index n = static_cast<Eigen::Index>(C) * t;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b)
            if (a % C == b % C)
                S(a, b) = vc.sigma_c2 + (a == b ? vc.sigma_e2 / m : 0.0);
    return S;
}

GlsOperator make_gls_operator(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma)
{
    if (D.rows() != Sigma.rows() || Sigma.rows() != Sigma.cols())
        throw ConstraintError("gls: design and covariance dimensions differ");

    GlsOperator op;
    for (Eigen::Index j = 0; j < D.cols(); ++j)
        if (!D.col(j).isZero(0.0)) op.columns.push_back(static_cast<int>(j));
    if (op.columns.empty() || op.columns.back() != D.cols() - 1)
        throw NonEstimableError("treatment column is identically zero");

    Eigen::MatrixXd Dr(D.rows(), static_cast<Eigen::Index>(op.columns.size()));
    for (std::size_t j = 0; j < op.columns.size(); ++j)
        Dr.col(static_cast<Eigen::Index>(j)) = D.col(op.columns[j]);

    Eigen::LLT<Eigen::MatrixXd> chol(Sigma);
    if (chol.info() != Eigen::Success)
        throw ConstraintError("gls: covariance is not positive definite");
    const Eigen::MatrixXd SinvD = chol.solve(Dr);
    const Eigen::MatrixXd normal = Dr.transpose() * SinvD;

    // Rank guard on the Jacobi-scaled normal matrix.
    const Eigen::VectorXd scale = normal.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = scale.asDiagonal() * normal * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kConditionLimit)
        throw NonEstimableError("normal-equations matrix is singular or ill-conditioned");

    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    op.weights = ldlt.solve(SinvD.transpose());
    const Eigen::Index p = normal.rows();
    Eigen::VectorXd unit = Eigen::VectorXd::Unit(p, p - 1);
    const double var_tau = ldlt.solve(unit)(p - 1);
    op.information = 1.0 / var_tau;
    return op;
}

double information_generic(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Sigma)
{
    return make_gls_operator(D, Sigma).information;
}

double information_closed_form(const Eigen::MatrixXi& X, int m, int t, const VarianceComponents& vc)
{
    check_period(X, t);
    const int C = static_cast<int>(X.rows());
    const auto block = X.leftCols(t).cast<double>();
    const double U = block.sum();
    if (U == 0.0)
        throw NonEstimableError("no cluster-period is treated within the first " +
                                std::to_string(t) + " periods");
    if (U == static_cast<double>(C) * t)
        throw NonEstimableError("every cluster-period is treated within the first " +
                                std::to_string(t) + " periods");
    const double V = block.rowwise().sum().squaredNorm();
    const double W = block.colwise().sum().squaredNorm();

    const double s2 = vc.sigma_e2 / m;
    const double a = s2 + t * vc.sigma_c2;
    const double num = a * (C * U - W) + vc.sigma_c2 * (U * U - C * V);
    const double den = C * s2 * a;
    const double info = num / den;
    // Treatment confounded with period effects (identical rows) gives
    // zero up to rounding.
    if (!(info > 1e-10 * C * t / s2))
        throw NonEstimableError("treatment effect confounded with period effects");
    return info;
}

StatisticCovariance statistic_covariance(const std::vector<double>& information)
{
    const auto K = static_cast<Eigen::Index>(information.size());
    for (std::size_t i = 0; i < information.size(); ++i) {
        if (!(information[i] > 0.0)) throw ConstraintError("information must be > 0");
        if (i > 0 && information[i] < information[i - 1] * (1.0 - 1e-12))
            throw ConstraintError("information decreased between analyses");
    }
    StatisticCovariance out;
    out.information = information;
    out.sqrt_information.resize(K);
    out.lambda.resize(K, K);
    for (Eigen::Index i = 0; i < K; ++i)
        out.sqrt_information(i) = std::sqrt(information[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < K; ++j) {
            const Eigen::Index lo = std::min(i, j), hi = std::max(i, j);
            out.lambda(i, j) = out.sqrt_information(lo) / out.sqrt_information(hi);
        }
    return out;
}

StatisticCovariance statistic_covariance(const GroupSequentialDesign& design)
{
    const Eigen::MatrixXi X = build_treatment_matrix(design.allocation());
    std::vector<double> info;
    info.reserve(design.analyses());
    for (int t : design.schedule().periods())
        info.push_back(information_closed_form(X, design.m(), t, design.variance()));
    return statistic_covariance(info);
}

} // namespace swgs
