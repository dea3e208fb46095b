#include "swgs/sim.hpp"

#include <cmath>
#include <string>

#include "swgs/error.hpp"
#include "swgs/parallel.hpp"

namespace swgs {

namespace {

Eigen::VectorXd stack_means(const std::vector<PeriodData>& data, int t, int C)
{
    if (static_cast<int>(data.size()) < t)
        throw ConstraintError("gls: fewer periods of data than requested");
    Eigen::VectorXd y(static_cast<Eigen::Index>(C) * t);
    for (int j = 0; j < t; ++j) {
        const auto& p = data[static_cast<std::size_t>(j)];
        if (p.cluster_means.size() != C) throw ConstraintError("gls: period data has wrong cluster count");
        y.segment(static_cast<Eigen::Index>(j) * C, C) = p.cluster_means;
    }
    return y;
}

Eigen::VectorXd draw_normal(CounterRng& rng, Eigen::Index n)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
}

// Mean of period t (1-based) for every cluster.
Eigen::VectorXd period_mean(const Eigen::MatrixXi& X, int t, const FixedEffects& effects)
{
    const double pi = t > 1 ? effects.period_effects[static_cast<std::size_t>(t - 2)] : 0.0;
    Eigen::VectorXd mu(X.rows());
    for (Eigen::Index c = 0; c < X.rows(); ++c)
        mu(c) = effects.mu + pi + effects.tau * X(c, t - 1);
    return mu;
}

} // namespace

PeriodData generate_next_period(const std::vector<PeriodData>& history, int t, const FixedEffects& effects,
                                const GroupSequentialDesign& design, CounterRng& rng, GenerationLevel level)
{
    const int C = design.clusters();
    const int T = design.periods();
    const int m = design.m();
    if (t < 1 || t > T) throw ConstraintError("generate_next_period: t outside {1, ..., T}");
    if (static_cast<int>(history.size()) != t - 1)
        throw ConstraintError("generate_next_period: history must hold periods 1..t-1");
    effects.validate(T);

    const bool indiv = level == GenerationLevel::individual;
    const Eigen::MatrixXi X = build_treatment_matrix(design.allocation());
    const Eigen::MatrixXd D = indiv ? build_design_matrix(X, m, t) : build_mean_design_matrix(X, t);
    const Eigen::MatrixXd S = indiv ? build_covariance(C, m, t, design.variance())
                                    : build_mean_covariance(C, m, t, design.variance());
    const Eigen::Index block = indiv ? static_cast<Eigen::Index>(m) * C : C;
    const Eigen::Index nh = block * (t - 1);

    const Eigen::VectorXd mean_all = D * effects.beta();
    Eigen::VectorXd mean = mean_all.tail(block);
    Eigen::MatrixXd cov = S.bottomRightCorner(block, block);
    if (t > 1) {
        Eigen::VectorXd y_hist(nh);
        for (int j = 0; j < t - 1; ++j) {
            const auto& p = history[static_cast<std::size_t>(j)];
            if (indiv) {
                if (p.individual.rows() != m || p.individual.cols() != C)
                    throw ConstraintError("generate_next_period: history lacks individual-level data");
                y_hist.segment(j * block, block) = p.individual.reshaped();
            } else {
                y_hist.segment(j * block, block) = p.cluster_means;
            }
        }
        Eigen::LLT<Eigen::MatrixXd> hist(S.topLeftCorner(nh, nh));
        if (hist.info() != Eigen::Success)
            throw ConstraintError("generate_next_period: singular history covariance");
        const Eigen::MatrixXd cross = S.bottomLeftCorner(block, nh);
        const Eigen::MatrixXd A = hist.solve(cross.transpose()).transpose();
        mean += A * (y_hist - mean_all.head(nh));
        cov -= A * cross.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> chol(cov);
    if (chol.info() != Eigen::Success)
        throw ConstraintError("generate_next_period: conditional covariance not positive definite");
    const Eigen::VectorXd y = mean + chol.matrixL() * draw_normal(rng, block);

    PeriodData out;
    out.period = t;
    if (indiv) {
        out.individual = y.reshaped(m, C);
        out.cluster_means = out.individual.colwise().mean().transpose();
    } else {
        out.cluster_means = y;
    }
    return out;
}

GlsFit gls_fit(const std::vector<PeriodData>& data, int t, const GroupSequentialDesign& design)
{
    const Eigen::MatrixXi X = build_treatment_matrix(design.allocation());
    if (t < 1 || t > design.periods()) throw ConstraintError("gls_fit: t outside {1, ..., T}");
    const GlsOperator op =
        make_gls_operator(build_mean_design_matrix(X, t), build_mean_covariance(design.clusters(), design.m(), t,
                                                                                design.variance()));
    GlsFit fit;
    fit.beta = op.estimate(stack_means(data, t, design.clusters()));
    fit.tau_hat = fit.beta(fit.beta.size() - 1);
    fit.info = op.information;
    fit.z = fit.tau_hat * std::sqrt(fit.info);
    return fit;
}

TrialSimulator::TrialSimulator(GroupSequentialDesign design)
    : design_(std::move(design)), treatment_(build_treatment_matrix(design_.allocation()))
{
    const int C = design_.clusters();
    const int T = design_.periods();
    const Eigen::MatrixXd S = build_mean_covariance(C, design_.m(), T, design_.variance());
    for (int t = 1; t <= T; ++t) {
        const Eigen::Index nh = static_cast<Eigen::Index>(C) * (t - 1);
        const Eigen::Index at = nh;
        Eigen::MatrixXd cov = S.block(at, at, C, C);
        Eigen::MatrixXd A(C, nh);
        if (t > 1) {
            Eigen::LLT<Eigen::MatrixXd> hist(S.topLeftCorner(nh, nh));
            const Eigen::MatrixXd cross = S.block(at, 0, C, nh);
            A = hist.solve(cross.transpose()).transpose();
            cov -= A * cross.transpose();
        }
        regression_.push_back(std::move(A));
        cond_chol_.push_back(Eigen::LLT<Eigen::MatrixXd>(cov).matrixL());
    }
    for (int t : design_.schedule().periods())
        gls_.push_back(make_gls_operator(build_mean_design_matrix(treatment_, t),
                                         build_mean_covariance(C, design_.m(), t, design_.variance())));
}

PeriodData TrialSimulator::next_period(const std::vector<PeriodData>& history, int t, const FixedEffects& effects,
                                       CounterRng& rng) const
{
    const int C = design_.clusters();
    if (t < 1 || t > design_.periods() || static_cast<int>(history.size()) != t - 1)
        throw ConstraintError("next_period: history must hold periods 1..t-1");
    Eigen::VectorXd mean = period_mean(treatment_, t, effects);
    if (t > 1) {
        Eigen::VectorXd resid(static_cast<Eigen::Index>(C) * (t - 1));
        for (int j = 1; j < t; ++j)
            resid.segment(static_cast<Eigen::Index>(j - 1) * C, C) =
                history[static_cast<std::size_t>(j - 1)].cluster_means - period_mean(treatment_, j, effects);
        mean += regression_[static_cast<std::size_t>(t - 1)] * resid;
    }
    PeriodData out;
    out.period = t;
    out.cluster_means = mean + cond_chol_[static_cast<std::size_t>(t - 1)] * draw_normal(rng, C);
    return out;
}

GlsFit TrialSimulator::fit(const std::vector<PeriodData>& data, std::size_t analysis) const
{
    const GlsOperator& op = gls_.at(analysis);
    GlsFit fit;
    fit.beta = op.estimate(stack_means(data, design_.schedule().period(analysis), design_.clusters()));
    fit.tau_hat = fit.beta(fit.beta.size() - 1);
    fit.info = op.information;
    fit.z = fit.tau_hat * std::sqrt(fit.info);
    return fit;
}

std::vector<PeriodData> TrialSimulator::draw_all(const FixedEffects& effects, std::uint64_t key, int through) const
{
    std::vector<PeriodData> data;
    data.reserve(static_cast<std::size_t>(through));
    for (int t = 1; t <= through; ++t) {
        CounterRng rng(stream_key(key, {static_cast<std::uint64_t>(t)}));
        data.push_back(next_period(data, t, effects, rng));
    }
    return data;
}

TrialResult TrialSimulator::run_trial(const FixedEffects& effects, std::uint64_t key) const
{
    effects.validate(design_.periods());
    const auto& b = design_.boundaries();
    const std::size_t K = design_.analyses();
    std::vector<PeriodData> data;
    data.reserve(static_cast<std::size_t>(design_.periods()));
    std::size_t next = 0;
    for (int t = 1; t <= design_.periods(); ++t) {
        CounterRng rng(stream_key(key, {static_cast<std::uint64_t>(t)}));
        data.push_back(next_period(data, t, effects, rng));
        if (t != design_.schedule().period(next)) continue;
        const GlsFit f = fit(data, next);
        TrialResult r{static_cast<int>(next) + 1, f.z, 0, f.tau_hat, f.info};
        if (f.z <= b.futility(next)) return r;
        if (f.z > b.efficacy(next)) {
            r.psi = 1;
            return r;
        }
        ++next;
        if (next == K) break;
    }
    // f_K == e_K makes the final analysis decisive, so this is unreachable.
    throw ConstraintError("run_trial: trial did not terminate at the final analysis");
}

Eigen::VectorXd TrialSimulator::all_statistics(const FixedEffects& effects, std::uint64_t key) const
{
    effects.validate(design_.periods());
    const auto data = draw_all(effects, key, design_.periods());
    Eigen::VectorXd z(static_cast<Eigen::Index>(design_.analyses()));
    for (std::size_t i = 0; i < design_.analyses(); ++i) z(static_cast<Eigen::Index>(i)) = fit(data, i).z;
    return z;
}

TrialResult run_trial(const GroupSequentialDesign& design, const FixedEffects& effects, std::uint64_t key)
{
    return TrialSimulator(design).run_trial(effects, key);
}

double pairwise_sum(const double* values, std::size_t n)
{
    if (n <= 16) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

std::vector<ReplicationMetrics> replicate_study(const GroupSequentialDesign& design,
                                                const std::vector<double>& tau_grid, long R, std::uint64_t seed,
                                                const StudyOptions& options)
{
    if (R < 1) throw ConstraintError("replicate_study: R must be positive");
    const TrialSimulator simulator(design);
    const StagewiseAnalyzer analyzer(design);
    const std::size_t K = design.analyses();
    const auto n = static_cast<std::size_t>(R);

    std::vector<ReplicationMetrics> out;
    for (std::size_t k = 0; k < tau_grid.size(); ++k) {
        const double tau = tau_grid[k];
        FixedEffects effects = FixedEffects::zero_periods(design.periods(), tau);
        effects.mu = options.mu;
        if (!options.period_effects.empty()) effects.period_effects = options.period_effects;

        std::vector<double> err_n(n), err_so(n), sq_n(n), sq_so(n), cov_n(n), cov_so(n), below(n);
        std::vector<int> stage(n), decision(n);
        parallel_for(n, options.threads, [&](std::size_t r) {
            const TrialResult res = simulator.run_trial(effects, stream_key(seed, {k, r}));
            const InferenceReport rep = analyzer.infer(res, options.alpha);
            err_n[r] = rep.estimate_naive - tau;
            err_so[r] = rep.estimate_so - tau;
            sq_n[r] = err_n[r] * err_n[r];
            sq_so[r] = err_so[r] * err_so[r];
            cov_n[r] = tau > rep.ci_lower_naive ? 1.0 : 0.0;
            cov_so[r] = tau > rep.ci_lower_so ? 1.0 : 0.0;
            below[r] = rep.estimate_so <= tau ? 1.0 : 0.0;
            stage[r] = res.gamma;
            decision[r] = res.psi;
        });

        auto mean = [&](const std::vector<double>& v) { return pairwise_sum(v.data(), n) / static_cast<double>(n); };
        ReplicationMetrics m;
        m.tau = tau;
        m.R = R;
        m.bias_naive = mean(err_n);
        m.bias_so = mean(err_so);
        const double ms_n = mean(sq_n), ms_so = mean(sq_so);
        m.rmse_naive = std::sqrt(ms_n);
        m.rmse_so = std::sqrt(ms_so);
        m.coverage_naive = mean(cov_n);
        m.coverage_so = mean(cov_so);
        const double dn = static_cast<double>(n);
        m.se_bias_naive = std::sqrt(std::max(ms_n - m.bias_naive * m.bias_naive, 0.0) / dn);
        m.se_bias_so = std::sqrt(std::max(ms_so - m.bias_so * m.bias_so, 0.0) / dn);
        m.se_coverage_naive = std::sqrt(m.coverage_naive * (1.0 - m.coverage_naive) / dn);
        m.se_coverage_so = std::sqrt(m.coverage_so * (1.0 - m.coverage_so) / dn);
        m.so_below = mean(below);
        m.stop_freq.assign(K, {0.0, 0.0});
        for (std::size_t r = 0; r < n; ++r)
            m.stop_freq[static_cast<std::size_t>(stage[r] - 1)][static_cast<std::size_t>(decision[r])] += 1.0 / dn;
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace swgs
