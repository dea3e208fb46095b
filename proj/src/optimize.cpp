#include "swgs/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "swgs/error.hpp"
#include "swgs/parallel.hpp"
#include "swgs/rng.hpp"

namespace swgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Candidate boundaries live on this grid so that the evaluation cache is exact.
constexpr double kGrid = 1e-3;

double snap(double x) { return std::round(x / kGrid) * kGrid; }
long long grid_index(double x) { return std::llround(x / kGrid); }

double weighted_objective(const ScenarioSpec& s, double enm0, double enm1, double max_meas)
{
    return s.weights[0] * enm0 + s.weights[1] * enm1 + s.weights[2] * max_meas;
}

int sample_table(const std::vector<double>& probs, double u)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    // u beyond the accumulated mass through rounding: last non-zero entry.
    for (std::size_t i = probs.size(); i-- > 0;)
        if (probs[i] > 0.0) return static_cast<int>(i);
    return 0;
}

// N(mean, sd) conditioned on being > 0.
double positive_normal(double mean, double sd, CounterRng& rng)
{
    const double q = std_normal_cdf(mean / sd); // P(X > 0)
    const double v = rng.uniform();
    double r;
    if (q > 1e-300) {
        r = mean - sd * std_normal_quantile(std::clamp(v * q, 1e-300, 1.0 - 1e-16));
    } else {
        // Far tail: the excess over 0 is close to exponential.
        r = -std::log(v) * sd * sd / std::abs(mean);
    }
    return r > 0.0 ? r : kGrid;
}

struct Candidate {
    int m = 2;
    std::vector<int> S;
    std::vector<double> f; // K entries
    std::vector<double> r; // K-1 entries, > 0
    std::vector<long long> key;
    PenalizedValue value;
    double boundary_size = 0.0;
};

std::vector<double> efficacy_of(const Candidate& c)
{
    std::vector<double> e(c.f.size());
    for (std::size_t i = 0; i + 1 < c.f.size(); ++i) e[i] = snap(c.f[i] + c.r[i]);
    e.back() = c.f.back();
    return e;
}

PenalizedValue evaluate_candidate(const Candidate& c, const ScenarioSpec& scenario, const MvnOptions& options)
{
    PenalizedValue bad;
    bad.objective = bad.penalized = kInf;
    std::optional<GroupSequentialDesign> design;
    try {
        design.emplace(AllocationSchedule(c.S, scenario.T), scenario.schedule(),
                       StoppingBoundaries::from_vectors(c.f, efficacy_of(c)), c.m, scenario.vc);
        return evaluate_penalized(*design, scenario, options);
    } catch (const ConstraintError&) {
        return bad;
    } catch (const NonEstimableError&) {
        return bad;
    }
}

bool candidate_less(const Candidate& a, const Candidate& b)
{
    if (a.value.penalized != b.value.penalized) return a.value.penalized < b.value.penalized;
    if (a.m != b.m) return a.m < b.m;
    if (a.S != b.S) return a.S < b.S;
    return a.boundary_size < b.boundary_size;
}

} // namespace

PenalizedValue evaluate_penalized(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                                  const MvnOptions& options)
{
    if (!scenario.M_SW) throw ConstraintError("penalized objective: M_SW is not set");
    const OcEvaluator eval(design, options);
    PenalizedValue v;
    v.type_i = eval.rejection_probability(0.0);
    v.power = eval.rejection_probability(scenario.delta);
    v.enm_null = eval.enm(0.0);
    v.enm_alt = eval.enm(scenario.delta);
    v.objective = weighted_objective(scenario, v.enm_null, v.enm_alt, design.max_measurements());
    double penalty = 0.0;
    if (v.type_i > scenario.alpha) penalty += (v.type_i - scenario.alpha) / scenario.alpha;
    if (1.0 - v.power > scenario.beta) penalty += (1.0 - v.power - scenario.beta) / scenario.beta;
    v.penalized = v.objective + *scenario.M_SW * penalty;
    v.feasible = penalty == 0.0;
    return v;
}

double objective(const GroupSequentialDesign& design, const ScenarioSpec& scenario, const MvnOptions& options)
{
    const OcEvaluator eval(design, options);
    const double e0 = scenario.weights[0] != 0.0 ? eval.enm(0.0) : 0.0;
    const double e1 = scenario.weights[1] != 0.0 ? eval.enm(scenario.delta) : 0.0;
    return weighted_objective(scenario, e0, e1, design.max_measurements());
}

double penalized_objective(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                           const MvnOptions& options)
{
    return evaluate_penalized(design, scenario, options).penalized;
}

double penalized_objective(const std::vector<int>& switching_times, int m, const StoppingBoundaries& boundaries,
                           const ScenarioSpec& scenario, const MvnOptions& options)
{
    try {
        const GroupSequentialDesign design(AllocationSchedule(switching_times, scenario.T), scenario.schedule(),
                                           boundaries, m, scenario.vc);
        return penalized_objective(design, scenario, options);
    } catch (const ConstraintError&) {
        return kInf;
    } catch (const NonEstimableError&) {
        return kInf;
    }
}

void CEConfig::validate() const
{
    if (!(rho > 0.0 && rho < 1.0)) throw ConstraintError("ce: rho must lie in (0, 1)");
    if (n_samples != 0 && n_samples < 100) throw ConstraintError("ce: n_samples must be >= 100");
    if (m_max != 0 && m_max < 2) throw ConstraintError("ce: m_max must be >= 2");
    if (max_iters < 1) throw ConstraintError("ce: max_iters must be >= 1");
    if (stall_window < 1) throw ConstraintError("ce: stall_window must be >= 1");
    if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw ConstraintError("ce: smoothing must lie in [0, 1]");
    if (!(sd_floor > 0.0)) throw ConstraintError("ce: sd_floor must be > 0");
    if (!(init_sd > 0.0)) throw ConstraintError("ce: init_sd must be > 0");
    if (!(tolerance.alpha >= 0.0 && tolerance.power >= 0.0)) throw ConstraintError("ce: tolerances must be >= 0");
}

CEConfig resolve_config(const ScenarioSpec& scenario, CEConfig config)
{
    config.validate();
    const long K = static_cast<long>(scenario.analysis_periods.size());
    if (config.n_samples == 0) config.n_samples = 10000L * (scenario.C + 2 * K);
    if (config.m_max == 0) {
        if (!scenario.M_SW) throw ConstraintError("ce: M_SW is needed for the default m_max");
        config.m_max = std::max(2, static_cast<int>(std::floor(10.0 * *scenario.M_SW / (scenario.C * scenario.T))));
    }
    return config;
}

CEResult ce_optimize(const ScenarioSpec& scenario_in, const CEConfig& config_in, const MvnOptions& options)
{
    const ScenarioSpec scenario = with_reference_size(scenario_in);
    scenario.validate();
    const CEConfig config = resolve_config(scenario, config_in);
    const int C = scenario.C;
    const int T = scenario.T;
    const int K = static_cast<int>(scenario.analysis_periods.size());
    const int t1 = scenario.analysis_periods.front();
    const auto N = static_cast<std::size_t>(config.n_samples);
    const auto n_elite = static_cast<std::size_t>(std::ceil(config.rho * static_cast<double>(N)));

    CEState state;
    state.m_probs.assign(static_cast<std::size_t>(config.m_max - 1), 1.0 / (config.m_max - 1));
    state.s_probs.assign(static_cast<std::size_t>(C), std::vector<double>(static_cast<std::size_t>(T + 1), 1.0 / (T + 1)));
    state.s_probs[0].assign(static_cast<std::size_t>(t1), 1.0 / t1);
    state.f_mean = Eigen::VectorXd::Zero(K);
    state.f_sd = Eigen::VectorXd::Constant(K, config.init_sd);
    state.r_mean = Eigen::VectorXd::Zero(K - 1);
    state.r_sd = Eigen::VectorXd::Constant(K - 1, config.init_sd);

    auto admissible = [&](const PenalizedValue& v) {
        return v.type_i <= scenario.alpha + config.tolerance.alpha &&
               v.power >= 1.0 - scenario.beta - config.tolerance.power;
    };

    std::map<std::vector<long long>, PenalizedValue> cache;
    std::optional<Candidate> best_feasible;
    std::optional<Candidate> best_any;
    std::vector<TraceRow> trace;
    int stall = 0;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        std::vector<Candidate> cands(N);
        for (std::size_t n = 0; n < N; ++n) {
            CounterRng rng(stream_key(config.seed, {static_cast<std::uint64_t>(iter), n}));
            Candidate& c = cands[n];
            c.m = 2 + sample_table(state.m_probs, rng.uniform());
            c.S.resize(static_cast<std::size_t>(C));
            for (int k = 0; k < C; ++k)
                c.S[static_cast<std::size_t>(k)] = 1 + sample_table(state.s_probs[static_cast<std::size_t>(k)], rng.uniform());
            c.f.resize(static_cast<std::size_t>(K));
            c.r.resize(static_cast<std::size_t>(K - 1));
            for (int k = 0; k < K; ++k) c.f[static_cast<std::size_t>(k)] = snap(state.f_mean(k) + state.f_sd(k) * rng.normal());
            for (int k = 0; k + 1 < K; ++k)
                c.r[static_cast<std::size_t>(k)] = std::max(kGrid, snap(positive_normal(state.r_mean(k), state.r_sd(k), rng)));

            std::vector<int> sorted = c.S;
            std::sort(sorted.begin(), sorted.end());
            c.key.push_back(c.m);
            c.key.insert(c.key.end(), sorted.begin(), sorted.end());
            for (double v : c.f) c.key.push_back(grid_index(v));
            for (double v : c.r) c.key.push_back(grid_index(v));
            double size = 0.0;
            for (double v : c.f) size += std::abs(v);
            for (double v : efficacy_of(c)) size += std::abs(v);
            c.boundary_size = size / (2.0 * K);
        }

        // Integrate each new distinct candidate once.
        std::vector<std::size_t> todo;
        std::map<std::vector<long long>, std::size_t> pending;
        for (std::size_t n = 0; n < N; ++n)
            if (!cache.count(cands[n].key) && pending.emplace(cands[n].key, n).second) todo.push_back(n);
        std::vector<PenalizedValue> fresh(todo.size());
        parallel_for(todo.size(), config.threads,
                     [&](std::size_t j) { fresh[j] = evaluate_candidate(cands[todo[j]], scenario, options); });
        for (std::size_t j = 0; j < todo.size(); ++j) cache.emplace(cands[todo[j]].key, fresh[j]);
        for (auto& c : cands) c.value = cache.at(c.key);

        std::vector<std::size_t> order(N);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return candidate_less(cands[a], cands[b]); });

        const Candidate& top = cands[order.front()];
        bool improved = false;
        if (!best_any || candidate_less(top, *best_any)) {
            improved = !best_any || top.value.penalized < best_any->value.penalized;
            best_any = top;
        }
        for (std::size_t n : order) {
            const Candidate& c = cands[n];
            if (!admissible(c.value)) continue;
            if (!best_feasible || candidate_less(c, *best_feasible)) best_feasible = c;
            break;
        }

        // Refit the sampling distribution to the elite set.
        const double a = config.smoothing;
        std::vector<double> m_freq(state.m_probs.size(), 0.0);
        std::vector<std::vector<double>> s_freq(state.s_probs.size());
        for (std::size_t k = 0; k < s_freq.size(); ++k) s_freq[k].assign(state.s_probs[k].size(), 0.0);
        Eigen::VectorXd f_sum = Eigen::VectorXd::Zero(K), r_sum = Eigen::VectorXd::Zero(K - 1);
        const double w = 1.0 / static_cast<double>(n_elite);
        for (std::size_t j = 0; j < n_elite; ++j) {
            const Candidate& c = cands[order[j]];
            m_freq[static_cast<std::size_t>(c.m - 2)] += w;
            for (int k = 0; k < C; ++k) s_freq[static_cast<std::size_t>(k)][static_cast<std::size_t>(c.S[static_cast<std::size_t>(k)] - 1)] += w;
            for (int k = 0; k < K; ++k) f_sum(k) += c.f[static_cast<std::size_t>(k)];
            for (int k = 0; k + 1 < K; ++k) r_sum(k) += c.r[static_cast<std::size_t>(k)];
        }
        const Eigen::VectorXd f_mean = f_sum * w, r_mean = r_sum * w;
        Eigen::VectorXd f_var = Eigen::VectorXd::Zero(K), r_var = Eigen::VectorXd::Zero(K - 1);
        for (std::size_t j = 0; j < n_elite; ++j) {
            const Candidate& c = cands[order[j]];
            for (int k = 0; k < K; ++k) f_var(k) += w * std::pow(c.f[static_cast<std::size_t>(k)] - f_mean(k), 2);
            for (int k = 0; k + 1 < K; ++k) r_var(k) += w * std::pow(c.r[static_cast<std::size_t>(k)] - r_mean(k), 2);
        }
        for (std::size_t i = 0; i < m_freq.size(); ++i) state.m_probs[i] = a * m_freq[i] + (1.0 - a) * state.m_probs[i];
        for (std::size_t k = 0; k < s_freq.size(); ++k)
            for (std::size_t i = 0; i < s_freq[k].size(); ++i)
                state.s_probs[k][i] = a * s_freq[k][i] + (1.0 - a) * state.s_probs[k][i];
        state.f_mean = a * f_mean + (1.0 - a) * state.f_mean;
        state.r_mean = a * r_mean + (1.0 - a) * state.r_mean;
        state.f_sd = (a * f_var.cwiseSqrt() + (1.0 - a) * state.f_sd).cwiseMax(config.sd_floor);
        state.r_sd = (a * r_var.cwiseSqrt() + (1.0 - a) * state.r_sd).cwiseMax(config.sd_floor);

        trace.push_back({iter, cands[order[n_elite - 1]].value.penalized, best_any->value.penalized});
        stall = improved ? 0 : stall + 1;
        if (stall >= config.stall_window) break;
    }

    auto to_design = [&](const Candidate& c) {
        std::vector<int> S = c.S;
        std::sort(S.begin(), S.end());
        return GroupSequentialDesign(AllocationSchedule(S, T), scenario.schedule(),
                                     StoppingBoundaries::from_vectors(c.f, efficacy_of(c)), c.m, scenario.vc);
    };
    if (best_any && std::isfinite(best_any->value.penalized)) {
        state.best = to_design(*best_any);
        state.best_objective = best_any->value.penalized;
    }
    if (!best_feasible)
        throw InfeasibleError("ce: no candidate met the type-I error and power constraints", state.best,
                              state.best_objective, trace);

    CEResult result{to_design(*best_feasible), {}, best_feasible->value.objective, std::move(trace), state,
                    static_cast<long>(cache.size())};
    result.oc = summarize(result.design, scenario, options, config.tolerance);
    return result;
}

std::vector<int> near_balanced_allocation(int C, int T)
{
    if (C < 2 || T < 2) throw ConstraintError("near_balanced_allocation: need C >= 2 and T >= 2");
    const int periods = T - 1;
    std::vector<int> S;
    for (int p = 0; p < periods; ++p) {
        const int count = C / periods + (p < C % periods ? 1 : 0);
        for (int k = 0; k < count; ++k) S.push_back(p + 2);
    }
    return S;
}

FixedSampleReference fixed_sample_reference(const ScenarioSpec& scenario,
                                            const std::optional<std::vector<int>>& switching_times, int m_limit)
{
    const std::vector<int> S = switching_times ? *switching_times
                               : scenario.switching_times ? *scenario.switching_times
                                                          : near_balanced_allocation(scenario.C, scenario.T);
    const AllocationSchedule alloc(S, scenario.T);
    const Eigen::MatrixXi X = build_treatment_matrix(alloc);
    const double z = std_normal_quantile(1.0 - scenario.alpha);
    auto power = [&](int m) {
        return std_normal_sf(z - scenario.delta * std::sqrt(information_closed_form(X, m, scenario.T, scenario.vc)));
    };
    const double target = 1.0 - scenario.beta;
    if (power(2) >= target) return {2, 2.0 * scenario.C * scenario.T, power(2)};
    // Power increases with m: double to a bracket, then bisect.
    int lo = 2, hi = 4;
    while (power(hi) < target) {
        if (hi >= m_limit)
            throw ConstraintError("fixed_sample_reference: power " + std::to_string(target) +
                                  " not reached for m <= " + std::to_string(m_limit));
        lo = hi;
        hi = std::min(2 * hi, m_limit);
    }
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        (power(mid) >= target ? hi : lo) = mid;
    }
    return {hi, static_cast<double>(hi) * scenario.C * scenario.T, power(hi)};
}

ScenarioSpec with_reference_size(ScenarioSpec scenario)
{
    if (!scenario.M_SW) scenario.M_SW = fixed_sample_reference(scenario).M_SW;
    return scenario;
}

double ordered_allocation_probability(int C, int T, int t1, const std::optional<AllocationTables>& tables)
{
    if (C < 1 || T < 1) throw ConstraintError("ordered_allocation_probability: need C >= 1 and T >= 1");
    if (t1 < 1 || t1 > T + 1) throw ConstraintError("ordered_allocation_probability: t1 outside 1..T+1");
    const auto n = static_cast<std::size_t>(T + 1);
    AllocationTables tab;
    if (tables) {
        tab = *tables;
        if (tab.first.size() != n || tab.other.size() != n)
            throw ConstraintError("ordered_allocation_probability: tables must cover 1..T+1");
    } else {
        tab.first.assign(n, 0.0);
        std::fill(tab.first.begin(), tab.first.begin() + t1, 1.0 / t1);
        tab.other.assign(n, 1.0 / static_cast<double>(n));
    }
    // dp[s] = P(S_1 <= ... <= S_c, S_c = s).
    std::vector<double> dp = tab.first;
    for (int c = 2; c <= C; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            acc += dp[s];
            dp[s] = tab.other[s] * acc;
        }
    }
    return std::accumulate(dp.begin(), dp.end(), 0.0);
}

} // namespace swgs
