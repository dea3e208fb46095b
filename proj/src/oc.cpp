#include "swgs/oc.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "swgs/error.hpp"
#include "swgs/rng.hpp"

namespace swgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

Interval integration_limits(int i, OutcomeLabel outcome, const StoppingBoundaries& boundaries)
{
    const int K = static_cast<int>(boundaries.size());
    if (outcome.gamma < 1 || outcome.gamma > K)
        throw ConstraintError("integration_limits: gamma out of range");
    if (i < 1 || i > outcome.gamma)
        throw ConstraintError("integration_limits: index out of range");
    if (outcome.psi != 0 && outcome.psi != 1)
        throw ConstraintError("integration_limits: psi must be 0 or 1");
    const auto idx = static_cast<std::size_t>(i - 1);
    if (i < outcome.gamma) return {boundaries.futility(idx), boundaries.efficacy(idx)};
    if (outcome.psi == 1) return {boundaries.efficacy(idx), kInf};
    return {-kInf, boundaries.futility(idx)};
}

OcEvaluator::OcEvaluator(GroupSequentialDesign design, MvnOptions options)
    : design_(std::move(design)), stats_(statistic_covariance(design_)), options_(options)
{
}

RectangleProbability OcEvaluator::stage_probability(double tau, int gamma, double lower, double upper) const
{
    const int K = static_cast<int>(design_.analyses());
    if (gamma < 1 || gamma > K)
        throw ConstraintError("stage_probability: gamma out of range");
    if (!std::isfinite(tau))
        throw ConstraintError("stage_probability: tau must be finite");
    const auto g = static_cast<std::size_t>(gamma);
    std::vector<double> lo(g), hi(g);
    const auto& b = design_.boundaries();
    for (std::size_t i = 0; i + 1 < g; ++i) {
        lo[i] = b.futility(i);
        hi[i] = b.efficacy(i);
    }
    lo[g - 1] = lower;
    hi[g - 1] = upper;
    const auto n = static_cast<Eigen::Index>(g);
    const Eigen::VectorXd mean = tau * stats_.sqrt_information.head(n);

    MvnOptions opts = options_;
    opts.seed = stream_key(options_.seed, {std::bit_cast<std::uint64_t>(tau), g,
                                           std::bit_cast<std::uint64_t>(lower),
                                           std::bit_cast<std::uint64_t>(upper)});
    return mvn_rectangle(lo, hi, mean, stats_.lambda.topLeftCorner(n, n), opts);
}

RectangleProbability OcEvaluator::outcome_probability(double tau, OutcomeLabel outcome) const
{
    const Interval last = integration_limits(outcome.gamma, outcome, design_.boundaries());
    return stage_probability(tau, outcome.gamma, last.lower, last.upper);
}

double OcEvaluator::rejection_probability(double tau) const
{
    double p = 0.0;
    for (int g = 1; g <= static_cast<int>(design_.analyses()); ++g)
        p += outcome_probability(tau, {g, 1}).value;
    return p;
}

double OcEvaluator::enm(double tau) const
{
    double total = 0.0;
    for (int g = 1; g <= static_cast<int>(design_.analyses()); ++g) {
        const double p = outcome_probability(tau, {g, 0}).value + outcome_probability(tau, {g, 1}).value;
        total += design_.measurements_at(static_cast<std::size_t>(g - 1)) * p;
    }
    return total;
}

std::vector<OutcomeRow> OcEvaluator::outcome_table(double tau) const
{
    std::vector<OutcomeRow> rows;
    for (int g = 1; g <= static_cast<int>(design_.analyses()); ++g)
        for (int psi = 0; psi <= 1; ++psi) {
            const auto p = outcome_probability(tau, {g, psi});
            rows.push_back({g, psi, tau, p.value, p.error_estimate});
        }
    return rows;
}

RectangleProbability outcome_probability(double tau, OutcomeLabel outcome, const GroupSequentialDesign& design,
                                         const MvnOptions& options)
{
    return OcEvaluator(design, options).outcome_probability(tau, outcome);
}

double rejection_probability(double tau, const GroupSequentialDesign& design, const MvnOptions& options)
{
    return OcEvaluator(design, options).rejection_probability(tau);
}

double enm(double tau, const GroupSequentialDesign& design, const MvnOptions& options)
{
    return OcEvaluator(design, options).enm(tau);
}

void check_compatible(const GroupSequentialDesign& design, const ScenarioSpec& scenario)
{
    if (design.clusters() != scenario.C)
        throw ConstraintError("design has C=" + std::to_string(design.clusters()) + ", scenario has C=" +
                              std::to_string(scenario.C));
    if (design.periods() != scenario.T)
        throw ConstraintError("design has T=" + std::to_string(design.periods()) + ", scenario has T=" +
                              std::to_string(scenario.T));
    if (design.schedule().periods() != scenario.analysis_periods)
        throw ConstraintError("design and scenario analysis periods differ");
}

OperatingCharacteristics summarize(const GroupSequentialDesign& design, const ScenarioSpec& scenario,
                                   const MvnOptions& options, ConstraintTolerance tolerance)
{
    scenario.validate();
    check_compatible(design, scenario);
    const OcEvaluator eval(design, options);

    OperatingCharacteristics oc;
    oc.max_measurements = design.max_measurements();
    for (double tau : {0.0, scenario.delta}) {
        const auto rows = eval.outcome_table(tau);
        double reject = 0.0, expected = 0.0, err = 0.0;
        for (const auto& r : rows) {
            if (r.psi == 1) {
                reject += r.probability;
                err += r.error_estimate;
            }
            expected += design.measurements_at(static_cast<std::size_t>(r.gamma - 1)) * r.probability;
        }
        if (tau == 0.0) {
            oc.type_i = reject;
            oc.enm_null = expected;
        } else {
            oc.power = reject;
            oc.enm_alt = expected;
        }
        oc.integration_error += err;
        oc.per_outcome.insert(oc.per_outcome.end(), rows.begin(), rows.end());
    }
    oc.alpha_ok = oc.type_i <= scenario.alpha + tolerance.alpha;
    oc.power_ok = oc.power >= 1.0 - scenario.beta - tolerance.power;
    return oc;
}

} // namespace swgs
