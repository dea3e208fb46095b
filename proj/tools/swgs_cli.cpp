// Command-line front end: evaluate, optimize, analyze, simulate, table-a1.

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "swgs/analysis.hpp"
#include "swgs/config.hpp"
#include "swgs/error.hpp"
#include "swgs/oc.hpp"
#include "swgs/optimize.hpp"
#include "swgs/parallel.hpp"
#include "swgs/sim.hpp"

#ifndef SWGS_VERSION
#define SWGS_VERSION "0.0.0"
#endif

using namespace swgs;

namespace {

enum Exit { kOk = 0, kFailure = 1, kParse = 2 };

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct Manifest {
    std::string command;
    std::string config;
    std::uint64_t seed = 0;
    std::string started = utc_now();
    std::vector<std::string> outputs;

    void write(const std::string& path) const
    {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config"] = config;
        j["seed"] = seed;
        j["version"] = SWGS_VERSION;
        j["started"] = started;
        j["finished"] = utc_now();
        j["outputs"] = outputs;
        write_file(path, j.dump(2) + "\n");
    }
};

void record(std::ostream& out, const std::string& key, double v) { out << key << "=" << format_double(v) << "\n"; }
void record(std::ostream& out, const std::string& key, int v) { out << key << "=" << v << "\n"; }
void record(std::ostream& out, const std::string& key, bool v) { out << key << "=" << (v ? "true" : "false") << "\n"; }

std::vector<double> parse_grid(const std::string& spec)
{
    std::vector<double> out;
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw ParseError("--tau-grid: not a number: '" + s + "'");
        return v;
    };
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ParseError("--tau-grid: expected start:stop:step");
        const double a = num(parts[0]), b = num(parts[1]), h = num(parts[2]);
        if (!(h > 0.0) || b < a) throw ParseError("--tau-grid: need step > 0 and stop >= start");
        const long n = std::lround(std::floor((b - a) / h + 1e-9)) + 1;
        for (long i = 0; i < n; ++i) out.push_back(std::round((a + static_cast<double>(i) * h) * 1e12) / 1e12);
    } else {
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
    }
    if (out.empty()) throw ParseError("--tau-grid: empty grid");
    return out;
}

std::vector<int> parse_int_list(const std::string& spec, const char* flag)
{
    std::vector<int> out;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ',');) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != p.size()) throw ParseError(std::string(flag) + ": not an integer: '" + p + "'");
        out.push_back(v);
    }
    return out;
}

std::string outcome_csv(const OperatingCharacteristics& oc)
{
    std::ostringstream out;
    out << "gamma,psi,tau,probability\n";
    for (const auto& r : oc.per_outcome)
        out << r.gamma << "," << r.psi << "," << format_double(r.tau) << "," << format_double(r.probability) << "\n";
    return out.str();
}

struct EvaluateArgs {
    std::string scenario, design, outcomes, manifest;
    double alpha_tol = 1e-4, power_tol = 1e-3;
};

int cmd_evaluate(const EvaluateArgs& a)
{
    Manifest man{"evaluate", a.scenario};
    ScenarioSpec scenario = load_scenario(a.scenario);
    const GroupSequentialDesign design = load_design(a.design);
    const OperatingCharacteristics oc = summarize(design, scenario, {}, {a.alpha_tol, a.power_tol});
    scenario = with_reference_size(scenario);

    auto& out = std::cout;
    record(out, "type_i", oc.type_i);
    record(out, "power", oc.power);
    record(out, "enm_null", oc.enm_null);
    record(out, "enm_alt", oc.enm_alt);
    record(out, "max_measurements", oc.max_measurements);
    record(out, "M_SW", *scenario.M_SW);
    record(out, "objective", objective(design, scenario));
    record(out, "penalized_objective", penalized_objective(design, scenario));
    record(out, "integration_error", oc.integration_error);
    record(out, "alpha_ok", oc.alpha_ok);
    record(out, "power_ok", oc.power_ok);
    if (!a.outcomes.empty()) {
        write_file(a.outcomes, outcome_csv(oc));
        man.outputs.push_back(a.outcomes);
    }
    if (!a.manifest.empty()) man.write(a.manifest);
    std::cerr << "P(0)=" << std::fixed << std::setprecision(4) << oc.type_i << " P(delta)=" << oc.power
              << " ENM(0)=" << std::setprecision(1) << oc.enm_null << " ENM(delta)=" << oc.enm_alt << "\n";
    if (!oc.feasible()) {
        std::cerr << "error: design violates the " << (!oc.alpha_ok ? "type-I error" : "power") << " constraint\n";
        return kFailure;
    }
    return kOk;
}

struct OptimizeArgs {
    std::string scenario, out = "design.yaml", trace = "trace.csv", manifest;
    CEConfig ce;
};

void write_trace(const std::string& path, const std::vector<TraceRow>& trace)
{
    std::ostringstream out;
    out << "iteration,elite_quantile,best_objective\n";
    for (const auto& r : trace)
        out << r.iteration << "," << format_double(r.elite_quantile) << "," << format_double(r.best_objective) << "\n";
    write_file(path, out.str());
}

int cmd_optimize(OptimizeArgs a)
{
    Manifest man{"optimize", a.scenario, a.ce.seed};
    const std::string manifest = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
    const ScenarioSpec scenario = with_reference_size(load_scenario(a.scenario));
    try {
        const CEResult r = ce_optimize(scenario, a.ce);
        const SummaryFields summary{{"objective", r.objective},
                                    {"type_i", r.oc.type_i},
                                    {"power", r.oc.power},
                                    {"enm_null", r.oc.enm_null},
                                    {"enm_alt", r.oc.enm_alt},
                                    {"max_measurements", r.oc.max_measurements},
                                    {"M_SW", *scenario.M_SW},
                                    {"iterations", static_cast<double>(r.trace.size())},
                                    {"evaluations", static_cast<double>(r.evaluations)}};
        write_file(a.out, emit_design(r.design, summary));
        write_trace(a.trace, r.trace);
        man.outputs = {a.out, a.trace};
        man.write(manifest);
        std::cout << "objective=" << format_double(r.objective) << "\n";
        return kOk;
    } catch (const InfeasibleError& e) {
        write_trace(a.trace, e.trace());
        man.outputs = {a.trace};
        if (e.best()) {
            const std::string path = a.out + ".best-infeasible.yaml";
            write_file(path, emit_design(*e.best(), {{"penalized_objective", e.best_penalized()}}));
            man.outputs.push_back(path);
            std::cerr << "best-so-far design written to " << path << "\n";
        }
        man.write(manifest);
        throw;
    }
}

struct AnalyzeArgs {
    std::string design;
    int gamma = 0;
    std::optional<double> z, tau_hat, info;
    double alpha = 0.05;
};

int cmd_analyze(const AnalyzeArgs& a)
{
    const GroupSequentialDesign design = load_design(a.design);
    const StagewiseAnalyzer an(design);
    if (a.z.has_value() == a.tau_hat.has_value()) throw ParseError("analyze: give exactly one of --z and --tau-hat");
    TrialResult res;
    if (a.z) {
        res = an.result(a.gamma, *a.z);
    } else {
        res = an.result_from_estimate(a.gamma, *a.tau_hat);
    }
    if (a.info && std::abs(*a.info - res.info) > 1e-6 * res.info)
        throw ConstraintError("analyze: --info " + format_double(*a.info) + " differs from the design information " +
                              format_double(res.info) + " at analysis " + std::to_string(a.gamma));
    const InferenceReport rep = an.infer(res, a.alpha);
    auto& out = std::cout;
    record(out, "gamma", res.gamma);
    record(out, "z", res.z);
    record(out, "psi", res.psi);
    record(out, "info", res.info);
    record(out, "estimate_naive", rep.estimate_naive);
    record(out, "p_naive", rep.p_naive);
    record(out, "ci_lower_naive", rep.ci_lower_naive);
    record(out, "estimate_so", rep.estimate_so);
    record(out, "p_so", rep.p_so);
    record(out, "ci_lower_so", rep.ci_lower_so);
    return kOk;
}

struct SimulateArgs {
    std::string scenario, design, grid = "-0.3:0.5:0.1", out, manifest;
    long replicates = 10000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

int cmd_simulate(const SimulateArgs& a)
{
    Manifest man{"simulate", a.scenario, a.seed};
    const ScenarioSpec scenario = load_scenario(a.scenario);
    const GroupSequentialDesign design = load_design(a.design);
    check_compatible(design, scenario);
    StudyOptions opts;
    opts.alpha = scenario.alpha;
    opts.threads = a.threads;
    const auto metrics = replicate_study(design, parse_grid(a.grid), a.replicates, a.seed, opts);

    std::ostringstream csv;
    csv << "tau,estimator,bias,rmse,coverage,se_bias,se_coverage\n";
    for (const auto& m : metrics) {
        const std::string tau = format_double(m.tau);
        csv << tau << ",naive," << format_double(m.bias_naive) << "," << format_double(m.rmse_naive) << ","
            << format_double(m.coverage_naive) << "," << format_double(m.se_bias_naive) << ","
            << format_double(m.se_coverage_naive) << "\n";
        csv << tau << ",so," << format_double(m.bias_so) << "," << format_double(m.rmse_so) << ","
            << format_double(m.coverage_so) << "," << format_double(m.se_bias_so) << ","
            << format_double(m.se_coverage_so) << "\n";
    }
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        write_file(a.out, csv.str());
        man.outputs.push_back(a.out);
    }
    if (!a.manifest.empty()) man.write(a.manifest);
    return kOk;
}

struct TableArgs {
    std::string c_list = "2,4,6,8,10,15,20", t_list = "2,4,6,8,10", out;
};

int cmd_table_a1(const TableArgs& a)
{
    std::ostringstream csv;
    csv << "C,T,probability\n";
    for (int C : parse_int_list(a.c_list, "--c-list"))
        for (int T : parse_int_list(a.t_list, "--t-list")) {
            if (T < 2 || T % 2) throw ConstraintError("table-a1: T must be even and >= 2 (t1 = T/2)");
            csv << C << "," << T << "," << format_double(ordered_allocation_probability(C, T, T / 2)) << "\n";
        }
    if (a.out.empty())
        std::cout << csv.str();
    else
        write_file(a.out, csv.str());
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Group sequential stepped-wedge trial design and inference"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", SWGS_VERSION);
    unsigned threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (default: SWGS_THREADS or 1)")->check(CLI::Range(1u, 256u));

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Operating characteristics of a design");
    evaluate->add_option("scenario", ev.scenario, "Scenario file")->required();
    evaluate->add_option("design", ev.design, "Design file")->required();
    evaluate->add_option("--outcomes", ev.outcomes, "Per-outcome CSV output");
    evaluate->add_option("--manifest", ev.manifest, "Run manifest output");
    evaluate->add_option("--alpha-tol", ev.alpha_tol, "Slack on P(0) <= alpha");
    evaluate->add_option("--power-tol", ev.power_tol, "Slack on P(delta) >= 1 - beta");

    OptimizeArgs op;
    auto* optimize = app.add_subcommand("optimize", "Cross-entropy design search");
    optimize->add_option("scenario", op.scenario, "Scenario file")->required();
    optimize->add_option("-o,--out", op.out, "Design file output");
    optimize->add_option("--trace", op.trace, "Trace CSV output");
    optimize->add_option("--manifest", op.manifest, "Run manifest output (default: <out>.manifest.json)");
    optimize->add_option("--seed", op.ce.seed, "Random seed");
    optimize->add_option("--n-samples", op.ce.n_samples, "Candidates per iteration (default 10000(C+2K))");
    optimize->add_option("--rho", op.ce.rho, "Elite fraction");
    optimize->add_option("--m-max", op.ce.m_max, "Largest m considered (default 10 M_SW / CT)");
    optimize->add_option("--max-iters", op.ce.max_iters, "Iteration limit");
    optimize->add_option("--stall-window", op.ce.stall_window, "Iterations without improvement before stopping");
    optimize->add_option("--smoothing", op.ce.smoothing, "Update damping in [0, 1]");
    optimize->add_option("--alpha-tol", op.ce.tolerance.alpha, "Slack on P(0) <= alpha for the returned design");
    optimize->add_option("--power-tol", op.ce.tolerance.power, "Slack on P(delta) >= 1 - beta for the returned design");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Naive and stage-wise inference for a completed trial");
    analyze->add_option("design", an.design, "Design file")->required();
    analyze->add_option("--gamma", an.gamma, "Stopping analysis (1-based)")->required();
    analyze->add_option("--z", an.z, "Observed Z statistic");
    analyze->add_option("--tau-hat", an.tau_hat, "Observed treatment effect estimate");
    analyze->add_option("--info", an.info, "Information at the stopping analysis (checked against the design)");
    analyze->add_option("--alpha", an.alpha, "One-sided level of the confidence bound");

    SimulateArgs si;
    auto* simulate = app.add_subcommand("simulate", "Simulation study of naive and stage-wise inference");
    simulate->add_option("scenario", si.scenario, "Scenario file")->required();
    simulate->add_option("design", si.design, "Design file")->required();
    simulate->add_option("--tau-grid", si.grid, "start:stop:step or comma list");
    simulate->add_option("--replicates", si.replicates, "Replicates per tau")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", si.seed, "Random seed");
    simulate->add_option("-o,--out", si.out, "CSV output (default: stdout)");
    simulate->add_option("--manifest", si.manifest, "Run manifest output");

    TableArgs ta;
    auto* table = app.add_subcommand("table-a1", "Probability of a randomly drawn ordered allocation");
    table->add_option("--c-list", ta.c_list, "Cluster counts");
    table->add_option("--t-list", ta.t_list, "Period counts (even)");
    table->add_option("-o,--out", ta.out, "CSV output (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kParse;
    }

    try {
        if (*evaluate) return cmd_evaluate(ev);
        if (*optimize) {
            op.ce.threads = threads;
            return cmd_optimize(op);
        }
        if (*analyze) return cmd_analyze(an);
        if (*simulate) {
            si.threads = threads;
            return cmd_simulate(si);
        }
        if (*table) return cmd_table_a1(ta);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
