#include "swgs/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "swgs/error.hpp"

namespace swgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Reader {
public:
    Reader(const std::string& text, std::string source, const char* kind) : source_(std::move(source))
    {
        try {
            root_ = YAML::Load(text);
        } catch (const YAML::Exception& e) {
            throw ParseError(source_ + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
        }
        if (!root_.IsMap()) throw ParseError(source_ + ": expected a mapping at the top level");
        const std::string schema = string_field("schema");
        if (schema != kSchemaTag)
            fail(root_["schema"], "schema", "unsupported schema '" + schema + "' (expected " + kSchemaTag + ")");
        const std::string k = string_field("kind");
        if (k != kind) fail(root_["kind"], "kind", "expected '" + std::string(kind) + "', got '" + k + "'");
    }

    void allow_only(std::initializer_list<const char*> names) const
    {
        std::set<std::string> ok(names.begin(), names.end());
        ok.insert("schema");
        ok.insert("kind");
        for (const auto& kv : root_) {
            const std::string name = kv.first.as<std::string>();
            if (!ok.count(name)) fail(kv.first, name, "unknown field");
        }
    }

    bool has(const char* name) const { return static_cast<bool>(root_[name]); }

    YAML::Node node(const char* name) const
    {
        const YAML::Node n = root_[name];
        if (!n) throw ParseError(source_ + ": missing required field '" + name + "'");
        return n;
    }

    std::string string_field(const char* name) const
    {
        const YAML::Node n = node(name);
        if (!n.IsScalar()) fail(n, name, "expected a scalar");
        return n.Scalar();
    }

    double number(const YAML::Node& n, const std::string& field) const
    {
        if (!n.IsScalar()) fail(n, field, "expected a number");
        const std::string s = n.Scalar();
        if (s == ".inf" || s == ".Inf" || s == "+.inf" || s == "inf") return kInf;
        if (s == "-.inf" || s == "-.Inf" || s == "-inf") return -kInf;
        const auto slash = s.find('/');
        if (slash != std::string::npos) {
            const double a = plain_number(n, field, s.substr(0, slash));
            const double b = plain_number(n, field, s.substr(slash + 1));
            if (b == 0.0) fail(n, field, "division by zero in '" + s + "'");
            return a / b;
        }
        return plain_number(n, field, s);
    }

    double number_field(const char* name) const { return number(node(name), name); }

    int integer(const YAML::Node& n, const std::string& field) const
    {
        const double v = number(n, field);
        if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 1e9)
            fail(n, field, "expected an integer, got '" + n.Scalar() + "'");
        return static_cast<int>(v);
    }

    int integer_field(const char* name) const { return integer(node(name), name); }

    std::vector<double> number_list(const char* name) const
    {
        const YAML::Node n = node(name);
        if (!n.IsSequence()) fail(n, name, "expected a list");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i)
            out.push_back(number(n[i], std::string(name) + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<int> integer_list(const char* name) const
    {
        const YAML::Node n = node(name);
        if (!n.IsSequence()) fail(n, name, "expected a list");
        std::vector<int> out;
        for (std::size_t i = 0; i < n.size(); ++i)
            out.push_back(integer(n[i], std::string(name) + "[" + std::to_string(i) + "]"));
        return out;
    }

    [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& msg) const
    {
        std::string where = source_;
        if (n && n.Mark().line >= 0) where += ":" + std::to_string(n.Mark().line + 1);
        throw ParseError(where + ": field '" + field + "': " + msg);
    }

    // Re-raises a domain validation failure with the offending field attached.
    template <typename F>
    auto with_field(const char* field, F&& f) const
    {
        try {
            return f();
        } catch (const ConstraintError& e) {
            const YAML::Node n = root_[field];
            std::string where = source_;
            if (n && n.Mark().line >= 0) where += ":" + std::to_string(n.Mark().line + 1);
            throw ConstraintError(where + ": field '" + field + "': " + e.what());
        }
    }

    const std::string& source() const { return source_; }

private:
    double plain_number(const YAML::Node& n, const std::string& field, const std::string& s) const
    {
        const char* begin = s.c_str();
        while (*begin == ' ') ++begin;
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(begin, &end);
        while (end && *end == ' ') ++end;
        if (end == begin || *end != '\0' || errno == ERANGE) fail(n, field, "not a number: '" + s + "'");
        return v;
    }

    std::string source_;
    YAML::Node root_;
};

void emit_list(std::ostringstream& out, const char* name, const std::vector<double>& v)
{
    out << name << ": [";
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << format_double(v[i]);
    out << "]\n";
}

void emit_list(std::ostringstream& out, const char* name, const std::vector<int>& v)
{
    out << name << ": [";
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
    out << "]\n";
}

} // namespace

std::string format_double(double x)
{
    if (std::isinf(x)) return x > 0 ? ".inf" : "-.inf";
    if (std::isnan(x)) return ".nan";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot write file");
    out << content;
    if (!out) throw std::runtime_error(path + ": write failed");
}

ScenarioSpec parse_scenario(const std::string& text, const std::string& source)
{
    const Reader r(text, source, "scenario");
    r.allow_only({"C", "T", "m", "alpha", "beta", "delta", "sigma_c2", "sigma_e2", "analysis_periods", "weights",
                  "M_SW", "switching_times"});
    ScenarioSpec s;
    s.C = r.integer_field("C");
    s.T = r.integer_field("T");
    s.alpha = r.number_field("alpha");
    s.beta = r.number_field("beta");
    s.delta = r.number_field("delta");
    s.vc.sigma_c2 = r.number_field("sigma_c2");
    s.vc.sigma_e2 = r.number_field("sigma_e2");
    s.analysis_periods = r.integer_list("analysis_periods");
    if (r.has("weights")) {
        const auto w = r.number_list("weights");
        if (w.size() != 3) r.fail(r.node("weights"), "weights", "expected 3 entries, got " + std::to_string(w.size()));
        s.weights = {w[0], w[1], w[2]};
    }
    if (r.has("M_SW")) s.M_SW = r.number_field("M_SW");
    if (r.has("m")) s.m = r.integer_field("m");
    if (r.has("switching_times")) {
        s.switching_times = r.integer_list("switching_times");
        if (static_cast<int>(s.switching_times->size()) != s.C)
            r.fail(r.node("switching_times"), "switching_times",
                   "expected C=" + std::to_string(s.C) + " entries, got " + std::to_string(s.switching_times->size()));
    }
    r.with_field("analysis_periods", [&] { return s.schedule(); });
    if (s.switching_times) r.with_field("switching_times", [&] { return AllocationSchedule(*s.switching_times, s.T); });
    r.with_field("sigma_c2", [&] { s.vc.validate(); return 0; });
    s.validate();
    return s;
}

ScenarioSpec load_scenario(const std::string& path) { return parse_scenario(read_file(path), path); }

GroupSequentialDesign parse_design(const std::string& text, const std::string& source)
{
    const Reader r(text, source, "design");
    r.allow_only({"C", "T", "m", "S", "analysis_periods", "f", "e", "sigma_c2", "sigma_e2", "summary"});
    const int C = r.integer_field("C");
    const int T = r.integer_field("T");
    const int m = r.integer_field("m");
    const std::vector<int> S = r.integer_list("S");
    if (static_cast<int>(S.size()) != C)
        r.fail(r.node("S"), "S", "expected C=" + std::to_string(C) + " entries, got " + std::to_string(S.size()));
    const std::vector<int> periods = r.integer_list("analysis_periods");
    const std::vector<double> f = r.number_list("f");
    const std::vector<double> e = r.number_list("e");
    if (f.size() != periods.size())
        r.fail(r.node("f"), "f", "expected " + std::to_string(periods.size()) + " entries (one per analysis)");
    if (e.size() != periods.size())
        r.fail(r.node("e"), "e", "expected " + std::to_string(periods.size()) + " entries (one per analysis)");
    if (r.has("summary") && !r.node("summary").IsMap()) r.fail(r.node("summary"), "summary", "expected a mapping");
    VarianceComponents vc{r.number_field("sigma_c2"), r.number_field("sigma_e2")};

    auto alloc = r.with_field("S", [&] { return AllocationSchedule(S, T); });
    auto sched = r.with_field("analysis_periods", [&] { return AnalysisSchedule(periods, T); });
    auto bounds = r.with_field("f", [&] { return StoppingBoundaries::from_vectors(f, e); });
    r.with_field("sigma_c2", [&] { vc.validate(); return 0; });
    return r.with_field("m", [&] { return GroupSequentialDesign(alloc, sched, bounds, m, vc); });
}

GroupSequentialDesign load_design(const std::string& path) { return parse_design(read_file(path), path); }

std::string emit_scenario(const ScenarioSpec& s)
{
    std::ostringstream out;
    out << "schema: " << kSchemaTag << "\nkind: scenario\n";
    out << "C: " << s.C << "\nT: " << s.T << "\n";
    if (s.m) out << "m: " << *s.m << "\n";
    out << "alpha: " << format_double(s.alpha) << "\nbeta: " << format_double(s.beta)
        << "\ndelta: " << format_double(s.delta) << "\n";
    out << "sigma_c2: " << format_double(s.vc.sigma_c2) << "\nsigma_e2: " << format_double(s.vc.sigma_e2) << "\n";
    emit_list(out, "analysis_periods", s.analysis_periods);
    emit_list(out, "weights", std::vector<double>(s.weights.begin(), s.weights.end()));
    if (s.M_SW) out << "M_SW: " << format_double(*s.M_SW) << "\n";
    if (s.switching_times) emit_list(out, "switching_times", *s.switching_times);
    return out.str();
}

std::string emit_design(const GroupSequentialDesign& d, const SummaryFields& summary)
{
    std::ostringstream out;
    out << "schema: " << kSchemaTag << "\nkind: design\n";
    out << "C: " << d.clusters() << "\nT: " << d.periods() << "\nm: " << d.m() << "\n";
    emit_list(out, "S", d.allocation().switching_times());
    emit_list(out, "analysis_periods", d.schedule().periods());
    emit_list(out, "f", d.boundaries().futility_bounds());
    emit_list(out, "e", d.boundaries().efficacy_bounds());
    out << "sigma_c2: " << format_double(d.variance().sigma_c2) << "\nsigma_e2: "
        << format_double(d.variance().sigma_e2) << "\n";
    if (!summary.empty()) {
        out << "summary:\n";
        for (const auto& [k, v] : summary) out << "  " << k << ": " << format_double(v) << "\n";
    }
    return out.str();
}

} // namespace swgs
