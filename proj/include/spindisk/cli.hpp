#pragma once

// spindisk solve|verify|flow <config> [--out dir] [--seed n]
//
// Config files are INI: [section] headers, key = value lines, ';' or '#'
// comments. Every key a command reads is echoed (with defaults filled in)
// to <out>/config.ini and into manifest.json; rerunning config.ini gives
// byte-identical data files. Unknown keys in the sections a command reads
// are a config error.
//
// Exit codes: 0 ok, 2 config error, 3 tolerance failure, 4 solver failure,
// 5 flow halted on blow-up, 6 flow aborted on constraint.

#include "spindisk/heatflow.hpp"
#include "spindisk/identities.hpp"
#include "spindisk/field_io.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace spindisk::cli {

inline constexpr int schema_version = 1;
inline constexpr const char* csv_schema = "field-csv/1: r,theta,re,im + sidecar {n_r,n_theta,metric_preset}";
inline constexpr const char* table_schema = "defect-table/1: check,case,n_r,n_theta,h,value,rate";
inline constexpr const char* jsonl_schema = "flow-monitors/1: {step,t,energy,grad_sup,constraint_sup,tangency_sup}";

enum Exit : int { ok = 0, config_error = 2, tolerance_failure = 3, solver_failure = 4, flow_blowup = 5, flow_constraint = 6 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
    return v;
}

} // namespace detail

// Key lookups record the resolved value so the run can be echoed exactly.
class Config {
public:
    static Config parse(const std::string& text) {
        Config c;
        std::istringstream is(text);
        try {
            boost::property_tree::ini_parser::read_ini(is, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        for (const auto& [k, v] : c.tree_)
            if (!v.data().empty()) throw ConfigError("config: key '" + k + "' outside any section");
        return c;
    }
    static Config load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot read '" + path + "'");
        std::stringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return static_cast<bool>(tree_.get_optional<std::string>(key)); }

    std::string str(const std::string& key, const std::string& def) {
        const std::string v = detail::trim(tree_.get<std::string>(key, def));
        used_[key] = v;
        return v;
    }
    int integer(const std::string& key, int def) {
        const int v = has(key) ? detail::parse_number<int>(key, raw(key)) : def;
        used_[key] = std::to_string(v);
        return v;
    }
    double real(const std::string& key, double def) {
        const double v = has(key) ? detail::parse_number<double>(key, raw(key)) : def;
        used_[key] = format_double(v);
        return v;
    }
    std::vector<std::string> list(const std::string& key, const std::string& def) {
        const auto v = detail::split_list(has(key) ? raw(key) : def);
        std::string joined;
        for (std::size_t k = 0; k < v.size(); ++k) joined += (k ? "," : "") + v[k];
        used_[key] = joined;
        return v;
    }
    std::vector<int> int_list(const std::string& key, const std::string& def) {
        std::vector<int> out;
        for (const auto& s : list(key, def)) out.push_back(detail::parse_number<int>(key, s));
        return out;
    }
    std::string choice(const std::string& key, const std::string& def, const std::set<std::string>& allowed) {
        const std::string v = str(key, def);
        if (!allowed.count(v)) {
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : "|") + a;
            throw ConfigError("config: '" + key + "' must be one of " + opts + ", got '" + v + "'");
        }
        return v;
    }

    void set(const std::string& key, const std::string& value) { tree_.put(key, value); }

    // every key present in the given sections must have been read
    void check_unused(const std::set<std::string>& sections, const std::set<std::string>& known) const {
        for (const auto& [sec, sub] : tree_) {
            if (!known.count(sec)) throw ConfigError("config: unknown section [" + sec + "]");
            if (!sections.count(sec)) continue;
            for (const auto& [k, v] : sub) {
                (void)v;
                if (!used_.count(sec + "." + k)) throw ConfigError("config: unknown key '" + k + "' in [" + sec + "]");
            }
        }
    }

    nlohmann::ordered_json echo() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [k, v] : used_) {
            const auto dot = k.find('.');
            j[k.substr(0, dot)][k.substr(dot + 1)] = v;
        }
        return j;
    }
    std::string canonical_text() const {
        std::ostringstream os;
        std::string current;
        for (const auto& [k, v] : used_) {
            const auto dot = k.find('.');
            const std::string sec = k.substr(0, dot);
            if (sec != current) {
                os << (current.empty() ? "" : "\n") << '[' << sec << "]\n";
                current = sec;
            }
            os << k.substr(dot + 1) << " = " << v << '\n';
        }
        return os.str();
    }

private:
    std::string raw(const std::string& key) const { return detail::trim(tree_.get<std::string>(key)); }

    boost::property_tree::ptree tree_;
    std::map<std::string, std::string> used_; // ordered: deterministic echo
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ull;
    char c;
    while (is.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << s;
}

inline int parse_sign(Config& c, const std::string& key) {
    const int s = c.integer(key, 1);
    if (s != 1 && s != -1) throw ConfigError("config: '" + key + "' must be 1 or -1");
    return s;
}

inline BoundaryVariant parse_variant(Config& c, const std::string& key) {
    return c.choice(key, "chiral", {"chiral", "mit"}) == "mit" ? BoundaryVariant::mit : BoundaryVariant::chiral;
}

inline PolarGrid parse_grid(Config& c, int n_r_default) {
    const int n_r = c.integer("grid.n_r", n_r_default);
    const int n_t = c.integer("grid.n_theta", 2 * n_r);
    try {
        return PolarGrid(n_r, n_t);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// boundary data presets for the solve command
inline SpinorTrace boundary_preset(const std::string& name, int n) {
    using A = std::array<cplx, 4>;
    if (name == "zero") return SpinorTrace(n);
    if (name == "constant") return SpinorTrace::from(n, [](cplx) { return A{1.0, 0.0, 0.0, 0.0}; });
    if (name == "polynomial") return SpinorTrace::from(n, [](cplx z) { return A{1.0 + z * z, 0.5 * std::conj(z), z, cplx(0.0, 0.25) * std::conj(z)}; });
    if (name == "smooth")
        return SpinorTrace::from(n, [](cplx z) { return A{1.0 + 0.3 * z, 0.2 * std::conj(z) + 0.1, 0.5 * std::exp(z), cplx(0.0, 0.3) * z}; });
    throw ConfigError("config: unknown boundary preset '" + name + "' (zero|constant|polynomial|smooth)");
}

// smooth random spinor with seeded coefficients, resampled identically on every grid
struct SmoothSpinorSpec {
    std::array<std::array<cplx, 3>, 4> c{};
    std::array<std::array<cplx, 2>, 4> k{};

    explicit SmoothSpinorSpec(std::mt19937_64& rng) {
        std::uniform_real_distribution<double> U(-1.0, 1.0);
        for (int s = 0; s < 4; ++s) {
            for (auto& v : c[s]) v = cplx(U(rng), U(rng));
            for (auto& v : k[s]) v = 0.8 * cplx(U(rng), U(rng));
        }
    }
    SpinorField sample(const PolarGrid& g) const {
        return SpinorField::from(g, [&](cplx z) {
            std::array<cplx, 4> out;
            const cplx zb = std::conj(z);
            for (int s = 0; s < 4; ++s) out[s] = c[s][0] * std::exp(k[s][0] * z + k[s][1] * zb) + c[s][1] * std::cos(k[s][1] * z) * zb + c[s][2] * z * zb;
            return out;
        });
    }
};

struct TableRow {
    std::string check, series;
    int n_r = 0, n_theta = 0;
    double h = 0.0, value = 0.0, rate = std::nan("");
};

// observed order between consecutive rows of the same series
inline void fill_rates(std::vector<TableRow>& rows) {
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto& a = rows[k - 1];
        auto& b = rows[k];
        if (a.series != b.series) continue;
        b.rate = std::log(a.value / b.value) / std::log(a.h / b.h);
    }
}

inline double min_rate(const std::vector<TableRow>& rows, const std::string& series_prefix = "") {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : rows)
        if (!std::isnan(r.rate) && r.series.rfind(series_prefix, 0) == 0) m = std::min(m, r.rate);
    return m;
}

inline std::string table_csv(const std::vector<TableRow>& rows) {
    std::ostringstream os;
    os << "check,case,n_r,n_theta,h,value,rate\n";
    for (const auto& r : rows)
        os << r.check << ',' << r.series << ',' << r.n_r << ',' << r.n_theta << ',' << format_double(r.h) << ',' << format_double(r.value) << ','
           << (std::isnan(r.rate) ? std::string("") : format_double(r.rate)) << '\n';
    return os.str();
}

inline nlohmann::ordered_json num(double x) { return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr); }

} // namespace detail

// Shared per-run state: output dir, artifacts, manifest.
class Run {
public:
    Run(std::string command, Config& cfg, std::filesystem::path out, std::uint64_t seed)
        : command_(std::move(command)), cfg_(cfg), out_(std::move(out)), seed_(seed), start_(std::chrono::steady_clock::now()) {
        std::filesystem::create_directories(out_);
    }

    Config& cfg() { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    const std::filesystem::path& out() const { return out_; }

    std::filesystem::path path(const std::string& name) {
        const auto p = out_ / name;
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        artifacts_.push_back(name);
        return p;
    }
    void text(const std::string& name, const std::string& s) { detail::write_text(path(name), s); }
    void json(const std::string& name, const nlohmann::ordered_json& j) { text(name, j.dump(2) + "\n"); }
    void field(const std::string& name, const ComplexField& u, const std::string& metric) {
        write_field_csv(path(name).string(), u, metric);
        artifacts_.push_back(name + ".json");
    }

    nlohmann::ordered_json grid, tolerances, summary;

    void finish(int exit_code, const std::string& message) {
        detail::write_text(out_ / "config.ini", cfg_.canonical_text());
        nlohmann::ordered_json m;
        m["schema_version"] = schema_version;
        m["command"] = command_;
        m["seed"] = seed_;
        m["config"] = cfg_.echo();
        m["config_text"] = cfg_.canonical_text();
        m["grid"] = grid;
        m["tolerances"] = tolerances;
        m["summary"] = summary;
        m["exit_code"] = exit_code;
        m["message"] = message;
        m["schemas"] = {{"csv", csv_schema}, {"table", table_schema}, {"jsonl", jsonl_schema}};
        nlohmann::ordered_json arts = nlohmann::ordered_json::array();
        for (const auto& a : artifacts_) arts.push_back({{"file", a}, {"fnv1a64", detail::hex(detail::fnv1a((out_ / a).string()))}});
        m["artifacts"] = arts;
        m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        detail::write_text(out_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    std::string command_;
    Config& cfg_;
    std::filesystem::path out_;
    std::uint64_t seed_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> artifacts_;
};

struct Outcome {
    int code = ok;
    std::string message;
};

// ---------------------------------------------------------------------------
// solve

inline Outcome cmd_solve(Run& run) {
    Config& c = run.cfg();
    const PolarGrid g = detail::parse_grid(c, 32);
    const std::string metric_name = c.choice("solve.metric", "flat", {"flat", "round", "exp"});
    const std::string target = c.choice("solve.target", "flat", {"flat", "round"});
    const std::string map_name = c.choice("solve.map", "identity", {"identity", "smooth"});
    const std::string bname = c.str("solve.boundary", "smooth");
    const int sign = detail::parse_sign(c, "solve.sign");
    const BoundaryVariant variant = detail::parse_variant(c, "solve.variant");
    const std::string method = c.choice("solve.method", "both", {"closed_form", "discrete", "both"});
    const double tol = c.real("solve.tolerance", 1e-3);
    const SpinorTrace psi0 = detail::boundary_preset(bname, g.n_theta);
    c.check_unused({"grid", "solve", "run"}, {"grid", "solve", "verify", "flow", "run"});

    const DiskGeometry geo(g);
    const auto metric = ConformalDiskMetric::by_name(metric_name, g);
    const auto map = MapData::make(g, MapPreset::by_name(map_name), TargetMetricPreset::by_name(target));
    run.grid = {{"n_r", g.n_r}, {"n_theta", g.n_theta}};
    run.tolerances = {{"residual", tol}};

    static const char* slot_names[4] = {"f_plus", "f_minus", "ft_plus", "ft_minus"};
    nlohmann::ordered_json res;
    double worst = 0.0;
    std::optional<SpinorField> cf, ds;
    auto report = [&](const std::string& tag, const SpinorField& psi) {
        const auto rep = residual_report(geo, metric, map, psi, SpinorField(g), psi0, sign, variant);
        res[tag] = {{"interior_sup", rep.interior_sup}, {"boundary_sup", rep.boundary_sup}, {"l2_interior", rep.l2_interior}};
        worst = std::max({worst, rep.interior_sup, rep.boundary_sup});
        for (int k = 0; k < 4; ++k) run.field("psi_" + tag + "_" + slot_names[k] + ".csv", psi.slot(k), metric_name);
    };
    try {
        if (method != "discrete") {
            cf = solve_chiral_bvp_closed_form(geo, metric, map, psi0, sign, variant);
            report("closed_form", *cf);
        }
        if (method != "closed_form") {
            const DiscreteDiracSolver solver(g, variant, sign);
            LsqrInfo info;
            ds = solve_map_bvp_discrete(solver, metric, map, SpinorField(g), psi0, &info);
            report("discrete", *ds);
            res["discrete"]["iterations"] = info.iterations;
        }
    } catch (const SolverError& e) {
        return {solver_failure, e.what()};
    }
    if (cf && ds) {
        const double d = sup_difference(*cf, *ds);
        res["cross_diff_sup"] = d;
        worst = std::max(worst, d);
    }
    res["worst"] = worst;
    run.json("residuals.json", res);
    run.summary = res;
    if (!(worst <= tol)) {
        std::ostringstream os;
        os << "residual " << format_double(worst) << " exceeds tolerance " << format_double(tol) << " at grid (" << g.n_r << "," << g.n_theta << ")";
        return {tolerance_failure, os.str()};
    }
    return {ok, "residuals within tolerance"};
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
    std::vector<detail::TableRow> rows;
    nlohmann::ordered_json summary;
    bool pass = false;
};

namespace detail {

struct VerifyContext {
    std::vector<int> ladder;
    std::vector<std::string> metrics;
    double rate_min = 1.7;
    std::uint64_t seed = 0;

    template <class F>
    void ladder_rows(std::vector<TableRow>& rows, const std::string& check, const std::string& series, const std::string& metric, F&& value) const {
        for (int n : ladder) {
            const PolarGrid g(n, 2 * n);
            const DiskGeometry geo(g);
            const auto m = ConformalDiskMetric::by_name(metric, g);
            rows.push_back({check, series, n, 2 * n, g.dr, value(geo, m), std::nan("")});
        }
    }
};

inline CheckResult verify_green(const VerifyContext& ctx) {
    CheckResult out;
    std::mt19937_64 rng(ctx.seed);
    const SmoothSpinorSpec a(rng), b(rng);
    for (const auto& m : ctx.metrics)
        ctx.ladder_rows(out.rows, "green", m, m, [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
            return check_green(geo, met, a.sample(geo.grid()), b.sample(geo.grid())).defect;
        });
    fill_rates(out.rows);
    const double r = min_rate(out.rows);
    out.pass = r >= ctx.rate_min;
    out.summary = {{"min_rate", num(r)}, {"threshold", ctx.rate_min}};
    return out;
}

// The twistor identity holds term by term in the discrete calculus, so its
// defect sits at roundoff; the convergence rate is measured on the integrals
// themselves for the round constant spinor, whose values are known exactly.
inline CheckResult verify_twistor(const VerifyContext& ctx) {
    CheckResult out;
    std::mt19937_64 rng(ctx.seed);
    const SmoothSpinorSpec a(rng);
    double worst_rel = 0.0;
    for (const auto& m : ctx.metrics)
        ctx.ladder_rows(out.rows, "twistor", m + ":identity", m, [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
            const auto r = check_twistor(geo, met, a.sample(geo.grid()));
            worst_rel = std::max(worst_rel, r.defect / (1.0 + r.get("grad_sq")));
            return r.defect;
        });
    const double G = pi * (std::log(2.0) - 0.5);
    std::vector<TableRow> oracle;
    ctx.ladder_rows(oracle, "twistor", "round:oracle", "round", [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
        const auto r = check_twistor(geo, met, SpinorField::from(geo.grid(), [](cplx) { return std::array<cplx, 4>{1.0, 0.0, 0.0, 0.0}; }));
        return std::abs(r.get("grad_sq") - G) + std::abs(r.get("dirac_sq") - G) + std::abs(r.get("twistor_sq") - 0.5 * G);
    });
    out.rows.insert(out.rows.end(), oracle.begin(), oracle.end());
    fill_rates(out.rows);
    const double r = min_rate(out.rows, "round:oracle");
    out.pass = r >= ctx.rate_min && worst_rel <= 1e-10;
    out.summary = {{"min_rate", num(r)}, {"threshold", ctx.rate_min}, {"identity_rel_defect_max", worst_rel}, {"identity_floor", 1e-10}};
    return out;
}

inline CheckResult verify_weitzenbock(const VerifyContext& ctx) {
    CheckResult out;
    std::mt19937_64 rng(ctx.seed);
    const SmoothSpinorSpec a(rng);
    for (const auto& m : ctx.metrics) {
        if (m == "flat") continue; // no curvature term to test
        ctx.ladder_rows(out.rows, "weitzenbock", m, m, [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
            return check_weitzenbock(geo, met, a.sample(geo.grid())).defect;
        });
    }
    fill_rates(out.rows);
    const double r = min_rate(out.rows);
    out.pass = !out.rows.empty() && r >= ctx.rate_min;
    out.summary = {{"min_rate", num(r)}, {"threshold", ctx.rate_min}};
    return out;
}

inline CheckResult verify_prop31(const VerifyContext& ctx, int samples, int n_sample, double slack) {
    CheckResult out;
    std::mt19937_64 rng(ctx.seed);
    const SmoothSpinorSpec a(rng);
    for (const auto& m : ctx.metrics)
        for (int s : {1, -1})
            ctx.ladder_rows(out.rows, "prop31", m + (s > 0 ? ":plus" : ":minus"), m, [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
                return check_prop31(geo, met, a.sample(geo.grid()), s).get("equality_defect");
            });
    fill_rates(out.rows);
    int violations = 0, mit_violations = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();
    std::vector<ConformalDiskMetric> mets;
    const PolarGrid g(n_sample, 2 * n_sample);
    const DiskGeometry geo(g);
    for (const auto& m : ctx.metrics) mets.push_back(ConformalDiskMetric::by_name(m, g));
    std::mt19937_64 srng(ctx.seed + 1);
    for (int t = 0; t < samples; ++t) {
        const auto& met = mets[t % mets.size()];
        const auto psi = random_spinor(g, 3, srng);
        for (int s : {1, -1}) {
            const auto r = check_prop31(geo, met, psi, s);
            if (r.defect > slack) ++violations;
            worst_slack = std::max(worst_slack, std::real(r.lhs - r.rhs));
            if (check_prop31(geo, met, psi, s, BoundaryVariant::mit).defect > slack) ++mit_violations;
        }
    }
    const double r = min_rate(out.rows);
    out.pass = violations == 0 && mit_violations == 0 && r >= ctx.rate_min;
    out.summary = {{"min_rate", num(r)},          {"threshold", ctx.rate_min},          {"samples", samples},
                   {"sample_grid", {n_sample, 2 * n_sample}}, {"violations", violations}, {"mit_violations", mit_violations},
                   {"slack", slack},               {"max_lhs_minus_rhs", num(worst_slack)}};
    return out;
}

inline CheckResult verify_reilly(const VerifyContext& ctx, double rate_min) {
    CheckResult out;
    std::mt19937_64 rng(ctx.seed);
    const SmoothSpinorSpec a(rng);
    for (const auto& m : ctx.metrics)
        ctx.ladder_rows(out.rows, "reilly", m, m, [&](const DiskGeometry& geo, const ConformalDiskMetric& met) {
            const RealField K = spin_curvature(met);
            // a positive weight with N >= |R|
            RealField N = K.map([](double x) { return std::abs(x) + 0.5; });
            const RealField f = solve_weight_f(geo, met, N);
            return check_weighted_reilly(geo, met, a.sample(geo.grid()), f).defect;
        });
    fill_rates(out.rows);
    const double r = min_rate(out.rows);
    out.pass = r >= rate_min;
    out.summary = {{"min_rate", num(r)}, {"threshold", rate_min}};
    return out;
}

inline CheckResult verify_kernel(const VerifyContext& ctx, const std::vector<int>& ladder, double factor, BoundaryVariant variant, int sign) {
    CheckResult out;
    std::vector<std::pair<int, int>> lad;
    for (int n : ladder) lad.emplace_back(n, 2 * n);
    struct Om {
        std::string name;
        std::function<CouplingForm(const PolarGrid&)> make;
    };
    const unsigned s1 = static_cast<unsigned>(ctx.seed) + 1, s2 = static_cast<unsigned>(ctx.seed) + 2;
    const std::vector<Om> oms = {{"omega_zero", [](const PolarGrid& g) { return CouplingForm::zero(g, 2); }},
                                 {"omega_random_a", [s1](const PolarGrid& g) { return CouplingForm::random_smooth(g, 2, 1.0, s1); }},
                                 {"omega_random_b", [s2](const PolarGrid& g) { return CouplingForm::random_smooth(g, 2, 1.0, s2); }}};
    double worst = 1.0;
    bool positive = true;
    for (const auto& metric : ctx.metrics)
        for (const auto& om : oms) {
            const auto scan = kernel_triviality_scan(metric, lad, om.make, variant, sign);
            for (std::size_t k = 0; k < scan.size(); ++k) {
                TableRow row{"kernel", metric + ":" + om.name, scan[k].n_r, scan[k].n_theta, 1.0 / scan[k].n_r, scan[k].sigma_min, std::nan("")};
                if (k > 0) {
                    const double ratio = scan[k].sigma_min / scan[k - 1].sigma_min;
                    row.rate = ratio;
                    worst = std::max({worst, ratio, 1.0 / ratio});
                }
                positive = positive && scan[k].sigma_min > 0.0;
                out.rows.push_back(row);
            }
        }
    out.pass = positive && worst <= factor;
    out.summary = {{"max_level_ratio", worst}, {"factor", factor}, {"note", "rate column holds sigma_min(level)/sigma_min(previous level)"}};
    return out;
}

} // namespace detail

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> v{"green", "twistor", "weitzenbock", "prop31", "reilly", "kernel"};
    return v;
}

inline Outcome cmd_verify(Run& run) {
    Config& c = run.cfg();
    const auto checks = c.list("verify.checks", "green,twistor,weitzenbock,prop31,reilly,kernel");
    for (const auto& ch : checks)
        if (std::find(known_checks().begin(), known_checks().end(), ch) == known_checks().end()) throw ConfigError("config: unknown check '" + ch + "'");
    detail::VerifyContext ctx;
    ctx.ladder = c.int_list("verify.ladder", "32,64,128");
    ctx.metrics = c.list("verify.metrics", "flat,round,exp");
    ctx.rate_min = c.real("verify.rate_min", 1.7);
    ctx.seed = run.seed();
    const double reilly_rate = c.real("verify.reilly_rate_min", 0.7);
    const int samples = c.integer("verify.prop31_samples", 1000);
    const int n_sample = c.integer("verify.prop31_n_r", 24);
    const double slack = c.real("verify.prop31_slack", 1e-8);
    const auto kernel_ladder = c.int_list("verify.kernel_ladder", "16,32,64");
    const double factor = c.real("verify.kernel_factor", 2.0);
    const BoundaryVariant variant = detail::parse_variant(c, "verify.kernel_variant");
    const int sign = detail::parse_sign(c, "verify.kernel_sign");
    c.check_unused({"verify", "run"}, {"grid", "solve", "verify", "flow", "run"});
    if (checks.empty()) throw ConfigError("config: no checks selected");
    if (ctx.ladder.size() < 2 || kernel_ladder.size() < 2) throw ConfigError("config: ladders need at least two levels");
    for (const auto& m : ctx.metrics)
        if (m != "flat" && m != "round" && m != "exp") throw ConfigError("config: unknown metric '" + m + "'");
    try {
        for (int n : ctx.ladder) (void)PolarGrid(n, 2 * n);
        for (int n : kernel_ladder) (void)PolarGrid(n, 2 * n);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    run.grid = {{"ladder", ctx.ladder}, {"kernel_ladder", kernel_ladder}, {"n_theta", "2 n_r"}};
    run.tolerances = {{"rate_min", ctx.rate_min}, {"reilly_rate_min", reilly_rate}, {"prop31_slack", slack}, {"kernel_factor", factor}};
    nlohmann::ordered_json summary;
    std::vector<std::string> failed;
    try {
        for (const auto& ch : checks) {
            CheckResult r;
            if (ch == "green") r = detail::verify_green(ctx);
            else if (ch == "twistor") r = detail::verify_twistor(ctx);
            else if (ch == "weitzenbock") r = detail::verify_weitzenbock(ctx);
            else if (ch == "prop31") r = detail::verify_prop31(ctx, samples, n_sample, slack);
            else if (ch == "reilly") r = detail::verify_reilly(ctx, reilly_rate);
            else r = detail::verify_kernel(ctx, kernel_ladder, factor, variant, sign);
            run.text("verify_" + ch + ".csv", detail::table_csv(r.rows));
            r.summary["pass"] = r.pass;
            summary[ch] = r.summary;
            if (!r.pass) failed.push_back(ch);
        }
    } catch (const SolverError& e) {
        run.summary = summary;
        return {solver_failure, e.what()};
    }
    run.json("verify_summary.json", summary);
    run.summary = summary;
    if (!failed.empty()) {
        std::string f;
        for (const auto& s : failed) f += (f.empty() ? "" : ",") + s;
        return {tolerance_failure, "checks below threshold: " + f};
    }
    return {ok, "all checks passed"};
}

// ---------------------------------------------------------------------------
// flow

inline Outcome cmd_flow(Run& run) {
    Config& c = run.cfg();
    FlowConfig f;
    const PolarGrid g = detail::parse_grid(c, 24);
    f.n_r = g.n_r;
    f.n_theta = g.n_theta;
    f.q = c.integer("flow.q", 3);
    f.dt = c.real("flow.dt", 1e-3);
    f.t_end = c.real("flow.t_end", 1e-2);
    f.map.name = c.choice("flow.map", "equivariant", {"constant", "equivariant", "holomorphic"});
    f.map.param = c.real("flow.map_param", 2.0);
    f.map.rotation = c.real("flow.rotation", 0.0);
    f.spinor.name = c.choice("flow.spinor", "tangent", {"zero", "tangent"});
    f.spinor.amplitude = c.real("flow.spinor_amplitude", 0.5);
    f.sign = detail::parse_sign(c, "flow.sign");
    f.variant = detail::parse_variant(c, "flow.variant");
    f.blowup_threshold = c.real("flow.blowup_threshold", 1e3);
    f.tubular_radius = c.real("flow.tubular_radius", 0.5);
    const std::string scheme = c.choice("flow.scheme", "coupled", {"coupled", "harmonic_reference"});
    const int dump_every = c.integer("flow.dump_every", 0);
    c.check_unused({"grid", "flow", "run"}, {"grid", "solve", "verify", "flow", "run"});
    if (f.q < 3) throw ConfigError("config: flow.q must be at least 3");
    if (dump_every < 0) throw ConfigError("config: flow.dump_every must be >= 0");
    if (scheme == "harmonic_reference" && !f.spinor.is_zero()) throw ConfigError("config: harmonic_reference needs flow.spinor = zero");
    try {
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    run.grid = {{"n_r", f.n_r}, {"n_theta", f.n_theta}, {"dt", f.dt}, {"t_end", f.t_end}};
    run.tolerances = {{"blowup_threshold", f.blowup_threshold}, {"tubular_radius", f.tubular_radius}};

    std::ostringstream jl;
    auto on_step = [&](const FlowState& s, int k) {
        const auto& m = s.monitors;
        nlohmann::ordered_json j{{"step", k}, {"t", m.t}, {"energy", m.energy}, {"grad_sup", m.grad_sup}, {"constraint_sup", m.constraint_sup}, {"tangency_sup", m.tangency_sup}};
        jl << j.dump() << '\n';
        if (dump_every > 0 && k % dump_every == 0) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "fields/step_%06d", k);
            for (int a = 0; a < f.q; ++a) run.field(std::string(stem) + "_phi" + std::to_string(a) + ".csv", to_complex(s.phi[a]), "flat");
            if (scheme == "coupled" && !f.spinor.is_zero())
                for (int a = 0; a < f.q; ++a)
                    for (int sl = 0; sl < 4; ++sl)
                        run.field(std::string(stem) + "_psi" + std::to_string(a) + "_slot" + std::to_string(sl) + ".csv", s.psi[a].slot(sl), "flat");
        }
    };
    FlowResult res;
    try {
        res = scheme == "coupled" ? run_flow(f, on_step) : run_harmonic_flow_sphere(f, on_step);
    } catch (const SolverError& e) {
        run.text("monitors.jsonl", jl.str());
        return {solver_failure, e.what()};
    }
    run.text("monitors.jsonl", jl.str());
    const char* status = res.status == FlowStatus::completed ? "completed" : res.status == FlowStatus::blowup ? "blowup" : "constraint";
    const auto& fm = res.final_state.monitors;
    nlohmann::ordered_json s{{"status", status},
                             {"steps", res.steps},
                             {"message", res.message},
                             {"final", {{"t", fm.t}, {"energy", fm.energy}, {"grad_sup", fm.grad_sup}, {"constraint_sup", fm.constraint_sup}, {"tangency_sup", fm.tangency_sup}}}};
    run.json("flow_summary.json", s);
    run.summary = s;
    if (res.status == FlowStatus::blowup) return {flow_blowup, res.message};
    if (res.status == FlowStatus::constraint) return {flow_constraint, res.message};
    return {ok, "flow completed"};
}

// ---------------------------------------------------------------------------

inline int main(int argc, char** argv, std::ostream& err = std::cerr) {
    CLI::App app{"spindisk: Dirac boundary problems, identity checks and coupled flow on the unit disk"};
    app.require_subcommand(1);
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string command;
    for (const char* name : {"solve", "verify", "flow"}) {
        auto* sub = app.add_subcommand(name, std::string(name) + " from an INI config");
        sub->add_option("config", config_path, "config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "random seed (overrides [run] seed)");
        sub->callback([&command, name] { command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : config_error;
    }
    try {
        Config cfg = Config::load(config_path);
        if (seed) cfg.set("run.seed", std::to_string(*seed));
        const int s = cfg.integer("run.seed", 0);
        if (s < 0) throw ConfigError("config: seed must be non-negative");
        Run run(command, cfg, out_dir, static_cast<std::uint64_t>(s));
        Outcome o;
        try {
            o = command == "solve" ? cmd_solve(run) : command == "verify" ? cmd_verify(run) : cmd_flow(run);
        } catch (const SolverError& e) {
            o = {solver_failure, e.what()};
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
        run.finish(o.code, o.message);
        (o.code == ok ? std::cout : err) << command << ": " << o.message << " (exit " << o.code << ")\n";
        return o.code;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return config_error;
    }
}

} // namespace spindisk::cli
