#pragma once

// Config-driven experiment runner behind the keiter executable. Needs the
// vendored nlohmann json header and OpenSSL::Crypto.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "keiter/asymptotics.hpp"
#include "keiter/bergman.hpp"
#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/io.hpp"
#include "keiter/tsuji.hpp"
#include "keiter/variation.hpp"

namespace keiter::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

struct ShapeSpec {
    std::string kind;
    double shift = 0.0;
    std::vector<double> coefficients;
    double amplitude = 0.0, frequency = 1.0, phase = 0.0;
};

struct InstanceSpec {
    std::string kind = "poincare";  // poincare | manufactured
    double R = 1.0;
    ShapeSpec perturbation{"polynomial"};
};

struct ScheduleSpec {
    std::string kind = "kahler_einstein";
    int n = 1;
    double c_conv = std::numbers::pi;
};

struct NumericSpec {
    int k0 = 2;
    int k_max = 30;
    std::size_t truncation_cap = 65536;
    std::size_t grid_size = 512;
    double tail_tol = 1e-15;
    double check_tol = 1e-9;
    int panels = 64;
    int points_per_panel = 16;
};

struct ExpansionSpec {
    std::vector<int> k_list{8, 16, 24, 32, 40, 48};
    std::vector<double> points{0.0, 0.3, 0.6, 0.9};
    double fit_k_min = 0.0;
    double fit_k_max = kInf;
    std::optional<double> max_residual;
    std::optional<double> min_order;
};

struct LaplaceSpec {
    std::vector<std::string> fixtures = laplace_fixture_names();
    std::vector<double> lambdas{20, 40, 80, 160};
    double slope_band = 0.2;
};

struct VariationSpec {
    std::string family = "exp_minus";  // exp_minus | exp_plus | constant
    std::string potential = "ke_glued";
    int t_points = 9;
    int z_points = 9;
    double tol = 1e-6;
    double violation_level = 1e-3;
};

struct OracleSpec {
    int k = 4;
    std::size_t J = 64;
};

struct ExperimentConfig {
    std::string experiment;
    InstanceSpec instance;
    ShapeSpec start{"phi_inf"};
    ScheduleSpec schedule;
    NumericSpec numeric;
    ExpansionSpec expansion;
    LaplaceSpec laplace;
    VariationSpec variation;
    OracleSpec oracle;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    json raw;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& msg) { throw Error(Errc::config_invalid, msg); }

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) invalid("'" + where + "' must be an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) invalid("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline ShapeSpec parse_shape(const json& j, const std::string& where, ShapeSpec s) {
    allow_keys(j, where, {"kind", "shift", "coefficients", "amplitude", "frequency", "phase"});
    get(j, "kind", s.kind);
    get(j, "shift", s.shift);
    get(j, "coefficients", s.coefficients);
    get(j, "amplitude", s.amplitude);
    get(j, "frequency", s.frequency);
    get(j, "phase", s.phase);
    return s;
}

inline json shape_json(const ShapeSpec& s) {
    return {{"kind", s.kind},           {"shift", s.shift},         {"coefficients", s.coefficients},
            {"amplitude", s.amplitude}, {"frequency", s.frequency}, {"phase", s.phase}};
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    using detail::invalid;
    static const std::set<std::string> experiments{"iterate", "expansion", "laplace", "variation", "oracle-dump"};
    if (!experiments.count(c.experiment)) invalid("unknown experiment '" + c.experiment + "'");
    if (c.instance.kind != "poincare" && c.instance.kind != "manufactured")
        invalid("unknown instance kind '" + c.instance.kind + "'");
    if (!(c.instance.R > 0.0)) invalid("instance.R must be positive");
    if (c.instance.perturbation.kind != "polynomial" && c.instance.perturbation.kind != "sine")
        invalid("instance.perturbation.kind must be polynomial or sine");
    static const std::set<std::string> starts{"phi_inf", "phi_L", "shift", "polynomial", "sine"};
    if (!starts.count(c.start.kind)) invalid("unknown start kind '" + c.start.kind + "'");
    if (c.schedule.kind != "kahler_einstein" && c.schedule.kind != "generic")
        invalid("unknown schedule kind '" + c.schedule.kind + "'");
    if (c.schedule.n < 1) invalid("schedule.n must be >= 1");
    if (!(c.schedule.c_conv > 0.0)) invalid("schedule.c_conv must be positive");
    const auto& n = c.numeric;
    if (n.k0 < 2) invalid("numeric.k0 must be >= 2: the first step at k = 1 is degenerate (the weight drops out)");
    if (n.k_max < n.k0) invalid("numeric.k_max must be >= k0");
    if (n.truncation_cap < 8) invalid("numeric.truncation_cap must be >= 8");
    if (n.grid_size < 4) invalid("numeric.grid_size must be >= 4");
    if (!(n.tail_tol > 0.0) || !(n.check_tol > 0.0)) invalid("tolerances must be positive");
    if (n.panels < 1 || n.points_per_panel < 2) invalid("numeric quadrature must have panels >= 1, points >= 2");
    for (int k : c.expansion.k_list)
        if (k < 2) invalid("expansion.k_list entries must be >= 2");
    for (double s : c.expansion.points)
        if (!(s >= 0.0) || !(s < c.instance.R * c.instance.R)) invalid("expansion.points must lie in [0, R^2)");
    for (const auto& f : c.laplace.fixtures) {
        auto names = laplace_fixture_names();
        if (std::find(names.begin(), names.end(), f) == names.end()) invalid("unknown Laplace fixture '" + f + "'");
    }
    for (double l : c.laplace.lambdas)
        if (!(l > 0.0)) invalid("laplace.lambdas must be positive");
    static const std::set<std::string> fams{"exp_minus", "exp_plus", "constant"};
    if (!fams.count(c.variation.family)) invalid("unknown variation family '" + c.variation.family + "'");
    if (c.variation.potential != "ke_glued" && c.variation.potential != "bergman_log")
        invalid("variation.potential must be ke_glued or bergman_log");
    if (c.variation.t_points < 1 || c.variation.z_points < 1) invalid("variation grid must be non-empty");
    if (!(c.variation.tol > 0.0)) invalid("variation.tol must be positive");
    if (c.oracle.k < 2 || c.oracle.J < 1) invalid("oracle needs k >= 2 and J >= 1");
}

inline ExperimentConfig parse_config(const json& j) {
    using detail::get;
    ExperimentConfig c;
    try {
        detail::allow_keys(j, "config", {"experiment", "instance", "start", "schedule", "numeric", "expansion",
                                         "laplace", "variation", "oracle", "output_dir", "seed"});
        if (!j.contains("experiment")) detail::invalid("missing 'experiment'");
        get(j, "experiment", c.experiment);
        if (j.contains("instance")) {
            const auto& i = j["instance"];
            detail::allow_keys(i, "instance", {"kind", "R", "perturbation"});
            get(i, "kind", c.instance.kind);
            get(i, "R", c.instance.R);
            if (i.contains("perturbation"))
                c.instance.perturbation = detail::parse_shape(i["perturbation"], "instance.perturbation", c.instance.perturbation);
        }
        if (j.contains("start")) c.start = detail::parse_shape(j["start"], "start", c.start);
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            detail::allow_keys(s, "schedule", {"kind", "n", "c_conv"});
            get(s, "kind", c.schedule.kind);
            get(s, "n", c.schedule.n);
            get(s, "c_conv", c.schedule.c_conv);
        }
        if (j.contains("numeric")) {
            const auto& n = j["numeric"];
            detail::allow_keys(n, "numeric", {"k0", "k_max", "truncation_cap", "grid_size", "tail_tol", "check_tol",
                                              "panels", "points_per_panel"});
            get(n, "k0", c.numeric.k0);
            get(n, "k_max", c.numeric.k_max);
            get(n, "truncation_cap", c.numeric.truncation_cap);
            get(n, "grid_size", c.numeric.grid_size);
            get(n, "tail_tol", c.numeric.tail_tol);
            get(n, "check_tol", c.numeric.check_tol);
            get(n, "panels", c.numeric.panels);
            get(n, "points_per_panel", c.numeric.points_per_panel);
        }
        if (j.contains("expansion")) {
            const auto& e = j["expansion"];
            detail::allow_keys(e, "expansion", {"k_list", "points", "fit_k_min", "fit_k_max", "max_residual", "min_order"});
            get(e, "k_list", c.expansion.k_list);
            get(e, "points", c.expansion.points);
            get(e, "fit_k_min", c.expansion.fit_k_min);
            get(e, "fit_k_max", c.expansion.fit_k_max);
            if (e.contains("max_residual")) c.expansion.max_residual = e["max_residual"].get<double>();
            if (e.contains("min_order")) c.expansion.min_order = e["min_order"].get<double>();
        }
        if (j.contains("laplace")) {
            const auto& l = j["laplace"];
            detail::allow_keys(l, "laplace", {"fixtures", "lambdas", "slope_band"});
            get(l, "fixtures", c.laplace.fixtures);
            get(l, "lambdas", c.laplace.lambdas);
            get(l, "slope_band", c.laplace.slope_band);
        }
        if (j.contains("variation")) {
            const auto& v = j["variation"];
            detail::allow_keys(v, "variation", {"family", "potential", "t_points", "z_points", "tol", "violation_level"});
            get(v, "family", c.variation.family);
            get(v, "potential", c.variation.potential);
            get(v, "t_points", c.variation.t_points);
            get(v, "z_points", c.variation.z_points);
            get(v, "tol", c.variation.tol);
            get(v, "violation_level", c.variation.violation_level);
        }
        if (j.contains("oracle")) {
            const auto& o = j["oracle"];
            detail::allow_keys(o, "oracle", {"k", "J"});
            get(o, "k", c.oracle.k);
            get(o, "J", c.oracle.J);
        }
        get(j, "output_dir", c.output_dir);
        get(j, "seed", c.seed);
    } catch (const json::exception& e) {
        detail::invalid(e.what());
    }
    validate(c);
    c.raw = j;
    return c;
}

// JSON text with comments allowed.
inline ExperimentConfig parse_config_text(std::string_view text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        detail::invalid(e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const fs::path& p) {
    std::string text;
    try {
        text = io::read_file(p);
    } catch (const Error& e) {
        detail::invalid(e.what());
    }
    json j;
    try {
        j = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        detail::invalid(p.string() + ": " + e.what());
    }
    return parse_config(j);
}

// Effective configuration after defaults and overrides, as written to the manifest.
inline json to_json(const ExperimentConfig& c) {
    json j;
    j["experiment"] = c.experiment;
    j["instance"] = {{"kind", c.instance.kind}, {"R", c.instance.R}, {"perturbation", detail::shape_json(c.instance.perturbation)}};
    j["start"] = detail::shape_json(c.start);
    j["schedule"] = {{"kind", c.schedule.kind}, {"n", c.schedule.n}, {"c_conv", c.schedule.c_conv}};
    const auto& n = c.numeric;
    j["numeric"] = {{"k0", n.k0},
                    {"k_max", n.k_max},
                    {"truncation_cap", n.truncation_cap},
                    {"grid_size", n.grid_size},
                    {"tail_tol", n.tail_tol},
                    {"check_tol", n.check_tol},
                    {"panels", n.panels},
                    {"points_per_panel", n.points_per_panel}};
    const auto& e = c.expansion;
    j["expansion"] = {{"k_list", e.k_list}, {"points", e.points}, {"fit_k_min", e.fit_k_min}};
    if (std::isfinite(e.fit_k_max)) j["expansion"]["fit_k_max"] = e.fit_k_max;
    if (e.max_residual) j["expansion"]["max_residual"] = *e.max_residual;
    if (e.min_order) j["expansion"]["min_order"] = *e.min_order;
    j["laplace"] = {{"fixtures", c.laplace.fixtures}, {"lambdas", c.laplace.lambdas}, {"slope_band", c.laplace.slope_band}};
    const auto& v = c.variation;
    j["variation"] = {{"family", v.family}, {"potential", v.potential}, {"t_points", v.t_points},
                      {"z_points", v.z_points}, {"tol", v.tol}, {"violation_level", v.violation_level}};
    j["oracle"] = {{"k", c.oracle.k}, {"J", c.oracle.J}};
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    return j;
}

inline RadialPotential make_shape(const ShapeSpec& s) {
    if (s.kind == "polynomial") return potentials::polynomial(s.coefficients);
    if (s.kind == "sine") return potentials::sine(s.amplitude, s.frequency, s.phase);
    if (s.kind == "shift") return potentials::constant(s.shift);
    throw Error(Errc::config_invalid, "shape kind '" + s.kind + "' is not a perturbation");
}

inline MAInstance make_instance(const InstanceSpec& s) {
    auto base = poincare_instance(s.R);
    if (s.kind == "poincare") return base;
    return manufacture_instance(make_shape(s.perturbation), base);
}

inline RadialPotential make_start(const ShapeSpec& s, const MAInstance& inst) {
    if (s.kind == "phi_inf") return inst.phi_inf;
    if (s.kind == "phi_L") return inst.phi_L;
    if (s.kind == "shift") return inst.phi_inf.plus_constant(s.shift);
    return inst.phi_inf + make_shape(s);
}

inline DkSchedule make_schedule(const ScheduleSpec& s) {
    return s.kind == "generic" ? DkSchedule::generic(s.n, s.c_conv) : DkSchedule::kahler_einstein(s.n, s.c_conv);
}

inline BetaOptions make_beta_options(const NumericSpec& n) {
    BetaOptions b;
    b.grid_size = n.grid_size;
    b.moments.tail_tol = n.tail_tol;
    b.moments.j_cap = n.truncation_cap;
    b.moments.quad.panels = n.panels;
    b.moments.quad.points_per_panel = n.points_per_panel;
    return b;
}

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tol = 0.0;
    std::string detail;
};

inline json to_json(const Check& c) {
    json j{{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
    j["value"] = std::isfinite(c.value) ? json(c.value) : json(io::fmt(c.value));
    j["tol"] = c.tol;
    return j;
}

struct RunOptions {
    std::optional<fs::path> out_dir;
    std::optional<double> tol_override;
    unsigned threads = 1;
};

struct RunResult {
    int exit_code = 0;
    fs::path out_dir;
    std::vector<Check> checks;
    json summary;
};

namespace detail {

struct Outputs {
    fs::path dir;
    std::vector<std::string> files;
    void write(const std::string& name, const std::string& content) {
        io::write_file(dir / name, content);
        files.push_back(name);
    }
};

inline std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json rate_json(const IterationTrace& tr, RateModel m, double k_min) {
    try {
        auto f = rate_fit(tr, m, k_min);
        return {{"C", f.C}, {"alpha", f.alpha}, {"residual", f.residual}, {"points", f.points}, {"k_min", k_min}};
    } catch (const Error& e) {
        if (e.code() != Errc::insufficient_data) throw;
        return nullptr;
    }
}

inline void run_iterate(const ExperimentConfig& c, Outputs& out, std::vector<Check>& checks, json& summary) {
    auto inst = make_instance(c.instance);
    auto sch = make_schedule(c.schedule);
    IterateOptions opt;
    opt.beta = make_beta_options(c.numeric);
    auto t0 = std::chrono::steady_clock::now();
    auto tr = iterate(make_start(c.start, inst), inst, sch, c.numeric.k0, c.numeric.k_max, opt);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    io::Csv csv({"k", "sup_error", "eps_k", "truncation_J"});
    for (const auto& r : tr.records) csv.row({(long long)r.k, r.sup_error, r.eps_k, (long long)r.truncation});
    out.write("trace.csv", csv.str());

    const double tol = c.numeric.check_tol;
    // e_{k+1} <= ((k-1)/k) e_k + eps_k, and e_k <= 2 (e_{k0} k0 / k + sum_{j<=k} eps_j)
    double rec_slack = kInf, sum_slack = kInf;
    double e0 = tr.records.front().sup_error, eps_sum = 0.0;
    for (std::size_t i = 0; i < tr.records.size(); ++i) {
        const auto& r = tr.records[i];
        eps_sum += r.eps_k;
        sum_slack = std::min(sum_slack, 2.0 * (e0 * c.numeric.k0 / r.k + eps_sum) - r.sup_error);
        if (i + 1 < tr.records.size()) {
            double bound = (r.k - 1.0) / r.k * r.sup_error + r.eps_k;
            rec_slack = std::min(rec_slack, bound - tr.records[i + 1].sup_error);
        }
    }
    if (tr.records.size() >= 2)
        checks.push_back({"recurrence_bound", rec_slack >= -tol, rec_slack, tol, "min over k of bound - e_{k+1}"});
    checks.push_back({"summed_bound", sum_slack >= -tol, sum_slack, tol, "min over k of 2(e_k0 k0/k + sum eps) - e_k"});

    double kmin = std::max(10.0, double(c.numeric.k0));
    summary["rate_fits"] = {{"inverse_k", rate_json(tr, RateModel::inverse_k, kmin)},
                            {"logk_over_k", rate_json(tr, RateModel::logk_over_k, kmin)}};
    summary["rows"] = tr.records.size();
    summary["final_sup_error"] = tr.records.back().sup_error;
    summary["instance"] = tr.instance;
    summary["schedule"] = tr.schedule;

    json timing = json::array();
    for (const auto& r : tr.records) timing.push_back({{"k", r.k}, {"seconds", r.seconds}});
    out.write("trace.json", json{{"instance", tr.instance},
                                 {"schedule", tr.schedule},
                                 {"c_conv", tr.c_conv},
                                 {"grid_size", tr.grid_size},
                                 {"rate_fits", summary["rate_fits"]},
                                 {"total_seconds", secs},
                                 {"steps", timing}}
                                .dump(2) + "\n");
}

inline void run_expansion(const ExperimentConfig& c, Outputs& out, std::vector<Check>& checks, json& summary) {
    auto inst = make_instance(c.instance);
    auto sch = make_schedule(c.schedule);
    MomentOptions mo = make_beta_options(c.numeric).moments;
    const auto& e = c.expansion;
    auto rep = expansion_check(inst, e.k_list, e.points, sch, mo, e.fit_k_min, e.fit_k_max);
    io::Csv csv({"k", "s", "B_measured", "B_predicted", "residual"});
    for (const auto& r : rep.records) csv.row({(long long)r.k, r.s, r.measured, r.predicted, r.residual});
    out.write("expansion.csv", csv.str());
    double worst = 0.0;
    for (double m : rep.max_residual) worst = std::max(worst, m);
    summary["decay_order"] = rep.fitted ? json(rep.decay_order) : json(nullptr);
    summary["decay_constant"] = rep.fitted ? json(rep.decay_constant) : json(nullptr);
    summary["max_residual"] = worst;
    summary["instance"] = inst.description;
    summary["schedule"] = to_string(sch.kind);
    out.write("expansion.json", json{{"instance", inst.description},
                                     {"k_list", e.k_list},
                                     {"max_residual_per_k", rep.max_residual},
                                     {"decay_order", summary["decay_order"]},
                                     {"decay_constant", summary["decay_constant"]}}
                                    .dump(2) + "\n");
    if (e.max_residual) checks.push_back({"max_residual", worst <= *e.max_residual, worst, *e.max_residual, ""});
    if (e.min_order)
        checks.push_back({"decay_order", rep.fitted && rep.decay_order >= *e.min_order,
                          rep.fitted ? rep.decay_order : kNaN, *e.min_order, "fit of max residual against C k^-alpha"});
}

inline void run_laplace(const ExperimentConfig& c, Outputs& out, std::vector<Check>& checks, json& summary) {
    io::Csv csv({"fixture", "lambda", "oracle", "expand_l0", "expand_l1", "err_l0", "err_l1"});
    json fx = json::array();
    const double band = c.laplace.slope_band;
    for (const auto& name : c.laplace.fixtures) {
        auto f = laplace_fixture(name);
        auto conv = laplace_convergence(f, c.laplace.lambdas);
        for (const auto& r : conv.rows)
            csv.row({name, r.lambda, r.oracle, r.expand_l0, r.expand_l1, r.err_l0, r.err_l1});
        json item{{"fixture", name}, {"l1", conv.l1}, {"slope_l0", conv.slope_l0}, {"slope_l1", conv.slope_l1}};
        if (f.expected_l1) {
            item["expected_l1"] = *f.expected_l1;
            double d = std::abs(conv.l1 - *f.expected_l1);
            checks.push_back({"l1_" + name, d <= c.numeric.check_tol, d, c.numeric.check_tol, "|L1 - expected|"});
        }
        if (f.slope && c.laplace.lambdas.size() >= 2) {
            checks.push_back({"slope_l1_" + name, std::abs(conv.slope_l1 - 2.0) <= band, conv.slope_l1, band,
                              "expected 2"});
            checks.push_back({"slope_l0_" + name, std::abs(conv.slope_l0 - 1.0) <= band, conv.slope_l0, band,
                              "expected 1"});
        }
        fx.push_back(item);
    }
    out.write("laplace.csv", csv.str());
    out.write("laplace.json", json{{"lambdas", c.laplace.lambdas}, {"fixtures", fx}}.dump(2) + "\n");
    summary["fixtures"] = fx;
}

inline DiscFamily make_family(const VariationSpec& v) {
    auto kind = v.potential == "bergman_log" ? PotentialKind::bergman_log : PotentialKind::ke_glued;
    if (v.family == "exp_minus") return families::gaussian(-1.0, kind);
    if (v.family == "exp_plus") return families::gaussian(1.0, kind);
    return families::constant(1.0, kind);
}

inline void run_variation(const ExperimentConfig& c, Outputs& out, std::vector<Check>& checks, json& summary,
                          unsigned threads) {
    auto fam = make_family(c.variation);
    ScanGrid g;
    g.t_points = c.variation.t_points;
    g.z_points = c.variation.z_points;
    g.tol = c.variation.tol;
    g.threads = threads;
    auto rep = psh_scan(fam, g);
    io::Csv csv({"t_re", "t_im", "z_re", "z_im", "eig_min", "eig_max"});
    for (const auto& s : rep.samples)
        csv.row({s.t.real(), s.t.imag(), s.z.real(), s.z.imag(), s.form.eig_min, s.form.eig_max});
    out.write("levi.csv", csv.str());
    const auto& am = rep.samples[rep.argmin];
    json v{{"family", fam.description},
           {"potential", c.variation.potential},
           {"verdict", rep.verdict()},
           {"min_eig", rep.min_eig},
           {"argmin", {{"t_re", am.t.real()}, {"t_im", am.t.imag()}, {"z_re", am.z.real()}, {"z_im", am.z.imag()}}},
           {"tol", rep.tol}};
    if (fam.kind == PotentialKind::ke_glued) {
        std::vector<cplx> ts;
        for (const auto& s : rep.samples) ts.push_back(s.t);
        std::sort(ts.begin(), ts.end(), [](cplx a, cplx b) { return std::pair(a.real(), a.imag()) < std::pair(b.real(), b.imag()); });
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        auto fb = fiber_uniform_bound_check(fam, ts);
        v["fiber_bound"] = {{"bound", fb.bound}, {"expected", fb.expected_bound}, {"max_oscillation", fb.max_oscillation}};
        checks.push_back({"fiber_constancy", fb.max_oscillation <= 1e-10, fb.max_oscillation, 1e-10, ""});
    }
    out.write("levi.json", v.dump(2) + "\n");
    summary["verdict"] = rep.verdict();
    summary["min_eig"] = rep.min_eig;
    switch (fam.pseudoconvex) {
    case Expectation::yes:
        checks.push_back({"psh_confirmed", rep.psh(), rep.min_eig, rep.tol, "pseudoconvex family"});
        break;
    case Expectation::no:
        checks.push_back({"violation", rep.min_eig <= -c.variation.violation_level, rep.min_eig,
                          c.variation.violation_level, "anti-pseudoconvex family"});
        break;
    case Expectation::boundary: break;
    }
    if (c.variation.family == "constant") {
        double tol = std::min(c.variation.tol, 1e-9);
        checks.push_back({"degenerate_direction", std::abs(rep.min_eig) <= tol, rep.min_eig, tol, "t-direction"});
    }
}

// m_j of e^{-(k-1) phi} d lambda on the Poincare disc of radius R: pi R^{2j+2} (R^2/2)^{k-1} B(j+1, 2k-1)
inline double poincare_log_moment(int k, std::size_t j, double R) {
    double a = j + 1.0, b = 2.0 * k - 1.0;
    return std::log(std::numbers::pi) + (2.0 * j + 2.0) * std::log(R) + (k - 1.0) * (2.0 * std::log(R) - std::log(2.0)) +
           std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline void run_oracle(const ExperimentConfig& c, Outputs& out, std::vector<Check>& checks, json& summary) {
    auto inst = make_instance(c.instance);
    MomentOptions mo = make_beta_options(c.numeric).moments;
    auto ms = compute_moments(measure_log_density(inst.phi_inf, inst, c.oracle.k), inst.s_max(), c.oracle.J, mo);
    const bool closed = c.instance.kind == "poincare";
    io::Csv csv({"j", "log_m", "m", "closed_form", "rel_err"});
    double worst = 0.0;
    for (std::size_t j = 0; j <= ms.J(); ++j) {
        double cf = closed ? std::exp(poincare_log_moment(c.oracle.k, j, c.instance.R)) : kNaN;
        double m = std::exp(ms.log_m[j]);
        double rel = closed ? std::abs(std::expm1(ms.log_m[j] - poincare_log_moment(c.oracle.k, j, c.instance.R))) : kNaN;
        if (closed) worst = std::max(worst, rel);
        csv.row({(long long)j, ms.log_m[j], m, cf, rel});
    }
    out.write("moments.csv", csv.str());
    summary["J"] = ms.J();
    summary["quad_error"] = ms.quad_error;
    if (closed) {
        summary["max_rel_err"] = worst;
        double tol = std::min(c.numeric.check_tol, 1e-11);
        checks.push_back({"beta_closed_form", worst <= tol, worst, tol, "moments against the Beta integral"});
    }
}

// Removes the files a previous run listed; refuses directories it did not create.
inline void prepare_dir(const fs::path& dir) {
    if (!fs::exists(dir)) {
        fs::create_directories(dir);
        return;
    }
    if (!fs::is_directory(dir)) invalid(dir.string() + " is not a directory");
    if (fs::is_empty(dir)) return;
    auto mf = dir / "manifest.json";
    if (!fs::exists(mf)) invalid("output directory " + dir.string() + " is not empty and holds no manifest");
    json m;
    try {
        m = json::parse(io::read_file(mf));
        for (const auto& f : m.at("files")) fs::remove(dir / f.at("path").get<std::string>());
    } catch (const json::exception&) {
        invalid("output directory " + dir.string() + " holds an unreadable manifest");
    }
    fs::remove(mf);
}

}  // namespace detail

inline RunResult run(ExperimentConfig cfg, const RunOptions& ro = {}) {
    if (ro.tol_override) {
        if (!(*ro.tol_override > 0.0)) detail::invalid("--tol-override must be positive");
        cfg.numeric.check_tol = *ro.tol_override;
        cfg.variation.tol = *ro.tol_override;
    }
    if (ro.out_dir) cfg.output_dir = ro.out_dir->string();
    validate(cfg);
    RunResult res;
    res.out_dir = cfg.output_dir;
    detail::prepare_dir(res.out_dir);
    detail::Outputs out{res.out_dir, {}};
    const std::string started = detail::utc_now();
    std::string error;
    try {
        if (cfg.experiment == "iterate") detail::run_iterate(cfg, out, res.checks, res.summary);
        else if (cfg.experiment == "expansion") detail::run_expansion(cfg, out, res.checks, res.summary);
        else if (cfg.experiment == "laplace") detail::run_laplace(cfg, out, res.checks, res.summary);
        else if (cfg.experiment == "variation") detail::run_variation(cfg, out, res.checks, res.summary, ro.threads);
        else detail::run_oracle(cfg, out, res.checks, res.summary);
    } catch (const Error& e) {
        if (e.code() == Errc::config_invalid) throw;
        error = e.what();
        res.checks.push_back({"completed", false, kNaN, 0.0, error});
    }
    bool pass = std::all_of(res.checks.begin(), res.checks.end(), [](const Check& c) { return c.pass; });
    res.exit_code = pass ? 0 : 2;

    json files = json::array();
    std::sort(out.files.begin(), out.files.end());
    for (const auto& f : out.files)
        files.push_back({{"path", f}, {"sha256", io::sha256_file(res.out_dir / f)}, {"bytes", fs::file_size(res.out_dir / f)}});
    json checks = json::array();
    for (const auto& c : res.checks) checks.push_back(to_json(c));
    json manifest{{"tool", "keiter"},
                  {"version", kVersion},
                  {"config", to_json(cfg)},
                  {"experiment", cfg.experiment},
                  {"started", started},
                  {"finished", detail::utc_now()},
                  {"status", pass ? "pass" : "fail"},
                  {"checks", checks},
                  {"summary", res.summary},
                  {"files", files}};
    if (!error.empty()) manifest["error"] = error;
    io::write_file(res.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return res;
}

struct ReportRow {
    std::string run;
    std::string experiment;
    std::string instance;
    std::string schedule;
    std::string status;
    int checks_passed = 0;
    int checks_total = 0;
    double alpha_inverse_k = kNaN;
    double alpha_logk_over_k = kNaN;
};

struct Report {
    std::vector<ReportRow> rows;
    std::string csv() const;
    json to_json() const;
};

inline std::string Report::csv() const {
    io::Csv c({"run", "experiment", "instance", "schedule", "status", "checks_passed", "checks_total",
               "alpha_inverse_k", "alpha_logk_over_k"});
    for (const auto& r : rows)
        c.row({r.run, r.experiment, r.instance, r.schedule, r.status, (long long)r.checks_passed,
               (long long)r.checks_total, r.alpha_inverse_k, r.alpha_logk_over_k});
    return c.str();
}

inline json Report::to_json() const {
    json a = json::array();
    for (const auto& r : rows) {
        json j{{"run", r.run},
               {"experiment", r.experiment},
               {"instance", r.instance},
               {"schedule", r.schedule},
               {"status", r.status},
               {"checks_passed", r.checks_passed},
               {"checks_total", r.checks_total}};
        j["alpha_inverse_k"] = std::isfinite(r.alpha_inverse_k) ? json(r.alpha_inverse_k) : json(nullptr);
        j["alpha_logk_over_k"] = std::isfinite(r.alpha_logk_over_k) ? json(r.alpha_logk_over_k) : json(nullptr);
        a.push_back(j);
    }
    return {{"rows", a}};
}

// One row per run directory, ordered by path.
inline Report report(std::vector<fs::path> dirs) {
    std::sort(dirs.begin(), dirs.end());
    Report rep;
    for (const auto& d : dirs) {
        auto mf = d / "manifest.json";
        json m;
        try {
            m = json::parse(io::read_file(mf));
            ReportRow r;
            r.run = d.string();
            r.experiment = m.at("experiment").get<std::string>();
            r.status = m.at("status").get<std::string>();
            const auto& s = m.at("summary");
            if (s.is_object()) {
                if (s.contains("instance")) r.instance = s["instance"].get<std::string>();
                if (s.contains("schedule")) r.schedule = s["schedule"].get<std::string>();
                if (s.contains("rate_fits")) {
                    const auto& rf = s["rate_fits"];
                    if (rf.contains("inverse_k") && rf["inverse_k"].is_object())
                        r.alpha_inverse_k = rf["inverse_k"].at("alpha").get<double>();
                    if (rf.contains("logk_over_k") && rf["logk_over_k"].is_object())
                        r.alpha_logk_over_k = rf["logk_over_k"].at("alpha").get<double>();
                }
            }
            for (const auto& c : m.at("checks")) {
                ++r.checks_total;
                if (c.at("pass").get<bool>()) ++r.checks_passed;
            }
            rep.rows.push_back(r);
        } catch (const json::exception&) {
            throw Error(Errc::missing_manifest, mf.string());
        } catch (const Error&) {
            throw Error(Errc::missing_manifest, mf.string());
        }
    }
    return rep;
}

}  // namespace keiter::cli
