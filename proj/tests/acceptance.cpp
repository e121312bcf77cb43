// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "keiter/keiter.hpp"
#include "keiter/runner.hpp"

using namespace keiter;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) { return io::fmt(v); }

// eps_k caches shared between criteria, keyed by k
std::map<int, double> ke_eps, generic_eps;

std::vector<double> grid_upto(double s_max) {
    std::vector<double> out;
    for (double s : standard_grid(1.0))
        if (s <= s_max) out.push_back(s);
    return out;
}

Outcome ac1() {
    auto t0 = Clock::now();
    auto inst = poincare_instance(1.0);
    auto pts = grid_upto(0.9);
    double worst = 0;
    for (int k = 2; k <= 40; ++k) {
        auto space = WeightedSpace::build(inst.phi_inf, inst, k);
        double want = (2.0 * k - 1) / (2 * pi);
        for (double s : pts) worst = std::max(worst, std::abs(space.bergman_function(s) / want - 1));
    }
    double t = seconds_since(t0);
    return {worst <= 1e-8 && t <= 60, "max rel dev " + num(worst) + " (tol 1e-8), " + num(t) + " s (limit 60)"};
}

Outcome ac2() {
    auto inst = poincare_instance(1.0);
    double worst = 0;
    for (int k = 2; k <= 64; ++k) {
        ke_eps[k] = fixed_point_defect(k, inst, DkSchedule::kahler_einstein());
        worst = std::max(worst, ke_eps[k]);
    }
    return {worst <= 1e-9, "max eps_k over k in [2, 64] " + num(worst) + " (tol 1e-9)"};
}

Outcome ac3() {
    auto inst = poincare_instance(1.0);
    double worst = 0;
    std::vector<double> lk, le;
    for (int k = 2; k <= 64; ++k) {
        generic_eps[k] = fixed_point_defect(k, inst, DkSchedule::generic());
        worst = std::max(worst, std::abs(generic_eps[k] - std::abs(std::log1p(-0.5 / k) / k)));
        if (k >= 4) lk.push_back(std::log(k)), le.push_back(std::log(generic_eps[k]));
    }
    double order = -fit_line(lk, le).slope;
    return {worst <= 1e-10 && std::abs(order - 2) <= 0.1,
            "max closed-form dev " + num(worst) + " (tol 1e-10), decay order " + num(order) + " (2 +- 0.1)"};
}

Outcome ac4() {
    auto inst = poincare_instance(1.0);
    IterateOptions opt;
    opt.eps_cache = &ke_eps;
    auto sch = DkSchedule::kahler_einstein();
    auto shift = iterate(inst.phi_inf.plus_constant(1.0), inst, sch, 2, 50, opt);
    double worst = 0;
    for (const auto& r : shift.records) worst = std::max(worst, std::abs(r.sup_error - 1.0 / (r.k - 1)));
    bool ok = worst <= 1e-9;
    std::string d = "shift dev " + num(worst) + " (tol 1e-9); alpha";

    auto grid = standard_grid(1.0);
    std::vector<double> sine;
    for (double s : grid) sine.push_back(0.2 * std::sin(pi * s));
    std::vector<RadialPotential> starts{potentials::spline_offset(inst.phi_inf, grid, sine),
                                        inst.phi_inf + potentials::polynomial({0.0, 0.3, -0.2}),
                                        inst.phi_inf + potentials::polynomial({-0.3, 0.3})};
    for (const auto& st : starts) {
        auto tr = iterate(st, inst, sch, 2, 50, opt);
        double a = rate_fit(tr, RateModel::inverse_k, 10, 50).alpha;
        ok = ok && a >= 0.9;
        d += " " + num(a);
    }
    return {ok, d + " (>= 0.9)"};
}

Outcome ac5() {
    auto inst = manufacture_instance(potentials::polynomial({0.0, 0.05, -0.05}), poincare_instance(1.0));
    const int k0 = 2;
    auto tr = iterate(inst.phi_L, inst, DkSchedule::generic(), k0, 40);
    double rec_slack = kInf, sum_slack = kInf, eps_sum = 0;
    const double e0 = tr.records.front().sup_error;
    for (std::size_t i = 0; i < tr.records.size(); ++i) {
        const auto& r = tr.records[i];
        eps_sum += r.eps_k;
        sum_slack = std::min(sum_slack, 2 * (e0 * k0 / r.k + eps_sum) - r.sup_error);
        if (i + 1 < tr.records.size())
            rec_slack = std::min(rec_slack, (r.k - 1.0) / r.k * r.sup_error + r.eps_k - tr.records[i + 1].sup_error);
    }
    return {rec_slack >= -1e-9 && sum_slack >= -1e-9,
            "recurrence slack " + num(rec_slack) + ", summed-bound slack " + num(sum_slack) + " (>= -1e-9)"};
}

Outcome ac6() {
    auto inst = poincare_instance(1.0);
    auto sch = DkSchedule::kahler_einstein();
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> coef(-0.3, 0.3);
    int passed = 0, total = 0;
    double worst = kInf;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> c(4);
        for (auto& x : c) x = coef(rng);
        auto phi = inst.phi_inf + potentials::polynomial(c);
        for (int k : {4, 8, 16, 32}) {
            auto r = lemma_key_check(phi, k, inst, sch, {}, ke_eps.at(k));
            ++total;
            if (r.pass) ++passed;
            worst = std::min({worst, r.lower_margin, r.upper_margin});
        }
    }
    return {passed == total, std::to_string(passed) + "/" + std::to_string(total) + " sandwiches hold, min margin " + num(worst)};
}

Outcome ac7() {
    auto t0 = Clock::now();
    bool ok = true;
    std::string d = "L1 devs";
    const std::vector<std::pair<std::string, double>> fixtures{
        {"gaussian", 0.0}, {"second_moment", 0.5}, {"quartic", 0.75}, {"cubic", 15.0 / 16.0}};
    for (const auto& [name, want] : fixtures) {
        double dev = std::abs(laplace_l1(laplace_fixture(name).jet) - want);
        ok = ok && dev <= 1e-9;
        d += " " + num(dev);
    }
    d += "; slopes with/without L1";
    for (const auto& name : laplace_fixture_names()) {
        auto fx = laplace_fixture(name);
        if (!fx.slope) continue;
        auto c = laplace_convergence(fx, {20, 40, 80, 160});
        ok = ok && std::abs(c.slope_l1 - 2) <= 0.2 && std::abs(c.slope_l0 - 1) <= 0.2;
        d += " " + name + " " + num(c.slope_l1) + "/" + num(c.slope_l0);
    }
    double t = seconds_since(t0);
    ok = ok && t <= 10;
    return {ok, d + "; " + num(t) + " s (limit 10)"};
}

Outcome ac8() {
    auto inst = manufacture_instance(potentials::polynomial({0.0, 0.05, -0.05}), poincare_instance(1.0));
    std::vector<int> ks{8, 12, 16, 24, 32, 40, 48};
    auto rep = expansion_check(inst, ks, {0.0, 0.2, 0.4, 0.6, 0.8}, {}, {}, 8, 48);
    return {rep.fitted && rep.decay_order >= 0.8, "decay order " + num(rep.decay_order) + " (>= 0.8)"};
}

Outcome ac9() {
    auto minus_ke = psh_scan(families::gaussian(-1.0, PotentialKind::ke_glued));
    auto minus_bk = psh_scan(families::gaussian(-1.0, PotentialKind::bergman_log));
    auto plus_ke = psh_scan(families::gaussian(1.0, PotentialKind::ke_glued));
    auto flat = psh_scan(families::constant(1.0));
    double t_entry = 0;
    for (const auto& s : flat.samples)
        t_entry = std::max({t_entry, std::abs(s.form.M(0, 0)), std::abs(s.form.M(0, 1))});
    bool ok = minus_ke.psh() && minus_bk.psh() && !plus_ke.psh() && plus_ke.min_eig <= -1e-3 &&
              std::abs(flat.min_eig) <= 1e-9 && t_entry <= 1e-9;
    return {ok, "exp(-|t|^2) ke_glued " + minus_ke.verdict() + " (min " + num(minus_ke.min_eig) + "), bergman_log " +
                    minus_bk.verdict() + " (min " + num(minus_bk.min_eig) + "); exp(+|t|^2) " + plus_ke.verdict() +
                    " (min " + num(plus_ke.min_eig) + "); constant min eig " + num(flat.min_eig) + ", t-row " +
                    num(t_entry)};
}

Outcome ac10() {
    const std::size_t J = 32;
    auto inst = poincare_instance(1.0);
    std::vector<std::pair<std::string, LogDensity>> fixtures{
        {"poincare_k3", measure_log_density(inst.phi_inf, inst, 3)},
        {"flat", [](double, double) { return 0.0; }},
        {"gaussian", [](double s, double) { return -2.0 * s; }}};
    double worst = 0;
    for (const auto& [name, ld] : fixtures) {
        auto ms = compute_moments(ld, 1.0, J);
        GramOracle g(J, [&](std::complex<double> z) { double s = std::norm(z); return std::exp(ld(s, 1 - s)); }, 1.0);
        for (double s : {0.0, 0.25, 0.5, 0.75})
            worst = std::max(worst, std::abs(g(std::sqrt(s)) / kernel_partial_sum(ms, s) - 1));
    }
    return {worst <= 1e-10, "max rel dev " + num(worst) + " over 3 weights at J = 32 (tol 1e-10)"};
}

Outcome ac11() {
    double worst = 0;
    for (int p : {2, 3}) {
        ChartPotential phi = [p](const std::array<cplx, 2>& z) {
            return std::norm(z[0]) + std::real(std::pow(z[0], p) * std::conj(z[0]));
        };
        auto m = normalize_chart(jet_from_potential(phi, 1));
        auto r = chart_residual(phi, m);
        worst = std::max({worst, r.third, r.fourth});
    }
    return {worst <= 1e-7, "max post-transform mixed derivative " + num(worst) + " (tol 1e-7)"};
}

Outcome ac12() {
    auto root = fs::temp_directory_path() / ("keiter_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    int compared = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(KEITER_CONFIGS)) {
        auto cfg = cli::load_config(e.path());
        auto stem = e.path().stem().string();
        cli::RunOptions a, b;
        a.out_dir = root / (stem + "_a");
        b.out_dir = root / (stem + "_b");
        cli::run(cfg, a);
        cli::run(cfg, b);
        for (const auto& f : fs::directory_iterator(*a.out_dir)) {
            if (f.path().extension() != ".csv") continue;
            ++compared;
            if (io::read_file(f.path()) != io::read_file(*b.out_dir / f.path().filename())) ++differ;
        }
    }
    fs::remove_all(root);
    return {compared > 0 && differ == 0, std::to_string(compared) + " CSV files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"AC1 disc fixed-point Bergman function", ac1},
        {"AC2 KE-schedule fixed point", ac2},
        {"AC3 generic-schedule defect law", ac3},
        {"AC4 KE iteration rate", ac4},
        {"AC5 generic instance recurrence", ac5},
        {"AC6 key-lemma sandwich", ac6},
        {"AC7 Laplace engine", ac7},
        {"AC8 expansion on perturbed instance", ac8},
        {"AC9 variation dichotomy", ac9},
        {"AC10 Gram oracle equivalence", ac10},
        {"AC11 chart normalization", ac11},
        {"AC12 reproducibility", ac12},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        auto t0 = Clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
