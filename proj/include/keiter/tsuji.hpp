#pragma once

// The iteration phi_{k+1} = (1/k)(log K_{k phi_k, mu_{phi_k}} - log d_k) on a
// radial Monge-Ampere instance, with the sup-norm diagnostics around it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "keiter/bergman.hpp"
#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/numerics.hpp"

namespace keiter {

struct DkSchedule {
    enum class Kind { generic, kahler_einstein, custom };
    Kind kind = Kind::kahler_einstein;
    int n = 1;
    double c_conv = std::numbers::pi;
    std::function<double(int)> custom;

    static DkSchedule generic(int n = 1, double c = std::numbers::pi) { return {Kind::generic, n, c, {}}; }
    static DkSchedule kahler_einstein(int n = 1, double c = std::numbers::pi) {
        return {Kind::kahler_einstein, n, c, {}};
    }
};

inline std::string to_string(DkSchedule::Kind k) {
    switch (k) {
    case DkSchedule::Kind::generic: return "generic";
    case DkSchedule::Kind::kahler_einstein: return "kahler_einstein";
    case DkSchedule::Kind::custom: return "custom";
    }
    return "unknown";
}

inline double d_k(const DkSchedule& sch, int k) {
    if (k < 1) throw Error(Errc::invalid_argument, "d_k needs k >= 1");
    double base = std::pow(k / sch.c_conv, sch.n);
    switch (sch.kind) {
    case DkSchedule::Kind::generic: return base;
    case DkSchedule::Kind::kahler_einstein: return base * std::max(0.5, 1.0 - sch.n / (2.0 * k));
    case DkSchedule::Kind::custom:
        if (!sch.custom) throw Error(Errc::invalid_argument, "custom schedule without a function");
        return sch.custom(k);
    }
    return base;
}

struct BetaOptions {
    MomentOptions moments{};
    std::size_t grid_size = 512;
    double grid_frac = 0.99;
};

struct BetaResult {
    RadialPotential phi;          // phi_inf + spline of delta
    std::vector<double> grid;
    std::vector<double> value;    // beta_k(phi) on the grid
    std::vector<double> delta;    // value - phi_inf
    std::vector<double> density;  // (s u')' of the output, from the moment variance
    std::size_t J = 0;
    double rel_tail = 0.0;
};

inline BetaResult beta_k_detailed(const RadialPotential& phi, int k, const MAInstance& inst, const DkSchedule& sch,
                                  const BetaOptions& opt = {}) {
    if (k < 2) throw Error(Errc::invalid_argument, "beta_k needs k >= 2: at k = 1 the weight drops out of the measure");
    MomentOptions mo = opt.moments;
    mo.eval_frac = opt.grid_frac;
    auto space = WeightedSpace::build(phi, inst, k, mo);
    const double ldk = std::log(d_k(sch, k));
    BetaResult r;
    r.grid = standard_grid(inst.s_max(), opt.grid_size, opt.grid_frac);
    r.J = space.moments().J();
    const auto& lm = space.moments().log_m;
    for (double s : r.grid) {
        auto kv = space.log_kernel(s);
        r.rel_tail = std::max(r.rel_tail, kv.rel_tail);
        double v = (kv.log_k - ldk) / k;
        r.value.push_back(v);
        r.delta.push_back(v - inst.phi_inf(s));
        if (s > 0.0) r.density.push_back(kv.var_j / (k * s));
        else r.density.push_back(lm.size() > 1 ? std::exp(lm[0] - lm[1]) / k : 0.0);
    }
    r.phi = potentials::spline_offset(inst.phi_inf, r.grid, r.delta);
    return r;
}

inline RadialPotential beta_k(const RadialPotential& phi, int k, const MAInstance& inst, const DkSchedule& sch,
                              const BetaOptions& opt = {}) {
    return beta_k_detailed(phi, k, inst, sch, opt).phi;
}

// sup over the grid of |phi - phi_inf|
inline double sup_error(const RadialPotential& phi, const MAInstance& inst, const std::vector<double>& grid) {
    double e = 0.0;
    for (double s : grid) e = std::max(e, std::abs(phi(s) - inst.phi_inf(s)));
    return e;
}

// eps_k = sup over the grid of |beta_k(phi_inf) - phi_inf|
inline double fixed_point_defect(int k, const MAInstance& inst, const DkSchedule& sch, const BetaOptions& opt = {},
                                 std::size_t* J = nullptr) {
    auto b = beta_k_detailed(inst.phi_inf, k, inst, sch, opt);
    if (J) *J = b.J;
    double e = 0.0;
    for (double d : b.delta) e = std::max(e, std::abs(d));
    return e;
}

struct TraceRecord {
    int k = 0;
    double sup_error = 0.0;
    double eps_k = 0.0;
    std::size_t truncation = 0;
    double seconds = 0.0;
};

struct IterationTrace {
    std::vector<TraceRecord> records;
    std::string instance;
    std::string schedule;
    double c_conv = std::numbers::pi;
    std::size_t grid_size = 512;
    RadialPotential last;  // phi_{k_max + 1}
};

struct IterateOptions {
    BetaOptions beta{};
    double divergence_factor = 10.0;
    double divergence_floor = 1e-8;
    std::map<int, double>* eps_cache = nullptr;  // keyed by k, valid for one instance and schedule
    std::function<void(const TraceRecord&)> on_step;
};

inline IterationTrace iterate(const RadialPotential& phi_start, const MAInstance& inst, const DkSchedule& sch, int k0,
                              int k_max, const IterateOptions& opt = {}) {
    if (k0 < 2) throw Error(Errc::invalid_argument, "k0 must be >= 2: the first step is degenerate at k = 1");
    if (k_max < k0) throw Error(Errc::invalid_argument, "k_max must be >= k0");
    IterationTrace tr;
    tr.instance = inst.description;
    tr.schedule = to_string(sch.kind);
    tr.c_conv = sch.c_conv;
    tr.grid_size = opt.beta.grid_size;
    const auto grid = standard_grid(inst.s_max(), opt.beta.grid_size, opt.beta.grid_frac);
    RadialPotential phi = phi_start;
    double e0 = 0.0, eps_sum = 0.0;
    for (int k = k0; k <= k_max; ++k) {
        auto t0 = std::chrono::steady_clock::now();
        TraceRecord rec;
        rec.k = k;
        rec.sup_error = sup_error(phi, inst, grid);
        if (k == k0) e0 = rec.sup_error;
        // the recurrence keeps e_k below e_{k0} + sum of earlier eps_j
        if (rec.sup_error > opt.divergence_factor * std::max(e0 + eps_sum, opt.divergence_floor))
            throw Error(Errc::divergence_detected,
                        "e_k = " + std::to_string(rec.sup_error) + " at k = " + std::to_string(k));
        if (opt.eps_cache && opt.eps_cache->count(k)) {
            rec.eps_k = opt.eps_cache->at(k);
        } else {
            rec.eps_k = fixed_point_defect(k, inst, sch, opt.beta);
            if (opt.eps_cache) (*opt.eps_cache)[k] = rec.eps_k;
        }
        eps_sum += rec.eps_k;
        auto b = beta_k_detailed(phi, k, inst, sch, opt.beta);
        rec.truncation = b.J;
        phi = b.phi;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        tr.records.push_back(rec);
        if (opt.on_step) opt.on_step(rec);
    }
    tr.last = phi;
    return tr;
}

struct LemmaReport {
    int k = 0;
    double C1 = 0.0, C2 = 0.0;  // inf and sup of phi - phi_inf
    double eps_k = 0.0;
    double lower_margin = 0.0;  // min of (beta - phi_inf) - ((k-1)/k C1 - eps_k)
    double upper_margin = 0.0;  // min of ((k-1)/k C2 + eps_k) - (beta - phi_inf)
    bool pass = false;
};

// inf and sup of phi - phi_inf over the grid and the boundary-dense moment nodes
inline std::pair<double, double> offset_range(const RadialPotential& phi, const MAInstance& inst,
                                              const std::vector<double>& grid) {
    double lo = kInf, hi = -kInf;
    auto upd = [&](double s, double gap) {
        double d = phi.value(s, phi.s_max() == inst.s_max() ? gap : phi.s_max() - s) - inst.phi_inf.value(s, gap);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    };
    for (double s : grid) upd(s, inst.s_max() - s);
    QuadratureSpec q{64, 16, BoundaryMap::exponential(), std::size_t{1} << 20, 1e-13};
    for (const auto& n : radial_nodes(q, inst.s_max())) upd(n.s, n.gap);
    return {lo, hi};
}

inline LemmaReport lemma_key_check(const RadialPotential& phi, int k, const MAInstance& inst, const DkSchedule& sch,
                                   const BetaOptions& opt = {}, std::optional<double> eps = std::nullopt,
                                   double tol = 1e-10) {
    LemmaReport r;
    r.k = k;
    const auto grid = standard_grid(inst.s_max(), opt.grid_size, opt.grid_frac);
    std::tie(r.C1, r.C2) = offset_range(phi, inst, grid);
    r.eps_k = eps ? *eps : fixed_point_defect(k, inst, sch, opt);
    auto b = beta_k_detailed(phi, k, inst, sch, opt);
    const double f = (k - 1.0) / k;
    r.lower_margin = kInf;
    r.upper_margin = kInf;
    for (double d : b.delta) {
        r.lower_margin = std::min(r.lower_margin, d - (f * r.C1 - r.eps_k));
        r.upper_margin = std::min(r.upper_margin, (f * r.C2 + r.eps_k) - d);
    }
    r.pass = r.lower_margin >= -tol && r.upper_margin >= -tol;
    return r;
}

enum class RateModel { inverse_k, logk_over_k };

inline std::string to_string(RateModel m) { return m == RateModel::inverse_k ? "inverse_k" : "logk_over_k"; }

struct RateFit {
    double C = 0.0;
    double alpha = 0.0;
    double residual = 0.0;  // RMS of the log fit
    std::size_t points = 0;
};

// log e = log C - alpha log k, or log e = log C + log log k - alpha log k
inline RateFit rate_fit(const std::vector<double>& k, const std::vector<double>& e, RateModel model,
                        double k_min = 0.0, double k_max = kInf) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < k.size() && i < e.size(); ++i) {
        if (k[i] < k_min || k[i] > k_max || !(e[i] > 1e-12)) continue;
        if (model == RateModel::logk_over_k && !(k[i] > 1.0)) continue;
        x.push_back(std::log(k[i]));
        double v = std::log(e[i]);
        if (model == RateModel::logk_over_k) v -= std::log(std::log(k[i]));
        y.push_back(v);
    }
    if (x.size() < 8)
        throw Error(Errc::insufficient_data, "rate fit needs 8 points with e_k > 1e-12, have " + std::to_string(x.size()));
    auto lf = fit_line(x, y);
    return {std::exp(lf.intercept), -lf.slope, lf.rms, x.size()};
}

inline RateFit rate_fit(const IterationTrace& tr, RateModel model, double k_min = 0.0, double k_max = kInf) {
    std::vector<double> k, e;
    for (const auto& r : tr.records) k.push_back(r.k), e.push_back(r.sup_error);
    return rate_fit(k, e, model, k_min, k_max);
}

}  // namespace keiter
