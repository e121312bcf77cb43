#pragma once

// Families of discs {(t, z) : |z| < r(t)} with fiberwise potentials, their
// Levi forms in (t, z) and plurisubharmonicity scans.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "keiter/bergman.hpp"
#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/numerics.hpp"

namespace keiter {

using cplx = std::complex<double>;
using FamilyPotential = std::function<double(cplx t, cplx z)>;

enum class PotentialKind { ke_glued, bergman_log, custom };
enum class Expectation { yes, no, boundary };

struct DiscFamily {
    std::function<double(cplx)> radius;
    double rho = 1.0;  // parameter disc radius
    PotentialKind kind = PotentialKind::ke_glued;
    FamilyPotential custom;
    Expectation pseudoconvex = Expectation::yes;
    std::string description;

    void validate() const {
        if (!radius) throw Error(Errc::invalid_argument, "family without a radius function");
        if (!(rho > 0.0)) throw Error(Errc::invalid_argument, "parameter radius must be positive");
        if (kind == PotentialKind::custom && !custom) throw Error(Errc::invalid_argument, "custom family without potential");
        for (int i = 0; i < 16; ++i)
            for (double f : {0.0, 0.5, 0.99}) {
                double r = radius(std::polar(f * rho, 2.0 * std::numbers::pi * i / 16));
                if (!(r > 0.0) || !std::isfinite(r))
                    throw Error(Errc::invalid_argument, "radius not positive on the parameter disc");
            }
    }
};

namespace families {

inline DiscFamily gaussian(double sign, PotentialKind kind = PotentialKind::ke_glued, double rho = 1.0) {
    DiscFamily f;
    f.radius = [sign](cplx t) { return std::exp(sign * std::norm(t)); };
    f.rho = rho;
    f.kind = kind;
    // -log r = -sign |t|^2 is subharmonic exactly when sign <= 0
    f.pseudoconvex = sign < 0.0 ? Expectation::yes : sign > 0.0 ? Expectation::no : Expectation::boundary;
    f.description = sign < 0.0 ? "r=exp(-|t|^2)" : sign > 0.0 ? "r=exp(+|t|^2)" : "r=1";
    return f;
}

inline DiscFamily constant(double r = 1.0, PotentialKind kind = PotentialKind::ke_glued, double rho = 1.0) {
    DiscFamily f;
    f.radius = [r](cplx) { return r; };
    f.rho = rho;
    f.kind = kind;
    f.pseudoconvex = Expectation::yes;
    f.description = "r=" + std::to_string(r);
    return f;
}

}  // namespace families

// log(2 r^2 / (r^2 - |z|^2)^2) on the fiber over t
inline double glued_ke_potential(const DiscFamily& fam, cplx t, cplx z) {
    double r = fam.radius(t);
    if (!(std::abs(z) < 0.999 * r))
        throw Error(Errc::outside_fiber, "|z| = " + std::to_string(std::abs(z)) + " with r(t) = " + std::to_string(r));
    double r2 = r * r;
    return potentials::poincare(r).value(std::norm(z), r2 - std::norm(z));
}

// Fiberwise weight phi_t, null for the unweighted family.
using FiberWeight = std::function<RadialPotential(cplx t)>;

// log K_t(z) of the fiber space with norm int |f|^2 e^{-(k-1) phi_t} d lambda,
// moments cached per t.
class RelativeBergman {
public:
    RelativeBergman(DiscFamily fam, int k = 1, FiberWeight weight = {}, MomentOptions opt = default_options())
        : fam_(std::move(fam)), k_(k), weight_(std::move(weight)), opt_(opt) {
        if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
    }

    static MomentOptions default_options() {
        MomentOptions o;
        o.eval_frac = 0.93;
        o.j_cap = 4096;
        o.j_chunk = 128;
        o.quad.panels = 16;
        return o;
    }

    double operator()(cplx t, cplx z) const {
        auto ms = moments(t);
        double r = fam_.radius(t);
        double s = std::norm(z);
        if (!(s < opt_.eval_frac * r * r))
            throw Error(Errc::outside_fiber, "|z| beyond the evaluation radius of the fiber");
        return kernel_checked(*ms, s, opt_.dominate_tol).log_k;
    }

    std::shared_ptr<const MomentSequence> moments(cplx t) const {
        // unweighted fibers only depend on the radius
        double r = fam_.radius(t);
        std::pair<double, double> key = weight_ && k_ > 1 ? std::pair{t.real(), t.imag()} : std::pair{r, 0.0};
        {
            std::lock_guard lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        LogDensity ld;
        std::vector<double> bp;
        if (weight_ && k_ > 1) {
            RadialPotential w = weight_(t);
            int k = k_;
            double sm = r * r;
            double ws = w.s_max();
            ld = [w, k, sm, ws](double s, double gap) { return -(k - 1.0) * w.value(s, ws == sm ? gap : ws - s); };
            bp = w.breakpoints();
        } else {
            ld = [](double, double) { return 0.0; };
        }
        auto ms = std::make_shared<const MomentSequence>(compute_moments_adaptive(ld, r * r, opt_, bp));
        std::lock_guard lk(mu_);
        return cache_.emplace(key, ms).first->second;
    }

    std::size_t cached() const {
        std::lock_guard lk(mu_);
        return cache_.size();
    }

private:
    DiscFamily fam_;
    int k_;
    FiberWeight weight_;
    MomentOptions opt_;
    mutable std::mutex mu_;
    mutable std::map<std::pair<double, double>, std::shared_ptr<const MomentSequence>> cache_;
};

inline double relative_bergman_log(const DiscFamily& fam, int k, const FiberWeight& weight, cplx t, cplx z) {
    return RelativeBergman(fam, k, weight)(t, z);
}

// The potential a scan differentiates.
inline FamilyPotential family_potential(const DiscFamily& fam) {
    switch (fam.kind) {
    case PotentialKind::ke_glued: return [fam](cplx t, cplx z) { return glued_ke_potential(fam, t, z); };
    case PotentialKind::bergman_log: {
        auto rb = std::make_shared<RelativeBergman>(fam);
        return [rb](cplx t, cplx z) { return (*rb)(t, z); };
    }
    case PotentialKind::custom: return fam.custom;
    }
    return fam.custom;
}

struct LeviForm {
    Eigen::Matrix2cd M;  // [[t tbar, t zbar], [z tbar, z zbar]]
    double error = 0.0;  // max entry change between steps h and 2h, over 15
    double eig_min = 0.0, eig_max = 0.0;
};

namespace detail {

// 4th-order stencils in the real coordinates (t1, t2, z1, z2) at step h,
// differenced against the center value since the weights only sum to zero in exact arithmetic
inline Eigen::Matrix2cd levi_at_step(const FamilyPotential& Phi, cplx t, cplx z, double h) {
    auto f = [&](const std::array<double, 4>& x) {
        return Phi({t.real() + x[0], t.imag() + x[1]}, {z.real() + x[2], z.imag() + x[3]});
    };
    static const std::array<std::pair<int, double>, 4> d1{{{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}}};
    static const std::array<std::pair<int, double>, 5> d2{
        {{-2, -1.0 / 12}, {-1, 16.0 / 12}, {0, -30.0 / 12}, {1, 16.0 / 12}, {2, -1.0 / 12}}};
    const double f0 = f({0, 0, 0, 0});
    auto second = [&](int a) {
        double s = 0.0;
        for (auto [o, c] : d2) {
            std::array<double, 4> x{};
            x[a] = o * h;
            if (o != 0) s += c * (f(x) - f0);
        }
        return s / (h * h);
    };
    auto mixed = [&](int a, int b) {
        double s = 0.0;
        for (auto [oa, ca] : d1)
            for (auto [ob, cb] : d1) {
                std::array<double, 4> x{};
                x[a] = oa * h;
                x[b] = ob * h;
                s += ca * cb * (f(x) - f0);
            }
        return s / (h * h);
    };
    double tt = 0.25 * (second(0) + second(1));
    double zz = 0.25 * (second(2) + second(3));
    cplx tz = 0.25 * cplx(mixed(0, 2) + mixed(1, 3), mixed(0, 3) - mixed(1, 2));
    Eigen::Matrix2cd M;
    M << tt, tz, std::conj(tz), zz;
    return M;
}

}  // namespace detail

// dd^c of Phi in (t, z) by finite differences; h <= 0 picks the default step.
inline LeviForm levi_form_fd(const FamilyPotential& Phi, cplx t, cplx z, double h, const DiscFamily* fam = nullptr) {
    if (fam) {
        double r = fam->radius(t);
        if (h <= 0.0) h = 1e-3 * std::min(r - std::abs(z), 1.0);
        if (std::abs(z) + 4.0 * std::sqrt(2.0) * h >= r || std::abs(t) + 4.0 * std::sqrt(2.0) * h >= fam->rho)
            throw Error(Errc::stencil_outside_domain, "stencil leaves the family domain");
    }
    if (!(h > 0.0)) throw Error(Errc::invalid_argument, "step must be positive");
    LeviForm lf;
    Eigen::Matrix2cd M1, M2;
    try {
        M1 = detail::levi_at_step(Phi, t, z, h);
        M2 = detail::levi_at_step(Phi, t, z, 2.0 * h);
    } catch (const Error& e) {
        if (e.code() == Errc::outside_fiber || e.code() == Errc::out_of_domain)
            throw Error(Errc::stencil_outside_domain, e.what());
        throw;
    }
    lf.M = 0.5 * (M1 + M1.adjoint());
    lf.error = (M1 - M2).cwiseAbs().maxCoeff() / 15.0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(lf.M, Eigen::EigenvaluesOnly);
    lf.eig_min = es.eigenvalues()(0);
    lf.eig_max = es.eigenvalues()(1);
    return lf;
}

struct LeviSample {
    cplx t, z;
    LeviForm form;
};

struct LeviReport {
    std::vector<LeviSample> samples;
    double min_eig = kInf;
    std::size_t argmin = 0;
    double tol = 1e-6;
    bool psh() const { return min_eig >= -tol; }
    std::string verdict() const { return psh() ? "PSH_CONFIRMED" : "VIOLATION"; }
};

struct ScanGrid {
    int t_points = 9;       // per axis of the square |Re t|, |Im t| <= t_frac rho / sqrt 2
    int z_points = 9;       // along [0, z_frac r(t)] on the real axis
    double t_frac = 0.99;
    double z_frac = 0.95;
    double h = 0.0;         // 0 picks the default step
    double tol = 1e-6;
    unsigned threads = 1;
};

inline LeviReport psh_scan(const DiscFamily& fam, const ScanGrid& g = {}) {
    fam.validate();
    if (g.t_points < 1 || g.z_points < 1) throw Error(Errc::invalid_argument, "scan grid must be non-empty");
    const auto Phi = family_potential(fam);
    const double a = g.t_frac * fam.rho / std::sqrt(2.0);
    std::vector<std::pair<cplx, double>> pts;  // t and z fraction
    for (int i = 0; i < g.t_points; ++i)
        for (int j = 0; j < g.t_points; ++j) {
            double x = g.t_points == 1 ? 0.0 : -a + 2.0 * a * i / (g.t_points - 1);
            double y = g.t_points == 1 ? 0.0 : -a + 2.0 * a * j / (g.t_points - 1);
            for (int l = 0; l < g.z_points; ++l)
                pts.push_back({cplx(x, y), g.z_points == 1 ? 0.0 : g.z_frac * l / (g.z_points - 1)});
        }
    LeviReport rep;
    rep.tol = g.tol;
    rep.samples.resize(pts.size());
    // One step per t, the smallest default step of its z column, so stencil
    // fibers are shared down the column. Near the rim of the parameter disc
    // the step shrinks to keep the stencil inside.
    const double z_max = g.z_points == 1 ? 0.0 : g.z_frac;
    parallel_for(pts.size(), g.threads, [&](std::size_t i) {
        cplx t = pts[i].first;
        double r = fam.radius(t);
        cplx z = pts[i].second * r;
        double h = g.h > 0.0 ? g.h : 1e-3 * std::min(r * (1.0 - z_max), 1.0);
        h = std::min(h, (fam.rho - std::abs(t)) / 8.0);
        rep.samples[i] = {t, z, levi_form_fd(Phi, t, z, h, &fam)};
    });
    for (std::size_t i = 0; i < rep.samples.size(); ++i)
        if (rep.samples[i].form.eig_min < rep.min_eig) rep.min_eig = rep.samples[i].form.eig_min, rep.argmin = i;
    return rep;
}

struct FiberBound {
    cplx t;
    double u_mean = 0.0;
    double oscillation = 0.0;  // max - min of u_t over the sampled fiber
    double sup_abs = 0.0;
    double expected = 0.0;     // log 2 + 2 log r(t)
};

struct FiberBoundReport {
    std::vector<FiberBound> fibers;
    double bound = 0.0;           // max over t of sup |u_t|
    double expected_bound = 0.0;  // max over t of |log 2 + 2 log r(t)|
    double max_oscillation = 0.0;
};

// u_t = Phi(t, .) + 2 log(r(t)^2 - |z|^2) on each sampled fiber
inline FiberBoundReport fiber_uniform_bound_check(const DiscFamily& fam, const std::vector<cplx>& t_samples,
                                                  int z_samples = 16) {
    FiberBoundReport rep;
    for (cplx t : t_samples) {
        FiberBound fb;
        fb.t = t;
        double r = fam.radius(t);
        double lo = kInf, hi = -kInf, sum = 0.0;
        for (int i = 0; i < z_samples; ++i) {
            double rad = 0.95 * r * i / std::max(1, z_samples - 1);
            cplx z = std::polar(rad, 0.7 * i);
            double u = glued_ke_potential(fam, t, z) + 2.0 * std::log(r * r - std::norm(z));
            lo = std::min(lo, u);
            hi = std::max(hi, u);
            sum += u;
            fb.sup_abs = std::max(fb.sup_abs, std::abs(u));
        }
        fb.u_mean = sum / z_samples;
        fb.oscillation = hi - lo;
        fb.expected = std::log(2.0) + 2.0 * std::log(r);
        rep.bound = std::max(rep.bound, fb.sup_abs);
        rep.expected_bound = std::max(rep.expected_bound, std::abs(fb.expected));
        rep.max_oscillation = std::max(rep.max_oscillation, fb.oscillation);
        rep.fibers.push_back(fb);
    }
    return rep;
}

}  // namespace keiter
