#pragma once

// Radial Kahler potentials u(s), s = |z|^2, with dd^c = (i/2) d dbar: the
// metric density against dx dy is g = u' + s u''.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

// pchip.hpp in Boost 1.74 calls isnan unqualified
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "keiter/error.hpp"
#include "keiter/numerics.hpp"

namespace keiter {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// value and derivatives in s; unavailable orders are NaN
struct Jet {
    double v = 0, d1 = 0, d2 = 0, d3 = 0, d4 = 0;
};

// gap is s_max - s, passed separately so boundary terms keep full precision
using JetFn = std::function<Jet(double s, double gap)>;

class RadialPotential {
public:
    RadialPotential() = default;
    RadialPotential(JetFn fn, double s_max, std::string description, int order = 4,
                    std::vector<double> breakpoints = {})
        : fn_(std::move(fn)), s_max_(s_max), description_(std::move(description)), order_(order),
          breakpoints_(std::move(breakpoints)) {}

    Jet jet(double s, double gap) const { return fn_(s, gap); }
    Jet jet(double s) const { return fn_(s, s_max_ - s); }
    double operator()(double s) const { return fn_(s, s_max_ - s).v; }
    double value(double s, double gap) const { return fn_(s, gap).v; }

    double s_max() const { return s_max_; }
    const std::string& description() const { return description_; }
    int order() const { return order_; }
    // points where the representation is only piecewise smooth
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    explicit operator bool() const { return static_cast<bool>(fn_); }

    friend RadialPotential operator+(const RadialPotential& a, const RadialPotential& b) {
        double sm = std::min(a.s_max_, b.s_max_);
        auto fa = a.fn_, fb = b.fn_;
        double sa = a.s_max_, sb = b.s_max_;
        std::vector<double> bp = a.breakpoints_;
        bp.insert(bp.end(), b.breakpoints_.begin(), b.breakpoints_.end());
        std::sort(bp.begin(), bp.end());
        return RadialPotential(
            [fa, fb, sa, sb, sm](double s, double gap) {
                Jet x = fa(s, sa == sm ? gap : sa - s);
                Jet y = fb(s, sb == sm ? gap : sb - s);
                return Jet{x.v + y.v, x.d1 + y.d1, x.d2 + y.d2, x.d3 + y.d3, x.d4 + y.d4};
            },
            sm, a.description_ + " + " + b.description_, std::min(a.order_, b.order_), std::move(bp));
    }

    RadialPotential plus_constant(double c) const {
        auto f = fn_;
        return RadialPotential(
            [f, c](double s, double gap) {
                Jet j = f(s, gap);
                j.v += c;
                return j;
            },
            s_max_, description_ + " + " + std::to_string(c), order_, breakpoints_);
    }

    RadialPotential scaled(double a) const {
        auto f = fn_;
        return RadialPotential(
            [f, a](double s, double gap) {
                Jet j = f(s, gap);
                return Jet{a * j.v, a * j.d1, a * j.d2, a * j.d3, a * j.d4};
            },
            s_max_, std::to_string(a) + "*(" + description_ + ")", order_, breakpoints_);
    }

private:
    JetFn fn_;
    double s_max_ = kInf;
    std::string description_;
    int order_ = 4;
    std::vector<double> breakpoints_;
};

namespace potentials {

inline RadialPotential flat(double s_max = 1.0) {
    return {[](double s, double) { return Jet{s, 1.0, 0.0, 0.0, 0.0}; }, s_max, "flat"};
}

// log(2R^2 / (R^2 - s)^2) on the disc of radius R
inline RadialPotential poincare(double R = 1.0) {
    if (!(R > 0.0)) throw Error(Errc::invalid_argument, "radius must be positive");
    double c = std::log(2.0 * R * R);
    return {[c](double, double gap) {
                double q = 1.0 / gap;
                return Jet{c - 2.0 * std::log(gap), 2.0 * q, 2.0 * q * q, 4.0 * q * q * q, 12.0 * q * q * q * q};
            },
            R * R, "poincare(R=" + std::to_string(R) + ")"};
}

// sum_i c_i s^i
inline RadialPotential polynomial(std::vector<double> c, double s_max = kInf) {
    std::string d = "poly(";
    for (std::size_t i = 0; i < c.size(); ++i) d += (i ? "," : "") + std::to_string(c[i]);
    d += ")";
    return {[c](double s, double) {
                Jet j;
                double d[5] = {0, 0, 0, 0, 0};
                for (std::size_t i = c.size(); i-- > 0;) {
                    // Horner on value and derivatives
                    for (int r = 4; r >= 1; --r) d[r] = d[r] * s + r * d[r - 1];
                    d[0] = d[0] * s + c[i];
                }
                j.v = d[0];
                j.d1 = d[1];
                j.d2 = d[2];
                j.d3 = d[3];
                j.d4 = d[4];
                return j;
            },
            s_max, d};
}

// a sin(w s + p)
inline RadialPotential sine(double a, double w, double p = 0.0, double s_max = kInf) {
    return {[a, w, p](double s, double) {
                double sn = std::sin(w * s + p), cs = std::cos(w * s + p);
                return Jet{a * sn, a * w * cs, -a * w * w * sn, -a * w * w * w * cs, a * w * w * w * w * sn};
            },
            s_max, "sin(" + std::to_string(a) + "," + std::to_string(w) + "," + std::to_string(p) + ")"};
}

inline RadialPotential constant(double c, double s_max = kInf) {
    return {[c](double, double) { return Jet{c, 0, 0, 0, 0}; }, s_max, "const(" + std::to_string(c) + ")"};
}

// base + PCHIP interpolant of values on nodes, held constant outside the nodes
inline RadialPotential spline_offset(const RadialPotential& base, const std::vector<double>& nodes,
                                     const std::vector<double>& values) {
    if (nodes.size() < 4 || nodes.size() != values.size())
        throw Error(Errc::invalid_argument, "spline needs at least four matching nodes and values");
    auto xs = nodes;
    auto ys = values;
    auto spl = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(xs), std::move(ys));
    double lo = nodes.front(), hi = nodes.back();
    double ylo = values.front(), yhi = values.back();
    RadialPotential off(
        [spl, lo, hi, ylo, yhi](double s, double) {
            if (s <= lo) return Jet{ylo, 0, kNaN, kNaN, kNaN};
            if (s >= hi) return Jet{yhi, 0, kNaN, kNaN, kNaN};
            return Jet{(*spl)(s), spl->prime(s), kNaN, kNaN, kNaN};
        },
        kInf, "spline", 1, nodes);
    return base + off;
}

}  // namespace potentials

inline void check_domain(const RadialPotential& phi, double s) {
    if (!(s >= 0.0) || !(s < phi.s_max()))
        throw Error(Errc::out_of_domain, "s = " + std::to_string(s) + " outside [0, " + std::to_string(phi.s_max()) + ")");
}

inline double kahler_density(const RadialPotential& phi, double s) {
    check_domain(phi, s);
    if (phi.order() < 2) throw Error(Errc::invalid_argument, "density needs second derivatives");
    Jet j = phi.jet(s);
    return j.d1 + s * j.d2;
}

// g and its first two s-derivatives
struct DensityJet {
    double g, g1, g2;
};

inline DensityJet density_jet(const RadialPotential& phi, double s) {
    check_domain(phi, s);
    if (phi.order() < 4) throw Error(Errc::invalid_argument, "curvature needs four derivatives of the potential");
    Jet j = phi.jet(s);
    return {j.d1 + s * j.d2, 2.0 * j.d2 + s * j.d3, 3.0 * j.d3 + s * j.d4};
}

// S = -(L' + s L'')/g with L = log g
inline double ricci_scalar(const DensityJet& d, double s) {
    if (!(d.g > 0.0)) throw Error(Errc::non_positive_metric, "density " + std::to_string(d.g) + " at s = " + std::to_string(s));
    double L1 = d.g1 / d.g;
    double L2 = d.g2 / d.g - L1 * L1;
    return -(L1 + s * L2) / d.g;
}

inline double ricci_scalar(const RadialPotential& phi, double s) { return ricci_scalar(density_jet(phi, s), s); }

// 2/(s log^2 s) on the punctured unit disc
inline DensityJet cusp_density_jet(double s) {
    if (!(s > 0.0 && s < 1.0)) throw Error(Errc::out_of_domain, "cusp density lives on 0 < s < 1");
    double l = std::log(s);
    double g = 2.0 / (s * l * l);
    double L1 = -1.0 / s - 2.0 / (s * l);
    double L2 = 1.0 / (s * s) + 2.0 / (s * s * l) + 2.0 / (s * s * l * l);
    return {g, g * L1, g * (L2 + L1 * L1)};
}

enum class InstanceKind { generic, kahler_einstein };

inline std::string to_string(InstanceKind k) { return k == InstanceKind::generic ? "generic" : "kahler_einstein"; }

// One Monge-Ampere problem g(phi_inf) = e^{phi_inf - phi_L} V with V = e^{log_omega}.
struct MAInstance {
    RadialPotential phi_L;
    RadialPotential phi_inf;
    std::function<double(double s, double gap)> log_omega;
    InstanceKind kind = InstanceKind::generic;
    std::string description;

    double s_max() const { return phi_inf.s_max(); }
    double omega_density(double s) const { return std::exp(log_omega(s, s_max() - s)); }
};

// the 512-point Chebyshev grid on [0, 0.99 s_max] used for sup norms
inline std::vector<double> standard_grid(double s_max, std::size_t n = 512, double frac = 0.99) {
    return chebyshev_grid(n, 0.0, frac * s_max);
}

inline MAInstance poincare_instance(double R = 1.0) {
    auto phi = potentials::poincare(R);
    MAInstance inst;
    inst.phi_L = phi;
    inst.phi_inf = phi;
    // V = g(phi) = e^{phi}
    inst.log_omega = [phi](double s, double gap) { return phi.value(s, gap); };
    inst.kind = InstanceKind::kahler_einstein;
    inst.description = "poincare(R=" + std::to_string(R) + ")";
    return inst;
}

inline MAInstance manufacture_instance(const RadialPotential& w, const MAInstance& base) {
    auto grid = standard_grid(base.s_max());
    bool zero = true;
    for (double s : grid) {
        Jet j = w.jet(s);
        if (j.v != 0.0 || j.d1 != 0.0 || j.d2 != 0.0) zero = false;
    }
    if (zero) return base;

    MAInstance inst;
    inst.phi_L = base.phi_L;
    inst.phi_inf = base.phi_inf + w;
    for (double s : grid) {
        double g = kahler_density(inst.phi_inf, s);
        if (!(g > 0.0))
            throw Error(Errc::metric_degenerate, "perturbed density " + std::to_string(g) + " at s = " + std::to_string(s));
    }
    auto pinf = inst.phi_inf;
    auto pl = inst.phi_L;
    inst.log_omega = [pinf, pl](double s, double gap) {
        Jet j = pinf.jet(s, gap);
        return std::log(j.d1 + s * j.d2) + pl.value(s, gap) - j.v;
    };
    inst.kind = InstanceKind::generic;
    inst.description = base.description + " + " + w.description();
    return inst;
}

inline double max_ma_residual(const MAInstance& inst, std::size_t n = 512) {
    double worst = 0.0;
    for (double s : standard_grid(inst.s_max(), n)) {
        double g = kahler_density(inst.phi_inf, s);
        double gap = inst.s_max() - s;
        double rhs = std::exp(inst.phi_inf.value(s, gap) - inst.phi_L.value(s, gap) + inst.log_omega(s, gap));
        worst = std::max(worst, std::abs(g - rhs));
    }
    return worst;
}

// Recorded hypothesis data for the bounded-geometry setting; nothing consumes
// the order ell quantitatively.
struct BoundedGeometryParams {
    double r = 1.0;
    double c = 1.0;
    std::vector<double> A;
    int ell = 5;

    void validate(bool main_theorem = true) const {
        if (!(r > 0.0)) throw Error(Errc::invalid_argument, "quasi-coordinate radius must be positive");
        if (!(c >= 1.0)) throw Error(Errc::invalid_argument, "equivalence constant must be >= 1");
        for (double a : A)
            if (!(a > 0.0)) throw Error(Errc::invalid_argument, "derivative bounds must be positive");
        if (main_theorem && ell < 5) throw Error(Errc::invalid_argument, "order must be >= 5");
    }
};

}  // namespace keiter
