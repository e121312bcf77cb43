#pragma once

// Weighted Bergman spaces of holomorphic functions on a disc {s < s_max} with a
// radial measure. Monomials are orthogonal, so everything reduces to the
// moments m_j = pi * int s^j m(s) ds, which are kept as logarithms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/numerics.hpp"

namespace keiter {

using LogDensity = std::function<double(double s, double gap)>;

// log of e^{-(k-1) phi - phi_L} V, the density of e^{-k phi} d mu_phi
inline LogDensity measure_log_density(const RadialPotential& phi, const MAInstance& inst, int k) {
    auto pl = inst.phi_L;
    auto lo = inst.log_omega;
    double sm = inst.s_max();
    double sp = phi.s_max();
    return [phi, pl, lo, k, sm, sp](double s, double gap) {
        double pv = phi.value(s, sp == sm ? gap : sp - s);
        return -(k - 1.0) * pv - pl.value(s, gap) + lo(s, gap);
    };
}

inline double measure_density(const RadialPotential& phi, const MAInstance& inst, int k, double s) {
    if (!(s >= 0.0) || !(s < inst.s_max()))
        throw Error(Errc::out_of_domain, "s = " + std::to_string(s) + " outside the disc");
    return std::exp(measure_log_density(phi, inst, k)(s, inst.s_max() - s));
}

struct MomentOptions {
    QuadratureSpec quad{64, 16, BoundaryMap::exponential(), std::size_t{1} << 16, 1e-12};
    double tail_tol = 1e-15;       // relative tail at the evaluation radius
    double dominate_tol = 1e-6;    // TailDominates threshold
    std::size_t j_chunk = 256;
    std::size_t j_cap = 65536;
    double eval_frac = 0.99;       // evaluation radius as a fraction of s_max
    double boundary_mass_tol = 1e-12;
};

struct MomentSequence {
    std::vector<double> log_m;  // log m_0 .. log m_J
    double eval_s = 0.0;        // radius the tail bound refers to
    double log_tail = -kInf;    // log of the bound on sum_{j>J} s^j / m_j
    double rel_tail = 0.0;      // tail bound over partial sum
    double quad_error = 0.0;    // max relative change of probe moments under refinement
    std::size_t nodes = 0;

    std::size_t J() const { return log_m.empty() ? 0 : log_m.size() - 1; }
    double m(std::size_t j) const { return std::exp(log_m.at(j)); }
};

// Gauss nodes in the exponential map, with log weights that already include the density.
class MomentEngine {
public:
    MomentEngine(const LogDensity& log_density, double s_max, const MomentOptions& opt,
                 const std::vector<double>& breakpoints = {})
        : s_max_(s_max) {
        QuadratureSpec q = opt.quad;
        build(log_density, q, breakpoints);
        std::vector<double> probe;
        for (std::size_t j = 0; j <= opt.j_cap; j = j ? 2 * j : 1) probe.push_back(double(j));
        std::vector<double> prev = probe_values(probe);
        for (;;) {
            q.panels *= 2;
            MomentEngine finer(s_max);
            finer.build(log_density, q, breakpoints);
            if (finer.ls_.size() > q.max_nodes)
                throw Error(Errc::budget_exceeded, "moment quadrature exceeded " + std::to_string(q.max_nodes) + " nodes");
            std::vector<double> cur = finer.probe_values(probe);
            double worst = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i < probe.size(); ++i) {
                double d = std::abs(std::expm1(cur[i] - prev[i]));
                worst = std::max(worst, d);
                // j log s carries j ulps of log s_max whatever the node set
                double floor = 4.0 * std::numeric_limits<double>::epsilon() * probe[i] * std::abs(std::log(s_max));
                if (d > q.rel_tol + floor) ok = false;
            }
            *this = std::move(finer);
            prev = std::move(cur);
            error_ = worst;
            if (ok) break;
        }
        if (opt.quad.map.kind == BoundaryMap::Kind::exponential) {
            // mass of m_0 in the last panel: weights that do not decay at the boundary
            double lm0 = log_moment(0);
            double last = -kInf;
            int lp = static_cast<int>(pstart_.size()) - 2;
            for (std::size_t i = pstart_[lp]; i < pstart_[lp + 1]; ++i) last = std::max(last, lw_[i]);
            last += std::log(double(pstart_[lp + 1] - pstart_[lp])) + std::log(std::numbers::pi);
            if (last - lm0 > std::log(opt.boundary_mass_tol))
                throw Error(Errc::non_integrable, "measure mass does not decay at the boundary");
        }
    }

    // log of pi * int s^j m(s) ds
    double log_moment(std::size_t j) const {
        const double jd = static_cast<double>(j);
        const std::size_t np = pmax_lw_.size();
        std::size_t best = 0;
        double best_ub = -kInf;
        for (std::size_t p = 0; p < np; ++p) {
            double ub = pmax_lw_[p] + jd * pmax_ls_[p];
            if (ub > best_ub) best_ub = ub, best = p;
        }
        double m0 = -kInf;
        for (std::size_t i = pstart_[best]; i < pstart_[best + 1]; ++i) m0 = std::max(m0, lw_[i] + jd * ls_[i]);
        if (!(m0 > -kInf)) return -kInf;
        const double cut = m0 - 46.0;
        double mx = m0, sum = 0.0;
        // two passes keep the exponent shift exact
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < np; ++p) {
                if (pmax_lw_[p] + jd * pmax_ls_[p] < cut) continue;
                for (std::size_t i = pstart_[p]; i < pstart_[p + 1]; ++i) {
                    double t = lw_[i] + jd * ls_[i];
                    if (pass == 0) mx = std::max(mx, t);
                    else if (t > cut) sum += std::exp(t - mx);
                }
            }
        }
        return std::log(std::numbers::pi) + mx + std::log(sum);
    }

    double quad_error() const { return error_; }
    std::size_t nodes() const { return ls_.size(); }
    double s_max() const { return s_max_; }

private:
    explicit MomentEngine(double s_max) : s_max_(s_max) {}

    void build(const LogDensity& log_density, const QuadratureSpec& q, const std::vector<double>& breakpoints) {
        auto nodes = radial_nodes(q, s_max_, breakpoints);
        ls_.clear();
        lw_.clear();
        pstart_.clear();
        pmax_lw_.clear();
        pmax_ls_.clear();
        int cur = -1;
        for (const auto& n : nodes) {
            if (n.panel != cur) {
                pstart_.push_back(ls_.size());
                pmax_lw_.push_back(-kInf);
                pmax_ls_.push_back(-kInf);
                cur = n.panel;
            }
            double ld = log_density(n.s, n.gap);
            if (std::isnan(ld) || ld == kInf)
                throw Error(Errc::non_finite, "measure density not finite at s = " + std::to_string(n.s));
            double lw = n.log_w + ld;
            double ls = n.log_s;
            ls_.push_back(ls);
            lw_.push_back(lw);
            pmax_lw_.back() = std::max(pmax_lw_.back(), lw);
            pmax_ls_.back() = std::max(pmax_ls_.back(), ls);
        }
        pstart_.push_back(ls_.size());
    }

    std::vector<double> probe_values(const std::vector<double>& probe) const {
        std::vector<double> v;
        for (double j : probe) v.push_back(log_moment(static_cast<std::size_t>(j)));
        return v;
    }

    double s_max_;
    std::vector<double> ls_, lw_;
    std::vector<std::size_t> pstart_;
    std::vector<double> pmax_lw_, pmax_ls_;
    double error_ = 0.0;
};

struct KernelValue {
    double log_k = 0.0;
    double mean_j = 0.0;  // mean of j under the weights s^j / m_j
    double var_j = 0.0;
    double log_tail = -kInf;
    double rel_tail = 0.0;
};

// log sum_{j<=J} s^j / m_j with the moment statistics used for the density of log K
inline KernelValue kernel_log(const std::vector<double>& log_m, double s) {
    if (log_m.empty()) throw Error(Errc::invalid_argument, "empty moment sequence");
    KernelValue r;
    if (s == 0.0) {
        r.log_k = -log_m[0];
        return r;
    }
    const double ls = std::log(s);
    const std::size_t n = log_m.size();
    std::size_t jm = 0;
    double tm = -kInf;
    for (std::size_t j = 0; j < n; ++j) {
        double t = j * ls - log_m[j];
        if (t > tm) tm = t, jm = j;
    }
    double w0 = 0, w1 = 0, w2 = 0;
    auto add = [&](std::size_t j) {
        double t = j * ls - log_m[j];
        if (t < tm - 46.0) return false;
        double e = std::exp(t - tm);
        double d = double(j) - double(jm);
        w0 += e;
        w1 += e * d;
        w2 += e * d * d;
        return true;
    };
    add(jm);
    for (std::size_t j = jm + 1; j < n && add(j); ++j) {}
    for (std::size_t j = jm; j-- > 0 && add(j);) {}
    r.log_k = tm + std::log(w0);
    double mu = w1 / w0;
    r.mean_j = double(jm) + mu;
    r.var_j = std::max(0.0, w2 / w0 - mu * mu);
    if (n >= 2) {
        double lq = ls + log_m[n - 2] - log_m[n - 1];
        if (lq < 0.0) {
            double tJ = (n - 1) * ls - log_m[n - 1];
            r.log_tail = tJ + lq - std::log(-std::expm1(lq));
            r.rel_tail = std::exp(r.log_tail - r.log_k);
        } else {
            r.log_tail = kInf;
            r.rel_tail = kInf;
        }
    }
    return r;
}

// Moments m_0..m_J at fixed truncation.
inline MomentSequence compute_moments(const LogDensity& log_density, double s_max, std::size_t J,
                                      const MomentOptions& opt = {}, const std::vector<double>& breakpoints = {}) {
    MomentOptions o = opt;
    o.j_cap = std::max<std::size_t>(J, 1);
    MomentEngine eng(log_density, s_max, o, breakpoints);
    MomentSequence ms;
    ms.log_m.resize(J + 1);
    for (std::size_t j = 0; j <= J; ++j) ms.log_m[j] = eng.log_moment(j);
    ms.quad_error = eng.quad_error();
    ms.nodes = eng.nodes();
    ms.eval_s = opt.eval_frac * s_max;
    auto kv = kernel_log(ms.log_m, ms.eval_s);
    ms.log_tail = kv.log_tail;
    ms.rel_tail = kv.rel_tail;
    return ms;
}

// Moments with J grown in chunks until the tail bound at eval_frac * s_max is
// below tail_tol relative to the partial sum.
inline MomentSequence compute_moments_adaptive(const LogDensity& log_density, double s_max,
                                               const MomentOptions& opt = {},
                                               const std::vector<double>& breakpoints = {}) {
    MomentEngine eng(log_density, s_max, opt, breakpoints);
    MomentSequence ms;
    ms.quad_error = eng.quad_error();
    ms.nodes = eng.nodes();
    ms.eval_s = opt.eval_frac * s_max;
    std::size_t next = 0;
    for (;;) {
        std::size_t upto = std::min(next + opt.j_chunk, opt.j_cap + 1);
        for (std::size_t j = next; j < upto; ++j) ms.log_m.push_back(eng.log_moment(j));
        next = upto;
        auto kv = kernel_log(ms.log_m, ms.eval_s);
        ms.log_tail = kv.log_tail;
        ms.rel_tail = kv.rel_tail;
        if (kv.rel_tail <= opt.tail_tol) break;
        if (next > opt.j_cap) {
            if (kv.rel_tail > opt.dominate_tol)
                throw Error(Errc::tail_dominates, "relative tail " + std::to_string(kv.rel_tail) + " at J = " +
                                                      std::to_string(opt.j_cap));
            break;
        }
    }
    return ms;
}

inline KernelValue kernel_checked(const MomentSequence& ms, double s, double dominate_tol = 1e-6) {
    auto kv = kernel_log(ms.log_m, s);
    if (kv.rel_tail > dominate_tol)
        throw Error(Errc::tail_dominates, "tail bound " + std::to_string(kv.rel_tail) + " of partial sum at s = " +
                                              std::to_string(s));
    return kv;
}

// sum_{j<=J} s^j / m_j
inline double kernel_partial_sum(const MomentSequence& ms, double s) { return std::exp(kernel_log(ms.log_m, s).log_k); }

inline double kernel_eval(const MomentSequence& ms, double s) { return std::exp(kernel_checked(ms, s).log_k); }

class WeightedSpace {
public:
    // e^{-k phi} d mu_phi for the iteration at weight phi
    static WeightedSpace build(const RadialPotential& phi, const MAInstance& inst, int k, const MomentOptions& opt = {}) {
        if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
        WeightedSpace w;
        w.k_ = k;
        w.phi_ = phi;
        w.s_max_ = inst.s_max();
        w.dominate_tol_ = opt.dominate_tol;
        w.moments_ = compute_moments_adaptive(measure_log_density(phi, inst, k), inst.s_max(), opt, phi.breakpoints());
        return w;
    }

    // explicit density of e^{-k phi} d mu; phi is only used by bergman_function
    static WeightedSpace from_measure(const LogDensity& log_density, double s_max, int k, const RadialPotential& phi,
                                      const MomentOptions& opt = {}, const std::vector<double>& breakpoints = {}) {
        WeightedSpace w;
        w.k_ = k;
        w.phi_ = phi;
        w.s_max_ = s_max;
        w.dominate_tol_ = opt.dominate_tol;
        w.moments_ = compute_moments_adaptive(log_density, s_max, opt, breakpoints);
        return w;
    }

    static WeightedSpace from_moments(MomentSequence ms, double s_max, int k, const RadialPotential& phi) {
        WeightedSpace w;
        w.k_ = k;
        w.phi_ = phi;
        w.s_max_ = s_max;
        w.moments_ = std::move(ms);
        return w;
    }

    int k() const { return k_; }
    double s_max() const { return s_max_; }
    const RadialPotential& phi() const { return phi_; }
    const MomentSequence& moments() const { return moments_; }

    KernelValue log_kernel(double s) const {
        if (!(s >= 0.0) || !(s < s_max_)) throw Error(Errc::out_of_domain, "s = " + std::to_string(s));
        return kernel_checked(moments_, s, dominate_tol_);
    }
    double kernel(double s) const { return std::exp(log_kernel(s).log_k); }
    double log_bergman_function(double s) const { return log_kernel(s).log_k - k_ * phi_(s); }
    double bergman_function(double s) const { return std::exp(log_bergman_function(s)); }

private:
    int k_ = 1;
    RadialPotential phi_;
    double s_max_ = 1.0;
    double dominate_tol_ = 1e-6;
    MomentSequence moments_;
};

inline double bergman_function(const WeightedSpace& w, double s) { return w.bergman_function(s); }

struct GramQuadrature {
    int radial_panels = 64;
    int radial_points = 16;
    int angular = 128;
};

// Dense Gram-matrix kernel on span{1, z, ..., z^J} for a density on the disc
// (not necessarily radial). Used as an independent check of the moment path.
class GramOracle {
public:
    using Weight = std::function<double(std::complex<double>)>;

    GramOracle(std::size_t J, const Weight& weight, double s_max, const GramQuadrature& gq = {},
               double cond_limit = 1e12)
        : J_(J) {
        if (J > 64) throw Error(Errc::invalid_argument, "gram oracle is limited to J <= 64");
        const std::size_t n = J + 1;
        QuadratureSpec q{gq.radial_panels, gq.radial_points, BoundaryMap::none(), std::size_t{1} << 20, 1e-13};
        auto rn = radial_nodes(q, s_max);
        G_ = Eigen::MatrixXcd::Zero(n, n);
        std::vector<std::complex<double>> pw(n);
        for (const auto& node : rn) {
            double r = std::sqrt(node.s);
            for (int l = 0; l < gq.angular; ++l) {
                double th = 2.0 * std::numbers::pi * l / gq.angular;
                std::complex<double> z = std::polar(r, th);
                // dx dy = (1/2) ds dtheta
                double w = 0.5 * node.w * (2.0 * std::numbers::pi / gq.angular) * weight(z);
                if (!std::isfinite(w)) throw Error(Errc::non_finite, "gram weight not finite");
                pw[0] = 1.0;
                for (std::size_t i = 1; i < n; ++i) pw[i] = pw[i - 1] * z;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) G_(i, j) += w * pw[i] * std::conj(pw[j]);
            }
        }
        G_ = 0.5 * (G_ + G_.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G_, Eigen::EigenvaluesOnly);
        auto ev = es.eigenvalues();
        cond_ = ev.maxCoeff() / ev.minCoeff();
        if (!(ev.minCoeff() > 0.0) || cond_ > cond_limit)
            throw Error(Errc::ill_conditioned, "gram condition number " + std::to_string(cond_));
        llt_.compute(G_);
        off_diag_ = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j)
                    off_diag_ = std::max(off_diag_, std::abs(G_(i, j)) / std::sqrt(std::real(G_(i, i)) * std::real(G_(j, j))));
    }

    // v^H G^{-1} v with v = (1, x, ..., x^J)
    double operator()(std::complex<double> x) const {
        const std::size_t n = J_ + 1;
        Eigen::VectorXcd v(n);
        v(0) = 1.0;
        for (std::size_t i = 1; i < n; ++i) v(i) = v(i - 1) * x;
        Eigen::VectorXcd y = llt_.solve(v);
        return std::real(v.dot(y));
    }

    double condition_number() const { return cond_; }
    // max |G_ij| / sqrt(G_ii G_jj) over i != j
    double max_off_diagonal_ratio() const { return off_diag_; }
    const Eigen::MatrixXcd& gram() const { return G_; }

private:
    std::size_t J_;
    Eigen::MatrixXcd G_;
    Eigen::LLT<Eigen::MatrixXcd> llt_;
    double cond_ = 0.0;
    double off_diag_ = 0.0;
};

struct ExtremalReport {
    double max_random_ratio = 0.0;  // max over trials of |s(x)|^2 e^{-k phi} / (B(x) |s|^2)
    double extremal_ratio = 0.0;    // same ratio for the reproducing section
    std::uint64_t seed = 0;
    int trials = 0;
    bool pass = false;
};

namespace detail {

// ratio |sum_j b_j x^j / sqrt(m_j)|^2 / (|b|^2 K_J(x)) for scaled coefficients b
inline double section_ratio(const MomentSequence& ms, const std::vector<std::complex<double>>& b, std::complex<double> x,
                            double log_k) {
    double lr = std::log(std::abs(x));
    double th = std::arg(x);
    std::complex<double> val = 0.0;
    double norm = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) {
        norm += std::norm(b[j]);
        if (b[j] == 0.0) continue;
        double e = (std::abs(x) == 0.0) ? (j == 0 ? -0.5 * ms.log_m[0] - 0.5 * log_k : -kInf)
                                        : j * lr - 0.5 * ms.log_m[j] - 0.5 * log_k;
        val += b[j] * std::polar(std::exp(e), j * th);
    }
    if (norm == 0.0) throw Error(Errc::invalid_argument, "zero section");
    return std::norm(val) / norm;
}

}  // namespace detail

// Unit-norm sections never beat the Bergman function; the reproducing section
// attains it. B(x) here is the truncated sum the space actually spans.
inline ExtremalReport extremal_check(const WeightedSpace& space, std::complex<double> x, int trials, std::uint64_t seed,
                                     double tol = 1e-9) {
    const auto& ms = space.moments();
    double s = std::norm(x);
    double log_k = kernel_log(ms.log_m, s).log_k;
    ExtremalReport rep;
    rep.seed = seed;
    rep.trials = trials;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const std::size_t n = ms.log_m.size();
    std::vector<std::complex<double>> b(n);
    for (int t = 0; t < trials; ++t) {
        for (auto& c : b) c = {nd(rng), nd(rng)};
        double r = detail::section_ratio(ms, b, x, log_k);
        if (r > 1.0 + tol) {
            std::string coeffs;
            for (std::size_t j = 0; j < std::min<std::size_t>(n, 8); ++j)
                coeffs += "(" + std::to_string(b[j].real()) + "," + std::to_string(b[j].imag()) + ") ";
            throw Error(Errc::extremal_violation, "ratio " + std::to_string(r) + " for scaled coefficients " + coeffs + "...");
        }
        rep.max_random_ratio = std::max(rep.max_random_ratio, r);
    }
    // b_j proportional to conj(x)^j / sqrt(m_j)
    double lr = s > 0.0 ? std::log(std::abs(x)) : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double e = s > 0.0 ? j * lr - 0.5 * ms.log_m[j] - 0.5 * log_k : (j == 0 ? -0.5 * ms.log_m[0] - 0.5 * log_k : -kInf);
        b[j] = std::polar(std::exp(e), -double(j) * std::arg(x));
    }
    rep.extremal_ratio = detail::section_ratio(ms, b, x, log_k);
    rep.pass = rep.max_random_ratio <= 1.0 + tol && std::abs(rep.extremal_ratio - 1.0) <= tol;
    return rep;
}

// Ratio for a caller-chosen section given by plain coefficients a_j of z^j.
inline double section_ratio(const WeightedSpace& space, const std::vector<std::complex<double>>& a, std::complex<double> x) {
    const auto& ms = space.moments();
    if (a.size() > ms.log_m.size()) throw Error(Errc::invalid_argument, "section degree exceeds truncation");
    std::vector<std::complex<double>> b(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) b[j] = a[j] * std::exp(0.5 * ms.log_m[j]);
    return detail::section_ratio(ms, b, x, kernel_log(ms.log_m, std::norm(x)).log_k);
}

}  // namespace keiter
