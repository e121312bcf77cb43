#pragma once

// Quadrature in s = |z|^2 on radial domains, Chebyshev grids, small fitting
// helpers and a fork/join loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "keiter/error.hpp"

namespace keiter {

struct GaussRule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

// Newton iteration on P_n, nodes returned in increasing order.
inline GaussRule gauss_legendre(int n) {
    if (n < 1) throw Error(Errc::invalid_argument, "gauss_legendre needs n >= 1");
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

struct BoundaryMap {
    enum class Kind { none, algebraic, exponential };
    Kind kind = Kind::none;
    double alpha = 0.0;   // algebraic: boundary exponent of the integrand, > -1
    double u_max = 36.0;  // exponential: s = s_max (1 - e^{-u}), u in [0, u_max]

    static BoundaryMap none() { return {}; }
    static BoundaryMap algebraic(double a) { return {Kind::algebraic, a, 36.0}; }
    static BoundaryMap exponential(double u_max = 36.0) { return {Kind::exponential, 0.0, u_max}; }
};

struct QuadratureSpec {
    int panels = 64;
    int points_per_panel = 16;
    BoundaryMap map{};
    std::size_t max_nodes = std::size_t{1} << 14;
    double rel_tol = 1e-13;

    void validate() const {
        if (panels < 1) throw Error(Errc::invalid_argument, "panels must be >= 1");
        if (points_per_panel < 2) throw Error(Errc::invalid_argument, "points_per_panel must be >= 2");
        if (map.kind == BoundaryMap::Kind::algebraic && !(map.alpha > -1.0))
            throw Error(Errc::invalid_argument, "algebraic boundary exponent must exceed -1");
        if (map.kind == BoundaryMap::Kind::exponential && !(map.u_max > 0.0))
            throw Error(Errc::invalid_argument, "exponential map needs u_max > 0");
    }
};

// One quadrature node for an integral ds over [0, s_max).
struct RadialNode {
    double s;
    double log_s;
    double gap;    // s_max - s, computed without cancellation
    double w;      // weight for ds
    double log_w;  // log of w
    int panel;
};

namespace detail {

struct MapPoint {
    double s, log_s, gap, jac, log_jac;
};

inline double map_param_end(const BoundaryMap& m) {
    return m.kind == BoundaryMap::Kind::exponential ? m.u_max : 1.0;
}

inline MapPoint map_point(const BoundaryMap& m, double s_max, double t) {
    switch (m.kind) {
    case BoundaryMap::Kind::none: {
        double gap = s_max * (1.0 - t);
        return {s_max * t, std::log(s_max * t), gap, s_max, std::log(s_max)};
    }
    case BoundaryMap::Kind::algebraic: {
        double p = 1.0 / (1.0 + m.alpha);
        double q = std::pow(1.0 - t, p);
        double gap = s_max * q;
        double jac = s_max * p * std::pow(1.0 - t, p - 1.0);
        return {s_max - gap, std::log(s_max) + std::log1p(-q), gap, jac, std::log(jac)};
    }
    case BoundaryMap::Kind::exponential: {
        double gap = s_max * std::exp(-t);
        double x = -std::expm1(-t);
        return {s_max * x, std::log(s_max) + std::log(x), gap, gap, std::log(s_max) - t};
    }
    }
    return {};
}

// inverse map from s to the parameter, used to align panel edges with breakpoints
inline double map_param(const BoundaryMap& m, double s_max, double s) {
    double x = s / s_max;
    switch (m.kind) {
    case BoundaryMap::Kind::none: return x;
    case BoundaryMap::Kind::algebraic: return 1.0 - std::pow(1.0 - x, 1.0 + m.alpha);
    case BoundaryMap::Kind::exponential: return -std::log1p(-x);
    }
    return x;
}

}  // namespace detail

// Nodes of a composite Gauss rule in the mapped variable. Breakpoints (values
// of s) are merged into the uniform panel edges.
inline std::vector<RadialNode> radial_nodes(const QuadratureSpec& spec, double s_max,
                                            const std::vector<double>& breakpoints = {}) {
    spec.validate();
    if (!(s_max > 0.0) || !std::isfinite(s_max))
        throw Error(Errc::invalid_argument, "s_max must be positive and finite");
    const double t_end = detail::map_param_end(spec.map);
    std::vector<double> edges;
    edges.reserve(spec.panels + 1 + breakpoints.size());
    for (int p = 0; p <= spec.panels; ++p) edges.push_back(t_end * p / spec.panels);
    for (double b : breakpoints) {
        if (b <= 0.0 || b >= s_max) continue;
        double t = detail::map_param(spec.map, s_max, b);
        if (t > 0.0 && t < t_end) edges.push_back(t);
    }
    std::sort(edges.begin(), edges.end());
    std::vector<double> merged;
    for (double e : edges)
        if (merged.empty() || e - merged.back() > 1e-13 * t_end) merged.push_back(e);
    merged.back() = t_end;

    const GaussRule g = gauss_legendre(spec.points_per_panel);
    std::vector<RadialNode> nodes;
    nodes.reserve((merged.size() - 1) * g.x.size());
    for (std::size_t p = 0; p + 1 < merged.size(); ++p) {
        double a = merged[p], b = merged[p + 1];
        double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            double t = mid + half * g.x[i];
            auto mp = detail::map_point(spec.map, s_max, t);
            double w = g.w[i] * half * mp.jac;
            nodes.push_back({mp.s, mp.log_s, mp.gap, w, std::log(g.w[i] * half) + mp.log_jac, static_cast<int>(p)});
        }
    }
    return nodes;
}

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
};

namespace detail {

template <class F>
double call_radial(F& f, double s, double gap) {
    if constexpr (std::is_invocable_v<F&, double, double>)
        return f(s, gap);
    else
        return f(s);
}

template <class F>
double integrate_once(F& f, const QuadratureSpec& spec, double s_max) {
    double sum = 0.0;
    for (const auto& n : radial_nodes(spec, s_max)) {
        double v = call_radial(f, n.s, n.gap);
        if (!std::isfinite(v))
            throw Error(Errc::non_finite, "integrand not finite at s = " + std::to_string(n.s));
        sum += n.w * v;
    }
    return sum;
}

}  // namespace detail

// pi * int_0^{s_max} f(s) ds, the disc integral of f(|z|^2) dx dy. The panel
// count doubles until two successive values agree to spec.rel_tol. f may take
// (s) or (s, s_max - s).
template <class F>
QuadResult integrate_disc(F&& f, const QuadratureSpec& spec, double s_max) {
    spec.validate();
    QuadratureSpec cur = spec;
    double prev = detail::integrate_once(f, cur, s_max);
    for (;;) {
        QuadratureSpec next = cur;
        next.panels *= 2;
        if (static_cast<std::size_t>(next.panels) * next.points_per_panel > spec.max_nodes)
            throw Error(Errc::budget_exceeded,
                        "quadrature did not converge within " + std::to_string(spec.max_nodes) + " nodes");
        double val = detail::integrate_once(f, next, s_max);
        double diff = std::abs(val - prev);
        if (diff <= spec.rel_tol * std::abs(val) || diff <= 1e-300) {
            return {std::numbers::pi * val, std::numbers::pi * diff, next.panels};
        }
        prev = val;
        cur = next;
    }
}

// Chebyshev-Lobatto points on [a, b], endpoints included, increasing.
inline std::vector<double> chebyshev_grid(std::size_t n, double a, double b) {
    if (n < 2) throw Error(Errc::invalid_argument, "chebyshev_grid needs n >= 2");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double c = std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
        x[i] = a + 0.5 * (b - a) * (1.0 - c);
    }
    x.front() = a;
    x.back() = b;
    return x;
}

struct RadialGrid {
    std::vector<double> nodes;
    std::vector<double> values;
    double boundary_exponent = 0.0;

    void validate() const {
        if (nodes.empty() || nodes.size() != values.size())
            throw Error(Errc::invalid_argument, "grid nodes and values differ in length");
        if (nodes.front() != 0.0) throw Error(Errc::invalid_argument, "grid must start at 0");
        for (std::size_t i = 1; i < nodes.size(); ++i)
            if (!(nodes[i] > nodes[i - 1])) throw Error(Errc::invalid_argument, "grid nodes not increasing");
        for (double v : values)
            if (!std::isfinite(v)) throw Error(Errc::non_finite, "grid value not finite");
    }
};

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw Error(Errc::insufficient_data, "line fit needs two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(Errc::insufficient_data, "line fit abscissae coincide");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double r2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        r2 += r * r;
    }
    f.rms = std::sqrt(r2 / n);
    return f;
}

// Splits [0, n) into contiguous blocks, one per thread. fn(i) must only write
// to slot i of its output.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex mu;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

inline unsigned default_threads() {
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

}  // namespace keiter
