#pragma once

// Laplace's method with the first correction term, and the check of the
// two-term Bergman expansion B ~ (k/c)^n (1 + S/(2k)) on radial instances.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "keiter/bergman.hpp"
#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/numerics.hpp"
#include "keiter/tsuji.hpp"

namespace keiter {

// Derivatives at the critical point x0 of the phase f and the amplitude u,
// dense and fully symmetric, m <= 3.
struct LaplaceJet {
    int m = 1;
    double f0 = 0.0;
    std::vector<double> grad;  // m
    std::vector<double> H;     // m*m
    std::vector<double> T3;    // m^3
    std::vector<double> T4;    // m^4
    double u0 = 1.0;
    std::vector<double> u_grad;  // m
    std::vector<double> u_H;     // m*m

    static LaplaceJet zeros(int m) {
        LaplaceJet j;
        j.m = m;
        j.grad.assign(m, 0.0);
        j.H.assign(m * m, 0.0);
        j.T3.assign(m * m * m, 0.0);
        j.T4.assign(m * m * m * m, 0.0);
        j.u_grad.assign(m, 0.0);
        j.u_H.assign(m * m, 0.0);
        return j;
    }

    double& h(int i, int j) { return H[i * m + j]; }
    double h(int i, int j) const { return H[i * m + j]; }
    double t3(int i, int j, int k) const { return T3[(i * m + j) * m + k]; }
    double t4(int i, int j, int k, int l) const { return T4[((i * m + j) * m + k) * m + l]; }
};

namespace detail {

inline Eigen::MatrixXd hessian_matrix(const LaplaceJet& j) {
    Eigen::MatrixXd A(j.m, j.m);
    for (int a = 0; a < j.m; ++a)
        for (int b = 0; b < j.m; ++b) A(a, b) = j.h(a, b);
    return A;
}

inline void check_jet(const LaplaceJet& j) {
    if (j.m < 1 || j.m > 3) throw Error(Errc::invalid_argument, "Laplace jets are limited to m <= 3");
    const std::size_t m = j.m;
    if (j.grad.size() != m || j.H.size() != m * m || j.T3.size() != m * m * m || j.T4.size() != m * m * m * m ||
        j.u_grad.size() != m || j.u_H.size() != m * m)
        throw Error(Errc::invalid_argument, "Laplace jet tensors have the wrong size");
}

inline Eigen::MatrixXd inverse_hessian(const LaplaceJet& j, double* det_neg = nullptr) {
    Eigen::MatrixXd A = hessian_matrix(j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    auto ev = es.eigenvalues();
    double scale = ev.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || ev.maxCoeff() >= -1e-12 * scale)
        throw Error(Errc::singular_hessian, "phase Hessian is not negative definite");
    if (det_neg) *det_neg = (-A).determinant();
    return A.inverse();
}

}  // namespace detail

// L1 u = 1/2 [ u (-f_ikl f_jrs (1/4 f^ij f^kl f^rs + 1/6 f^ij f^ks f^rl) + 1/4 f^ij f^kl f_ijkl)
//              + f^sq f^rp f_srq u_p - Tr(H_u H_f^{-1}) ]
inline double laplace_l1(const LaplaceJet& jet) {
    detail::check_jet(jet);
    const int m = jet.m;
    Eigen::MatrixXd F = detail::inverse_hessian(jet);
    double cubic = 0.0;
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k)
            for (int l = 0; l < m; ++l)
                for (int j = 0; j < m; ++j)
                    for (int r = 0; r < m; ++r)
                        for (int s = 0; s < m; ++s) {
                            double c = jet.t3(i, k, l) * jet.t3(j, r, s);
                            if (c == 0.0) continue;
                            cubic += c * (0.25 * F(i, j) * F(k, l) * F(r, s) + F(i, j) * F(k, s) * F(r, l) / 6.0);
                        }
    double quartic = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int l = 0; l < m; ++l) quartic += F(i, j) * F(k, l) * jet.t4(i, j, k, l);
    double grad_term = 0.0;
    for (int s = 0; s < m; ++s)
        for (int q = 0; q < m; ++q)
            for (int r = 0; r < m; ++r)
                for (int p = 0; p < m; ++p) grad_term += F(s, q) * F(r, p) * jet.t3(s, r, q) * jet.u_grad[p];
    double trace = 0.0;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) trace += jet.u_H[a * m + b] * F(b, a);
    return 0.5 * (jet.u0 * (-cubic + 0.25 * quartic) + grad_term - trace);
}

// (2 pi/lambda)^{m/2} e^{lambda f0} det(-H_f)^{-1/2} (L0 u + L1 u / lambda)
inline double laplace_expand(const LaplaceJet& jet, double lambda, bool with_l1 = true) {
    detail::check_jet(jet);
    if (!(lambda > 0.0)) throw Error(Errc::invalid_argument, "lambda must be positive");
    double det = 0.0;
    detail::inverse_hessian(jet, &det);
    double pre = std::pow(2.0 * std::numbers::pi / lambda, 0.5 * jet.m) * std::exp(lambda * jet.f0) / std::sqrt(det);
    double series = jet.u0 + (with_l1 ? laplace_l1(jet) / lambda : 0.0);
    return pre * series;
}

using PointFn = std::function<double(const std::vector<double>&)>;

struct Box {
    std::vector<double> lo, hi;
};

struct OracleResult {
    double value = 0.0;
    double error = 0.0;  // change under doubling of the panels
    int panels = 0;
};

namespace detail {

inline double tensor_gauss(const PointFn& f, const PointFn& u, double lambda, const Box& box, int panels, int pts) {
    const int m = static_cast<int>(box.lo.size());
    const GaussRule g = gauss_legendre(pts);
    std::vector<std::vector<double>> xs(m), ws(m);
    for (int d = 0; d < m; ++d) {
        double h = (box.hi[d] - box.lo[d]) / panels;
        for (int p = 0; p < panels; ++p)
            for (int i = 0; i < pts; ++i) {
                xs[d].push_back(box.lo[d] + h * (p + 0.5 * (1.0 + g.x[i])));
                ws[d].push_back(0.5 * h * g.w[i]);
            }
    }
    const std::size_t n = xs[0].size();
    std::vector<double> x(m);
    double sum = 0.0;
    std::vector<std::size_t> idx(m, 0);
    for (;;) {
        double w = 1.0;
        for (int d = 0; d < m; ++d) x[d] = xs[d][idx[d]], w *= ws[d][idx[d]];
        double uv = u(x);
        if (uv != 0.0) {
            double val = uv * std::exp(lambda * f(x));
            if (!std::isfinite(val)) throw Error(Errc::non_finite, "oracle integrand not finite");
            sum += w * val;
        }
        int d = 0;
        while (d < m && ++idx[d] == n) idx[d++] = 0;
        if (d == m) break;
    }
    return sum;
}

}  // namespace detail

// Tensor-product Gauss-Legendre value of int_box u e^{lambda f}.
inline OracleResult laplace_oracle(const PointFn& f, const PointFn& u, double lambda, const Box& box,
                                   const QuadratureSpec& quad = {16, 16, {}, std::size_t{1} << 22, 1e-13}) {
    const int m = static_cast<int>(box.lo.size());
    if (m < 1 || m > 3 || box.hi.size() != box.lo.size())
        throw Error(Errc::invalid_argument, "oracle box must have dimension 1..3");
    int panels = quad.panels;
    double prev = detail::tensor_gauss(f, u, lambda, box, panels, quad.points_per_panel);
    for (;;) {
        panels *= 2;
        if (std::pow(double(panels) * quad.points_per_panel, m) > double(quad.max_nodes))
            throw Error(Errc::budget_exceeded, "oracle refinement exceeded the node budget");
        double cur = detail::tensor_gauss(f, u, lambda, box, panels, quad.points_per_panel);
        double err = std::abs(cur - prev);
        if (err <= quad.rel_tol * std::abs(cur) || cur == 0.0) return {cur, err, panels};
        prev = cur;
    }
}

namespace detail {

// central differences of order O(h^4) for derivative orders 0..4
inline const std::vector<std::pair<int, double>>& stencil(int order) {
    static const std::vector<std::pair<int, double>> s0{{0, 1.0}};
    static const std::vector<std::pair<int, double>> s1{{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}};
    static const std::vector<std::pair<int, double>> s2{
        {-2, -1.0 / 12}, {-1, 16.0 / 12}, {0, -30.0 / 12}, {1, 16.0 / 12}, {2, -1.0 / 12}};
    static const std::vector<std::pair<int, double>> s3{{-3, 1.0 / 8},  {-2, -1.0},  {-1, 13.0 / 8},
                                                        {1, -13.0 / 8}, {2, 1.0},    {3, -1.0 / 8}};
    static const std::vector<std::pair<int, double>> s4{{-3, -1.0 / 6}, {-2, 2.0},      {-1, -13.0 / 2}, {0, 28.0 / 3},
                                                        {1, -13.0 / 2}, {2, 2.0},       {3, -1.0 / 6}};
    switch (order) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
    default: return s4;
    }
}

// mixed partial for a multi-index given per axis
inline double mixed_partial(const PointFn& f, const std::vector<double>& x0, const std::vector<int>& alpha, double h) {
    const int m = static_cast<int>(x0.size());
    int total = 0;
    for (int a : alpha) total += a;
    std::vector<const std::vector<std::pair<int, double>>*> st(m);
    for (int d = 0; d < m; ++d) st[d] = &stencil(alpha[d]);
    std::vector<std::size_t> idx(m, 0);
    std::vector<double> x(m);
    double sum = 0.0;
    for (;;) {
        double w = 1.0;
        for (int d = 0; d < m; ++d) {
            const auto& [off, c] = (*st[d])[idx[d]];
            x[d] = x0[d] + off * h;
            w *= c;
        }
        sum += w * f(x);
        int d = 0;
        while (d < m && ++idx[d] == st[d]->size()) idx[d++] = 0;
        if (d == m) break;
    }
    return sum / std::pow(h, total);
}

inline std::vector<int> multi_index(int m, std::initializer_list<int> axes) {
    std::vector<int> a(m, 0);
    for (int ax : axes) ++a[ax];
    return a;
}

}  // namespace detail

// Finite-difference jet: step h for orders <= 2, 10 h for orders 3 and 4.
inline LaplaceJet jet_from_callables(const PointFn& f, const PointFn& u, const std::vector<double>& x0, double h = 1e-3) {
    const int m = static_cast<int>(x0.size());
    if (m < 1 || m > 3) throw Error(Errc::invalid_argument, "jets are limited to m <= 3");
    LaplaceJet j = LaplaceJet::zeros(m);
    j.f0 = f(x0);
    j.u0 = u(x0);
    const double H = 10.0 * h;
    double gnorm = 0.0;
    for (int a = 0; a < m; ++a) {
        j.grad[a] = detail::mixed_partial(f, x0, detail::multi_index(m, {a}), h);
        gnorm += j.grad[a] * j.grad[a];
        j.u_grad[a] = detail::mixed_partial(u, x0, detail::multi_index(m, {a}), h);
    }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            j.H[a * m + b] = detail::mixed_partial(f, x0, detail::multi_index(m, {a, b}), h);
            j.u_H[a * m + b] = detail::mixed_partial(u, x0, detail::multi_index(m, {a, b}), h);
        }
    double scale = 1.0;
    for (double v : j.H) scale = std::max(scale, std::abs(v));
    if (std::sqrt(gnorm) > 1e-8 * scale)
        throw Error(Errc::not_critical, "|grad f| = " + std::to_string(std::sqrt(gnorm)) + " at the expansion point");
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c) {
                j.T3[(a * m + b) * m + c] = detail::mixed_partial(f, x0, detail::multi_index(m, {a, b, c}), H);
                for (int d = 0; d < m; ++d)
                    j.T4[((a * m + b) * m + c) * m + d] =
                        detail::mixed_partial(f, x0, detail::multi_index(m, {a, b, c, d}), H);
            }
    return j;
}

struct ExpansionRecord {
    int k = 0;
    double s = 0.0;
    double measured = 0.0;
    double predicted = 0.0;
    double residual = 0.0;
};

struct ExpansionReport {
    std::vector<ExpansionRecord> records;
    std::vector<double> max_residual;  // per k, in k_list order
    double decay_order = 0.0;          // alpha in max residual ~ C k^{-alpha}
    double decay_constant = 0.0;
    bool fitted = false;
};

// B_k = K_{k phi_inf, omega_{phi_inf}} e^{-k phi_inf} against (k/c)^n (1 + S/(2k)).
inline ExpansionReport expansion_check(const MAInstance& inst, const std::vector<int>& k_list,
                                       const std::vector<double>& points, const DkSchedule& sch = {},
                                       const MomentOptions& opt = {}, double fit_k_min = 0.0,
                                       double fit_k_max = kInf) {
    ExpansionReport rep;
    const auto& phi = inst.phi_inf;
    double s_eval = 0.0;
    for (double s : points) s_eval = std::max(s_eval, s);
    MomentOptions mo = opt;
    mo.eval_frac = std::max(s_eval / inst.s_max(), 1e-3);
    std::vector<double> S;
    for (double s : points) S.push_back(ricci_scalar(phi, s));
    std::vector<double> fx, fy;
    for (int k : k_list) {
        if (k < 2) throw Error(Errc::invalid_argument, "expansion check needs k >= 2");
        LogDensity ld = [phi, k](double s, double gap) {
            Jet j = phi.jet(s, gap);
            return -k * j.v + std::log(j.d1 + s * j.d2);
        };
        auto space = WeightedSpace::from_measure(ld, inst.s_max(), k, phi, mo);
        double lead = std::pow(k / sch.c_conv, sch.n);
        double worst = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            ExpansionRecord r;
            r.k = k;
            r.s = points[i];
            r.measured = space.bergman_function(points[i]);
            r.predicted = lead * (1.0 + S[i] / (2.0 * k));
            r.residual = r.measured - r.predicted;
            worst = std::max(worst, std::abs(r.residual));
            rep.records.push_back(r);
        }
        rep.max_residual.push_back(worst);
        if (k >= fit_k_min && k <= fit_k_max && worst > 0.0) {
            fx.push_back(std::log(double(k)));
            fy.push_back(std::log(worst));
        }
    }
    if (fx.size() >= 2) {
        auto lf = fit_line(fx, fy);
        rep.decay_order = -lf.slope;
        rep.decay_constant = std::exp(lf.intercept);
        rep.fitted = true;
    }
    return rep;
}

struct LaplaceFixture {
    std::string name;
    PointFn f, u;
    LaplaceJet jet;
    Box box;
    std::optional<double> expected_l1;
    bool slope = false;  // usable for the lambda^-1 / lambda^-2 error slopes
};

namespace detail {

inline double poly_eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
    return v;
}

// 1-D fixture from polynomial coefficients of f and u about x = 0
inline LaplaceFixture poly_fixture(std::string name, std::vector<double> fc, std::vector<double> uc, double a,
                                   std::optional<double> l1, bool slope) {
    fc.resize(std::max<std::size_t>(fc.size(), 5), 0.0);
    uc.resize(std::max<std::size_t>(uc.size(), 3), 0.0);
    LaplaceFixture fx;
    fx.name = std::move(name);
    fx.f = [fc](const std::vector<double>& x) { return poly_eval(fc, x[0]); };
    fx.u = [uc](const std::vector<double>& x) { return poly_eval(uc, x[0]); };
    fx.jet = LaplaceJet::zeros(1);
    fx.jet.f0 = fc[0];
    fx.jet.grad[0] = fc[1];
    fx.jet.H[0] = 2.0 * fc[2];
    fx.jet.T3[0] = 6.0 * fc[3];
    fx.jet.T4[0] = 24.0 * fc[4];
    fx.jet.u0 = uc[0];
    fx.jet.u_grad[0] = uc[1];
    fx.jet.u_H[0] = 2.0 * uc[2];
    fx.box = {{-a}, {a}};
    fx.expected_l1 = l1;
    fx.slope = slope;
    return fx;
}

}  // namespace detail

inline std::vector<std::string> laplace_fixture_names() {
    return {"gaussian", "second_moment", "quartic", "cubic", "quartic_damped", "mixed", "gaussian_2d", "coupled_2d"};
}

inline LaplaceFixture laplace_fixture(const std::string& name) {
    using detail::poly_fixture;
    if (name == "gaussian") return poly_fixture(name, {0, 0, -1}, {1}, 8.0, 0.0, false);
    if (name == "second_moment") return poly_fixture(name, {0, 0, -1}, {0, 0, 1}, 8.0, 0.5, false);
    if (name == "quartic") return poly_fixture(name, {0, 0, -1, 0, 1}, {1}, 0.6, 0.75, false);
    if (name == "cubic") return poly_fixture(name, {0, 0, -1, 1}, {1}, 0.6, 15.0 / 16.0, false);
    // boundary values far below the maximum, so the box does not show up in the error
    if (name == "quartic_damped") return poly_fixture(name, {0, 0, -1, 0, -1}, {1}, 1.5, -0.75, true);
    if (name == "mixed") return poly_fixture(name, {0, 0, -1, 1, -1}, {1, 0.5, 1}, 1.5, std::nullopt, true);
    if (name == "gaussian_2d" || name == "coupled_2d") {
        bool coupled = name == "coupled_2d";
        LaplaceFixture fx;
        fx.name = name;
        if (coupled) {
            // -x^2 - 2y^2 + x y^2 - x^4 - y^4, u = 1 + y + x^2
            fx.f = [](const std::vector<double>& x) {
                double a = x[0], b = x[1];
                return -a * a - 2 * b * b + a * b * b - a * a * a * a - b * b * b * b;
            };
            fx.u = [](const std::vector<double>& x) { return 1.0 + x[1] + x[0] * x[0]; };
        } else {
            fx.f = [](const std::vector<double>& x) { return -x[0] * x[0] - 2 * x[1] * x[1]; };
            fx.u = [](const std::vector<double>&) { return 1.0; };
        }
        fx.jet = LaplaceJet::zeros(2);
        fx.jet.H = {-2, 0, 0, -4};
        if (coupled) {
            // f_xyy = 2 in every ordering, f_xxxx = f_yyyy = -24
            fx.jet.T3 = {0, 0, 0, 2, 0, 2, 2, 0};
            fx.jet.T4[0] = -24;
            fx.jet.T4[15] = -24;
            fx.jet.u_grad = {0, 1};
            fx.jet.u_H = {2, 0, 0, 0};
        }
        fx.box = {{-3, -3}, {3, 3}};
        if (!coupled) fx.expected_l1 = 0.0;
        fx.slope = coupled;
        return fx;
    }
    throw Error(Errc::invalid_argument, "unknown Laplace fixture '" + name + "'");
}

struct LaplaceRow {
    double lambda = 0.0;
    double oracle = 0.0;
    double oracle_error = 0.0;
    double expand_l0 = 0.0;
    double expand_l1 = 0.0;
    double err_l0 = 0.0;  // relative to the oracle
    double err_l1 = 0.0;
};

struct LaplaceConvergence {
    std::string fixture;
    double l1 = 0.0;
    std::vector<LaplaceRow> rows;
    double slope_l0 = 0.0, slope_l1 = 0.0;  // -d log err / d log lambda
};

inline LaplaceConvergence laplace_convergence(const LaplaceFixture& fx, const std::vector<double>& lambdas) {
    LaplaceConvergence c;
    c.fixture = fx.name;
    c.l1 = laplace_l1(fx.jet);
    std::vector<double> x, y0, y1;
    for (double lam : lambdas) {
        LaplaceRow r;
        r.lambda = lam;
        auto o = laplace_oracle(fx.f, fx.u, lam, fx.box);
        r.oracle = o.value;
        r.oracle_error = o.error;
        r.expand_l0 = laplace_expand(fx.jet, lam, false);
        r.expand_l1 = laplace_expand(fx.jet, lam, true);
        r.err_l0 = std::abs(r.oracle - r.expand_l0) / std::abs(r.oracle);
        r.err_l1 = std::abs(r.oracle - r.expand_l1) / std::abs(r.oracle);
        c.rows.push_back(r);
        if (r.err_l0 > 0.0 && r.err_l1 > 0.0) {
            x.push_back(std::log(lam));
            y0.push_back(std::log(r.err_l0));
            y1.push_back(std::log(r.err_l1));
        }
    }
    if (x.size() >= 2) {
        c.slope_l0 = -fit_line(x, y0).slope;
        c.slope_l1 = -fit_line(x, y1).slope;
    }
    return c;
}

}  // namespace keiter
