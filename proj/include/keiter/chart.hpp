#pragma once

// Holomorphic normal coordinates at a point for a Kahler potential in n <= 2
// complex variables. Index convention: T3[a][b][c] = d_a dbar_b d_c phi(0),
// T4[a][b][c][d] = d_a dbar_b d_c d_d phi(0).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "keiter/error.hpp"

namespace keiter {

using cplx = std::complex<double>;

struct ChartJet {
    int n = 1;
    std::array<std::array<cplx, 2>, 2> T2{};
    std::array<std::array<std::array<cplx, 2>, 2>, 2> T3{};
    std::array<std::array<std::array<std::array<cplx, 2>, 2>, 2>, 2> T4{};
};

// z^b = w^b + A[b][a][c] w^a w^c + B[b][a][c][d] w^a w^c w^d
struct ChartMap {
    int n = 1;
    std::array<std::array<std::array<cplx, 2>, 2>, 2> A{};
    std::array<std::array<std::array<std::array<cplx, 2>, 2>, 2>, 2> B{};

    std::array<cplx, 2> apply(const std::array<cplx, 2>& w) const {
        std::array<cplx, 2> z{};
        for (int b = 0; b < n; ++b) {
            cplx v = w[b];
            for (int a = 0; a < n; ++a)
                for (int c = 0; c < n; ++c) {
                    v += A[b][a][c] * w[a] * w[c];
                    for (int d = 0; d < n; ++d) v += B[b][a][c][d] * w[a] * w[c] * w[d];
                }
            z[b] = v;
        }
        return z;
    }
};

inline void check_chart_dimension(int n) {
    if (n < 1 || n > 2) throw Error(Errc::invalid_argument, "chart normalization implemented for n in {1, 2}");
}

struct Prenormalized {
    Eigen::Matrix2cd P = Eigen::Matrix2cd::Identity();  // z = P w
    ChartJet jet;
};

// Linear change z = P w with P = (L^T)^{-1}, H = L L^*, making phi_{i jbar} = delta.
inline Prenormalized prenormalize(const ChartJet& jet) {
    check_chart_dimension(jet.n);
    const int n = jet.n;
    Eigen::MatrixXcd H(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) H(i, j) = jet.T2[i][j];
    Eigen::LLT<Eigen::MatrixXcd> llt(H);
    if (llt.info() != Eigen::Success) throw Error(Errc::non_positive_metric, "Levi form at the center is not positive");
    Eigen::MatrixXcd L = llt.matrixL();
    Eigen::MatrixXcd P = L.transpose().inverse();

    Prenormalized out;
    out.P.setIdentity();
    out.P.topLeftCorner(n, n) = P;
    ChartJet& t = out.jet;
    t.n = n;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            cplx s2 = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) s2 += jet.T2[i][j] * P(i, a) * std::conj(P(j, b));
            t.T2[a][b] = s2;
            for (int c = 0; c < n; ++c) {
                cplx s3 = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int k = 0; k < n; ++k) s3 += jet.T3[i][j][k] * P(i, a) * std::conj(P(j, b)) * P(k, c);
                t.T3[a][b][c] = s3;
                for (int d = 0; d < n; ++d) {
                    cplx s4 = 0;
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < n; ++j)
                            for (int k = 0; k < n; ++k)
                                for (int l = 0; l < n; ++l)
                                    s4 += jet.T4[i][j][k][l] * P(i, a) * std::conj(P(j, b)) * P(k, c) * P(l, d);
                    t.T4[a][b][c][d] = s4;
                }
            }
        }
    return out;
}

// Cubic holomorphic change killing the third and fourth mixed derivatives:
// A^b_{ac} = -1/2 phi_{a bbar c},
// B^b_{acd} = -1/6 (phi_{a bbar c d} + 2 sum_l (A^l_{cd} phi_{a bbar l} + A^l_{ad} phi_{l bbar c} + A^l_{ac} phi_{l bbar d})).
inline ChartMap normalize_chart(const ChartJet& jet, double tol = 1e-10) {
    check_chart_dimension(jet.n);
    const int n = jet.n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            cplx want = i == j ? 1.0 : 0.0;
            if (std::abs(jet.T2[i][j] - want) > tol)
                throw Error(Errc::not_normalized, "phi_{i jbar}(0) differs from the identity; prenormalize first");
        }
    ChartMap m;
    m.n = n;
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) m.A[b][a][c] = -0.5 * jet.T3[a][b][c];
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    cplx C = 0;
                    for (int l = 0; l < n; ++l)
                        C += m.A[l][c][d] * jet.T3[a][b][l] + m.A[l][a][d] * jet.T3[l][b][c] +
                             m.A[l][a][c] * jet.T3[l][b][d];
                    m.B[b][a][c][d] = -(jet.T4[a][b][c][d] + 2.0 * C) / 6.0;
                }
    return m;
}

inline double max_abs(const ChartMap& m, bool quadratic) {
    double r = 0;
    for (int b = 0; b < m.n; ++b)
        for (int a = 0; a < m.n; ++a)
            for (int c = 0; c < m.n; ++c) {
                if (quadratic) r = std::max(r, std::abs(m.A[b][a][c]));
                else
                    for (int d = 0; d < m.n; ++d) r = std::max(r, std::abs(m.B[b][a][c][d]));
            }
    return r;
}

using ChartPotential = std::function<double(const std::array<cplx, 2>&)>;

namespace detail {

// Taylor coefficient c_{p,q} of zeta^p zetabar^q for a real function of one
// complex variable, from Fourier modes on circles and a fit in rho^2.
struct CircleCoefficients {
    cplx c11, c21, c31;
};

inline CircleCoefficients circle_coefficients(const std::function<double(cplx)>& f, double rho_max) {
    constexpr int nth = 64, nrad = 16, deg = 10;
    std::vector<double> rho(nrad);
    for (int i = 0; i < nrad; ++i) {
        double x = 0.5 * (1.0 - std::cos(std::numbers::pi * (i + 0.5) / nrad));
        rho[i] = rho_max * std::sqrt(0.05 + 0.95 * x);
    }
    Eigen::MatrixXd V(nrad, deg + 1);
    std::array<Eigen::VectorXcd, 3> F;
    for (auto& v : F) v.resize(nrad);
    for (int i = 0; i < nrad; ++i) {
        double t = rho[i] * rho[i] / (rho_max * rho_max);
        double p = 1.0;
        for (int d = 0; d <= deg; ++d) V(i, d) = p, p *= t;
        std::array<cplx, 3> acc{};
        for (int l = 0; l < nth; ++l) {
            double th = 2.0 * std::numbers::pi * l / nth;
            double val = f(std::polar(rho[i], th));
            for (int m = 0; m < 3; ++m) acc[m] += val * std::polar(1.0, -m * th);
        }
        for (int m = 0; m < 3; ++m) F[m](i) = acc[m] / double(nth) / std::pow(rho[i], m);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    auto coef = [&](int m, int q) {
        Eigen::VectorXd re = qr.solve(Eigen::VectorXd(F[m].real()));
        Eigen::VectorXd im = qr.solve(Eigen::VectorXd(F[m].imag()));
        double scale = std::pow(rho_max * rho_max, q);
        return cplx(re(q), im(q)) / scale;
    };
    // mode m collects c_{q+m, q} rho^{2q}
    return {coef(0, 1), coef(1, 1), coef(2, 1)};
}

inline std::vector<std::array<cplx, 2>> chart_directions(int n) {
    if (n == 1) return {{cplx(1.0), cplx(0.0)}};
    std::vector<std::array<cplx, 2>> v;
    for (int i = 0; i < 20; ++i) {
        double a = 0.5 * std::numbers::pi * (i + 0.5) / 20.0;
        double b = 2.0 * std::numbers::pi * std::fmod(0.618033988749895 * (i + 1), 1.0);
        v.push_back({cplx(std::cos(a)), std::sin(a) * std::polar(1.0, b)});
    }
    return v;
}

// nondecreasing index tuples of length d and their permutation counts
inline void sym_tuples(int n, int d, std::vector<std::vector<int>>& out, std::vector<double>& mult) {
    out.clear();
    mult.clear();
    std::vector<int> t(d, 0);
    std::function<void(int, int)> rec = [&](int pos, int lo) {
        if (pos == d) {
            out.push_back(t);
            double m = std::tgamma(d + 1.0);
            int run = 1;
            for (int i = 1; i <= d; ++i) {
                if (i < d && t[i] == t[i - 1]) ++run;
                else {
                    m /= std::tgamma(run + 1.0);
                    run = 1;
                }
            }
            mult.push_back(m);
            return;
        }
        for (int i = lo; i < n; ++i) t[pos] = i, rec(pos + 1, i);
    };
    rec(0, 0);
}

}  // namespace detail

// Directional mixed derivatives of phi(z0 + zeta v) at zeta = 0:
// D2 = sum T2 v vbar, D3 = sum T3 v vbar v, D4 = sum T4 v vbar v v.
struct DirectionalJet {
    std::array<cplx, 2> v;
    cplx D2, D3, D4;
};

inline std::vector<DirectionalJet> directional_jets(const ChartPotential& phi, int n, double rho_max = 0.4) {
    check_chart_dimension(n);
    std::vector<DirectionalJet> out;
    for (const auto& v : detail::chart_directions(n)) {
        auto c = detail::circle_coefficients(
            [&](cplx z) { return phi({z * v[0], z * v[1]}); }, rho_max);
        out.push_back({v, c.c11, 2.0 * c.c21, 6.0 * c.c31});
    }
    return out;
}

// Mixed-derivative jet at 0 of a potential, reconstructed from directional
// data by least squares over symmetric tensor entries.
inline ChartJet jet_from_potential(const ChartPotential& phi, int n, double rho_max = 0.4) {
    auto dj = directional_jets(phi, n, rho_max);
    ChartJet jet;
    jet.n = n;
    for (int order = 2; order <= 4; ++order) {
        std::vector<std::vector<int>> tup;
        std::vector<double> mult;
        detail::sym_tuples(n, order - 1, tup, mult);
        const int nu = static_cast<int>(tup.size()) * n;
        Eigen::MatrixXcd M(dj.size(), nu);
        Eigen::VectorXcd rhs(dj.size());
        for (std::size_t r = 0; r < dj.size(); ++r) {
            const auto& v = dj[r].v;
            for (std::size_t t = 0; t < tup.size(); ++t)
                for (int b = 0; b < n; ++b) {
                    cplx mono = mult[t] * std::conj(v[b]);
                    for (int i : tup[t]) mono *= v[i];
                    M(r, t * n + b) = mono;
                }
            rhs(r) = order == 2 ? dj[r].D2 : order == 3 ? dj[r].D3 : dj[r].D4;
        }
        Eigen::VectorXcd x = M.colPivHouseholderQr().solve(rhs);
        for (std::size_t t = 0; t < tup.size(); ++t)
            for (int b = 0; b < n; ++b) {
                cplx val = x(t * n + b);
                const auto& h = tup[t];
                // scatter to every ordering of the holomorphic indices
                std::vector<int> p = h;
                do {
                    if (order == 2) jet.T2[p[0]][b] = val;
                    else if (order == 3) jet.T3[p[0]][b][p[1]] = val;
                    else jet.T4[p[0]][b][p[1]][p[2]] = val;
                } while (std::next_permutation(p.begin(), p.end()));
            }
    }
    return jet;
}

struct ChartResidual {
    double third = 0.0;   // max |D3| over directions
    double fourth = 0.0;  // max |D4| over directions
    double second_defect = 0.0;  // max |D2 - |v|^2|
};

// Pulls phi back through z = P (w + A w w + B w w w) and measures the
// remaining mixed derivatives at the origin.
inline ChartResidual chart_residual(const ChartPotential& phi, const ChartMap& map,
                                    const Eigen::Matrix2cd& P = Eigen::Matrix2cd::Identity(),
                                    double rho_max = 0.4) {
    ChartPotential pulled = [&](const std::array<cplx, 2>& w) {
        auto u = map.apply(w);
        std::array<cplx, 2> z{};
        for (int i = 0; i < map.n; ++i)
            for (int j = 0; j < map.n; ++j) z[i] += P(i, j) * u[j];
        return phi(z);
    };
    ChartResidual r;
    for (const auto& d : directional_jets(pulled, map.n, rho_max)) {
        double nv = std::norm(d.v[0]) + (map.n > 1 ? std::norm(d.v[1]) : 0.0);
        r.second_defect = std::max(r.second_defect, std::abs(d.D2 - nv));
        r.third = std::max(r.third, std::abs(d.D3));
        r.fourth = std::max(r.fourth, std::abs(d.D4));
    }
    return r;
}

}  // namespace keiter
