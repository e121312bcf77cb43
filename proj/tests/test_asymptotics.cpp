#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "keiter/asymptotics.hpp"

using namespace keiter;
using std::numbers::pi;

namespace {

// lambda (I / prefactor - 1) -> L1 as lambda grows; one Richardson step
// removes the 1/lambda term
double extrapolated_l1(const LaplaceFixture& fx, double lambda) {
    auto unit = fx.jet;
    unit.u0 = 1.0;
    auto g = [&](double lam) {
        double I = laplace_oracle(fx.f, fx.u, lam, fx.box).value;
        double lead = laplace_expand(unit, lam, false);
        return lam * (I / lead - fx.jet.u0);
    };
    return 2 * g(2 * lambda) - g(lambda);
}

// Q T Q^T on every tensor slot
LaplaceJet rotate(const LaplaceJet& j, const Eigen::MatrixXd& Q) {
    const int m = j.m;
    LaplaceJet r = LaplaceJet::zeros(m);
    r.f0 = j.f0;
    r.u0 = j.u0;
    for (int a = 0; a < m; ++a)
        for (int p = 0; p < m; ++p) r.u_grad[a] += Q(a, p) * j.u_grad[p];
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int p = 0; p < m; ++p)
                for (int q = 0; q < m; ++q) {
                    r.H[a * m + b] += Q(a, p) * Q(b, q) * j.H[p * m + q];
                    r.u_H[a * m + b] += Q(a, p) * Q(b, q) * j.u_H[p * m + q];
                }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                for (int p = 0; p < m; ++p)
                    for (int q = 0; q < m; ++q)
                        for (int s = 0; s < m; ++s)
                            r.T3[(a * m + b) * m + c] += Q(a, p) * Q(b, q) * Q(c, s) * j.t3(p, q, s);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < m; ++c)
                for (int d = 0; d < m; ++d) {
                    double v = 0;
                    for (int p = 0; p < m; ++p)
                        for (int q = 0; q < m; ++q)
                            for (int s = 0; s < m; ++s)
                                for (int t = 0; t < m; ++t) v += Q(a, p) * Q(b, q) * Q(c, s) * Q(d, t) * j.t4(p, q, s, t);
                    r.T4[((a * m + b) * m + c) * m + d] = v;
                }
    return r;
}

LaplaceJet random_jet(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    LaplaceJet j = LaplaceJet::zeros(m);
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(m, m);
    Eigen::MatrixXd H = -(A * A.transpose() + Eigen::MatrixXd::Identity(m, m));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) j.h(a, b) = H(a, b);
    // symmetric tensors from sums of rank-one terms
    for (int t = 0; t < 3; ++t) {
        std::vector<double> v(m), w(m);
        for (auto& x : v) x = nd(rng);
        for (auto& x : w) x = nd(rng);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                for (int c = 0; c < m; ++c) {
                    j.T3[(a * m + b) * m + c] += v[a] * v[b] * v[c];
                    for (int d = 0; d < m; ++d) j.T4[((a * m + b) * m + c) * m + d] += w[a] * w[b] * w[c] * w[d];
                }
    }
    j.u0 = 1.3;
    for (auto& x : j.u_grad) x = nd(rng);
    Eigen::MatrixXd B = Eigen::MatrixXd::Random(m, m);
    B = (B + B.transpose()).eval();
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) j.u_H[a * m + b] = B(a, b);
    return j;
}

}  // namespace

TEST(LaplaceL1, FixtureValues) {
    EXPECT_NEAR(laplace_l1(laplace_fixture("gaussian").jet), 0.0, 1e-15);
    EXPECT_NEAR(laplace_l1(laplace_fixture("second_moment").jet), 0.5, 1e-15);
    EXPECT_NEAR(laplace_l1(laplace_fixture("quartic").jet), 0.75, 1e-15);
    EXPECT_NEAR(laplace_l1(laplace_fixture("cubic").jet), 15.0 / 16.0, 1e-15);
}

TEST(LaplaceL1, AgreesWithExtrapolatedIntegrals) {
    for (const auto& name : laplace_fixture_names()) {
        auto fx = laplace_fixture(name);
        double l1 = laplace_l1(fx.jet);
        if (fx.expected_l1) EXPECT_NEAR(l1, *fx.expected_l1, 1e-12) << name;
        // the box cuts the quartic and cubic tails at e^{lambda f(edge)}, negligible at lambda >= 200
        EXPECT_NEAR(extrapolated_l1(fx, 200.0), l1, 2e-3) << name;
    }
}

TEST(LaplaceL1, SecondMomentMatchesGaussianIntegral) {
    // int x^2 e^{-lambda x^2} / sqrt(pi/lambda) = 1/(2 lambda)
    auto fx = laplace_fixture("second_moment");
    for (double lam : {3.0, 10.0}) {
        double expand = laplace_expand(fx.jet, lam);
        EXPECT_NEAR(expand / std::sqrt(pi / lam), 1.0 / (2 * lam), 1e-14);
    }
}

TEST(LaplaceL1, RotationInvariant) {
    std::mt19937_64 rng(11);
    for (int m : {2, 3}) {
        for (int trial = 0; trial < 5; ++trial) {
            auto j = random_jet(m, rng);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Random(m, m));
            Eigen::MatrixXd Q = qr.householderQ();
            double a = laplace_l1(j), b = laplace_l1(rotate(j, Q));
            EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST(LaplaceL1, SingularHessian) {
    auto j = LaplaceJet::zeros(1);
    try {
        laplace_l1(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::singular_hessian);
    }
    j.H[0] = 1.0;
    EXPECT_THROW(laplace_l1(j), Error);
}

TEST(LaplaceExpand, Examples) {
    auto g = laplace_fixture("gaussian").jet;
    EXPECT_NEAR(laplace_expand(g, 10.0), std::sqrt(pi / 10), 1e-15);
    EXPECT_NEAR(laplace_expand(g, 10.0), 0.560499, 1e-6);
    auto shifted = g;
    shifted.f0 = 0.3;
    EXPECT_NEAR(laplace_expand(shifted, 10.0) / laplace_expand(g, 10.0), std::exp(3.0), 1e-13);
    auto g2 = laplace_fixture("gaussian_2d").jet;
    EXPECT_NEAR(laplace_expand(g2, 5.0), 2 * pi / 5 / std::sqrt(8.0), 1e-15);
    EXPECT_THROW(laplace_expand(g, 0.0), Error);
}

TEST(LaplaceOracle, Examples) {
    auto fx = laplace_fixture("gaussian");
    Box box{{-1}, {1}};
    auto r = laplace_oracle(fx.f, fx.u, 100.0, box);
    EXPECT_NEAR(r.value, std::sqrt(pi) / 10, 1e-13);
    EXPECT_NEAR(r.value, 0.1772454, 1e-7);
    auto zero = laplace_oracle(fx.f, [](const std::vector<double>&) { return 0.0; }, 100.0, box);
    EXPECT_EQ(zero.value, 0.0);

    auto q = laplace_fixture("quartic");
    double o = laplace_oracle(q.f, q.u, 50.0, q.box).value;
    EXPECT_LE(std::abs(o / laplace_expand(q.jet, 50.0) - 1), 10 * 3 / (50.0 * 50.0));
}

TEST(LaplaceOracle, BudgetExceeded) {
    auto fx = laplace_fixture("gaussian");
    QuadratureSpec q{1, 4, {}, 64, 1e-15};
    try {
        laplace_oracle(fx.f, fx.u, 1e4, Box{{-1}, {1}}, q);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::budget_exceeded);
    }
}

TEST(JetFromCallables, OneDimensional) {
    auto q = laplace_fixture("quartic");
    auto sm = laplace_fixture("second_moment");
    auto j = jet_from_callables(q.f, sm.u, {0.0});
    EXPECT_NEAR(j.H[0], -2.0, 1e-9);
    EXPECT_NEAR(j.T4[0], 24.0, 1e-5);
    EXPECT_NEAR(j.u_grad[0], 0.0, 1e-9);
    EXPECT_NEAR(j.u_H[0], 2.0, 1e-9);
    EXPECT_NEAR(laplace_l1(jet_from_callables(q.f, q.u, {0.0})), 0.75, 1e-5);
}

TEST(JetFromCallables, TwoDimensionalMatchesAnalyticJet) {
    auto fx = laplace_fixture("coupled_2d");
    auto j = jet_from_callables(fx.f, fx.u, {0.0, 0.0});
    for (std::size_t i = 0; i < j.H.size(); ++i) EXPECT_NEAR(j.H[i], fx.jet.H[i], 1e-8);
    for (std::size_t i = 0; i < j.T3.size(); ++i) EXPECT_NEAR(j.T3[i], fx.jet.T3[i], 1e-6);
    for (std::size_t i = 0; i < j.T4.size(); ++i) EXPECT_NEAR(j.T4[i], fx.jet.T4[i], 1e-4);
    EXPECT_NEAR(laplace_l1(j), laplace_l1(fx.jet), 1e-5);
}

TEST(JetFromCallables, NotCritical) {
    PointFn f = [](const std::vector<double>& x) { return -(x[0] - 0.1) * (x[0] - 0.1); };
    PointFn u = [](const std::vector<double>&) { return 1.0; };
    try {
        jet_from_callables(f, u, {0.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::not_critical);
    }
}

TEST(LaplaceConvergence, ErrorSlopes) {
    for (const auto& name : laplace_fixture_names()) {
        auto fx = laplace_fixture(name);
        if (!fx.slope) continue;
        auto c = laplace_convergence(fx, {20, 40, 80, 160});
        EXPECT_NEAR(c.slope_l1, 2.0, 0.2) << name;
        EXPECT_NEAR(c.slope_l0, 1.0, 0.2) << name;
    }
}

TEST(ExpansionCheck, PoincareIsExactAtSecondOrder) {
    auto inst = poincare_instance();
    auto rep = expansion_check(inst, {2, 3, 5, 10, 20, 40}, {0.0, 0.3, 0.6, 0.9});
    ASSERT_EQ(rep.records.size(), 24u);
    for (const auto& r : rep.records) {
        EXPECT_LE(std::abs(r.residual), 1e-9) << r.k << " " << r.s;
        EXPECT_NEAR(r.predicted, r.k / pi * (1 - 0.5 / r.k), 1e-12 * r.predicted);
    }
}

TEST(ExpansionCheck, FlatWeightPredictionIsLeadingTerm) {
    // S = 0 for the flat metric, so the prediction is k / pi exactly
    MAInstance inst;
    inst.phi_inf = potentials::flat(1.0);
    inst.phi_L = inst.phi_inf;
    inst.log_omega = [](double s, double) { return s; };
    inst.description = "flat";
    for (int k : {4, 8}) {
        auto rep = expansion_check(inst, {k}, {0.01});
        EXPECT_NEAR(rep.records[0].predicted, k / pi, 1e-14);
    }
}
