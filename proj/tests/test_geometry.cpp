#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "keiter/geometry.hpp"

using namespace keiter;

namespace {

// closed-form density of the disc of radius R: 2R^2/(R^2 - s)^2
double poincare_density(double R, double s) { return 2 * R * R / ((R * R - s) * (R * R - s)); }

}  // namespace

TEST(KahlerDensity, Examples) {
    EXPECT_DOUBLE_EQ(kahler_density(potentials::flat(), 0.3), 1.0);
    for (double s : {0.0, 0.4, 0.9, 0.999})
        EXPECT_NEAR(kahler_density(potentials::poincare(), s) / poincare_density(1, s), 1.0, 1e-14);
    auto sq = potentials::polynomial({0, 0, 1});
    for (double s : {0.0, 0.25, 3.0}) EXPECT_NEAR(kahler_density(sq, s), 4 * s, 1e-14);
}

TEST(KahlerDensity, OutOfDomain) {
    EXPECT_THROW(kahler_density(potentials::poincare(), 1.0), Error);
    EXPECT_THROW(kahler_density(potentials::poincare(), -0.1), Error);
}

TEST(RicciScalar, FlatAndPoincare) {
    EXPECT_DOUBLE_EQ(ricci_scalar(potentials::flat(), 0.5), 0.0);
    for (double R : {0.5, 1.0, 3.0})
        for (double s : standard_grid(R * R, 64)) EXPECT_NEAR(ricci_scalar(potentials::poincare(R), s), -1.0, 1e-10);
}

TEST(RicciScalar, CuspModelIsHyperbolic) {
    for (double s : {1e-6, 0.01, 0.3, 0.7, 0.95}) EXPECT_NEAR(ricci_scalar(cusp_density_jet(s), s), -1.0, 1e-10);
}

TEST(RicciScalar, ConstantRescaling) {
    for (double s : {0.1, 0.5, 0.8}) {
        auto d = density_jet(potentials::poincare(), s);
        double S = ricci_scalar(d, s);
        for (double c : {0.5, 2.0, 10.0}) {
            DensityJet dc{c * d.g, c * d.g1, c * d.g2};
            EXPECT_NEAR(ricci_scalar(dc, s), S / c, 1e-14 * std::abs(S));
        }
    }
}

TEST(RicciScalar, NonPositiveMetric) {
    try {
        ricci_scalar(DensityJet{-1.0, 0.0, 0.0}, 0.2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::non_positive_metric);
    }
}

TEST(PoincareInstance, Examples) {
    auto inst = poincare_instance(1.0);
    EXPECT_NEAR(inst.phi_inf(0.0), std::log(2.0), 1e-15);
    for (double s : {0.0, 0.5, 0.98}) EXPECT_NEAR(kahler_density(inst.phi_inf, s) / poincare_density(1, s), 1.0, 1e-14);
    EXPECT_LE(max_ma_residual(inst), 1e-10);
    for (double s : standard_grid(1.0)) EXPECT_GT(kahler_density(inst.phi_L, s), 0.0);
}

TEST(PoincareInstance, ScalingRelation) {
    for (double R : {0.3, 2.0}) {
        auto a = poincare_instance(R), one = poincare_instance(1.0);
        for (double s : {0.0, 0.2 * R * R, 0.9 * R * R})
            EXPECT_NEAR(a.phi_inf(s), one.phi_inf(s / (R * R)) - 2 * std::log(R), 1e-13);
    }
}

TEST(ManufactureInstance, ZeroPerturbationReturnsBase) {
    auto base = poincare_instance();
    auto inst = manufacture_instance(potentials::constant(0.0), base);
    EXPECT_EQ(inst.description, base.description);
    EXPECT_EQ(inst.kind, InstanceKind::kahler_einstein);
}

TEST(ManufactureInstance, ResidualOnGrid) {
    auto inst = manufacture_instance(potentials::polynomial({0, 0.1, -0.1}), poincare_instance());
    EXPECT_LE(max_ma_residual(inst), 1e-10);
    // relative form of the residual; the absolute one scales with g ~ 1e4 at s = 0.99
    double worst = 0;
    for (double s : standard_grid(1.0)) {
        double g = kahler_density(inst.phi_inf, s);
        double gap = 1.0 - s;
        double rhs = std::exp(inst.phi_inf.value(s, gap) - inst.phi_L.value(s, gap) + inst.log_omega(s, gap));
        worst = std::max(worst, std::abs(g - rhs) / g);
    }
    EXPECT_LE(worst, 1e-12);
    EXPECT_EQ(inst.kind, InstanceKind::generic);
}

TEST(ManufactureInstance, ConstantShift) {
    auto base = poincare_instance();
    const double c = 0.7;
    auto inst = manufacture_instance(potentials::constant(c), base);
    for (double s : {0.0, 0.4, 0.9}) {
        EXPECT_NEAR(inst.phi_inf(s), base.phi_inf(s) + c, 1e-13);
        EXPECT_NEAR(inst.omega_density(s) / (base.omega_density(s) * std::exp(-c)), 1.0, 1e-13);
    }
}

TEST(ManufactureInstance, DegenerateMetric) {
    try {
        manufacture_instance(potentials::polynomial({0, -3.0}), poincare_instance());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::metric_degenerate);
    }
}

TEST(RadialPotential, ArithmeticAndJets) {
    auto p = potentials::polynomial({1, 2, 3}) + potentials::sine(0.5, 2.0, 0.1);
    Jet j = p.jet(0.3);
    EXPECT_NEAR(j.v, 1 + 0.6 + 0.27 + 0.5 * std::sin(0.7), 1e-14);
    EXPECT_NEAR(j.d1, 2 + 1.8 + std::cos(0.7), 1e-14);
    EXPECT_NEAR(j.d2, 6 - 2 * std::sin(0.7), 1e-14);
    EXPECT_NEAR(p.plus_constant(2)(0.3), j.v + 2, 1e-14);
    EXPECT_NEAR(p.scaled(-2).jet(0.3).d2, -2 * j.d2, 1e-13);
}

TEST(SplineOffset, InterpolatesAndHoldsEnds) {
    std::vector<double> x{0.0, 0.25, 0.5, 0.75, 0.9};
    std::vector<double> y{0.1, -0.2, 0.3, 0.0, 0.05};
    auto p = potentials::spline_offset(potentials::poincare(), x, y);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(p(x[i]) - potentials::poincare()(x[i]), y[i], 1e-14);
    EXPECT_NEAR(p(0.95) - potentials::poincare()(0.95), 0.05, 1e-14);
    EXPECT_EQ(p.order(), 1);
    EXPECT_EQ(p.breakpoints().size(), x.size());
}

TEST(BoundedGeometryParams, Validation) {
    BoundedGeometryParams p{1.0, 2.0, {1.0, 3.0}, 5};
    EXPECT_NO_THROW(p.validate());
    p.ell = 4;
    EXPECT_THROW(p.validate(), Error);
    EXPECT_NO_THROW(p.validate(false));
    p.c = 0.5;
    EXPECT_THROW(p.validate(false), Error);
}
