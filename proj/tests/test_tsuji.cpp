#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "keiter/tsuji.hpp"

using namespace keiter;
using std::numbers::pi;

namespace {

double grid_sup(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST(Dk, Examples) {
    EXPECT_DOUBLE_EQ(d_k(DkSchedule::generic(), 4), 4 / pi);
    EXPECT_DOUBLE_EQ(d_k(DkSchedule::kahler_einstein(), 1), 1 / (2 * pi));
    EXPECT_DOUBLE_EQ(d_k(DkSchedule::kahler_einstein(), 10), 10 / pi * 0.95);
    EXPECT_DOUBLE_EQ(d_k(DkSchedule::generic(2), 3), 9 / (pi * pi));
    EXPECT_THROW(d_k(DkSchedule::generic(), 0), Error);
    DkSchedule c{DkSchedule::Kind::custom, 1, pi, [](int k) { return 2.0 * k; }};
    EXPECT_DOUBLE_EQ(d_k(c, 3), 6.0);
}

TEST(Beta, KahlerEinsteinFixedPoint) {
    auto inst = poincare_instance();
    auto b = beta_k_detailed(inst.phi_inf, 5, inst, DkSchedule::kahler_einstein());
    EXPECT_LE(grid_sup(b.delta), 1e-10);
}

TEST(Beta, GenericScheduleOffset) {
    auto inst = poincare_instance();
    auto b = beta_k_detailed(inst.phi_inf, 5, inst, DkSchedule::generic());
    for (double d : b.delta) EXPECT_NEAR(d, std::log(0.9) / 5, 1e-10);
    EXPECT_NEAR(std::log(0.9) / 5, -0.021072, 1e-6);
}

TEST(Beta, ShiftContraction) {
    auto inst = poincare_instance();
    auto phi = inst.phi_inf + potentials::polynomial({0, 0.1, -0.05});
    for (int k : {2, 7}) {
        auto base = beta_k_detailed(phi, k, inst, DkSchedule::kahler_einstein());
        for (double c : {-0.5, 1.0}) {
            auto sh = beta_k_detailed(phi.plus_constant(c), k, inst, DkSchedule::kahler_einstein());
            for (std::size_t i = 0; i < base.value.size(); ++i)
                EXPECT_NEAR(sh.value[i] - base.value[i], (k - 1.0) / k * c, 1e-11);
        }
    }
}

TEST(Beta, OutputIsSubharmonic) {
    auto inst = poincare_instance();
    auto phi = inst.phi_inf + potentials::sine(0.3, 6.0);
    auto b = beta_k_detailed(phi, 4, inst, DkSchedule::kahler_einstein());
    for (double g : b.density) EXPECT_GE(g, -1e-8);
}

TEST(Beta, RejectsDegenerateStep) {
    auto inst = poincare_instance();
    try {
        beta_k(inst.phi_inf, 1, inst, DkSchedule::kahler_einstein());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
}

TEST(FixedPointDefect, GenericClosedForm) {
    auto inst = poincare_instance();
    for (int k : {2, 3, 8, 20})
        EXPECT_NEAR(fixed_point_defect(k, inst, DkSchedule::generic()), std::abs(std::log1p(-0.5 / k) / k), 1e-10);
}

TEST(Iterate, ConstantShiftTelescopes) {
    auto inst = poincare_instance();
    auto tr = iterate(inst.phi_inf.plus_constant(1.0), inst, DkSchedule::kahler_einstein(), 2, 12);
    ASSERT_EQ(tr.records.size(), 11u);
    for (const auto& r : tr.records) EXPECT_NEAR(r.sup_error, 1.0 / (r.k - 1), 1e-9) << r.k;
    EXPECT_NEAR(tr.records[8].sup_error, 1.0 / 9, 1e-9);
    for (std::size_t i = 1; i < tr.records.size(); ++i) EXPECT_GT(tr.records[i].k, tr.records[i - 1].k);
}

TEST(Iterate, FixedPointStaysPut) {
    auto inst = poincare_instance();
    auto tr = iterate(inst.phi_inf, inst, DkSchedule::kahler_einstein(), 2, 8);
    for (const auto& r : tr.records) {
        EXPECT_LE(r.sup_error, 1e-9);
        EXPECT_LE(r.eps_k, 1e-10);
    }
}

TEST(Iterate, RecurrenceBoundAndContraction) {
    auto inst = poincare_instance();
    auto grid = standard_grid(1.0);
    std::vector<double> off;
    for (double s : grid) off.push_back(0.2 * std::sin(pi * s));
    auto start = potentials::spline_offset(inst.phi_inf, grid, off);
    std::map<int, double> cache;
    IterateOptions opt;
    opt.eps_cache = &cache;
    auto tr = iterate(start, inst, DkSchedule::kahler_einstein(), 2, 14, opt);
    for (std::size_t i = 0; i + 1 < tr.records.size(); ++i) {
        const auto& a = tr.records[i];
        const auto& b = tr.records[i + 1];
        EXPECT_LE(b.sup_error, (a.k - 1.0) / a.k * a.sup_error + a.eps_k + 1e-9);
        EXPECT_LT(b.sup_error, a.sup_error);
    }
    EXPECT_EQ(cache.size(), 13u);
}

TEST(Iterate, ArgumentChecks) {
    auto inst = poincare_instance();
    EXPECT_THROW(iterate(inst.phi_inf, inst, DkSchedule::kahler_einstein(), 1, 5), Error);
    EXPECT_THROW(iterate(inst.phi_inf, inst, DkSchedule::kahler_einstein(), 5, 4), Error);
}

TEST(Iterate, DivergenceDetected) {
    auto inst = poincare_instance();
    // a schedule off by e^{3k} moves each step by 3 while the cached eps claim 0,
    // so e_k leaves the recurrence envelope
    DkSchedule bad{DkSchedule::Kind::custom, 1, pi, [](int k) { return std::exp(-3.0 * k) * k / pi; }};
    std::map<int, double> cache;
    for (int k = 2; k <= 30; ++k) cache[k] = 0.0;
    IterateOptions opt;
    opt.eps_cache = &cache;
    try {
        iterate(inst.phi_inf.plus_constant(0.01), inst, bad, 2, 30, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::divergence_detected);
    }
}

TEST(LemmaKey, ConstantShiftIsTight) {
    auto inst = poincare_instance();
    auto r = lemma_key_check(inst.phi_inf.plus_constant(0.4), 6, inst, DkSchedule::kahler_einstein());
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.lower_margin, r.eps_k, 1e-10);
    EXPECT_NEAR(r.upper_margin, r.eps_k, 1e-10);
}

TEST(LemmaKey, LinearOffset) {
    auto inst = poincare_instance();
    auto r = lemma_key_check(inst.phi_inf + potentials::polynomial({0, 0.1}), 8, inst, DkSchedule::kahler_einstein());
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.lower_margin, 0.0);
    EXPECT_GT(r.upper_margin, 0.0);
}

TEST(LemmaKey, NegativeOffsetSeveralK) {
    auto inst = poincare_instance();
    auto phi = inst.phi_inf + potentials::polynomial({-0.3, 0.3});
    for (int k : {4, 16, 32}) EXPECT_TRUE(lemma_key_check(phi, k, inst, DkSchedule::kahler_einstein()).pass) << k;
}

TEST(RateFit, SyntheticInverseK) {
    std::vector<double> k, e;
    for (int i = 10; i <= 50; i += 4) k.push_back(i), e.push_back(3.0 / i);
    auto f = rate_fit(k, e, RateModel::inverse_k);
    EXPECT_NEAR(f.C, 3.0, 1e-10);
    EXPECT_NEAR(f.alpha, 1.0, 1e-10);
    EXPECT_LE(f.residual, 1e-10);
}

TEST(RateFit, SyntheticLogKOverK) {
    std::vector<double> k, e;
    for (int i = 10; i <= 50; i += 4) k.push_back(i), e.push_back(2.0 * std::log(i) / i);
    auto f = rate_fit(k, e, RateModel::logk_over_k);
    EXPECT_NEAR(f.C, 2.0, 1e-10);
    EXPECT_NEAR(f.alpha, 1.0, 1e-10);
    EXPECT_LE(f.residual, 1e-10);
}

TEST(RateFit, TelescopingSequence) {
    std::vector<double> k, e;
    for (int i = 2; i <= 64; ++i) k.push_back(i), e.push_back(1.0 / (i - 1));
    // small k bends log(1/(k-1)) away from the line
    auto f = rate_fit(k, e, RateModel::inverse_k, 10);
    EXPECT_GE(f.alpha, 0.95);
    EXPECT_LE(f.alpha, 1.05);
}

TEST(RateFit, InsufficientData) {
    try {
        rate_fit({2, 3, 4}, {1, 1, 1}, RateModel::inverse_k);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::insufficient_data);
    }
    std::vector<double> k(10), e(10, 1e-14);
    for (int i = 0; i < 10; ++i) k[i] = i + 2;
    EXPECT_THROW(rate_fit(k, e, RateModel::inverse_k), Error);
}
