#include "ckstab/branches.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ckstab;

namespace {

SystemParams preset(double k = 0.0, double d0 = -1.0) { return SystemParams::from_scaled(0.6, 0.12, d0, k); }

double n_of(const EndpointReport& r, BranchLabel l) {
    const auto bp = r.find(l);
    return bp ? bp->n : std::nan("");
}

}  // namespace

TEST(Diagram, ValidatesGrid) {
    const std::vector<double> bad{0.1, 0.1};
    EXPECT_THROW(trace_diagram(preset(), bad), BranchError);
    const std::vector<double> neg{-0.1, 0.1};
    EXPECT_THROW(trace_diagram(preset(), neg), BranchError);
}

TEST(Diagram, ReferencePattern) {
    const auto grid = linspace(0.001, 3.0, 3000);
    const auto d = trace_diagram(preset(), grid);
    ASSERT_EQ(d.samples.size(), grid.size());
    bool static_seen = false, osc_seen = false;
    for (const auto& s : d.samples) {
        if (s.verdict == StabilityClass::UnstableStatic) {
            static_seen = true;
            EXPECT_GT(s.n, 0.19);
            EXPECT_LT(s.n, 0.48);
        }
        if (s.verdict == StabilityClass::UnstableOscillatory) {
            osc_seen = true;
            EXPECT_GT(s.n, 0.5);
            EXPECT_LT(s.n, 2.8);
        }
        if (s.n < 0.18 || s.n > 2.8) {
            EXPECT_EQ(s.verdict, StabilityClass::Stable) << s.n;
        }
    }
    EXPECT_TRUE(static_seen);
    EXPECT_TRUE(osc_seen);
}

TEST(Endpoints, PureRadiationPressure) {
    const auto r = find_endpoints(preset());
    ASSERT_TRUE(r.bc_present);
    ASSERT_TRUE(r.de_present);
    EXPECT_NEAR(n_of(r, BranchLabel::B), 0.190932, 0.02 * 0.190932);
    EXPECT_NEAR(n_of(r, BranchLabel::C), 0.475734, 0.02 * 0.475734);
    EXPECT_NEAR(n_of(r, BranchLabel::D), 0.525, 0.1 * 0.525);
    EXPECT_NEAR(n_of(r, BranchLabel::E), 2.694, 0.1 * 2.694);
    EXPECT_LT(r.detector_gap, 1e-6);
    EXPECT_FALSE(r.de_unbounded);
    // s(n) turns around at B and C: B is the high-drive fold.
    EXPECT_GT(r.find(BranchLabel::B)->drive, r.find(BranchLabel::C)->drive);
}

TEST(Endpoints, FoldAndA0DetectorsAgree) {
    for (double k : {0.0, 0.2, 0.4, 0.8}) {
        const auto r = find_endpoints(preset(k));
        ASSERT_TRUE(r.bc_present) << k;
        EXPECT_LT(r.detector_gap, 1e-6) << k;
        ASSERT_EQ(r.a0_sign_changes.size(), 2u);
    }
}

TEST(Endpoints, PositiveDetuningHasNoBistability) {
    const auto r = find_endpoints(preset(0.0, 1.0));
    EXPECT_FALSE(r.bc_present);
    EXPECT_FALSE(r.find(BranchLabel::B).has_value());
    EXPECT_EQ(bc_drive_width(r), 0.0);
    EXPECT_FALSE(eq7_endpoints(preset(0.0, 1.0)).valid);
    EXPECT_FALSE(eq10_endpoints(preset(0.0, 1.0)).valid);
}

TEST(Endpoints, BistabilityVanishesNearCriticalCoupling) {
    EXPECT_TRUE(find_endpoints(preset(0.95)).bc_present);
    EXPECT_FALSE(find_endpoints(preset(1.0)).bc_present);
    EXPECT_FALSE(has_bc_branch(preset(1.0)));
}

TEST(Endpoints, BcDriveWidthShrinksWithCrossKerr) {
    double prev = INFINITY;
    for (double k : {0.0, 0.2, 0.4, 0.95, 1.0}) {
        const double w = bc_drive_width(find_endpoints(preset(k)));
        EXPECT_LT(w, prev) << k;
        prev = w;
    }
}

TEST(Endpoints, UpperBranchBroadensUnderClosedFormLinearization) {
    double prev = 0.0;
    for (double k : {0.0, 0.2, 0.4}) {
        const double w = de_n_width(find_endpoints(preset(k), Linearization::ClosedForm));
        EXPECT_GT(w, prev) << k;
        prev = w;
    }
}

TEST(Analytic, Eq7Values) {
    const auto e = eq7_endpoints(preset());
    ASSERT_TRUE(e.valid);
    EXPECT_NEAR(e.lower, 0.190932, 5e-6);
    EXPECT_NEAR(e.upper, 0.475734, 5e-6);
}

TEST(Analytic, Eq10ReducesWithoutCrossKerr) {
    const auto e = eq10_endpoints(preset());
    EXPECT_NEAR(e.lower, 1.0 / 6.0 + 0.36 / 16.0, 1e-15);
    EXPECT_NEAR(e.upper, 0.5 - 0.36 / 16.0, 1e-15);
    EXPECT_FALSE(e.note.empty());
}

TEST(Analytic, Eq5Values) {
    const auto u = eq5_eq13_endpoints(preset());
    EXPECT_NEAR(u.n_d_eq5, 0.525, 1e-12);
    EXPECT_NEAR(u.n_e_eq5, 2.694, 1e-3);
    EXPECT_TRUE(u.d_converged);
    EXPECT_TRUE(u.e_converged);
    EXPECT_DOUBLE_EQ(u.lambda_d, 0.375);
}

TEST(Analytic, Eq13FixedPoint) {
    const auto u = eq5_eq13_endpoints(preset(0.2));
    ASSERT_TRUE(u.d_converged);
    EXPECT_NEAR(u.n_d_eq13, eq13_n_d(0.2 * u.n_d_eq13), 1e-9);
    EXPECT_NEAR(u.eta_d, 0.2 * u.n_d_eq13, 1e-15);
}

TEST(Analytic, AsymptoticCoefficients) {
    EXPECT_NEAR(asymptotic_coeffs(preset()).c3_inf, 2.304, 1e-12);
    EXPECT_NEAR(asymptotic_coeffs(preset(2.0)).c4_inf, 0.0, 1e-15);
    EXPECT_GT(asymptotic_coeffs(preset(1.0)).c4_inf, 0.0);
}

TEST(Critical, ClosedFormCandidates) {
    CriticalOptions opt;
    opt.k_max = 0.0;  // skip the numeric scans
    const auto cc = critical_couplings(preset(), Linearization::ClosedForm, opt);
    EXPECT_NEAR(cc.eq16_scaled, 14.40, 1e-12);
    EXPECT_NEAR(cc.eq16_alt_scaled, 14.0, 1e-12);
    EXPECT_NEAR(cc.eq11_omega_m, 8.0 / 0.6 * std::sqrt(16.0 - 0.0036), 1e-12);
    EXPECT_DOUBLE_EQ(cc.g_star_c4_zero, 2.0);
    EXPECT_THROW(critical_couplings(preset(0.0, 1.0)), BranchError);
}

TEST(Critical, LowerCriticalCoupling) {
    CriticalOptions opt;
    opt.k_max = 1.5;
    const auto cc = critical_couplings(preset(), Linearization::ExactJacobian, opt);
    ASSERT_TRUE(cc.g_c1.has_value());
    EXPECT_GT(*cc.g_c1, 0.95);
    EXPECT_LT(*cc.g_c1, 1.0);
}

TEST(Endpoints, DivergingEndpointNearTwo) {
    const ScanOptions scan{1e-4, 1e8, 3000, 1e-10, 1e-6, 0};
    EXPECT_GT(upper_unstable_end(preset(1.995), Linearization::ClosedForm, scan), 1e6);
    EXPECT_LT(upper_unstable_end(preset(1.9), Linearization::ClosedForm, scan), 1e4);
    EXPECT_EQ(upper_unstable_end(preset(5.0), Linearization::ClosedForm, scan), 0.0);
}
