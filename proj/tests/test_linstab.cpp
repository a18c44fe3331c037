#include "ckstab/branches.hpp"
#include "ckstab/linstab.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ckstab;

namespace {

SystemParams preset(double k = 0.0) { return SystemParams::from_scaled(0.6, 0.12, -1.0, k); }

double eigen_max_re(const Matrix4& A) {
    Eigen::Matrix4cd M;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) M(i, j) = A[i][j];
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(M, false);
    double m = -INFINITY;
    for (int i = 0; i < 4; ++i) m = std::max(m, es.eigenvalues()[i].real());
    return m;
}

struct Draw {
    SystemParams p;
    EffectiveParams eff;
};

/// Random symmetric-shape parameters: kappa, gamma log-uniform in
/// [1e-3, 10], Delta in [-3, 3], omega_e in [0.1, 3], |G| log-uniform in
/// [1e-3, 3], random phase of G.
Draw random_draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lu(std::log(1e-3), std::log(10.0)), lg(std::log(1e-3), std::log(3.0));
    std::uniform_real_distribution<double> ud(-3.0, 3.0), uw(0.1, 3.0), ph(0.0, 2.0 * M_PI);
    Draw d;
    d.p = SystemParams::from_scaled(std::exp(lu(rng)), std::exp(lu(rng)), 0.0, 0.0);
    d.eff.delta = ud(rng);
    d.eff.omega_e = uw(rng);
    d.eff.G = std::polar(std::exp(lg(rng)), ph(rng));
    d.eff.couplings = Couplings::symmetric(d.eff.G);
    d.eff.mode = Linearization::ClosedForm;
    return d;
}

}  // namespace

TEST(Linstab, UncoupledEigenvalues) {
    const SystemParams p = preset();
    const auto ss = steady_states(p, DriveSpec::scaled(0.0)).states.at(0);
    const auto ls = linearize(p, ss);
    const auto ev = quartic_roots(ls.charpoly.a3, ls.charpoly.a2, ls.charpoly.a1, ls.charpoly.a0);
    int cav = 0, mech = 0;
    for (auto z : ev) {
        EXPECT_NEAR(std::abs(z.imag()), 1.0, 1e-9);
        if (std::abs(z.real() + 0.3) < 1e-9) ++cav;
        if (std::abs(z.real() + 0.06) < 1e-9) ++mech;
    }
    EXPECT_EQ(cav, 2);
    EXPECT_EQ(mech, 2);
}

TEST(Linstab, GammaThreeExample) {
    const auto t = gamma_terms(0.6, 0.12, -1.0, 1.0, 0.0);
    EXPECT_NEAR(t.g3, 1.093924, 1e-12);
    EXPECT_NEAR(t.g1, 0.0036 + 1.0 + 0.072 + 0.09 + 1.0, 1e-14);
}

TEST(Linstab, FaddeevLeVerrierMatchesClosedForms) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        Draw d = random_draw(rng);
        if (t % 2) {
            // General (asymmetric) couplings
            auto z = [&] { return cdouble(nd(rng), nd(rng)); };
            d.eff.couplings = {z(), z(), z(), z()};
        }
        const Matrix4 A = build_matrix(d.p, d.eff);
        const CharPoly fl = charpoly(A);
        const CharPoly cf = closed_form_charpoly(d.p, d.eff);
        const double r = std::max(fl.rate(), cf.rate());
        EXPECT_NEAR(fl.a3, cf.a3, 1e-10 * r);
        EXPECT_NEAR(fl.a2, cf.a2, 1e-10 * r * r);
        EXPECT_NEAR(fl.a1, cf.a1, 1e-10 * r * r * r);
        EXPECT_NEAR(fl.a0, cf.a0, 1e-10 * r * r * r * r);
        EXPECT_NEAR(std::abs(determinant(A) - cdouble(fl.a0)), 0.0, 1e-10 * r * r * r * r);
        if (t % 2 == 0) {
            const auto g = gamma_terms(d.p.kappa_s(), d.p.gamma_s(), d.eff.delta, d.eff.omega_e, std::norm(d.eff.G));
            EXPECT_NEAR(cf.a2, g.g1, 1e-12 * r * r);
            EXPECT_NEAR(cf.a1, g.g2, 1e-12 * r * r * r);
            EXPECT_NEAR(cf.a0, g.g3, 1e-11 * r * r * r * r);
        }
    }
}

TEST(Linstab, RouthHurwitzAgreesWithEigenvalues) {
    std::mt19937_64 rng(42);
    int checked = 0;
    for (int t = 0; t < 10000; ++t) {
        const Draw d = random_draw(rng);
        const Matrix4 A = build_matrix(d.p, d.eff);
        const CharPoly cp = charpoly(A);
        const RouthHurwitz rh = routh_hurwitz(cp);
        const double m = eigen_max_re(A);
        if (std::abs(m) <= eigen_band) continue;
        ++checked;
        ASSERT_EQ(rh.stable(), m < 0.0) << "draw " << t;
        // a3 > 0 and a3 a2 > a1 are implied by the other two conditions here
        if (rh.cond_a0 > 0.0 && rh.cond_rh > 0.0) {
            EXPECT_GT(rh.cond_a3, 0.0);
            EXPECT_GT(rh.cond_a3a2_a1, 0.0);
        }
    }
    EXPECT_GT(checked, 9900);
}

TEST(Linstab, ClassifyExamples) {
    const SystemParams p = preset();
    const auto zero = classify(p, steady_states(p, DriveSpec::scaled(0.0)).states.at(0));
    EXPECT_EQ(zero.klass, StabilityClass::Stable);
    EXPECT_EQ(classify(p, steady_state_at_occupation(p, 0.3)).klass, StabilityClass::UnstableStatic);
    EXPECT_EQ(classify(p, steady_state_at_occupation(p, 1.0)).klass, StabilityClass::UnstableOscillatory);
    EXPECT_EQ(classify(p, steady_state_at_occupation(p, 5.0)).klass, StabilityClass::Stable);
    for (auto mode : {Linearization::ExactJacobian, Linearization::ClosedForm}) {
        const auto v = classify(p, steady_state_at_occupation(p, 1.0), mode);
        EXPECT_LT(v.rh_margin, 0.0);
        EXPECT_GT(v.max_re_lambda, 0.0);
    }
}

TEST(Linstab, MarginalAtTurningPoint) {
    const SystemParams p = preset();
    const auto folds = fold_points(p);
    ASSERT_EQ(folds.size(), 2u);
    const auto v = classify(p, steady_state_at_occupation(p, folds[0].value));
    EXPECT_EQ(v.klass, StabilityClass::Marginal);
}

TEST(Linstab, ModesCoincideWithoutCrossKerr) {
    // Without cross-Kerr and with gamma in the static response, both shapes
    // differ only through the gamma-dependent part of the static shift.
    const SystemParams p = preset();
    for (double n : {0.1, 0.3, 1.0, 3.0}) {
        const auto ss = steady_state_at_occupation(p, n);
        const auto a = classify(p, ss, Linearization::ExactJacobian);
        const auto b = classify(p, ss, Linearization::ClosedForm);
        EXPECT_EQ(a.klass, b.klass) << n;
    }
}

TEST(Linstab, ExactJacobianMatchesFiniteDifferences) {
    // Jacobian of the mean-field flow in (a, a*, b', b'*) coordinates.
    for (double k : {0.0, 0.3, 1.1}) {
        for (auto conv : {Convention::Eq14Consistent, Convention::AsPrinted}) {
            SystemParams p = preset(k);
            p.convention = conv;
            const auto ss = steady_states(p, DriveSpec::scaled(0.5)).states.back();
            const auto ls = linearize(p, ss);
            const cdouble I(0.0, 1.0);
            const cdouble c = conv == Convention::Eq14Consistent ? I : cdouble(1.0);
            const double kap = p.kappa_s(), gam = p.gamma_s(), d0 = p.delta0_s();
            const double drive = std::sqrt(kap) * ss.drive;
            auto flow = [&](cdouble a, cdouble b) {
                const cdouble da = I * (d0 - 2.0 * b.real() - k * std::norm(b)) * a - 0.5 * kap * a + drive;
                const cdouble db = -I * (1.0 + k * std::norm(a)) * b - c * std::norm(a) - 0.5 * gam * b;
                return std::pair{da, db};
            };
            const double h = 1e-6;
            // d(da)/d(db') with b' = -b, via Wirtinger derivatives
            auto wirt = [&](int which, int var) {
                // var: 0 -> a, 2 -> b' ; returns (d/dz, d/dz*)
                auto f = [&](cdouble dz) {
                    cdouble a = ss.alpha_s, b = ss.beta_s;
                    if (var == 0) a += dz; else b -= dz;
                    auto [fa, fb] = flow(a, b);
                    return which == 0 ? fa : -fb;
                };
                const cdouble dx = (f(h) - f(-h)) / (2.0 * h);
                const cdouble dy = (f(I * h) - f(-I * h)) / (2.0 * h);
                return std::pair{0.5 * (dx - I * dy), 0.5 * (dx + I * dy)};
            };
            const auto [a_a, a_as] = wirt(0, 0);
            const auto [a_b, a_bs] = wirt(0, 2);
            const auto [b_a, b_as] = wirt(1, 0);
            const auto [b_b, b_bs] = wirt(1, 2);
            EXPECT_NEAR(std::abs(ls.A[0][0] - a_a), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[0][1] - a_as), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[0][2] - a_b), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[0][3] - a_bs), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[2][0] - b_a), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[2][1] - b_as), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[2][2] - b_b), 0.0, 1e-6);
            EXPECT_NEAR(std::abs(ls.A[2][3] - b_bs), 0.0, 1e-6);
        }
    }
}

TEST(Linstab, EigenvectorIsNullVector) {
    const SystemParams p = preset(0.2);
    const auto ls = linearize(p, steady_state_at_occupation(p, 1.0));
    const auto ev = quartic_roots(ls.charpoly.a3, ls.charpoly.a2, ls.charpoly.a1, ls.charpoly.a0);
    for (auto lam : ev) {
        const auto v = eigenvector(ls.A, lam);
        double nv = 0.0, res = 0.0;
        for (int i = 0; i < 4; ++i) {
            cdouble r = -lam * v[i];
            for (int j = 0; j < 4; ++j) r += ls.A[i][j] * v[j];
            res += std::norm(r);
            nv += std::norm(v[i]);
        }
        EXPECT_NEAR(nv, 1.0, 1e-12);
        EXPECT_LT(std::sqrt(res), 1e-8);
    }
}

TEST(Linstab, RejectsBadSteadyState) {
    const SystemParams p = preset();
    SteadyState ss = steady_state_at_occupation(p, 0.5);
    ss.residual = 1.0;
    EXPECT_THROW(effective_params(p, ss), StabilityError);
}
