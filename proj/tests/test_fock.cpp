#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "cvdist/fock.hpp"
#include "generators.hpp"

using namespace cvdist;
using namespace cvdist::fock;
using cvdist::testing::for_all;
using cvdist::testing::Gen;

namespace {

double binom(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

double factorial(int n) { return std::exp(std::lgamma(n + 1.0)); }

// <p, N-p| U |a, N-a> from U a_A^dag U^dag = t a_A^dag - s a_B^dag and
// U a_B^dag U^dag = s a_A^dag + t a_B^dag, expanded binomially.
double bs_binomial(double refl, int total, int p, int a) {
    const double t = std::sqrt(1.0 - refl), s = std::sqrt(refl);
    const int b = total - a;
    double sum = 0.0;
    for (int i = 0; i <= a; ++i) {
        const int j = p - i;
        if (j < 0 || j > b) continue;
        sum += binom(a, i) * std::pow(t, i) * std::pow(-s, a - i) * binom(b, j) * std::pow(s, j) * std::pow(t, b - j);
    }
    return sum * std::sqrt(factorial(p) * factorial(total - p) / (factorial(a) * factorial(b)));
}

FockDensityMatrix vacuum(int modes, int d) {
    CVec psi = CVec::Zero(static_cast<Eigen::Index>(std::pow(d, modes)));
    psi(0) = 1.0;
    return FockDensityMatrix::from_pure(modes, d, psi);
}

FockDensityMatrix number_state(int n, int d) {
    CVec psi = CVec::Zero(d);
    psi(n) = 1.0;
    return FockDensityMatrix::from_pure(1, d, psi);
}

Vec unit_x(int modes, int mode) {
    Vec r = Vec::Zero(2 * modes);
    r(2 * mode) = 1.0;
    return r;
}

Complex moment_power(const FockDensityMatrix& rho, const Vec& r, int k) {
    MomentSpec spec;
    spec.factors.assign(k, r);
    return moment(rho, spec);
}

}  // namespace

TEST_CASE("displacement matrix matches the Laguerre closed form") {
    const int d = 20;
    for_all(20, 21, [&](Gen& g, int) {
        const Complex alpha(g.uniform(-1.5, 1.5), g.uniform(-1.5, 1.5));
        const CMat dm = displacement_matrix(alpha, d);
        const double x = std::norm(alpha);
        for (int m = 0; m < d; ++m)
            for (int n = 0; n <= m; ++n) {
                const Complex expected = std::sqrt(factorial(n) / factorial(m)) * std::pow(alpha, m - n) *
                                         std::exp(-0.5 * x) * std::assoc_laguerre(n, m - n, x);
                CHECK(std::abs(dm(m, n) - expected) < 1e-10);
                // <n|D|m> = (-alpha^*)^{m-n} ...: the upper triangle follows from D(alpha)^dag = D(-alpha).
                const Complex upper = std::sqrt(factorial(n) / factorial(m)) * std::pow(-std::conj(alpha), m - n) *
                                      std::exp(-0.5 * x) * std::assoc_laguerre(n, m - n, x);
                CHECK(std::abs(dm(n, m) - upper) < 1e-10);
            }
    });
}

TEST_CASE("displacement matrix matches a matrix exponential at an enlarged cutoff") {
    const int d = 15, big = 90;
    const Mat a = annihilation(big);
    for (Complex alpha : {Complex(0.3, -0.2), Complex(-1.0, 0.7), Complex(0.0, 1.8)}) {
        const CMat gen = alpha * a.transpose().cast<Complex>() - std::conj(alpha) * a.cast<Complex>();
        const CMat full = gen.exp();
        const CMat dm = displacement_matrix(alpha, d);
        CHECK((dm - full.topLeftCorner(d, d)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("charfun of simple states") {
    const int d = 20;
    const auto vac = vacuum(1, d);
    Vec r(2);
    r << 2.0, 0.0;
    CHECK(std::abs(charfun_numeric(vac, r) - std::exp(-1.0)) < 1e-8);
    CHECK(std::abs(charfun_numeric(vac, Vec::Zero(2)) - 1.0) < 1e-14);

    // Single photon and |3> against Laguerre forms chi = exp(-q/4) L_n(q/2), q = |r|^2.
    const auto one = number_state(1, d);
    const auto three = number_state(3, d);
    for_all(25, 22, [&](Gen& g, int) {
        const Vec pt = g.point_in_ball(2, 3.0);
        const double q = pt.squaredNorm();
        CHECK(std::abs(charfun_numeric(one, pt) - (1.0 - 0.5 * q) * std::exp(-0.25 * q)) < 1e-10);
        CHECK(std::abs(charfun_numeric(three, pt) - std::exp(-0.25 * q) * std::laguerre(3, 0.5 * q)) < 1e-10);
    });
    CHECK(std::abs(weyl_alpha(1.0, 0.0) - Complex(0.0, 1.0 / std::numbers::sqrt2)) < 1e-15);
}

TEST_CASE("TMSV charfun agrees with the Gaussian closed form") {
    const auto tmsv = fock_tmsv(0.3, 30).state;
    const GaussianState g(Vec::Zero(4), embed_symmetric(make_two_mode_squeezed(0.3)).covariance());
    for_all(10, 23, [&](Gen& gen, int) {
        const Vec r = gen.point_in_ball(4, 3.0);
        CHECK(std::abs(charfun_numeric(tmsv, r) - gaussian_charfun(g, r)) < 1e-6);
    });
}

TEST_CASE("beam splitter blocks match the binomial expansion") {
    for (double refl : {0.0, 0.2, 0.5, 0.9, 1.0}) {
        const BeamSplitterBlocks bs(refl, 10);
        for (int total = 0; total <= 10; ++total) {
            const Mat& u = bs.block(total);
            CHECK((u * u.transpose() - Mat::Identity(total + 1, total + 1)).cwiseAbs().maxCoeff() < 1e-12);
            for (int p = 0; p <= total; ++p)
                for (int a = 0; a <= total; ++a)
                    CHECK(std::abs(bs.element(total, p, a) - bs_binomial(refl, total, p, a)) < 1e-10);
        }
    }
}

TEST_CASE("photon replacement factors") {
    for (double eta : {0.3, 0.5, 0.9}) {
        const auto c = photon_replacement_factors(eta, 12);
        CHECK(c[0] == doctest::Approx(eta));
        CHECK(c[1] == doctest::Approx(2.0 * eta * eta - 1.0));
        for (int n = 0; n < 12; ++n)
            CHECK(c[n] == doctest::Approx(bs_binomial(1.0 - eta * eta, n + 1, n, n)).epsilon(1e-10));
    }
}

TEST_CASE("TMSV in Fock space") {
    const auto r0 = fock_tmsv(0.0, 10).state;
    CHECK(std::abs(r0.data()(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(r0.trace() - 1.0) < 1e-15);

    const auto st = fock_tmsv(0.5, 30).state;
    CHECK(std::abs((st.data() * st.data()).trace() - 1.0) < 1e-10);
    const auto mom = covariance_from_fock(st);
    const auto cs = extract_symmetric(mom.gamma, 1e-6);
    CHECK(cs.c == doctest::Approx(std::cosh(1.0)).epsilon(1e-6));
    CHECK(cs.s == doctest::Approx(std::sinh(1.0)).epsilon(1e-6));
    CHECK(mom.d.norm() < 1e-12);

    const auto g = fock_tmsv(0.4, 30).state;
    const auto cs4 = extract_symmetric(covariance_from_fock(g).gamma, 1e-6);
    CHECK(cs4.c == doctest::Approx(std::cosh(0.8)).epsilon(1e-6));
    CHECK(cs4.s == doctest::Approx(std::sinh(0.8)).epsilon(1e-6));

    CHECK_THROWS_AS(fock_tmsv(2.0, 10), LeakageError);
}

TEST_CASE("Gaussian states from covariance matrices") {
    const auto via_gamma = fock_gaussian_state(embed_symmetric(make_two_mode_squeezed(0.4)).covariance(), 20).state;
    const auto direct = fock_tmsv(0.4, 20).state;
    CHECK((via_gamma.data() - direct.data()).cwiseAbs().maxCoeff() < 1e-12);

    for_all(6, 24, [](Gen& g, int) {
        const Mat gamma = g.physical_covariance(2, 0.3, 1.3);
        const auto st = fock_gaussian_state(gamma, 25);
        CHECK((covariance_from_fock(st.state).gamma - gamma).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(st.state.min_eigenvalue() > -1e-12);
    });
}

TEST_CASE("density matrix validation") {
    CMat bad = CMat::Zero(4, 4);
    bad(0, 0) = 1.0;
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(FockDensityMatrix(1, 4, bad), std::invalid_argument);
    CMat half = CMat::Zero(4, 4);
    half(0, 0) = 0.5;
    CHECK_THROWS_AS(FockDensityMatrix(1, 4, half), std::invalid_argument);
    CHECK_NOTHROW(FockDensityMatrix(1, 4, half, false));

    CVec top = CVec::Zero(6);
    top(5) = 1.0;
    CHECK_THROWS_AS(check_leakage(FockDensityMatrix::from_pure(1, 6, top), "test"), LeakageError);
}

TEST_CASE("vacuum moments") {
    const auto vac = vacuum(1, 12);
    const Vec x = unit_x(1, 0);
    CHECK(std::abs(moment_power(vac, x, 2) - 0.5) < 1e-14);
    CHECK(std::abs(moment_power(vac, x, 4) - 0.75) < 1e-14);
    CHECK(std::abs(moment_power(vac, x, 1)) < 1e-15);
    CHECK(std::abs(moment_power(vac, x, 3)) < 1e-15);
}

TEST_CASE("Wick closure for Gaussian Fock states") {
    const auto st = fock_tmsv(0.3, 30).state;
    for_all(4, 25, [&](Gen& g, int) {
        const Vec r = g.vector(4);
        const double nu = moment_power(st, r, 2).real();
        for (int k : {2, 4, 6}) {
            double dfact = 1.0;
            for (int j = k - 1; j > 1; j -= 2) dfact *= j;
            CHECK(std::abs(moment_power(st, r, k) - dfact * std::pow(nu, k / 2)) < 1e-8 * std::max(1.0, std::pow(nu, k / 2)));
        }
    });
}

TEST_CASE("twirling") {
    // Coherent-like state with nonzero mean.
    const int d = 20;
    const CMat dm = displacement_matrix(Complex(0.6, 0.3), d);
    const auto coh = FockDensityMatrix::from_pure(1, d, dm.col(0));
    CHECK(covariance_from_fock(coh).d.norm() > 0.5);

    const auto tw = twirl(coh);
    const auto mom = covariance_from_fock(tw);
    CHECK(mom.d.norm() < 1e-12);
    const Vec x = unit_x(1, 0);
    CHECK(std::abs(moment_power(tw, x, 2) - moment_power(coh, x, 2)) < 1e-12);
    CHECK(std::abs(moment_power(tw, x, 3)) < 1e-12);
    CHECK((twirl(tw).data() - tw.data()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("squeezed reference moments") {
    const int d = 30;
    const auto tiny = squeezed_reference(1e-9, d);
    CHECK(std::abs(tiny.data()(0, 0) - 1.0) < 1e-15);

    const Mat a = annihilation(d);
    double prev_n = 0.0, prev_aa = 0.0;
    for (double lambda : {0.1, 0.2, 0.3, 0.4, 0.5}) {
        const auto st = squeezed_reference(lambda, d);
        const Complex n = (st.data() * (a.transpose() * a).cast<Complex>()).trace();
        const Complex aa = (st.data() * (a * a).cast<Complex>()).trace();
        CHECK(std::abs(n.imag()) < 1e-15);
        CHECK(std::abs(aa.imag()) < 1e-15);
        CHECK(n.real() > prev_n);
        CHECK(aa.real() > prev_aa);
        prev_n = n.real();
        prev_aa = aa.real();
        CHECK(std::abs(moment_power(st, unit_x(1, 0), 1)) < 1e-15);
        CHECK(std::abs(moment_power(st, unit_x(1, 0), 3)) < 1e-14);
    }
}

TEST_CASE("reference dominance") {
    const int d = 30;
    const GaussianFilter filter({1.0});
    const auto ref = squeezed_reference(0.5, d);

    const auto self = reference_dominance_check(ref, ref, filter, 6);
    CHECK(self.pass());
    for (const auto& deg : self.degrees) CHECK(std::abs(deg.worst_margin) < 1e-12);

    CHECK(reference_dominance_check(vacuum(1, d), ref, filter, 6).pass());

    // Mostly vacuum with a little |4>: small second moments, large fourth.
    CMat mix = CMat::Zero(d, d);
    mix(0, 0) = 0.96;
    mix(4, 4) = 0.04;
    const auto small_ref = squeezed_reference(0.3, d);
    const auto rep = reference_dominance_check(FockDensityMatrix(1, d, mix), small_ref, filter, 6);
    CHECK_FALSE(rep.pass());
    CHECK(rep.first_failure() == 4);
}

TEST_CASE("fidelity") {
    const auto a = number_state(1, 8);
    const auto b = number_state(2, 8);
    CHECK(fidelity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fidelity(a, b) < 1e-12);
    const auto t = fock_tmsv(0.3, 15).state;
    CHECK(fidelity(t, t) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("covariance of the vacuum") {
    const auto mom = covariance_from_fock(vacuum(2, 10));
    CHECK((mom.gamma - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(mom.d.norm() < 1e-12);
}

TEST_CASE("filtering") {
    const int d = 15;
    const GaussianFilter filter({1.0, 1.0});
    const auto vac = vacuum(2, d);
    CHECK((filtered_object(vac, filter).data() - vac.data()).cwiseAbs().maxCoeff() < 1e-15);

    const auto t = fock_tmsv(0.4, d).state;
    const GaussianFilter weak({1e-10, 1e-10});
    CHECK((filtered_object(t, weak).data() - t.data()).cwiseAbs().maxCoeff() < 1e-9);

    const auto tau = filtered_object(t, filter);
    CHECK((unfiltered_state(tau, filter).data() - t.data()).cwiseAbs().maxCoeff() < 1e-10);
    // Filtering shrinks the second moments.
    CHECK(covariance_from_fock(tau).gamma(0, 0) < covariance_from_fock(t).gamma(0, 0));
}

TEST_CASE("building block fixed points") {
    const int d = 12;
    const GaussianFilter filter({1.0, 1.0});
    const auto vac = vacuum(2, d);
    for (double refl : {0.1, 0.5, 0.8}) {
        const auto out = building_block(vac, vac, refl, filter);
        CHECK((out.state.data() - vac.data()).cwiseAbs().maxCoeff() < 1e-12);
    }

    const auto t = fock_tmsv(0.3, d).state;
    const auto out = building_block(t, t, 0.5, filter);
    CHECK((out.state.data() - t.data()).cwiseAbs().maxCoeff() < 1e-6);

    const auto other = twirl(fock_tmsv(0.2, d).state);
    const auto passthrough = building_block(t, other, 0.0, filter);
    CHECK((passthrough.state.data() - t.data()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conjugation lemma") {
    for (double refl : {0.25, 0.5, 0.75}) {
        double prev = 1e300;
        for (int d : {10, 15, 20, 25}) {
            const double dev = conjugation_deviation(refl, 1.0, d);
            CHECK(dev <= conjugation_leakage_bound(1.0, d));
            CHECK(dev < prev);
            prev = dev;
        }
    }
    CHECK(conjugation_deviation(0.0, 1.0, 10) < 1e-15);
}

TEST_CASE("attenuation matches the covariance map") {
    const auto t = fock_tmsv(0.3, 16).state;
    const double transm = std::exp(-1.0), n_th = 0.01;
    auto lossy = attenuate(t, 0, transm, n_th).state;
    lossy = attenuate(lossy, 1, transm, n_th).state;
    const Mat expected = transm * embed_symmetric(make_two_mode_squeezed(0.3)).covariance() +
                         (1.0 + 2.0 * n_th) * (1.0 - transm) * Mat::Identity(4, 4);
    CHECK((covariance_from_fock(lossy).gamma - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("epsilon is invariant under photon replacement") {
    const auto t = fock_tmsv(0.3, 20).state;
    const double transm = std::exp(-1.0);
    auto lossy = attenuate(attenuate(t, 0, transm, 1e-8).state, 1, transm, 1e-8).state;
    const auto before = epsilon_fock(lossy);
    CHECK_FALSE(before.singular);
    for (double eta : {0.5, 0.8}) {
        const auto after = epsilon_fock(photon_replacement(lossy, eta).state);
        CHECK(after.value == doctest::Approx(before.value).epsilon(1e-8));
    }
    CHECK(epsilon_fock(vacuum(2, 8)).singular);
    // Pure TMSV: epsilon vanishes.
    CHECK(std::abs(epsilon_fock(t).value) < 1e-12);
}
