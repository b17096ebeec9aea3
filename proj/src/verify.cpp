#include "cvdist/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cvdist/channels.hpp"

namespace cvdist::verify {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

CheckResult make(std::string name, bool passed, std::string detail) {
    return {std::move(name), passed, std::move(detail)};
}

// Runs a check body, turning library errors into a failed result.
template <class F>
CheckResult guarded(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        return make(name, false, std::string("error: ") + e.what());
    }
}

// (|0,0> + c|1,1>) / sqrt(1 + c^2), with c real.
CharFunHandle two_mode_superposition_charfun(double c) {
    const double norm = 1.0 + c * c;
    const double n = c * c / norm;
    const SymmetricTwoMode cs{1.0 + 2.0 * n, 2.0 * c / norm};
    const Mat gamma = embed_symmetric(cs).covariance();
    return CharFunHandle(2, gamma, [c, norm](const Vec& r) {
        const Complex a1 = fock::weyl_alpha(r(0), r(1));
        const Complex a2 = fock::weyl_alpha(r(2), r(3));
        const double g = std::exp(-0.5 * (std::norm(a1) + std::norm(a2)));
        const Complex d00 = 1.0, d11 = std::conj(a1) * std::conj(a2), d_11 = a1 * a2;
        const Complex e11 = (1.0 - std::norm(a1)) * (1.0 - std::norm(a2));
        return g * (d00 + c * d11 + c * d_11 + c * c * e11) / norm;
    });
}

}  // namespace

Complex single_photon_charfun(double x, double p) {
    const double q = x * x + p * p;
    return {(1.0 - 0.5 * q) * std::exp(-0.25 * q), 0.0};
}

CharFunHandle fock_one_charfun(int modes) {
    return CharFunHandle(modes, 3.0 * Mat::Identity(2 * modes, 2 * modes), [modes](const Vec& r) {
        Complex out = 1.0;
        for (int j = 0; j < modes; ++j) out *= single_photon_charfun(r(2 * j), r(2 * j + 1));
        return out;
    });
}

CharFunHandle photon_vacuum_mixture_charfun(int modes, double p) {
    const CharFunHandle one = fock_one_charfun(modes);
    const Mat gamma = (1.0 + 2.0 * p) * Mat::Identity(2 * modes, 2 * modes);
    return CharFunHandle(modes, gamma, [one, p](const Vec& r) {
        return p * one(r) + (1.0 - p) * std::exp(-0.25 * r.squaredNorm());
    });
}

PhotonReplacedInput photon_replaced_tmsv(double r, double eta, double beta, int cutoff) {
    const auto tmsv = fock::fock_tmsv(r, cutoff);
    const auto replaced = fock::photon_replacement(tmsv.state, eta);
    GaussianFilter filter({beta, beta});
    auto tau = fock::filtered_object(replaced.state, filter);
    return {replaced.state, std::move(tau), std::move(filter)};
}

// ---------------------------------------------------------------------------

CheckResult check_conjugation_lemma(int cutoff) {
    const std::string name = "conjugation_lemma";
    return guarded(name, [&] {
        const double beta = 1.0;
        bool ok = true;
        std::ostringstream detail;
        std::vector<int> cutoffs;
        if (cutoff - 5 >= 3) cutoffs.push_back(cutoff - 5);
        cutoffs.push_back(cutoff);
        cutoffs.push_back(cutoff + 5);
        for (double refl : {0.25, 0.5, 0.75}) {
            double prev = std::numeric_limits<double>::infinity();
            for (int d : cutoffs) {
                const double dev = fock::conjugation_deviation(refl, beta, d);
                const double bound = fock::conjugation_leakage_bound(beta, d);
                if (!(dev <= bound) || !(dev < prev)) ok = false;
                prev = dev;
            }
        }
        detail << "R in {0.25,0.5,0.75}, cutoff " << cutoff << ": deviation "
               << fmt(fock::conjugation_deviation(0.5, beta, cutoff)) << " <= bound "
               << fmt(fock::conjugation_leakage_bound(beta, cutoff)) << ", decreasing in cutoff";
        return make(name, ok, detail.str());
    });
}

CheckResult check_wick(int cutoff) {
    const std::string name = "wick_closure";
    return guarded(name, [&] {
        const auto tmsv = fock::fock_tmsv(0.3, cutoff).state;
        const double leak = fock::leakage_estimate(tmsv);
        // The dropped tail sits near n = cutoff, where <n|x^6|n> grows like 2.5 n^3.
        const double tol = std::max(1e-8, 4.0 * std::pow(cutoff + 1.0, 3) * leak);
        std::vector<Vec> dirs;
        Vec v = Vec::Zero(4);
        v << 1, 0, 0, 0;
        dirs.push_back(v);
        v << 0.3, -0.7, 0.5, 0.2;
        dirs.push_back(v);
        double worst = 0.0;
        for (const Vec& dir : dirs) {
            const double nu = fock::moment(tmsv, {{dir, dir}}).real();
            for (int k : {2, 4, 6}) {
                const double mk = fock::moment(tmsv, {std::vector<Vec>(k, dir)}).real();
                worst = std::max(worst, std::abs(mk - wick_moment(nu, k)));
            }
        }
        return make(name, worst <= tol, "max |tr(H^k rho) - (k-1)!! nu^(k/2)| = " + fmt(worst) + " (tol " + fmt(tol) + ")");
    });
}

CheckResult check_pumping_equals_recursive() {
    const std::string name = "pumping_equals_recursive";
    return guarded(name, [&] {
        const std::vector<CharFunHandle> inputs{fock_one_charfun(2), photon_vacuum_mixture_charfun(2, 0.3),
                                                two_mode_superposition_charfun(0.5)};
        double worst = 0.0;
        for (const auto& chi1 : inputs)
            for (int n = 1; n <= 5; ++n) {
                const auto pumped = pumping_charfun(chi1, 1 << n);
                const auto rec = recursive_charfun(chi1, n);
                worst = std::max(worst, sup_deviation(pumped, rec));
                if (pumped.second_moments() != chi1.second_moments()) worst = std::max(worst, 1.0);
            }
        return make(name, worst <= 1e-12, "N in {2..32}, 3 inputs: max deviation " + fmt(worst));
    });
}

CheckResult check_zero_persistence() {
    const std::string name = "compact_zero_persistence";
    return guarded(name, [&] {
        const CharFunHandle chi1 = fock_one_charfun(1);
        Vec r0(2);
        r0 << std::numbers::sqrt2, 0.0;
        double worst = std::abs(chi1(r0));
        bool gamma_fixed = true;
        CharFunHandle chi = chi1;
        for (int n = 2; n <= 16; ++n) {
            chi = compact_step(chi, chi1);
            worst = std::max(worst, std::abs(chi(std::numbers::sqrt2 * r0)));
            if (chi.second_moments() != chi1.second_moments()) gamma_fixed = false;
        }
        return make(name, worst < 1e-10 && gamma_fixed,
                    "max |chi_N(sqrt2 r0)| for N <= 16 = " + fmt(worst) +
                        (gamma_fixed ? ", Gamma fixed" : ", Gamma drifted"));
    });
}

CheckResult check_schur_vs_fock(int cutoff) {
    const std::string name = "schur_vs_fock";
    return guarded(name, [&] {
        const double r = 0.3;
        const GaussianFilter filter({1.0, 1.0});
        const auto tmsv = fock::fock_tmsv(r, cutoff);
        const double tol = std::max(1e-6, 1e3 * tmsv.truncation_leakage);
        const Mat fock_cov = fock::covariance_from_fock(fock::filtered_object(tmsv.state, filter)).gamma;
        const Mat schur =
            apply_gaussian_channel(filter_channel_cj(filter), embed_symmetric(make_two_mode_squeezed(r)).covariance());
        const double err = (fock_cov - schur).cwiseAbs().maxCoeff();
        return make(name, err <= tol,
                    "thermal filter on TMSV r=0.3: max covariance error " + fmt(err) + " (tol " + fmt(tol) + ")");
    });
}

CheckResult check_boundary_consistency() {
    const std::string name = "boundary_consistency";
    return guarded(name, [&] {
        double worst = 0.0;
        for (double r : {0.25, 0.5, 1.0, 2.0}) {
            const double lmax = repeater::direct_lmax(r).km;
            worst = std::max(worst, std::abs(duan_delta(repeater::transmit_span(r, lmax)) - 1.0));
        }
        return make(name, worst <= 1e-9, "max |Delta(l_max) - 1| = " + fmt(worst));
    });
}

CheckResult check_swap_map(const std::function<repeater::LinkState(const repeater::LinkState&)>& swap_fn) {
    const std::string name = "swap_map";
    return guarded(name, [&] {
        const auto g = swap_fn({2.0, 1.0});
        bool ok = std::abs(g.c - 1.75) < 1e-15 && std::abs(g.s - 0.25) < 1e-15;
        std::string why = ok ? "" : " g(2,1) wrong;";
        int violations = 0;
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 50; ++j) {
                const double c = 1.0 + 10.0 * i / 49.0;
                const double s = std::sqrt(std::max(0.0, c * c - 1.0)) * j / 49.0;
                const auto out = swap_fn({c, s});
                if (duan_delta(out) < duan_delta({c, s}) - 1e-12 || !out.physical() || out.s < 0) ++violations;
            }
        if (violations) {
            ok = false;
            why += " " + std::to_string(violations) + " grid violations;";
        }
        return make(name, ok, ok ? "g(2,1) = (1.75,0.25); Delta never decreases on 50x50 grid" : "failed:" + why);
    });
}

CheckResult check_distilled_physicality() {
    const std::string name = "distilled_physicality";
    return guarded(name, [&] {
        bool ok = true;
        for (double eps : {0.0, 0.1, 0.5, 2.0}) {
            const double top = 1.0 / (1.0 + eps);
            for (int i = 1; i <= 100; ++i) {
                const auto s = repeater::distilled_state(eps, top * i / 101.0);
                if (!s.physical(1e-9 * s.c * s.c)) ok = false;
            }
        }
        const auto pure = repeater::distilled_state(0.0, 0.5);
        ok = ok && std::abs(pure.c - 5.0 / 3.0) < 1e-14 && std::abs(pure.s - 4.0 / 3.0) < 1e-14;
        return make(name, ok, "100 Lambda samples for eps in {0,0.1,0.5,2}; eps=0, Lambda=0.5 -> (5/3, 4/3)");
    });
}

CheckResult check_loss_semigroup() {
    const std::string name = "loss_semigroup";
    return guarded(name, [&] {
        double worst = 0.0;
        const SymmetricTwoMode in = make_two_mode_squeezed(0.7);
        for (double l1 : {0.0, 3.0, 22.0, 150.0})
            for (double l2 : {1.0, 40.0, 300.0}) {
                const auto two = loss_thermal(l2, 22.0, 1e-8).after(loss_thermal(l1, 22.0, 1e-8)).apply(in);
                const auto one = loss_thermal(l1 + l2, 22.0, 1e-8).apply(in);
                worst = std::max({worst, std::abs(two.c - one.c), std::abs(two.s - one.s)});
            }
        return make(name, worst <= 1e-12, "max |l1 then l2 - (l1+l2)| = " + fmt(worst));
    });
}

CheckResult check_filter_round_trip() {
    const std::string name = "filter_round_trip";
    return guarded(name, [&] {
        const GaussianFilter filter({1.0, 1.0});
        const GaussianFilter doubled({2.0, 2.0});
        const Mat gamma = embed_symmetric(make_two_mode_squeezed(0.5)).covariance();
        const Mat tau = apply_gaussian_channel(filter_channel_cj(filter), gamma);
        const LimitState back = limit_state_cov(tau, filter);
        const double rt = (back.gamma - gamma).cwiseAbs().maxCoeff();
        const Mat twice = apply_gaussian_channel(filter_channel_cj(filter), tau);
        const Mat once = apply_gaussian_channel(filter_channel_cj(doubled), gamma);
        const double sg = (twice - once).cwiseAbs().maxCoeff();
        return make(name, rt <= 1e-8 && sg <= 1e-8 && back.physical,
                    "round trip " + fmt(rt) + ", semigroup " + fmt(sg));
    });
}

std::vector<CheckResult> run_all(const VerifyOptions& opts) {
    return {check_conjugation_lemma(opts.cutoff),
            check_wick(opts.cutoff),
            check_pumping_equals_recursive(),
            check_zero_persistence(),
            check_schur_vs_fock(opts.cutoff),
            check_boundary_consistency(),
            check_swap_map(opts.swap_fn),
            check_distilled_physicality(),
            check_loss_semigroup(),
            check_filter_round_trip()};
}

}  // namespace cvdist::verify
