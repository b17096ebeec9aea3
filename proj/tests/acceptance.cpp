// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances are pinned here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cvdist/channels.hpp"
#include "cvdist/fock.hpp"
#include "cvdist/protocols.hpp"
#include "cvdist/repeater.hpp"
#include "cvdist/verify.hpp"

using namespace cvdist;

namespace {

namespace tol {
constexpr double kAsymptoteKm = 1.0;
constexpr double kDirectAsymptoteKm = 780.0;
constexpr double kVariantGap = 0.15;
constexpr double kSearchSlackKm = 0.1;  // bisection tolerance of max_distance
constexpr double kPumpingCharfun = 1e-12;
constexpr double kPumpingFidelity = 1e-4;
constexpr double kCltAtSixteen = 1e-2;
constexpr double kWick = 1e-8;
constexpr double kOracle = 1e-6;
constexpr double kSchur = 1e-6;
constexpr double kCompactZero = 1e-10;
constexpr double kBoundary = 1e-9;
}  // namespace tol

constexpr int kFockCutoff = 20;

struct Outcome {
    bool pass;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string km(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f km", v);
    return buf;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

std::vector<double> r_grid() {
    std::vector<double> out;
    for (int i = 1; i <= 20; ++i) out.push_back(0.1 * i);
    return out;
}

// Shared repeater scan for criteria 2 and 3: r in 0.1..2.0, m in {1,..,16}, both variants.
const std::vector<repeater::ScanRow>& repeater_rows() {
    static const std::vector<repeater::ScanRow> rows = [] {
        repeater::ScanSpec spec;
        spec.r_grid = r_grid();
        spec.k_set = {0, 1, 2, 3, 4};
        spec.variants = {repeater::Variant::i, repeater::Variant::ii};
        return repeater::scan(spec);
    }();
    return rows;
}

const verify::PhotonReplacedInput& photon_replaced() {
    static const auto input = verify::photon_replaced_tmsv(0.4, 0.5, 1.0, kFockCutoff);
    return input;
}

Outcome direct_asymptote() {
    // direct_lmax saturates once exp(-2r) is negligible against 2 n_th.
    double prev = 0.0;
    bool increasing = true;
    for (double r : {2.0, 5.0, 10.0, 20.0}) {
        const double v = repeater::direct_lmax(r).km;
        if (!(v >= prev)) increasing = false;
        prev = v;
    }
    const double far = repeater::direct_lmax(40.0).km;
    const bool ok = increasing && std::abs(far - tol::kDirectAsymptoteKm) <= tol::kAsymptoteKm;
    return {ok, "direct_lmax(r=40) = " + km(far) + ", target 780 +- 1 km"};
}

Outcome repeater_benefit() {
    const auto& rows = repeater_rows();
    double best_direct = 0.0, best_k1 = 0.0, best_k1_r = 0.0;
    std::map<int, double> best_by_m;
    for (const auto& row : rows) {
        if (row.variant == "direct") best_direct = std::max(best_direct, row.L_max_km);
        if (row.variant != "i") continue;
        if (row.m == 2 && row.L_max_km > best_k1) {
            best_k1 = row.L_max_km;
            best_k1_r = row.r;
        }
        best_by_m[row.m] = std::max(best_by_m[row.m], row.L_max_km);
    }
    bool monotone = true;
    std::ostringstream detail;
    detail << "k=1 best " << km(best_k1) << " at r=" << best_k1_r << " vs direct best " << km(best_direct)
           << "; optimal L_max over m=1,2,4,8:";
    double prev = 0.0;
    for (int m : {1, 2, 4, 8}) {
        const double v = best_by_m[m];
        detail << " " << km(v);
        if (v < prev - tol::kSearchSlackKm) monotone = false;
        prev = v;
    }
    return {best_k1 > best_direct && monotone, detail.str()};
}

Outcome variant_ordering() {
    const auto& rows = repeater_rows();
    std::map<std::pair<double, int>, double> var_i, var_ii;
    for (const auto& row : rows) {
        if (row.variant == "i") var_i[{row.r, row.m}] = row.L_max_km;
        if (row.variant == "ii") var_ii[{row.r, row.m}] = row.L_max_km;
    }
    int order_violations = 0, gap_violations = 0;
    double worst_gap = 0.0;
    std::pair<double, int> worst_at{0.0, 0};
    std::map<int, double> worst_gap_by_m;
    for (const auto& [key, li] : var_i) {
        const double lii = var_ii.at(key);
        if (lii > li + tol::kSearchSlackKm) ++order_violations;
        const double gap = li > 0.0 ? (li - lii) / li : 0.0;
        worst_gap_by_m[key.second] = std::max(worst_gap_by_m[key.second], gap);
        if (gap >= tol::kVariantGap) ++gap_violations;
        if (gap > worst_gap) {
            worst_gap = gap;
            worst_at = key;
        }
    }
    std::ostringstream detail;
    detail << var_i.size() << " points, ii > i at " << order_violations << ", gap >= 15% at " << gap_violations
           << "; worst gap " << 100.0 * worst_gap << "% at r=" << worst_at.first << ", m=" << worst_at.second
           << "; worst gap by m:";
    for (const auto& [m, g] : worst_gap_by_m) detail << " m" << m << "=" << std::lround(1000.0 * g) / 10.0 << "%";
    // Diagnostic only: the gap between the per-m optima, where the repeater is worth running.
    std::map<int, double> opt_i, opt_ii;
    for (const auto& [key, li] : var_i) {
        opt_i[key.second] = std::max(opt_i[key.second], li);
        opt_ii[key.second] = std::max(opt_ii[key.second], var_ii.at(key));
    }
    detail << "; gap of optima:";
    for (const auto& [m, li] : opt_i)
        detail << " m" << m << "=" << std::lround(1000.0 * (li - opt_ii[m]) / li) / 10.0 << "%";
    return {order_violations == 0 && gap_violations == 0, detail.str()};
}

CharFunHandle superposition_charfun(double c) {
    // (|0,0> + c|1,1>) / sqrt(1 + c^2) from its Fock matrix.
    const int d = 4;
    CVec psi = CVec::Zero(d * d);
    psi(fock::basis_index({0, 0}, d)) = 1.0;
    psi(fock::basis_index({1, 1}, d)) = c;
    return charfun_from_fock(fock::FockDensityMatrix::from_pure(2, d, psi));
}

Outcome pumping_equals_recursive() {
    const std::vector<std::pair<std::string, CharFunHandle>> inputs{
        {"|11>", verify::fock_one_charfun(2)},
        {"photon/vacuum mixture", verify::photon_vacuum_mixture_charfun(2, 0.3)},
        {"|00>+0.5|11>", superposition_charfun(0.5)}};
    double worst = 0.0;
    for (const auto& [name, chi1] : inputs)
        for (int depth = 1; depth <= 5; ++depth)
            worst = std::max(worst, sup_deviation(pumping_charfun(chi1, 1 << depth), recursive_charfun(chi1, depth)));

    const auto& in = photon_replaced();
    const auto seq = fock_pumping_sequence(in.rho1, in.filter, 4);
    const auto rec = fock_recursive(in.rho1, in.filter, 2);
    const double fid = fock::fidelity(seq[3].state, rec.state);
    const bool ok = worst <= tol::kPumpingCharfun && fid >= 1.0 - tol::kPumpingFidelity;
    return {ok, "N=2..32, 3 inputs: max |chi_pump - chi_rec| = " + sci(worst) + "; Fock N=4 fidelity at cutoff 20 = 1 - " +
                    sci(1.0 - fid)};
}

Outcome clt_convergence() {
    const auto& in = photon_replaced();
    const CharFunHandle chi1 = charfun_from_fock(in.tau1);
    const Mat gamma = chi1.second_moments();
    const CharFunHandle target = gaussian_limit(gamma);
    const GridSpec grid{2.0, 0.25, 16};
    bool decreasing = true, exact = true;
    double prev = std::numeric_limits<double>::infinity(), last = 0.0;
    std::ostringstream detail;
    detail << "sup deviation (r0=2):";
    for (long long n : {1LL, 2LL, 4LL, 8LL, 16LL}) {
        const CharFunHandle chin = central_limit_charfun(chi1, n);
        const double dev = sup_deviation(chin, target, grid);
        if (!(dev < prev)) decreasing = false;
        if (max_abs(chin.second_moments() - gamma) != 0.0) exact = false;
        if (max_abs(pumping_charfun(chi1, static_cast<int>(n)).second_moments() - gamma) > 1e-12 * max_abs(gamma))
            exact = false;
        detail << " " << sci(dev);
        prev = last = dev;
    }
    detail << (exact ? "; second moments exact" : "; second moments drifted");
    return {decreasing && exact && last < tol::kCltAtSixteen, detail.str()};
}

Outcome moments_and_wick() {
    const int d = 30;
    std::vector<fock::FockDensityMatrix> gaussians{fock::fock_tmsv(0.3, d).state};
    {
        Mat gamma = embed_symmetric({1.3, 0.6}).covariance();
        gamma(0, 1) = gamma(1, 0) = 0.1;
        gaussians.push_back(fock::fock_gaussian_state(gamma, d).state);
    }
    std::vector<Vec> dirs(2, Vec::Zero(4));
    dirs[0] << 1, 0, 0, 0;
    dirs[1] << 0.3, -0.7, 0.5, 0.2;
    double worst = 0.0;
    for (const auto& rho : gaussians)
        for (const Vec& dir : dirs) {
            const double nu = fock::moment(rho, {{dir, dir}}).real();
            for (int k : {2, 4, 6})
                worst = std::max(worst, std::abs(fock::moment(rho, {std::vector<Vec>(k, dir)}).real() - wick_moment(nu, k)));
        }

    const auto rep = moment_convergence_report(photon_replaced().tau1, 4, {1, 4, 16});
    bool shrinking = true;
    double first = 0.0, final = 0.0;
    for (std::size_t dir = 0; dir < rep.directions.size(); ++dir) {
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& row : rep.rows)
            if (row.direction == static_cast<int>(dir) && row.k == 4) {
                if (!(row.deviation < prev)) shrinking = false;
                if (dir == 0 && row.copies == 1) first = row.deviation;
                if (dir == 0 && row.copies == 16) final = row.deviation;
                prev = row.deviation;
            }
    }
    return {worst <= tol::kWick && shrinking,
            "Wick k=2,4,6 max error " + sci(worst) + "; k=4 deviation N=1 -> 16: " + sci(first) + " -> " + sci(final) +
                (shrinking ? " (monotone in every direction)" : " (not monotone)")};
}

Outcome oracle_agreement() {
    const auto& in = photon_replaced();
    const CharFunHandle chi1 = charfun_from_fock(in.tau1);
    double round = 0.0;
    for (double refl : {0.5, 0.3}) {
        const auto bb = fock::building_block(in.rho1, in.rho1, refl, in.filter);
        const auto tau = fock::filtered_object(bb.state, in.filter);
        round = std::max(round, sup_deviation(charfun_from_fock(tau), blockwise_charfun(chi1, chi1, refl), GridSpec{}));
    }
    const GaussianFilter filter({1.0, 1.0});
    const auto tmsv = fock::fock_tmsv(0.5, kFockCutoff).state;
    const Mat fock_cov = fock::covariance_from_fock(fock::filtered_object(tmsv, filter)).gamma;
    const Mat schur = apply_gaussian_channel(filter_channel_cj(filter), embed_symmetric(make_two_mode_squeezed(0.5)).covariance());
    const double schur_err = max_abs(fock_cov - schur);
    return {round <= tol::kOracle && schur_err <= tol::kSchur,
            "building block vs product rule (r0=3, R=0.5,0.3): " + sci(round) + "; Schur vs Fock covariance: " +
                sci(schur_err)};
}

Outcome conjugation_lemma() {
    const double beta = 1.0;
    bool ok = true;
    std::ostringstream detail;
    for (double refl : {0.25, 0.5, 0.75}) {
        double prev = std::numeric_limits<double>::infinity();
        for (int d : {15, 20, 25}) {
            const double dev = fock::conjugation_deviation(refl, beta, d);
            if (!(dev < prev)) ok = false;
            if (d == 25 && !(dev <= fock::conjugation_leakage_bound(beta, d))) ok = false;
            prev = dev;
        }
    }
    detail << "R=0.5: deviation at cutoff 15/20/25 = " << sci(fock::conjugation_deviation(0.5, beta, 15)) << " / "
           << sci(fock::conjugation_deviation(0.5, beta, 20)) << " / " << sci(fock::conjugation_deviation(0.5, beta, 25))
           << ", bound at 25 = " << sci(fock::conjugation_leakage_bound(beta, 25));
    return {ok, detail.str()};
}

Outcome compact_zeros() {
    double worst = 0.0;
    bool fixed = true;
    for (int modes : {1, 2}) {
        const CharFunHandle chi1 = verify::fock_one_charfun(modes);
        Vec r0 = Vec::Zero(2 * modes);
        r0(0) = std::numbers::sqrt2;
        if (std::abs(chi1(r0)) > 1e-15) return {false, "test input has no zero at r0"};
        CharFunHandle chi = chi1;
        for (int n = 2; n <= 16; ++n) {
            chi = compact_step(chi, chi1);
            worst = std::max(worst, std::abs(chi(std::numbers::sqrt2 * r0)));
            if (max_abs(chi.second_moments() - chi1.second_moments()) != 0.0) fixed = false;
        }
    }
    return {worst < tol::kCompactZero && fixed,
            "|11> and |1>: max |chi_N(sqrt2 r0)| over N=2..16 = " + sci(worst) + (fixed ? ", Gamma fixed" : ", Gamma drifted")};
}

Outcome boundary_consistency() {
    double worst = 0.0;
    for (double r : {0.25, 0.5, 1.0, 2.0}) {
        const double lmax = repeater::direct_lmax(r).km;
        worst = std::max(worst, std::abs(duan_delta(repeater::transmit_span(r, lmax)) - 1.0));
    }
    return {worst <= tol::kBoundary, "max |Delta - 1| at direct_lmax for r=0.25,0.5,1,2: " + sci(worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"direct_asymptote", direct_asymptote},
        {"repeater_benefit", repeater_benefit},
        {"variant_ordering", variant_ordering},
        {"pumping_equals_recursive", pumping_equals_recursive},
        {"clt_convergence", clt_convergence},
        {"moment_convergence_wick", moments_and_wick},
        {"oracle_agreement", oracle_agreement},
        {"conjugation_lemma", conjugation_lemma},
        {"compact_zero_persistence", compact_zeros},
        {"boundary_consistency", boundary_consistency},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!out.pass) ++failed;
        std::printf("%s %2zu %s: %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
