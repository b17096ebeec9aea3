#include "cvdist/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cvdist/verify.hpp"

namespace cvdist {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void GaussifyScenario::validate() const {
    require(std::isfinite(r) && r >= 0.0, "parameter r: squeezing must be finite and >= 0");
    require(eta > 0.0 && eta < 1.0, "parameter eta: transmittivity amplitude must lie in (0, 1)");
    require(std::isfinite(beta) && beta > 0.0, "parameter beta: filter strength must be > 0");
    require(input == "photon_replaced" || input == "gaussian",
            "parameter input: expected photon_replaced or gaussian, got '" + input + "'");
    require(!copies.empty(), "parameter n_list: need at least one N");
    for (long long n : copies) require(n >= 1 && n <= (1LL << 40), "parameter n_list: N must lie in [1, 2^40]");
    require(std::is_sorted(copies.begin(), copies.end()), "parameter n_list: N must be ascending");
    require(grid.r0 > 0.0 && grid.radial_step > 0.0 && grid.radial_step <= grid.r0,
            "parameter r0/radial_step: need 0 < radial_step <= r0");
    require(grid.directions >= 1, "parameter directions: need at least one direction");
    require(k_max >= 1 && k_max <= 8, "parameter k_max: must lie in [1, 8]");
    require(cutoff >= 4 && cutoff <= 40, "parameter cutoff: must lie in [4, 40]");
    require(fock_copies >= 1 && fock_copies <= 64, "parameter fock_n_max: must lie in [1, 64]");
    require(reflectivity >= 0.0 && reflectivity <= 1.0, "parameter R: reflectivity must lie in [0, 1]");
}

std::vector<std::pair<int, int>> default_element_pairs(int cutoff) {
    const int i00 = fock::basis_index({0, 0}, cutoff);
    const int i11 = fock::basis_index({1, 1}, cutoff);
    const int i10 = fock::basis_index({1, 0}, cutoff);
    return {{i00, i00}, {i11, i00}, {i10, i10}, {i10, i00}};
}

GaussifyReport run_gaussify(const GaussifyScenario& sc) {
    sc.validate();
    GaussifyReport rep;
    rep.scenario = sc;

    const GaussianFilter filter({sc.beta, sc.beta});
    const auto tmsv = fock::fock_tmsv(sc.r, sc.cutoff);
    rep.max_leakage = tmsv.truncation_leakage;

    fock::FockDensityMatrix rho1 = tmsv.state;
    if (sc.input == "photon_replaced") {
        const auto replaced = fock::photon_replacement(tmsv.state, sc.eta);
        rho1 = replaced.state;
        rep.max_leakage = std::max(rep.max_leakage, replaced.leakage);
    }
    if (sc.twirl) rho1 = fock::twirl(rho1);

    const auto tau1 = fock::filtered_object(rho1, filter);
    const CharFunHandle chi1 = charfun_from_fock(tau1);
    rep.gamma_tau1 = chi1.second_moments();
    const CharFunHandle limit = gaussian_limit(rep.gamma_tau1);

    double prev = std::numeric_limits<double>::infinity();
    const double scale = std::max(1.0, rep.gamma_tau1.cwiseAbs().maxCoeff());
    for (long long n : sc.copies) {
        const CharFunHandle chi_n = central_limit_charfun(chi1, n);
        const double dev = sup_deviation(chi_n, limit, sc.grid);
        rep.deviations.push_back({n, dev});
        if (!(dev < prev)) rep.deviations_decreasing = false;
        prev = dev;
        // The pumping schedule reaches the same covariance through N - 1 weighted averages.
        if (n <= 4096) {
            const double drift =
                (pumping_charfun(chi1, static_cast<int>(n)).second_moments() - rep.gamma_tau1).cwiseAbs().maxCoeff();
            if (drift > 1e-12 * scale) rep.second_moments_exact = false;
        }
        if ((chi_n.second_moments() - rep.gamma_tau1).cwiseAbs().maxCoeff() != 0.0) rep.second_moments_exact = false;
    }

    rep.moments = moment_convergence_report(tau1, sc.k_max, sc.copies);

    // Single building-block round: Fock partial trace against the product rule.
    {
        const auto bb = fock::building_block(rho1, rho1, sc.reflectivity, filter);
        rep.max_leakage = std::max(rep.max_leakage, bb.leakage);
        const auto tau_bb = fock::filtered_object(bb.state, filter);
        rep.oracle_round_deviation = sup_deviation(charfun_from_fock(tau_bb),
                                                   blockwise_charfun(chi1, chi1, sc.reflectivity), GridSpec{});
    }

    rep.limit = limit_state_cov(rep.gamma_tau1, filter);
    rep.limit_integrability = inverse_filter_integrability(rep.gamma_tau1, filter);

    std::vector<long long> fock_ns;
    for (long long n : sc.copies)
        if (n <= sc.fock_copies) fock_ns.push_back(n);
    if (!fock_ns.empty()) {
        const auto seq = fock_pumping_sequence(rho1, filter, static_cast<int>(fock_ns.back()));
        for (const auto& s : seq) rep.max_leakage = std::max(rep.max_leakage, s.leakage);
        rep.matrix_elements = matrix_element_convergence(seq, filter, default_element_pairs(sc.cutoff), fock_ns);
        if (!rep.limit.physical) {
            rep.fidelity_status = "limit_unphysical";
        } else {
            try {
                const auto rho_inf = fock::fock_gaussian_state(rep.limit.gamma, sc.cutoff);
                rep.max_leakage = std::max(rep.max_leakage, rho_inf.truncation_leakage);
                for (long long n : fock_ns) {
                    const auto& s = seq[static_cast<std::size_t>(n - 1)];
                    rep.fidelities.push_back({n, fock::fidelity(s.state, rho_inf.state), s.weight});
                }
                rep.fidelity_status = "ok";
            } catch (const fock::LeakageError&) {
                rep.fidelity_status = "limit_exceeds_cutoff";
            }
        }
    }
    return rep;
}

}  // namespace cvdist
